#include "gearformer/model/transformer.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "gearformer/error.hpp"

namespace gearformer::model {

void Hyperparams::check() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::kBadRequest, "hyperparams: " + m); };
  if (d_model <= 0 || heads <= 0 || encoder_layers <= 0 || decoder_layers <= 0 || ffn_multiplier <= 0 ||
      context_length <= 1 || memory_slots <= 0) {
    bad("all sizes must be positive");
  }
  if (d_model % heads != 0) bad("heads must divide d_model");
}

template <typename T>
std::size_t ParamSet<T>::count() const {
  std::size_t n = 0;
  for (const auto& v : values) n += static_cast<std::size_t>(v.size());
  return n;
}

template <typename T>
std::vector<Matrix<T>> ParamSet<T>::zeros_like() const {
  std::vector<Matrix<T>> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(Matrix<T>::Zero(v.rows(), v.cols()));
  return out;
}

namespace detail {

struct LinearIdx {
  int w = -1;
  int b = -1;
};
struct NormIdx {
  int gain = -1;
  int bias = -1;
};
struct AttnIdx {
  LinearIdx q, k, v, o;
};
struct FfnIdx {
  LinearIdx up, down;
};
struct EncoderLayerIdx {
  NormIdx norm1;
  AttnIdx attn;
  NormIdx norm2;
  FfnIdx ffn;
};
struct DecoderLayerIdx {
  NormIdx norm1;
  AttnIdx self;
  NormIdx norm2;
  AttnIdx cross;
  NormIdx norm3;
  FfnIdx ffn;
};

struct TransformerLayout {
  LinearIdx input;
  int slot_embedding = -1;
  std::vector<EncoderLayerIdx> encoder;
  NormIdx encoder_norm;
  int token_embedding = -1;
  int position_embedding = -1;
  std::vector<DecoderLayerIdx> decoder;
  NormIdx decoder_norm;
  LinearIdx output;
};

}  // namespace detail

namespace {

using detail::AttnIdx;
using detail::FfnIdx;
using detail::LinearIdx;
using detail::NormIdx;

constexpr double kNormEps = 1e-5;

// Box-Muller over mt19937_64, so initialization is identical across standard
// library implementations.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

template <typename T>
class Builder {
 public:
  Builder(ParamSet<T>& params, std::uint64_t seed) : params_(params), init_(seed) {}

  int normal(const std::string& name, int rows, int cols, double std) {
    Matrix<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(init_.normal() * std);
    return push(name, std::move(m));
  }
  int constant(const std::string& name, int rows, int cols, double value) {
    return push(name, Matrix<T>::Constant(rows, cols, static_cast<T>(value)));
  }
  LinearIdx linear(const std::string& name, int in, int out, double std) {
    return {normal(name + ".w", in, out, std), constant(name + ".b", 1, out, 0.0)};
  }
  NormIdx norm(const std::string& name, int dim) {
    return {constant(name + ".gain", 1, dim, 1.0), constant(name + ".bias", 1, dim, 0.0)};
  }
  AttnIdx attention(const std::string& name, int d, double out_std) {
    return {linear(name + ".q", d, d, 0.02), linear(name + ".k", d, d, 0.02), linear(name + ".v", d, d, 0.02),
            linear(name + ".o", d, d, out_std)};
  }
  FfnIdx ffn(const std::string& name, int d, int hidden, double out_std) {
    return {linear(name + ".up", d, hidden, 0.02), linear(name + ".down", hidden, d, out_std)};
  }

 private:
  int push(const std::string& name, Matrix<T> m) {
    params_.names.push_back(name);
    params_.values.push_back(std::move(m));
    return static_cast<int>(params_.values.size()) - 1;
  }

  ParamSet<T>& params_;
  Initializer init_;
};

// Contiguous row ranges, one per sequence in the batch.
struct Segments {
  std::vector<int> offset;
  std::vector<int> length;
};

template <typename T>
using ColVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct NormCache {
  Matrix<T> xhat;
  ColVector<T> rstd;
};

template <typename T>
struct AttnCache {
  Matrix<T> q_in, kv_in, q, k, v, concat;
  std::vector<Matrix<T>> probs;
};

template <typename T>
struct FfnCache {
  Matrix<T> in, pre;
};

template <typename T>
struct EncoderLayerCache {
  NormCache<T> norm1;
  AttnCache<T> attn;
  NormCache<T> norm2;
  FfnCache<T> ffn;
};

template <typename T>
struct DecoderLayerCache {
  NormCache<T> norm1;
  AttnCache<T> self;
  NormCache<T> norm2;
  AttnCache<T> cross;
  NormCache<T> norm3;
  FfnCache<T> ffn;
};

template <typename T>
struct Workspace {
  Segments dec, mem;
  Matrix<T> features;
  std::vector<int> tokens, positions;
  std::vector<EncoderLayerCache<T>> encoder;
  NormCache<T> encoder_norm;
  Matrix<T> memory;
  std::vector<DecoderLayerCache<T>> decoder;
  NormCache<T> decoder_norm;
  Matrix<T> decoder_out;
  Matrix<T> logits;
};

template <typename T>
Matrix<T> linear(const ParamSet<T>& p, LinearIdx idx, const Matrix<T>& x) {
  Matrix<T> y(x.rows(), p.values[idx.w].cols());
  y.noalias() = x * p.values[idx.w];
  y.rowwise() += p.values[idx.b].row(0);
  return y;
}

template <typename T>
Matrix<T> linear_backward(const ParamSet<T>& p, std::vector<Matrix<T>>& g, LinearIdx idx, const Matrix<T>& x,
                          const Matrix<T>& dy) {
  g[idx.w].noalias() += x.transpose() * dy;
  g[idx.b] += dy.colwise().sum();
  Matrix<T> dx(dy.rows(), p.values[idx.w].rows());
  dx.noalias() = dy * p.values[idx.w].transpose();
  return dx;
}

template <typename T>
Matrix<T> layer_norm(const ParamSet<T>& p, NormIdx idx, const Matrix<T>& x, NormCache<T>* cache) {
  const ColVector<T> mean = x.rowwise().mean();
  Matrix<T> xhat = x.colwise() - mean;
  const ColVector<T> var = xhat.array().square().rowwise().mean().matrix();
  const ColVector<T> rstd = (var.array() + static_cast<T>(kNormEps)).rsqrt().matrix();
  xhat = xhat.array().colwise() * rstd.array();
  Matrix<T> y = (xhat.array().rowwise() * p.values[idx.gain].row(0).array()).rowwise() +
                p.values[idx.bias].row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = rstd;
  }
  return y;
}

template <typename T>
Matrix<T> layer_norm_backward(const ParamSet<T>& p, std::vector<Matrix<T>>& g, NormIdx idx,
                              const NormCache<T>& cache, const Matrix<T>& dy) {
  g[idx.gain] += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  g[idx.bias] += dy.colwise().sum();
  const Matrix<T> dxhat = dy.array().rowwise() * p.values[idx.gain].row(0).array();
  const ColVector<T> mean_d = dxhat.rowwise().mean();
  const ColVector<T> mean_dx = (dxhat.array() * cache.xhat.array()).rowwise().mean().matrix();
  Matrix<T> dx = (dxhat.colwise() - mean_d).array() - cache.xhat.array().colwise() * mean_dx.array();
  dx = dx.array().colwise() * cache.rstd.array();
  return dx;
}

template <typename T>
void softmax_rows(Matrix<T>& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const T mx = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - mx).exp();
    s.row(i) /= s.row(i).sum();
  }
}

template <typename T>
Matrix<T> attention(const ParamSet<T>& p, const AttnIdx& idx, const Matrix<T>& xq, const Matrix<T>& xkv,
                    const Segments& qs, const Segments& ks, bool causal, int heads, AttnCache<T>* cache) {
  Matrix<T> q = linear(p, idx.q, xq);
  Matrix<T> k = linear(p, idx.k, xkv);
  Matrix<T> v = linear(p, idx.v, xkv);
  const int d = static_cast<int>(q.cols());
  const int dh = d / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  Matrix<T> concat(q.rows(), d);
  if (cache) cache->probs.clear();
  for (std::size_t s = 0; s < qs.offset.size(); ++s) {
    const int qo = qs.offset[s], ql = qs.length[s], ko = ks.offset[s], kl = ks.length[s];
    for (int h = 0; h < heads; ++h) {
      Matrix<T> scores(ql, kl);
      scores.noalias() = q.block(qo, h * dh, ql, dh) * k.block(ko, h * dh, kl, dh).transpose();
      scores *= scale;
      if (causal) {
        for (int i = 0; i < ql; ++i) {
          for (int j = i + 1; j < kl; ++j) scores(i, j) = -std::numeric_limits<T>::infinity();
        }
      }
      softmax_rows(scores);
      concat.block(qo, h * dh, ql, dh).noalias() = scores * v.block(ko, h * dh, kl, dh);
      if (cache) cache->probs.push_back(std::move(scores));
    }
  }
  Matrix<T> out = linear(p, idx.o, concat);
  if (cache) {
    cache->q_in = xq;
    cache->kv_in = xkv;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->concat = std::move(concat);
  }
  return out;
}

// Returns gradients w.r.t. the query input and the key/value input.
template <typename T>
std::pair<Matrix<T>, Matrix<T>> attention_backward(const ParamSet<T>& p, std::vector<Matrix<T>>& g,
                                                   const AttnIdx& idx, const AttnCache<T>& c, const Matrix<T>& dout,
                                                   const Segments& qs, const Segments& ks, int heads) {
  const Matrix<T> dconcat = linear_backward(p, g, idx.o, c.concat, dout);
  const int d = static_cast<int>(c.q.cols());
  const int dh = d / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  Matrix<T> dq = Matrix<T>::Zero(c.q.rows(), d);
  Matrix<T> dk = Matrix<T>::Zero(c.k.rows(), d);
  Matrix<T> dv = Matrix<T>::Zero(c.v.rows(), d);
  std::size_t pi = 0;
  for (std::size_t s = 0; s < qs.offset.size(); ++s) {
    const int qo = qs.offset[s], ql = qs.length[s], ko = ks.offset[s], kl = ks.length[s];
    for (int h = 0; h < heads; ++h) {
      const Matrix<T>& a = c.probs[pi++];
      const auto dc = dconcat.block(qo, h * dh, ql, dh);
      Matrix<T> da(ql, kl);
      da.noalias() = dc * c.v.block(ko, h * dh, kl, dh).transpose();
      dv.block(ko, h * dh, kl, dh).noalias() += a.transpose() * dc;
      const ColVector<T> row_dot = (da.array() * a.array()).rowwise().sum().matrix();
      Matrix<T> ds = (da.colwise() - row_dot).cwiseProduct(a);
      ds *= scale;
      dq.block(qo, h * dh, ql, dh).noalias() += ds * c.k.block(ko, h * dh, kl, dh);
      dk.block(ko, h * dh, kl, dh).noalias() += ds.transpose() * c.q.block(qo, h * dh, ql, dh);
    }
  }
  Matrix<T> dxq = linear_backward(p, g, idx.q, c.q_in, dq);
  Matrix<T> dxkv = linear_backward(p, g, idx.k, c.kv_in, dk);
  dxkv += linear_backward(p, g, idx.v, c.kv_in, dv);
  return {std::move(dxq), std::move(dxkv)};
}

template <typename T>
Matrix<T> feed_forward(const ParamSet<T>& p, const FfnIdx& idx, const Matrix<T>& x, FfnCache<T>* cache) {
  Matrix<T> pre = linear(p, idx.up, x);
  const Matrix<T> act = pre.cwiseMax(static_cast<T>(0));
  Matrix<T> out = linear(p, idx.down, act);
  if (cache) {
    cache->in = x;
    cache->pre = std::move(pre);
  }
  return out;
}

template <typename T>
Matrix<T> feed_forward_backward(const ParamSet<T>& p, std::vector<Matrix<T>>& g, const FfnIdx& idx,
                                const FfnCache<T>& c, const Matrix<T>& dout) {
  const Matrix<T> act = c.pre.cwiseMax(static_cast<T>(0));
  Matrix<T> dact = linear_backward(p, g, idx.down, act, dout);
  dact = dact.array() * (c.pre.array() > static_cast<T>(0)).template cast<T>();
  return linear_backward(p, g, idx.up, c.in, dact);
}

template <typename T>
void run_encoder(const ParamSet<T>& p, const detail::TransformerLayout& L, const Hyperparams& hp, Workspace<T>& ws,
                 bool keep) {
  const int batch = static_cast<int>(ws.features.rows());
  const int m = hp.memory_slots, d = hp.d_model;
  const Matrix<T> flat = linear(p, L.input, ws.features);
  Matrix<T> x = Eigen::Map<const Matrix<T>>(flat.data(), static_cast<Eigen::Index>(batch) * m, d);
  for (int b = 0; b < batch; ++b) x.block(b * m, 0, m, d) += p.values[L.slot_embedding];
  ws.encoder.resize(keep ? L.encoder.size() : 0);
  for (std::size_t l = 0; l < L.encoder.size(); ++l) {
    const auto& li = L.encoder[l];
    auto* c = keep ? &ws.encoder[l] : nullptr;
    const Matrix<T> h = layer_norm(p, li.norm1, x, c ? &c->norm1 : nullptr);
    x += attention(p, li.attn, h, h, ws.mem, ws.mem, false, hp.heads, c ? &c->attn : nullptr);
    const Matrix<T> h2 = layer_norm(p, li.norm2, x, c ? &c->norm2 : nullptr);
    x += feed_forward(p, li.ffn, h2, c ? &c->ffn : nullptr);
  }
  ws.memory = layer_norm(p, L.encoder_norm, x, keep ? &ws.encoder_norm : nullptr);
}

template <typename T>
void run_decoder(const ParamSet<T>& p, const detail::TransformerLayout& L, const Hyperparams& hp, Workspace<T>& ws,
                 bool keep) {
  const int n = static_cast<int>(ws.tokens.size());
  Matrix<T> x(n, hp.d_model);
  for (int i = 0; i < n; ++i) {
    x.row(i) = p.values[L.token_embedding].row(ws.tokens[i]) + p.values[L.position_embedding].row(ws.positions[i]);
  }
  ws.decoder.resize(keep ? L.decoder.size() : 0);
  for (std::size_t l = 0; l < L.decoder.size(); ++l) {
    const auto& li = L.decoder[l];
    auto* c = keep ? &ws.decoder[l] : nullptr;
    const Matrix<T> h1 = layer_norm(p, li.norm1, x, c ? &c->norm1 : nullptr);
    x += attention(p, li.self, h1, h1, ws.dec, ws.dec, true, hp.heads, c ? &c->self : nullptr);
    const Matrix<T> h2 = layer_norm(p, li.norm2, x, c ? &c->norm2 : nullptr);
    x += attention(p, li.cross, h2, ws.memory, ws.dec, ws.mem, false, hp.heads, c ? &c->cross : nullptr);
    const Matrix<T> h3 = layer_norm(p, li.norm3, x, c ? &c->norm3 : nullptr);
    x += feed_forward(p, li.ffn, h3, c ? &c->ffn : nullptr);
  }
  ws.decoder_out = layer_norm(p, L.decoder_norm, x, keep ? &ws.decoder_norm : nullptr);
  ws.logits = linear(p, L.output, ws.decoder_out);
}

template <typename T>
void backward(const ParamSet<T>& p, const detail::TransformerLayout& L, const Hyperparams& hp, const Workspace<T>& ws,
              const Matrix<T>& dlogits, std::vector<Matrix<T>>& g) {
  Matrix<T> dx = linear_backward(p, g, L.output, ws.decoder_out, dlogits);
  dx = layer_norm_backward(p, g, L.decoder_norm, ws.decoder_norm, dx);
  Matrix<T> dmemory = Matrix<T>::Zero(ws.memory.rows(), ws.memory.cols());
  for (std::size_t l = L.decoder.size(); l-- > 0;) {
    const auto& li = L.decoder[l];
    const auto& c = ws.decoder[l];
    dx += layer_norm_backward(p, g, li.norm3, c.norm3, feed_forward_backward(p, g, li.ffn, c.ffn, dx));
    auto [dq_cross, dkv_cross] = attention_backward(p, g, li.cross, c.cross, dx, ws.dec, ws.mem, hp.heads);
    dx += layer_norm_backward(p, g, li.norm2, c.norm2, dq_cross);
    dmemory += dkv_cross;
    auto [dq_self, dkv_self] = attention_backward(p, g, li.self, c.self, dx, ws.dec, ws.dec, hp.heads);
    dq_self += dkv_self;
    dx += layer_norm_backward(p, g, li.norm1, c.norm1, dq_self);
  }
  for (std::size_t i = 0; i < ws.tokens.size(); ++i) {
    g[L.token_embedding].row(ws.tokens[i]) += dx.row(static_cast<Eigen::Index>(i));
    g[L.position_embedding].row(ws.positions[i]) += dx.row(static_cast<Eigen::Index>(i));
  }

  Matrix<T> dm = layer_norm_backward(p, g, L.encoder_norm, ws.encoder_norm, dmemory);
  for (std::size_t l = L.encoder.size(); l-- > 0;) {
    const auto& li = L.encoder[l];
    const auto& c = ws.encoder[l];
    dm += layer_norm_backward(p, g, li.norm2, c.norm2, feed_forward_backward(p, g, li.ffn, c.ffn, dm));
    auto [dq, dkv] = attention_backward(p, g, li.attn, c.attn, dm, ws.mem, ws.mem, hp.heads);
    dq += dkv;
    dm += layer_norm_backward(p, g, li.norm1, c.norm1, dq);
  }
  const int batch = static_cast<int>(ws.features.rows());
  const int m = hp.memory_slots, d = hp.d_model;
  for (int b = 0; b < batch; ++b) g[L.slot_embedding] += dm.block(b * m, 0, m, d);
  const Matrix<T> dflat = Eigen::Map<const Matrix<T>>(dm.data(), batch, static_cast<Eigen::Index>(m) * d);
  linear_backward(p, g, L.input, ws.features, dflat);
}

}  // namespace

template <typename T>
Transformer<T>::Transformer(const Hyperparams& hp, int vocab_size, std::uint64_t seed)
    : hp_(hp), vocab_size_(vocab_size) {
  hp_.check();
  if (vocab_size <= 0) throw Error(ErrorCode::kBadRequest, "vocab_size must be positive");
  auto layout = std::make_shared<detail::TransformerLayout>();
  Builder<T> b(params_, seed);
  const int d = hp_.d_model;
  const int hidden = d * hp_.ffn_multiplier;
  const double enc_out_std = 0.02 / std::sqrt(2.0 * hp_.encoder_layers);
  const double dec_out_std = 0.02 / std::sqrt(3.0 * hp_.decoder_layers);

  layout->input = b.linear("encoder.input", kRequirementFeatures, hp_.memory_slots * d, 0.1);
  layout->slot_embedding = b.normal("encoder.slots", hp_.memory_slots, d, 0.02);
  for (int l = 0; l < hp_.encoder_layers; ++l) {
    const std::string n = "encoder.layer" + std::to_string(l);
    layout->encoder.push_back({b.norm(n + ".norm1", d), b.attention(n + ".attn", d, enc_out_std),
                               b.norm(n + ".norm2", d), b.ffn(n + ".ffn", d, hidden, enc_out_std)});
  }
  layout->encoder_norm = b.norm("encoder.norm", d);
  layout->token_embedding = b.normal("decoder.tokens", vocab_size, d, 0.02);
  layout->position_embedding = b.normal("decoder.positions", hp_.context_length, d, 0.02);
  for (int l = 0; l < hp_.decoder_layers; ++l) {
    const std::string n = "decoder.layer" + std::to_string(l);
    layout->decoder.push_back({b.norm(n + ".norm1", d), b.attention(n + ".self", d, dec_out_std),
                               b.norm(n + ".norm2", d), b.attention(n + ".cross", d, dec_out_std),
                               b.norm(n + ".norm3", d), b.ffn(n + ".ffn", d, hidden, dec_out_std)});
  }
  layout->decoder_norm = b.norm("decoder.norm", d);
  layout->output = b.linear("decoder.output", d, vocab_size, 0.02);
  layout_ = std::move(layout);
}

template <typename T>
LossStats Transformer<T>::forward_backward(std::span<const TokenExample* const> batch, double validity_weight,
                                           std::vector<Matrix<T>>* grads) const {
  Workspace<T> ws;
  const int bsz = static_cast<int>(batch.size());
  ws.features.resize(bsz, kRequirementFeatures);
  int offset = 0;
  for (int b = 0; b < bsz; ++b) {
    const auto& ex = *batch[b];
    if (static_cast<int>(ex.features.size()) != kRequirementFeatures) {
      throw Error(ErrorCode::kBadRequest, "feature vector has wrong dimension");
    }
    if (ex.inputs.empty() || static_cast<int>(ex.inputs.size()) > hp_.context_length) {
      throw Error(ErrorCode::kContextLimit, "sequence length exceeds the model context");
    }
    for (int f = 0; f < kRequirementFeatures; ++f) ws.features(b, f) = static_cast<T>(ex.features[f]);
    const int len = static_cast<int>(ex.inputs.size());
    ws.dec.offset.push_back(offset);
    ws.dec.length.push_back(len);
    ws.mem.offset.push_back(b * hp_.memory_slots);
    ws.mem.length.push_back(hp_.memory_slots);
    for (int t = 0; t < len; ++t) {
      ws.tokens.push_back(ex.inputs[t]);
      ws.positions.push_back(t);
    }
    offset += len;
  }
  const bool keep = grads != nullptr;
  run_encoder(params_, *layout_, hp_, ws, keep);
  run_decoder(params_, *layout_, hp_, ws, keep);

  LossStats stats;
  stats.tokens = offset;
  Matrix<T> dlogits = Matrix<T>::Zero(offset, vocab_size_);
  const T inv_tokens = static_cast<T>(1.0 / offset);
  int row = 0;
  for (int b = 0; b < bsz; ++b) {
    const auto& ex = *batch[b];
    for (std::size_t t = 0; t < ex.targets.size(); ++t, ++row) {
      const std::uint8_t* mask = ex.masks.data() + t * vocab_size_;
      const auto z = ws.logits.row(row);
      // Log-sum-exp in double over the admissible tokens and over all tokens.
      double mx = -std::numeric_limits<double>::infinity();
      double mx_all = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < vocab_size_; ++j) {
        mx_all = std::max(mx_all, static_cast<double>(z[j]));
        if (mask[j]) mx = std::max(mx, static_cast<double>(z[j]));
      }
      double sum = 0.0, sum_all = 0.0;
      for (int j = 0; j < vocab_size_; ++j) {
        const double e = std::exp(static_cast<double>(z[j]) - mx_all);
        sum_all += e;
        if (mask[j]) sum += std::exp(static_cast<double>(z[j]) - mx);
      }
      const double lse = mx + std::log(sum);
      const double lse_all = mx_all + std::log(sum_all);
      const int y = ex.targets[t];
      stats.masked_ce += lse - static_cast<double>(z[y]);
      stats.validity += lse_all - lse;
      if (keep) {
        for (int j = 0; j < vocab_size_; ++j) {
          const double p_all = std::exp(static_cast<double>(z[j]) - lse_all);
          const double p_masked = mask[j] ? std::exp(static_cast<double>(z[j]) - lse) : 0.0;
          double gz = p_masked - (j == y ? 1.0 : 0.0);
          gz += validity_weight * (p_all - p_masked);
          dlogits(row, j) = static_cast<T>(gz) * inv_tokens;
        }
      }
    }
  }
  if (keep) {
    if (grads->size() != params_.values.size()) *grads = params_.zeros_like();
    backward(params_, *layout_, hp_, ws, dlogits, *grads);
  }
  return stats;
}

template <typename T>
Matrix<T> Transformer<T>::sequence_logits(std::span<const double> features, std::span<const int> inputs) const {
  if (static_cast<int>(inputs.size()) > hp_.context_length) {
    throw Error(ErrorCode::kContextLimit, "prefix length exceeds the model context");
  }
  Workspace<T> ws;
  ws.features.resize(1, kRequirementFeatures);
  for (int f = 0; f < kRequirementFeatures; ++f) ws.features(0, f) = static_cast<T>(features[f]);
  ws.dec = {{0}, {static_cast<int>(inputs.size())}};
  ws.mem = {{0}, {hp_.memory_slots}};
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    ws.tokens.push_back(inputs[t]);
    ws.positions.push_back(static_cast<int>(t));
  }
  run_encoder(params_, *layout_, hp_, ws, false);
  run_decoder(params_, *layout_, hp_, ws, false);
  return ws.logits;
}

template <typename T>
typename Transformer<T>::Memory Transformer<T>::encode(std::span<const double> features) const {
  if (static_cast<int>(features.size()) != kRequirementFeatures) {
    throw Error(ErrorCode::kBadRequest, "feature vector has wrong dimension");
  }
  Workspace<T> ws;
  ws.features.resize(1, kRequirementFeatures);
  for (int f = 0; f < kRequirementFeatures; ++f) ws.features(0, f) = static_cast<T>(features[f]);
  ws.mem = {{0}, {hp_.memory_slots}};
  run_encoder(params_, *layout_, hp_, ws, false);
  Memory memory;
  for (const auto& li : layout_->decoder) {
    memory.keys.push_back(linear(params_, li.cross.k, ws.memory));
    memory.values.push_back(linear(params_, li.cross.v, ws.memory));
  }
  memory.states = std::move(ws.memory);
  return memory;
}

template <typename T>
typename Transformer<T>::DecoderState Transformer<T>::start_decoding() const {
  DecoderState state;
  for (int l = 0; l < hp_.decoder_layers; ++l) {
    state.keys.push_back(Matrix<T>::Zero(hp_.context_length, hp_.d_model));
    state.values.push_back(Matrix<T>::Zero(hp_.context_length, hp_.d_model));
  }
  return state;
}

namespace {

// Single-query attention over the first `rows` keys/values.
template <typename T>
Matrix<T> attend_one(const Matrix<T>& q, const Matrix<T>& keys, const Matrix<T>& values, int rows, int heads) {
  const int d = static_cast<int>(q.cols());
  const int dh = d / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  Matrix<T> out(1, d);
  for (int h = 0; h < heads; ++h) {
    Matrix<T> scores(1, rows);
    scores.noalias() = q.block(0, h * dh, 1, dh) * keys.block(0, h * dh, rows, dh).transpose();
    scores *= scale;
    softmax_rows(scores);
    out.block(0, h * dh, 1, dh).noalias() = scores * values.block(0, h * dh, rows, dh);
  }
  return out;
}

}  // namespace

template <typename T>
RowVector<T> Transformer<T>::step(const Memory& memory, DecoderState& state, int token) const {
  if (state.length >= hp_.context_length) {
    throw Error(ErrorCode::kContextLimit, "decoder context of " + std::to_string(hp_.context_length) + " tokens is full");
  }
  if (token < 0 || token >= vocab_size_) throw Error(ErrorCode::kBadRequest, "token index out of range");
  const auto& L = *layout_;
  const int pos = state.length;
  Matrix<T> x = params_.values[L.token_embedding].row(token) + params_.values[L.position_embedding].row(pos);
  for (std::size_t l = 0; l < L.decoder.size(); ++l) {
    const auto& li = L.decoder[l];
    const Matrix<T> h1 = layer_norm<T>(params_, li.norm1, x, nullptr);
    const Matrix<T> q = linear(params_, li.self.q, h1);
    state.keys[l].row(pos) = linear(params_, li.self.k, h1).row(0);
    state.values[l].row(pos) = linear(params_, li.self.v, h1).row(0);
    x += linear(params_, li.self.o, attend_one(q, state.keys[l], state.values[l], pos + 1, hp_.heads));
    const Matrix<T> h2 = layer_norm<T>(params_, li.norm2, x, nullptr);
    const Matrix<T> qc = linear(params_, li.cross.q, h2);
    x += linear(params_, li.cross.o,
                attend_one(qc, memory.keys[l], memory.values[l], static_cast<int>(memory.keys[l].rows()), hp_.heads));
    const Matrix<T> h3 = layer_norm<T>(params_, li.norm3, x, nullptr);
    x += feed_forward<T>(params_, li.ffn, h3, nullptr);
  }
  state.length = pos + 1;
  const Matrix<T> y = layer_norm<T>(params_, L.decoder_norm, x, nullptr);
  return linear(params_, L.output, y).row(0);
}

template struct ParamSet<float>;
template struct ParamSet<double>;
template class Transformer<float>;
template class Transformer<double>;

}  // namespace gearformer::model

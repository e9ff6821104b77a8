#include "gearformer/model/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "gearformer/error.hpp"

namespace gearformer::model {

static_assert(std::endian::native == std::endian::little, "params format assumes a little-endian host");

RequirementEncoding encode_requirements(const Requirements& r) {
  RequirementEncoding e{};
  e[0] = std::log(r.target_ratio) / kRatioScale;
  for (int i = 0; i < 3; ++i) e[1 + i] = r.target_position[i] / kPositionScaleMm;
  e[4 + static_cast<int>(r.target_axis)] = 1.0;
  e[10] = r.target_direction;
  return e;
}

std::vector<double> masked_softmax(std::span<const float> logits, const TokenMask& mask, double temperature) {
  std::vector<double> p(logits.size(), 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) mx = std::max(mx, static_cast<double>(logits[i]) / temperature);
  }
  if (!std::isfinite(mx)) throw Error(ErrorCode::kInternal, "no admissible token in mask");
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) sum += p[i] = std::exp(static_cast<double>(logits[i]) / temperature - mx);
  }
  for (auto& v : p) v /= sum;
  return p;
}

Model::Model(const Hyperparams& hp, int vocab_size, std::uint64_t seed, std::string catalog_version)
    : net_(hp, vocab_size, seed), catalog_version_(std::move(catalog_version)) {}

Model::Model(Transformer<float> net, std::string catalog_version)
    : net_(std::move(net)), catalog_version_(std::move(catalog_version)) {}

void Model::check_compatible(const Grammar& grammar) const {
  if (net_.vocab_size() != grammar.vocabulary().size()) {
    throw Error(ErrorCode::kBadRequest, "model vocabulary size " + std::to_string(net_.vocab_size()) +
                                            " does not match catalog vocabulary size " +
                                            std::to_string(grammar.vocabulary().size()));
  }
  if (catalog_version_ != grammar.catalog().version()) {
    throw Error(ErrorCode::kBadRequest,
                "model trained on catalog '" + catalog_version_ + "', loaded '" + grammar.catalog().version() + "'");
  }
}

std::vector<int> token_indices(const Grammar& grammar, const DesignSequence& sequence) {
  std::vector<int> out;
  out.reserve(sequence.tokens.size());
  for (const auto& t : sequence.tokens) out.push_back(grammar.vocabulary().index_of(t));
  return out;
}

TokenDistribution next_token_distribution(const Model& model, const Grammar& grammar,
                                          const RequirementEncoding& encoding, const DesignSequence& prefix,
                                          const TokenMask& mask) {
  const auto inputs = token_indices(grammar, prefix);
  if (static_cast<int>(inputs.size()) > model.hyperparams().context_length) {
    throw Error(ErrorCode::kContextLimit, "prefix of " + std::to_string(inputs.size()) +
                                              " tokens does not fit the model context of " +
                                              std::to_string(model.hyperparams().context_length));
  }
  const Matrix<float> logits = model.net().sequence_logits(encoding, inputs);
  const RowVector<float> last = logits.row(logits.rows() - 1);
  return {masked_softmax(std::span<const float>(last.data(), static_cast<std::size_t>(last.size())), mask)};
}

namespace {

constexpr char kMagic[8] = {'G', 'F', 'M', 'P', 'A', 'R', 'A', 'M'};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void raw(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
  std::string& out() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  void raw(void* data, std::size_t n) {
    if (pos_ + n > in_.size()) throw Error(ErrorCode::kBadRequest, "params: corrupt payload (truncated)", "corrupt");
    std::memcpy(data, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > in_.size()) throw Error(ErrorCode::kBadRequest, "params: corrupt payload (bad length)", "corrupt");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  std::size_t position() const { return pos_; }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string save_params(const Model& model) {
  const auto& hp = model.hyperparams();
  const auto& params = model.net().params();
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kParamsVersion);
  for (int v : {hp.d_model, hp.heads, hp.encoder_layers, hp.decoder_layers, hp.ffn_multiplier, hp.context_length,
                hp.memory_slots, model.net().vocab_size(), kRequirementFeatures}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.str(model.catalog_version());
  w.u32(static_cast<std::uint32_t>(params.values.size()));
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    w.str(params.names[i]);
    w.u32(static_cast<std::uint32_t>(params.values[i].rows()));
    w.u32(static_cast<std::uint32_t>(params.values[i].cols()));
    w.raw(params.values[i].data(), sizeof(float) * static_cast<std::size_t>(params.values[i].size()));
  }
  const std::uint64_t sum = fnv1a(w.out());
  w.raw(&sum, sizeof sum);
  return std::move(w.out());
}

Model load_params(std::string_view bytes) {
  Reader r(bytes);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::kBadRequest, "params: corrupt payload (bad magic)", "corrupt");
  }
  const std::uint32_t version = r.u32();
  if (version != kParamsVersion) {
    throw Error(ErrorCode::kBadRequest,
                "params: version mismatch: file has v" + std::to_string(version) + ", this build reads v" +
                    std::to_string(kParamsVersion),
                "version");
  }
  if (bytes.size() < sizeof(std::uint64_t)) throw Error(ErrorCode::kBadRequest, "params: corrupt payload", "corrupt");
  const std::string_view body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof stored);
  if (fnv1a(body) != stored) throw Error(ErrorCode::kBadRequest, "params: corrupt payload (checksum)", "corrupt");

  Hyperparams hp;
  hp.d_model = static_cast<int>(r.u32());
  hp.heads = static_cast<int>(r.u32());
  hp.encoder_layers = static_cast<int>(r.u32());
  hp.decoder_layers = static_cast<int>(r.u32());
  hp.ffn_multiplier = static_cast<int>(r.u32());
  hp.context_length = static_cast<int>(r.u32());
  hp.memory_slots = static_cast<int>(r.u32());
  const int vocab = static_cast<int>(r.u32());
  const int features = static_cast<int>(r.u32());
  if (features != kRequirementFeatures) {
    throw Error(ErrorCode::kBadRequest, "params: feature dimension " + std::to_string(features) + " unsupported");
  }
  std::string catalog_version = r.str();
  Model model(hp, vocab, 0, std::move(catalog_version));
  auto& params = model.mutable_net().params();
  const std::uint32_t count = r.u32();
  if (count != params.values.size()) throw Error(ErrorCode::kBadRequest, "params: tensor count mismatch", "corrupt");
  for (std::size_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const auto rows = r.u32(), cols = r.u32();
    auto& m = params.values[i];
    if (name != params.names[i] || rows != m.rows() || cols != m.cols()) {
      throw Error(ErrorCode::kBadRequest, "params: tensor '" + name + "' does not match the architecture", "corrupt");
    }
    r.raw(m.data(), sizeof(float) * static_cast<std::size_t>(m.size()));
  }
  if (r.position() != body.size()) throw Error(ErrorCode::kBadRequest, "params: trailing bytes", "corrupt");
  return model;
}

void save_params_file(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInternal, "cannot write " + path);
  const std::string bytes = save_params(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Model load_params_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open params file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_params(buffer.str());
}

}  // namespace gearformer::model

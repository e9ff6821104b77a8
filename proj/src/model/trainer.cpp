#include "gearformer/model/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "gearformer/error.hpp"

namespace gearformer::model {

TrainConfig train_config_from_json(const Json& doc, TrainConfig c) {
  if (!doc.is_object()) throw Error(ErrorCode::kBadRequest, "training config must be a JSON object");
  try {
    if (doc.contains("layers")) c.hp.encoder_layers = c.hp.decoder_layers = doc["layers"].get<int>();
    c.hp.encoder_layers = doc.value("encoder_layers", c.hp.encoder_layers);
    c.hp.decoder_layers = doc.value("decoder_layers", c.hp.decoder_layers);
    c.hp.d_model = doc.value("d_model", c.hp.d_model);
    c.hp.heads = doc.value("heads", c.hp.heads);
    c.hp.ffn_multiplier = doc.value("ffn_multiplier", c.hp.ffn_multiplier);
    c.hp.context_length = doc.value("context_length", c.hp.context_length);
    c.hp.memory_slots = doc.value("memory_slots", c.hp.memory_slots);
    c.epochs = doc.value("epochs", c.epochs);
    c.batch_size = doc.value("batch_size", c.batch_size);
    c.learning_rate = doc.value("learning_rate", c.learning_rate);
    c.warmup_steps = doc.value("warmup_steps", c.warmup_steps);
    c.final_lr_fraction = doc.value("final_lr_fraction", c.final_lr_fraction);
    c.grad_clip = doc.value("grad_clip", c.grad_clip);
    c.validity_weight = doc.value("validity_weight", c.validity_weight);
    c.seed = doc.value("seed", c.seed);
    c.max_parts = doc.value("max_parts", c.max_parts);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kBadRequest, std::string("training config: ") + e.what());
  }
  c.hp.check();
  if (c.epochs < 1 || c.batch_size < 1 || !(c.learning_rate > 0.0) || c.warmup_steps < 0 || c.max_parts < 1) {
    throw Error(ErrorCode::kBadRequest, "training config: epochs, batch_size, learning_rate, max_parts must be positive");
  }
  if (max_sequence_length(c.max_parts) > c.hp.context_length + 1) {
    throw Error(ErrorCode::kBadRequest, "training config: context_length too small for max_parts");
  }
  return c;
}

Json train_config_to_json(const TrainConfig& c) {
  return {{"encoder_layers", c.hp.encoder_layers},
          {"decoder_layers", c.hp.decoder_layers},
          {"d_model", c.hp.d_model},
          {"heads", c.hp.heads},
          {"ffn_multiplier", c.hp.ffn_multiplier},
          {"context_length", c.hp.context_length},
          {"memory_slots", c.hp.memory_slots},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"warmup_steps", c.warmup_steps},
          {"final_lr_fraction", c.final_lr_fraction},
          {"grad_clip", c.grad_clip},
          {"validity_weight", c.validity_weight},
          {"seed", c.seed},
          {"max_parts", c.max_parts}};
}

double learning_rate_at(const TrainConfig& c, int step, int total_steps) {
  if (step < c.warmup_steps) return c.learning_rate * (step + 1) / c.warmup_steps;
  const int decay_steps = std::max(1, total_steps - c.warmup_steps);
  const double progress = std::min(1.0, static_cast<double>(step - c.warmup_steps) / decay_steps);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return c.learning_rate * (c.final_lr_fraction + (1.0 - c.final_lr_fraction) * cosine);
}

template <typename T>
Adam<T>::Adam(const ParamSet<T>& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(params.zeros_like()), v_(params.zeros_like()) {}

template <typename T>
void Adam<T>::step(ParamSet<T>& params, const std::vector<Matrix<T>>& grads, double learning_rate) {
  ++t_;
  const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  const T step_size = static_cast<T>(learning_rate * std::sqrt(c2) / c1);
  const T eps = static_cast<T>(eps_ * std::sqrt(c2));
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    m_[i] = b1 * m_[i] + (1 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1 - b2) * grads[i].cwiseProduct(grads[i]);
    params.values[i].array() -= step_size * m_[i].array() / (v_[i].array().sqrt() + eps);
  }
}

template <typename T>
double clip_gradients(std::vector<Matrix<T>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += static_cast<double>(g.squaredNorm());
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto& g : grads) g *= scale;
  }
  return norm;
}

template class Adam<float>;
template class Adam<double>;
template double clip_gradients<float>(std::vector<Matrix<float>>&, double);
template double clip_gradients<double>(std::vector<Matrix<double>>&, double);

TrainResult train(const Grammar& grammar, const std::vector<TrainingExample>& dataset, const TrainConfig& config,
                  const std::function<void(const EpochStats&)>& on_epoch) {
  if (dataset.empty()) throw Error(ErrorCode::kBadRequest, "training dataset is empty");
  config.hp.check();
  std::vector<TokenExample> examples;
  examples.reserve(dataset.size());
  for (const auto& ex : dataset) {
    examples.push_back(to_token_example(grammar, ex, config.max_parts));
    if (static_cast<int>(examples.back().inputs.size()) > config.hp.context_length) {
      throw Error(ErrorCode::kContextLimit, "training sequence longer than the model context");
    }
  }

  TrainResult result{Model(config.hp, grammar.vocabulary().size(), config.seed, grammar.catalog().version()), {}};
  auto& net = result.model.mutable_net();
  Adam<float> optimizer(net.params());
  std::vector<Matrix<float>> grads = net.params().zeros_like();

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  const int batches_per_epoch =
      static_cast<int>((examples.size() + static_cast<std::size_t>(config.batch_size) - 1) / config.batch_size);
  const int total_steps = batches_per_epoch * config.epochs;
  int step = 0;
  std::vector<const TokenExample*> batch;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);
    double ce_sum = 0.0, validity_sum = 0.0;
    long tokens = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      batch.clear();
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&examples[order[i]]);
      for (auto& g : grads) g.setZero();
      const LossStats stats = net.forward_backward(batch, config.validity_weight, &grads);
      if (!std::isfinite(stats.masked_ce) || !std::isfinite(stats.validity)) {
        throw Error(ErrorCode::kInternal, "training diverged: non-finite loss at epoch " + std::to_string(epoch + 1) +
                                              ", step " + std::to_string(step) + " (masked_ce=" +
                                              std::to_string(stats.masked_ce) + ")");
      }
      clip_gradients(grads, config.grad_clip);
      optimizer.step(net.params(), grads, learning_rate_at(config, step, total_steps));
      ++step;
      ce_sum += stats.masked_ce;
      validity_sum += stats.validity;
      tokens += stats.tokens;
    }
    EpochStats es;
    es.epoch = epoch + 1;
    es.masked_ce = ce_sum / static_cast<double>(tokens);
    es.validity = validity_sum / static_cast<double>(tokens);
    es.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.curve.push_back(es);
    if (on_epoch) on_epoch(es);
  }
  return result;
}

Json loss_curve_to_json(const std::vector<EpochStats>& curve) {
  Json out = Json::array();
  for (const auto& e : curve) {
    out.push_back({{"epoch", e.epoch}, {"masked_ce", e.masked_ce}, {"validity", e.validity}, {"seconds", e.seconds}});
  }
  return out;
}

UnmaskedValidity unmasked_greedy_validity(const Model& model, const Grammar& grammar,
                                          const std::vector<Requirements>& requirements, int max_parts) {
  const auto& net = model.net();
  const auto& vocab = grammar.vocabulary();
  UnmaskedValidity out;
  for (const auto& req : requirements) {
    const auto enc = encode_requirements(req);
    const auto memory = net.encode(enc);
    auto decoder = net.start_decoding();
    GrammarState state = grammar.initial_state(max_parts);
    RowVector<float> logits = net.step(memory, decoder, Vocabulary::kStart);
    ++out.rollouts;
    while (true) {
      Eigen::Index best = 0;
      logits.maxCoeff(&best);
      ++out.tokens;
      const Token token = vocab.token(static_cast<int>(best));
      if (grammar.try_advance(state, token)) break;
      ++out.valid_tokens;
      if (state.phase == Phase::kDone) {
        ++out.valid_rollouts;
        break;
      }
      if (decoder.length >= net.hyperparams().context_length) break;
      logits = net.step(memory, decoder, static_cast<int>(best));
    }
  }
  return out;
}

}  // namespace gearformer::model

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gearformer/io.hpp"
#include "gearformer/model/dataset.hpp"
#include "gearformer/model/model.hpp"

namespace gearformer::model {

// Learning-rate schedule: linear warmup over `warmup_steps`, then cosine
// decay to `final_lr_fraction * learning_rate` at the last step.
struct TrainConfig {
  Hyperparams hp;
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 1e-3;
  int warmup_steps = 200;
  double final_lr_fraction = 0.1;
  double grad_clip = 1.0;
  // Weight of the -log(admissible mass) term added to the masked loss.
  double validity_weight = 0.1;
  std::uint64_t seed = 1;
  int max_parts = kDefaultMaxParts;
};

// Training config file, JSON. Documented keys: "layers" (sets both encoder
// and decoder depth), "encoder_layers", "decoder_layers", "d_model", "heads",
// "ffn_multiplier", "context_length", "memory_slots", "epochs", "batch_size",
// "learning_rate", "warmup_steps", "final_lr_fraction", "grad_clip",
// "validity_weight", "seed", "max_parts". Missing keys keep their defaults.
TrainConfig train_config_from_json(const Json& doc, TrainConfig base = {});
Json train_config_to_json(const TrainConfig& config);

double learning_rate_at(const TrainConfig& config, int step, int total_steps);

struct EpochStats {
  int epoch = 0;
  double masked_ce = 0.0;  // mean per target token
  double validity = 0.0;   // mean -log(admissible mass), unmasked
  double seconds = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> curve;
};

// Teacher-forced masked cross-entropy with Adam. Deterministic for a given
// (dataset, config). Throws Error(kInternal) with the epoch/step if the loss
// becomes non-finite.
TrainResult train(const Grammar& grammar, const std::vector<TrainingExample>& dataset, const TrainConfig& config,
                  const std::function<void(const EpochStats&)>& on_epoch = {});

// Plain Adam over a parameter set.
template <typename T>
class Adam {
 public:
  Adam(const ParamSet<T>& params, double beta1 = 0.9, double beta2 = 0.98, double eps = 1e-9);
  void step(ParamSet<T>& params, const std::vector<Matrix<T>>& grads, double learning_rate);

 private:
  double beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Matrix<T>> m_, v_;
};

// Global L2 norm of a gradient set; scales it down to `max_norm` if larger.
template <typename T>
double clip_gradients(std::vector<Matrix<T>>& grads, double max_norm);

Json loss_curve_to_json(const std::vector<EpochStats>& curve);

// Greedy decoding with the grammar mask switched off. A rollout stops at
// <end>, at the first inadmissible token, or when the context is full.
struct UnmaskedValidity {
  long tokens = 0;        // tokens emitted
  long valid_tokens = 0;  // emitted tokens the grammar admitted
  int rollouts = 0;
  int valid_rollouts = 0;  // reached <end> with every token admitted

  double token_rate() const { return tokens ? static_cast<double>(valid_tokens) / tokens : 0.0; }
  double rollout_rate() const { return rollouts ? static_cast<double>(valid_rollouts) / rollouts : 0.0; }
};

UnmaskedValidity unmasked_greedy_validity(const Model& model, const Grammar& grammar,
                                          const std::vector<Requirements>& requirements,
                                          int max_parts = kDefaultMaxParts);

}  // namespace gearformer::model

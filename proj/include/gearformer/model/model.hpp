#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gearformer/grammar.hpp"
#include "gearformer/model/transformer.hpp"
#include "gearformer/simulator.hpp"

namespace gearformer::model {

// [log(ratio) / log(27), position / 250 mm (x, y, z), one-hot axis (6), direction]
using RequirementEncoding = std::array<double, kRequirementFeatures>;

inline constexpr double kRatioScale = 3.295836866004329;  // log(27): three 3:1 stages
inline constexpr double kPositionScaleMm = 250.0;

RequirementEncoding encode_requirements(const Requirements& requirements);

struct TokenDistribution {
  std::vector<double> probabilities;  // indexed by vocabulary index
};

// softmax(logits / temperature) restricted to admissible tokens; masked-off
// entries are exactly 0.
std::vector<double> masked_softmax(std::span<const float> logits, const TokenMask& mask, double temperature = 1.0);

// A loaded, read-only float model tied to the catalog it was trained on.
class Model {
 public:
  Model(const Hyperparams& hp, int vocab_size, std::uint64_t seed, std::string catalog_version);
  Model(Transformer<float> net, std::string catalog_version);

  const Transformer<float>& net() const { return net_; }
  Transformer<float>& mutable_net() { return net_; }
  const Hyperparams& hyperparams() const { return net_.hyperparams(); }
  const std::string& catalog_version() const { return catalog_version_; }

  // Throws Error(kBadRequest) if the model was built for another vocabulary.
  void check_compatible(const Grammar& grammar) const;

 private:
  Transformer<float> net_;
  std::string catalog_version_;
};

std::vector<int> token_indices(const Grammar& grammar, const DesignSequence& sequence);

// Stateless inference: re-runs the decoder over the whole prefix (which
// starts with <start>). Throws Error(kContextLimit) when the prefix does not
// fit in the context.
TokenDistribution next_token_distribution(const Model& model, const Grammar& grammar,
                                          const RequirementEncoding& encoding, const DesignSequence& prefix,
                                          const TokenMask& mask);

// Versioned binary params format:
//   "GFMPARAM" | u32 version | u32 x 9 hyperparams/vocab/features |
//   u32 len + catalog version | u32 tensor count |
//   per tensor: u32 len + name, u32 rows, u32 cols, float32 LE data |
//   u64 FNV-1a of all preceding bytes
inline constexpr std::uint32_t kParamsVersion = 1;

std::string save_params(const Model& model);
// Throws Error(kBadRequest) naming both versions on mismatch, or on a
// truncated/corrupt payload.
Model load_params(std::string_view bytes);
void save_params_file(const Model& model, const std::string& path);
Model load_params_file(const std::string& path);

}  // namespace gearformer::model

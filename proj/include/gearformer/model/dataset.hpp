#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "gearformer/grammar.hpp"
#include "gearformer/model/transformer.hpp"
#include "gearformer/simulator.hpp"

namespace gearformer::model {

struct TrainingExample {
  Requirements requirements;  // the design's own simulated metrics
  DesignSequence sequence;
};

// Unbiased integer in [0, n).
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);
// Uniform real in [0, 1) from the top 53 bits.
double uniform_unit(std::mt19937_64& rng);

// Walks the grammar choosing uniformly among admissible tokens until <end>.
DesignSequence random_walk(const Grammar& grammar, std::mt19937_64& rng, int max_parts = kDefaultMaxParts);

// Random walks with interfering designs rejected, each labelled with its own
// metrics. Deterministic for a given seed.
std::vector<TrainingExample> generate_dataset(const Grammar& grammar, int n, std::uint64_t seed,
                                              int max_parts = kDefaultMaxParts);

// Teacher-forcing view: inputs <start>..last-before-<end>, targets shifted
// by one, and the grammar mask at every step.
TokenExample to_token_example(const Grammar& grammar, const TrainingExample& example,
                              int max_parts = kDefaultMaxParts);

// JSON Lines, one record per example:
//   {"requirements": {...}, "sequence": ["<start>", "S40", ..., "<end>"]}
std::string dataset_to_jsonl(const Grammar& grammar, const std::vector<TrainingExample>& examples);
std::vector<TrainingExample> dataset_from_jsonl(const Grammar& grammar, std::string_view text);
void save_dataset_file(const Grammar& grammar, const std::vector<TrainingExample>& examples, const std::string& path);
std::vector<TrainingExample> load_dataset_file(const Grammar& grammar, const std::string& path);

}  // namespace gearformer::model

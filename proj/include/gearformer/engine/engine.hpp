#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gearformer/grammar.hpp"
#include "gearformer/layout.hpp"
#include "gearformer/model/model.hpp"
#include "gearformer/simulator.hpp"

namespace gearformer {

enum class SamplingMode { kGreedy, kStochastic };

struct SamplingConfig {
  SamplingMode mode = SamplingMode::kStochastic;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  // Attempt cap for explore; 0 means 20 * n.
  int max_attempts = 0;
  // Worker threads for explore; results do not depend on this.
  int threads = 1;
};

struct GeneratedSequence {
  DesignSequence sequence;
  // False when the context filled up before <end> was produced.
  bool complete = false;
};

struct DesignCandidate {
  std::string id;  // 16 hex digits, hash of the token sequence
  DesignSequence sequence;
  Requirements requirements;
  Assembly assembly;
  MetricsReport report;
};

std::string design_id(const Grammar& grammar, const DesignSequence& sequence);

struct ExploreDiagnostics {
  int requested = 0;
  int attempts = 0;
  int accepted = 0;
  int rejected_grammar = 0;
  int rejected_incomplete = 0;
  int rejected_interference = 0;
  int rejected_simulation = 0;
  int duplicates = 0;
  // True when the attempt cap stopped the search short of `requested`.
  bool exhausted = false;
};

struct ExploreResult {
  std::vector<DesignCandidate> candidates;  // distinct, in acceptance order
  ExploreDiagnostics diagnostics;
};

// Seed used for attempt `index` of an explore run seeded with `seed`.
std::uint64_t attempt_seed(std::uint64_t seed, std::uint64_t index);

struct Recommendation {
  int token = 0;  // vocabulary index
  std::string name;
  double probability = 0.0;
  std::optional<PlacedPart> preview;
};

struct RecommendationSet {
  std::vector<Recommendation> ranked;  // top-k admissible, by probability
  // Every admissible placement with its preview, in vocabulary order. Empty
  // unless a placement token is expected.
  std::vector<Recommendation> ghosts;
  bool end_admissible = false;
};

struct RunningMetrics {
  double ratio = 1.0;
  Vec3 cursor = Vec3::Zero();
  Axis axis = Axis::kPosX;
  int direction = 1;
  double cost_usd = 0.0;
  double weight_kg = 0.0;
  int parts_used = 0;
  int max_parts = kDefaultMaxParts;
};

class Engine;

// Interactive build-up of one design. Not thread safe; callers serialize
// access per session.
class CopilotSession {
 public:
  const Requirements& requirements() const { return requirements_; }
  const DesignSequence& prefix() const { return prefix_; }
  const GrammarState& state() const { return state_; }
  const Assembly& assembly() const { return builder_.assembly(); }
  const RecommendationSet& recommendations() const { return recommendations_; }
  const RunningMetrics& metrics() const { return metrics_; }
  int top_k() const { return top_k_; }
  bool can_undo() const { return !history_.empty(); }

 private:
  friend class Engine;
  using Net = model::Transformer<float>;

  struct Snapshot {
    GrammarState state;
    AssemblyBuilder builder;
    model::RowVector<float> logits;
  };

  CopilotSession(const Catalog& catalog, Requirements requirements, GrammarState state, Net::Memory memory,
                 Net::DecoderState decoder, int top_k);

  Requirements requirements_;
  DesignSequence prefix_;
  GrammarState state_;
  AssemblyBuilder builder_;
  Net::Memory memory_;
  Net::DecoderState decoder_;
  model::RowVector<float> logits_;  // next-token logits after `prefix_`
  std::vector<Snapshot> history_;
  int top_k_ = 5;
  RecommendationSet recommendations_;
  RunningMetrics metrics_;
};

// Inference over a read-only grammar and model. All const methods are safe
// to call concurrently.
class Engine {
 public:
  // Throws Error(kBadRequest) if the model does not match the grammar's
  // vocabulary or its context cannot hold a design with `max_parts` parts.
  Engine(std::shared_ptr<const Grammar> grammar, std::shared_ptr<const model::Model> model,
         int max_parts = kDefaultMaxParts);

  const Grammar& grammar() const { return *grammar_; }
  const model::Model& model() const { return *model_; }
  int max_parts() const { return max_parts_; }

  // One masked decode. Greedy takes the highest logit (lowest index on
  // ties); stochastic samples softmax(logits / T) over admissible tokens.
  GeneratedSequence generate_one(const Requirements& requirements, SamplingMode mode, double temperature,
                                 std::uint64_t seed) const;

  // Samples until `n` distinct, validated, interference-free designs are
  // found or the attempt cap is hit.
  ExploreResult explore(const Requirements& requirements, int n, const SamplingConfig& config) const;

  // A fresh session with <start> consumed. `max_parts` 0 means the engine's
  // default.
  CopilotSession copilot_start(const Requirements& requirements, int max_parts = 0, int top_k = 5) const;
  // Appends a non-<end> token. Throws Error(kGrammarViolation) naming the
  // rule, or Error(kContextLimit); the session is unchanged on error.
  void copilot_step(CopilotSession& session, int token) const;
  // Throws Error(kBadRequest) when there is nothing to undo.
  void copilot_undo(CopilotSession& session) const;
  // Closes the design with <end>. Throws Error(kGrammarViolation) naming what
  // is still required when <end> is not admissible. The session is unchanged.
  DesignCandidate copilot_finish(const CopilotSession& session) const;

 private:
  void refresh(CopilotSession& session) const;

  std::shared_ptr<const Grammar> grammar_;
  std::shared_ptr<const model::Model> model_;
  int max_parts_;
};

}  // namespace gearformer

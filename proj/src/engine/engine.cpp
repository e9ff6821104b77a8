#include "gearformer/engine/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <random>
#include <thread>
#include <unordered_set>

#include "gearformer/error.hpp"
#include "gearformer/model/dataset.hpp"

namespace gearformer {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int argmax_admissible(std::span<const float> logits, const TokenMask& mask) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(mask.size()); ++i) {
    if (mask[i] && (best < 0 || logits[i] > logits[best])) best = i;
  }
  if (best < 0) throw Error(ErrorCode::kInternal, "no admissible token");
  return best;
}

int sample_admissible(std::span<const float> logits, const TokenMask& mask, double temperature,
                      std::mt19937_64& rng) {
  const std::vector<double> p = model::masked_softmax(logits, mask, temperature);
  const double u = model::uniform_unit(rng);
  double acc = 0.0;
  int last = -1;
  for (int i = 0; i < static_cast<int>(p.size()); ++i) {
    if (!mask[i]) continue;
    acc += p[i];
    last = i;
    if (u < acc) return i;
  }
  if (last < 0) throw Error(ErrorCode::kInternal, "no admissible token");
  return last;  // rounding left u above the total mass
}

void check_sampling(SamplingMode mode, double temperature) {
  if (mode == SamplingMode::kStochastic && !(temperature > 0.0)) {
    throw Error(ErrorCode::kBadRequest, "stochastic sampling requires temperature > 0", "temperature");
  }
}

std::string required_after(Phase phase) {
  switch (phase) {
    case Phase::kExpectShaft:
      return "shaft required";
    case Phase::kExpectMate:
      return "mate gear required";
    case Phase::kExpectPlacement:
      return "placement required";
    default:
      return "design cannot end here";
  }
}

struct Attempt {
  GeneratedSequence generated;
  DesignValidation validation;
};

}  // namespace

std::string design_id(const Grammar& grammar, const DesignSequence& sequence) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : grammar.serialize(sequence)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t attempt_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ (index * 0xd1b54a32d192ed03ULL));
}

CopilotSession::CopilotSession(const Catalog& catalog, Requirements requirements, GrammarState state,
                               Net::Memory memory, Net::DecoderState decoder, int top_k)
    : requirements_(std::move(requirements)),
      prefix_{{Token::start()}},
      state_(state),
      builder_(catalog),
      memory_(std::move(memory)),
      decoder_(std::move(decoder)),
      top_k_(top_k) {}

Engine::Engine(std::shared_ptr<const Grammar> grammar, std::shared_ptr<const model::Model> model, int max_parts)
    : grammar_(std::move(grammar)), model_(std::move(model)), max_parts_(max_parts) {
  if (!grammar_ || !model_) throw Error(ErrorCode::kInternal, "engine needs a grammar and a model");
  if (max_parts_ < 1) throw Error(ErrorCode::kBadRequest, "max_parts must be at least 1");
  model_->check_compatible(*grammar_);
  if (max_sequence_length(max_parts_) > model_->hyperparams().context_length + 1) {
    throw Error(ErrorCode::kBadRequest, "model context of " + std::to_string(model_->hyperparams().context_length) +
                                            " tokens cannot hold a design with " + std::to_string(max_parts_) +
                                            " parts");
  }
}

GeneratedSequence Engine::generate_one(const Requirements& requirements, SamplingMode mode, double temperature,
                                       std::uint64_t seed) const {
  check_requirements(requirements);
  check_sampling(mode, temperature);
  const auto& net = model_->net();
  const auto& vocab = grammar_->vocabulary();
  const auto enc = model::encode_requirements(requirements);
  const auto memory = net.encode(enc);
  auto decoder = net.start_decoding();
  std::mt19937_64 rng(seed);

  GeneratedSequence out;
  out.sequence.tokens.push_back(Token::start());
  GrammarState state = grammar_->initial_state(max_parts_);
  model::RowVector<float> logits = net.step(memory, decoder, Vocabulary::kStart);
  while (true) {
    const TokenMask mask = grammar_->valid_next(state);
    const std::span<const float> view(logits.data(), static_cast<std::size_t>(logits.size()));
    const int index =
        mode == SamplingMode::kGreedy ? argmax_admissible(view, mask) : sample_admissible(view, mask, temperature, rng);
    const Token token = vocab.token(index);
    state = grammar_->advance(state, token);
    out.sequence.tokens.push_back(token);
    if (state.phase == Phase::kDone) {
      out.complete = true;
      return out;
    }
    if (decoder.length >= net.hyperparams().context_length) return out;
    logits = net.step(memory, decoder, index);
  }
}

ExploreResult Engine::explore(const Requirements& requirements, int n, const SamplingConfig& config) const {
  if (n < 1) throw Error(ErrorCode::kBadRequest, "requested count must be at least 1", "n");
  check_requirements(requirements);
  check_sampling(config.mode, config.temperature);
  if (config.max_attempts < 0) throw Error(ErrorCode::kBadRequest, "max_attempts must be positive");
  const long cap = config.max_attempts > 0 ? config.max_attempts : 20L * n;
  const int threads = std::max(1, config.threads);

  ExploreResult result;
  auto& diag = result.diagnostics;
  diag.requested = n;
  std::unordered_set<std::string> seen;

  auto run_attempt = [&](long index) {
    Attempt a;
    a.generated = generate_one(requirements, config.mode, config.temperature,
                               attempt_seed(config.seed, static_cast<std::uint64_t>(index)));
    if (a.generated.complete) {
      a.validation = validate_design(*grammar_, a.generated.sequence, requirements, max_parts_);
    }
    return a;
  };

  // Attempts run in parallel batches but are consumed strictly in index
  // order, so the outcome does not depend on the thread count.
  const long batch = threads == 1 ? 1 : 4L * threads;
  std::vector<Attempt> slots;
  long next = 0;
  while (static_cast<int>(result.candidates.size()) < n && next < cap) {
    const long count = std::min(batch, cap - next);
    slots.assign(static_cast<std::size_t>(count), {});
    if (threads == 1) {
      for (long i = 0; i < count; ++i) slots[i] = run_attempt(next + i);
    } else {
      std::atomic<long> cursor{0};
      std::vector<std::jthread> pool;
      for (int t = 0; t < std::min<long>(threads, count); ++t) {
        pool.emplace_back([&] {
          for (long i = cursor++; i < count; i = cursor++) slots[i] = run_attempt(next + i);
        });
      }
    }
    for (long i = 0; i < count && static_cast<int>(result.candidates.size()) < n; ++i) {
      ++diag.attempts;
      Attempt& a = slots[i];
      if (!a.generated.complete) {
        ++diag.rejected_incomplete;
        continue;
      }
      const auto& v = a.validation;
      if (v.violation && !v.feasible()) {
        switch (v.violation->stage) {
          case Stage::kGrammar:
            ++diag.rejected_grammar;
            break;
          case Stage::kInterference:
            ++diag.rejected_interference;
            break;
          case Stage::kLayout:
          case Stage::kSimulation:
            ++diag.rejected_simulation;
            break;
        }
        continue;
      }
      if (!v.feasible()) {
        ++diag.rejected_simulation;
        continue;
      }
      std::string id = design_id(*grammar_, a.generated.sequence);
      if (!seen.insert(id).second) {
        ++diag.duplicates;
        continue;
      }
      result.candidates.push_back(
          {std::move(id), std::move(a.generated.sequence), requirements, std::move(*v.assembly), *v.report});
    }
    next += count;
  }
  diag.accepted = static_cast<int>(result.candidates.size());
  diag.exhausted = diag.accepted < n;
  return result;
}

CopilotSession Engine::copilot_start(const Requirements& requirements, int max_parts, int top_k) const {
  check_requirements(requirements);
  if (top_k < 1) throw Error(ErrorCode::kBadRequest, "top_k must be at least 1", "top_k");
  const auto& net = model_->net();
  const auto enc = model::encode_requirements(requirements);
  CopilotSession session(grammar_->catalog(), requirements, grammar_->initial_state(max_parts > 0 ? max_parts : max_parts_),
                         net.encode(enc), net.start_decoding(), top_k);
  session.logits_ = net.step(session.memory_, session.decoder_, Vocabulary::kStart);
  refresh(session);
  return session;
}

void Engine::copilot_step(CopilotSession& session, int token) const {
  const auto& vocab = grammar_->vocabulary();
  if (token < 0 || token >= vocab.size()) throw Error(ErrorCode::kBadRequest, "token index out of range", "token");
  const Token t = vocab.token(token);
  if (t.kind == TokenKind::kEnd) {
    throw Error(ErrorCode::kBadRequest, "use finish to close the design", "end");
  }
  if (auto rule = grammar_->check(session.state_, t)) {
    throw Error(ErrorCode::kGrammarViolation, "token '" + vocab.name(token) + "' not admissible: " + *rule, *rule);
  }
  const auto& net = model_->net();
  if (session.decoder_.length >= net.hyperparams().context_length) {
    throw Error(ErrorCode::kContextLimit, "design complete or truncate: model context is full", "context");
  }
  CopilotSession::Snapshot snap{session.state_, session.builder_, session.logits_};
  model::RowVector<float> logits = net.step(session.memory_, session.decoder_, token);
  session.history_.push_back(std::move(snap));
  session.state_ = grammar_->advance(session.state_, t);
  session.builder_.push(t);
  session.prefix_.tokens.push_back(t);
  session.logits_ = std::move(logits);
  refresh(session);
}

void Engine::copilot_undo(CopilotSession& session) const {
  if (session.history_.empty()) throw Error(ErrorCode::kBadRequest, "nothing to undo", "undo");
  auto& snap = session.history_.back();
  session.state_ = snap.state;
  session.builder_ = std::move(snap.builder);
  session.logits_ = std::move(snap.logits);
  session.history_.pop_back();
  session.prefix_.tokens.pop_back();
  session.decoder_.truncate(static_cast<int>(session.prefix_.tokens.size()));
  refresh(session);
}

DesignCandidate Engine::copilot_finish(const CopilotSession& session) const {
  if (auto rule = grammar_->check(session.state_, Token::end())) {
    throw Error(ErrorCode::kGrammarViolation, required_after(session.state_.phase), *rule);
  }
  DesignSequence sequence = session.prefix_;
  sequence.tokens.push_back(Token::end());
  DesignValidation v = validate_design(*grammar_, sequence, session.requirements_, session.state_.max_parts);
  if (!v.report || !v.assembly) {
    throw Error(ErrorCode::kInternal, v.violation ? v.violation->message : "finished design did not validate");
  }
  return {design_id(*grammar_, sequence), std::move(sequence), session.requirements_, std::move(*v.assembly),
          *v.report};
}

void Engine::refresh(CopilotSession& s) const {
  const auto& vocab = grammar_->vocabulary();
  const Catalog& catalog = grammar_->catalog();
  const TokenMask mask = grammar_->valid_next(s.state_);
  const std::span<const float> view(s.logits_.data(), static_cast<std::size_t>(s.logits_.size()));
  const std::vector<double> p = model::masked_softmax(view, mask, 1.0);

  RecommendationSet recs;
  recs.end_admissible = mask[Vocabulary::kEnd];
  std::vector<int> order;
  for (int i = 0; i < vocab.size(); ++i) {
    if (mask[i]) order.push_back(i);
  }
  auto make = [&](int i) {
    return Recommendation{i, vocab.name(i), p[i], s.builder_.preview(vocab.token(i))};
  };
  if (s.state_.phase == Phase::kExpectPlacement) {
    for (int i : order) recs.ghosts.push_back(make(i));
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] > p[b]; });
  if (static_cast<int>(order.size()) > s.top_k_) order.resize(static_cast<std::size_t>(s.top_k_));
  for (int i : order) recs.ranked.push_back(make(i));
  s.recommendations_ = std::move(recs);

  const Assembly& assembly = s.builder_.assembly();
  const Kinematics k = simulate(assembly, catalog);
  const Costs c = tally_costs(assembly, catalog);
  s.metrics_ = {k.ratio, s.builder_.cursor(), s.builder_.axis(), s.builder_.spin(), c.cost_usd, c.weight_kg,
                s.state_.part_count, s.state_.max_parts};
}

}  // namespace gearformer

#include "gearformer/grammar.hpp"

#include <sstream>

#include "gearformer/error.hpp"

namespace gearformer {

namespace {

constexpr int kPlacementTokens = 9;  // 4 mesh + 4 bevel + 1 shaft

bool reserved_name(std::string_view name) {
  return name.empty() || name.front() == '<' || name.starts_with("mesh") || name.starts_with("bevel") ||
         name == "shaft" || name.find(' ') != std::string_view::npos;
}

}  // namespace

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::kExpectShaft:
      return "expect_shaft";
    case Phase::kExpectGearOrEnd:
      return "expect_gear_or_end";
    case Phase::kExpectMate:
      return "expect_mate";
    case Phase::kExpectPlacement:
      return "expect_placement";
    case Phase::kDone:
      return "done";
  }
  return "done";
}

int max_sequence_length(int max_parts) { return 2 + max_parts + max_parts / 3; }

Vocabulary::Vocabulary(const Catalog& catalog) : component_count_(catalog.size()) {
  names_ = {"<pad>", "<start>", "<end>"};
  for (const auto& spec : catalog.entries()) {
    if (reserved_name(spec.id)) {
      throw Error(ErrorCode::kBadRequest, "component id '" + spec.id + "' collides with a reserved token name");
    }
    names_.push_back(spec.id);
  }
  for (PlaneDir d : kAllPlaneDirs) names_.push_back("mesh" + std::string(plane_dir_name(d)));
  for (PlaneDir d : kAllPlaneDirs) names_.push_back("bevel" + std::string(plane_dir_name(d)));
  names_.push_back("shaft");
}

int Vocabulary::index_of(const Token& token) const {
  const int placements = kFirstComponent + static_cast<int>(component_count_);
  switch (token.kind) {
    case TokenKind::kPad:
      return kPad;
    case TokenKind::kStart:
      return kStart;
    case TokenKind::kEnd:
      return kEnd;
    case TokenKind::kComponent:
      if (token.component >= component_count_) throw Error(ErrorCode::kBadRequest, "component index out of range");
      return kFirstComponent + static_cast<int>(token.component);
    case TokenKind::kPlaceMesh:
      return placements + static_cast<int>(token.dir);
    case TokenKind::kPlaceBevel:
      return placements + 4 + static_cast<int>(token.dir);
    case TokenKind::kPlaceShaft:
      return placements + 8;
  }
  return kPad;
}

Token Vocabulary::token(int index) const {
  const int placements = kFirstComponent + static_cast<int>(component_count_);
  if (index < 0 || index >= size()) throw Error(ErrorCode::kBadRequest, "token index out of range");
  if (index == kPad) return {TokenKind::kPad};
  if (index == kStart) return Token::start();
  if (index == kEnd) return Token::end();
  if (index < placements) return Token::part(static_cast<std::size_t>(index - kFirstComponent));
  const int offset = index - placements;
  if (offset < 4) return Token::mesh(static_cast<PlaneDir>(offset));
  if (offset < 8) return Token::bevel(static_cast<PlaneDir>(offset - 4));
  return {TokenKind::kPlaceShaft};
}

std::optional<int> Vocabulary::parse(std::string_view name) const {
  for (int i = 0; i < size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

Grammar::Grammar(Catalog catalog) : catalog_(std::move(catalog)), vocabulary_(catalog_) {
  static_assert(kPlacementTokens == 9);
}

GrammarState Grammar::initial_state(int max_parts, Axis input_axis) const {
  if (max_parts < 1) throw Error(ErrorCode::kBadRequest, "max_parts must be at least 1");
  GrammarState state;
  state.max_parts = max_parts;
  state.current_axis = input_axis;
  return state;
}

std::optional<std::string> Grammar::check(const GrammarState& state, const Token& token) const {
  if (state.phase == Phase::kDone) return "sequence-complete";
  if (token.kind == TokenKind::kPad) return "pad-not-allowed";
  if (token.kind == TokenKind::kStart) return "start-only-first";
  if (token.kind == TokenKind::kPlaceShaft) return "shaft-placement-implicit";
  if (token.kind == TokenKind::kComponent && token.component >= catalog_.size()) return "unknown-component";

  const bool is_part = token.kind == TokenKind::kComponent;
  const bool is_placement = token.kind == TokenKind::kPlaceMesh || token.kind == TokenKind::kPlaceBevel;

  switch (state.phase) {
    case Phase::kExpectShaft: {
      if (token.kind == TokenKind::kEnd) {
        return state.part_count >= 1 ? std::nullopt : std::optional<std::string>("shaft-required");
      }
      if (!is_part || catalog_.at(token.component).is_gear()) return "shaft-required";
      if (state.part_count >= state.max_parts) return "part-limit";
      return std::nullopt;
    }
    case Phase::kExpectGearOrEnd: {
      if (token.kind == TokenKind::kEnd) return std::nullopt;
      if (!is_part || !catalog_.at(token.component).is_gear()) return "gear-or-end-required";
      // The pair needs both slots.
      if (state.part_count + 2 > state.max_parts) return "part-limit";
      return std::nullopt;
    }
    case Phase::kExpectMate: {
      if (!is_part || !catalog_.at(token.component).is_gear()) return "mate-gear-required";
      const auto& driver = catalog_.at(*state.pending_gear);
      const auto& mate = catalog_.at(token.component);
      if (mate.kind != driver.kind) return "mate-kind-mismatch";
      if (mate.module_mm != driver.module_mm) return "module-mismatch";
      if (state.part_count >= state.max_parts) return "part-limit";
      return std::nullopt;
    }
    case Phase::kExpectPlacement: {
      if (!is_placement) return "placement-required";
      const bool bevel_pair = catalog_.at(*state.pending_gear).kind == ComponentKind::kBevelGear;
      if (bevel_pair != (token.kind == TokenKind::kPlaceBevel)) return "placement-kind-mismatch";
      return std::nullopt;
    }
    case Phase::kDone:
      break;
  }
  return "sequence-complete";
}

TokenMask Grammar::valid_next(const GrammarState& state) const {
  if (state.phase == Phase::kDone) throw Error(ErrorCode::kInternal, "valid_next called on a completed design");
  TokenMask mask(static_cast<std::size_t>(vocabulary_.size()), false);
  for (int i = 0; i < vocabulary_.size(); ++i) mask[i] = admits(state, vocabulary_.token(i));
  return mask;
}

std::optional<std::string> Grammar::try_advance(GrammarState& state, const Token& token) const {
  if (auto rule = check(state, token)) return rule;
  if (token.kind == TokenKind::kEnd) {
    state.phase = Phase::kDone;
    return std::nullopt;
  }
  switch (state.phase) {
    case Phase::kExpectShaft:
      state.phase = Phase::kExpectGearOrEnd;
      ++state.part_count;
      break;
    case Phase::kExpectGearOrEnd:
      state.phase = Phase::kExpectMate;
      state.pending_gear = token.component;
      ++state.part_count;
      break;
    case Phase::kExpectMate:
      state.phase = Phase::kExpectPlacement;
      ++state.part_count;
      break;
    case Phase::kExpectPlacement:
      if (token.kind == TokenKind::kPlaceBevel) state.current_axis = resolve(state.current_axis, token.dir);
      state.pending_gear.reset();
      state.phase = Phase::kExpectShaft;
      break;
    case Phase::kDone:
      break;
  }
  return std::nullopt;
}

GrammarState Grammar::advance(const GrammarState& state, const Token& token) const {
  GrammarState next = state;
  if (auto rule = try_advance(next, token)) {
    throw Error(ErrorCode::kGrammarViolation,
                "token '" + vocabulary_.name(token) + "' not admitted in phase " +
                    std::string(phase_name(state.phase)) + " (" + *rule + ")",
                *rule);
  }
  return next;
}

std::optional<Violation> Grammar::validate(const DesignSequence& sequence, int max_parts, Axis input_axis) const {
  if (sequence.tokens.empty() || sequence.tokens.front().kind != TokenKind::kStart) {
    return Violation{0, "start-required", "sequence must begin with <start>"};
  }
  GrammarState state = initial_state(max_parts, input_axis);
  for (std::size_t i = 1; i < sequence.tokens.size(); ++i) {
    if (auto rule = try_advance(state, sequence.tokens[i])) {
      return Violation{i, *rule,
                       "token " + std::to_string(i) + " ('" + vocabulary_.name(sequence.tokens[i]) +
                           "') violates " + *rule};
    }
  }
  if (state.phase != Phase::kDone) {
    return Violation{sequence.tokens.size(), "incomplete", "sequence does not end with <end>"};
  }
  return std::nullopt;
}

GrammarState Grammar::replay_prefix(const DesignSequence& sequence, int max_parts, Axis input_axis) const {
  if (sequence.tokens.empty() || sequence.tokens.front().kind != TokenKind::kStart) {
    throw Error(ErrorCode::kGrammarViolation, "sequence must begin with <start>", "start-required");
  }
  GrammarState state = initial_state(max_parts, input_axis);
  for (std::size_t i = 1; i < sequence.tokens.size(); ++i) state = advance(state, sequence.tokens[i]);
  return state;
}

std::vector<std::string> Grammar::token_names(const DesignSequence& sequence) const {
  std::vector<std::string> names;
  names.reserve(sequence.tokens.size());
  for (const auto& t : sequence.tokens) names.push_back(vocabulary_.name(t));
  return names;
}

DesignSequence Grammar::from_names(std::span<const std::string> names) const {
  DesignSequence sequence;
  for (const auto& name : names) {
    auto index = vocabulary_.parse(name);
    if (!index) throw Error(ErrorCode::kBadRequest, "unknown token '" + name + "'");
    sequence.tokens.push_back(vocabulary_.token(*index));
  }
  return sequence;
}

std::string Grammar::serialize(const DesignSequence& sequence) const {
  std::string out;
  for (const auto& name : token_names(sequence)) {
    if (!out.empty()) out += ' ';
    out += name;
  }
  return out;
}

DesignSequence Grammar::parse(std::string_view text) const {
  std::vector<std::string> names;
  std::istringstream in{std::string(text)};
  for (std::string word; in >> word;) names.push_back(word);
  return from_names(names);
}

}  // namespace gearformer

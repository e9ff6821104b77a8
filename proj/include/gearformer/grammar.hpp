#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gearformer/catalog.hpp"
#include "gearformer/geometry.hpp"

namespace gearformer {

enum class TokenKind : std::uint8_t { kPad, kStart, kEnd, kComponent, kPlaceMesh, kPlaceBevel, kPlaceShaft };

struct Token {
  TokenKind kind = TokenKind::kPad;
  std::size_t component = 0;          // catalog index, kComponent only
  PlaneDir dir = PlaneDir::kPosU;     // kPlaceMesh / kPlaceBevel only

  static Token start() { return {TokenKind::kStart}; }
  static Token end() { return {TokenKind::kEnd}; }
  static Token part(std::size_t catalog_index) { return {TokenKind::kComponent, catalog_index}; }
  static Token mesh(PlaneDir d) { return {TokenKind::kPlaceMesh, 0, d}; }
  static Token bevel(PlaneDir d) { return {TokenKind::kPlaceBevel, 0, d}; }

  friend bool operator==(const Token& a, const Token& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == TokenKind::kComponent) return a.component == b.component;
    if (a.kind == TokenKind::kPlaceMesh || a.kind == TokenKind::kPlaceBevel) return a.dir == b.dir;
    return true;
  }
};

// Integer vocabulary over a catalog. Layout of indices:
//   0 <pad>, 1 <start>, 2 <end>, 3 .. 3+C-1 components in catalog order,
//   then mesh+u, mesh-u, mesh+v, mesh-v, bevel+u, bevel-u, bevel+v, bevel-v,
//   and finally the reserved "shaft" placement token.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kStart = 1;
  static constexpr int kEnd = 2;
  static constexpr int kFirstComponent = 3;

  explicit Vocabulary(const Catalog& catalog);

  int size() const { return static_cast<int>(names_.size()); }
  int index_of(const Token& token) const;
  Token token(int index) const;
  const std::string& name(int index) const { return names_.at(index); }
  std::string name(const Token& token) const { return name(index_of(token)); }
  std::optional<int> parse(std::string_view name) const;

 private:
  std::size_t component_count_;
  std::vector<std::string> names_;
};

enum class Phase : std::uint8_t { kExpectShaft, kExpectGearOrEnd, kExpectMate, kExpectPlacement, kDone };

std::string_view phase_name(Phase phase);

struct GrammarState {
  Phase phase = Phase::kExpectShaft;
  Axis current_axis = Axis::kPosX;
  std::optional<std::size_t> pending_gear;  // driver of the open gear pair
  int part_count = 0;
  int max_parts = 10;

  friend bool operator==(const GrammarState&, const GrammarState&) = default;
};

using TokenMask = std::vector<bool>;

struct DesignSequence {
  std::vector<Token> tokens;

  bool complete() const { return !tokens.empty() && tokens.back().kind == TokenKind::kEnd; }
  friend bool operator==(const DesignSequence&, const DesignSequence&) = default;
};

struct Violation {
  std::size_t index = 0;  // offending token position in the sequence
  std::string rule;       // short machine name, e.g. "module-mismatch"
  std::string message;
};

inline constexpr int kDefaultMaxParts = 10;

// Upper bound on the number of tokens in a complete design with `max_parts`
// components: <start> + parts + one placement per gear pair + <end>.
int max_sequence_length(int max_parts);

// Serial-chain design grammar over a catalog:
//   design := <start> shaft stage* <end>
//   stage  := gear mate placement [shaft]
// where the optional trailing shaft is required before the next stage. The
// mate must share kind and module with the driver; spur pairs take a mesh
// placement, bevel pairs a bevel placement. A driver gear is only admitted
// when two part slots remain, so no prefix can dead-end at the part cap.
class Grammar {
 public:
  explicit Grammar(Catalog catalog);

  const Catalog& catalog() const { return catalog_; }
  const Vocabulary& vocabulary() const { return vocabulary_; }

  // Throws Error(kBadRequest) if max_parts < 1.
  GrammarState initial_state(int max_parts = kDefaultMaxParts, Axis input_axis = Axis::kPosX) const;

  // Returns the violated rule, or nullopt if `token` is admitted in `state`.
  std::optional<std::string> check(const GrammarState& state, const Token& token) const;
  bool admits(const GrammarState& state, const Token& token) const { return !check(state, token); }

  // Throws Error(kInternal) when called on a Done state.
  TokenMask valid_next(const GrammarState& state) const;

  // Throws Error(kGrammarViolation) with the rule name as detail.
  GrammarState advance(const GrammarState& state, const Token& token) const;
  // Non-throwing variant for hot loops; returns the violated rule.
  std::optional<std::string> try_advance(GrammarState& state, const Token& token) const;

  // Replays a whole sequence (which must begin with <start>). ok iff every
  // token is admitted and the sequence is complete.
  std::optional<Violation> validate(const DesignSequence& sequence, int max_parts = kDefaultMaxParts,
                                    Axis input_axis = Axis::kPosX) const;
  // Same replay, but an incomplete prefix is accepted. Returns the state
  // reached after the last token.
  GrammarState replay_prefix(const DesignSequence& sequence, int max_parts = kDefaultMaxParts,
                             Axis input_axis = Axis::kPosX) const;

  // Structured-text form: token names joined by single spaces.
  std::string serialize(const DesignSequence& sequence) const;
  DesignSequence parse(std::string_view text) const;
  std::vector<std::string> token_names(const DesignSequence& sequence) const;
  DesignSequence from_names(std::span<const std::string> names) const;

 private:
  Catalog catalog_;
  Vocabulary vocabulary_;
};

}  // namespace gearformer

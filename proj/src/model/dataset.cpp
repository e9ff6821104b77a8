#include "gearformer/model/dataset.hpp"

#include <sstream>

#include "gearformer/error.hpp"
#include "gearformer/io.hpp"
#include "gearformer/model/model.hpp"

namespace gearformer::model {

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return static_cast<std::size_t>(x % n);
}

double uniform_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

DesignSequence random_walk(const Grammar& grammar, std::mt19937_64& rng, int max_parts) {
  DesignSequence sequence{{Token::start()}};
  GrammarState state = grammar.initial_state(max_parts);
  std::vector<int> admissible;
  while (state.phase != Phase::kDone) {
    const TokenMask mask = grammar.valid_next(state);
    admissible.clear();
    for (int i = 0; i < static_cast<int>(mask.size()); ++i) {
      if (mask[i]) admissible.push_back(i);
    }
    const Token token = grammar.vocabulary().token(admissible[uniform_index(rng, admissible.size())]);
    state = grammar.advance(state, token);
    sequence.tokens.push_back(token);
  }
  return sequence;
}

std::vector<TrainingExample> generate_dataset(const Grammar& grammar, int n, std::uint64_t seed, int max_parts) {
  if (n < 1) throw Error(ErrorCode::kBadRequest, "dataset size must be at least 1");
  std::mt19937_64 rng(seed);
  std::vector<TrainingExample> examples;
  examples.reserve(static_cast<std::size_t>(n));
  while (static_cast<int>(examples.size()) < n) {
    DesignSequence sequence = random_walk(grammar, rng, max_parts);
    const Assembly assembly = build_assembly(grammar, sequence, {}, max_parts);
    if (!check_interference(assembly, grammar.catalog()).empty()) continue;
    examples.push_back({requirements_from(simulate(assembly, grammar.catalog())), std::move(sequence)});
  }
  return examples;
}

TokenExample to_token_example(const Grammar& grammar, const TrainingExample& example, int max_parts) {
  const auto& tokens = example.sequence.tokens;
  if (tokens.size() < 2) throw Error(ErrorCode::kBadRequest, "training sequence too short");
  TokenExample out;
  const auto encoding = encode_requirements(example.requirements);
  out.features.assign(encoding.begin(), encoding.end());
  const int vocab = grammar.vocabulary().size();
  GrammarState state = grammar.initial_state(max_parts);
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    out.inputs.push_back(grammar.vocabulary().index_of(tokens[t]));
    out.targets.push_back(grammar.vocabulary().index_of(tokens[t + 1]));
    const TokenMask mask = grammar.valid_next(state);
    for (int j = 0; j < vocab; ++j) out.masks.push_back(mask[j] ? 1 : 0);
    state = grammar.advance(state, tokens[t + 1]);
  }
  return out;
}

std::string dataset_to_jsonl(const Grammar& grammar, const std::vector<TrainingExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    Json record = {{"requirements", requirements_to_json(ex.requirements)},
                   {"sequence", grammar.token_names(ex.sequence)}};
    out += record.dump();
    out += '\n';
  }
  return out;
}

std::vector<TrainingExample> dataset_from_jsonl(const Grammar& grammar, std::string_view text) {
  std::vector<TrainingExample> examples;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const Json record = Json::parse(line);
      TrainingExample ex;
      ex.requirements = requirements_from_json(record.at("requirements"));
      ex.sequence = grammar.from_names(record.at("sequence").get<std::vector<std::string>>());
      examples.push_back(std::move(ex));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kBadRequest, "dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return examples;
}

void save_dataset_file(const Grammar& grammar, const std::vector<TrainingExample>& examples, const std::string& path) {
  write_text_file(path, dataset_to_jsonl(grammar, examples));
}

std::vector<TrainingExample> load_dataset_file(const Grammar& grammar, const std::string& path) {
  return dataset_from_jsonl(grammar, read_text_file(path));
}

}  // namespace gearformer::model

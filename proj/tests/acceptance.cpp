// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Trains the desk model with the default config on first use and caches it
// (with its loss curve) in the cache directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "gearformer/engine/engine.hpp"
#include "gearformer/engine/pareto.hpp"
#include "gearformer/error.hpp"
#include "gearformer/io.hpp"
#include "gearformer/model/dataset.hpp"
#include "gearformer/model/trainer.hpp"
#include "support/oracles.hpp"

using namespace gearformer;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kTrainExamples = 50000;
constexpr std::uint64_t kTrainDataSeed = 2024;
constexpr std::uint64_t kHeldOutSeed = 99;

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << "  " << name << ": " << detail << std::endl;
  if (!pass) ++failures;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::vector<int> indices(const Grammar& g, const DesignSequence& s) { return model::token_indices(g, s); }

std::vector<Requirements> held_out(const Grammar& g, int n) {
  std::vector<Requirements> out;
  for (const auto& ex : model::generate_dataset(g, n, kHeldOutSeed)) out.push_back(ex.requirements);
  return out;
}

struct Trained {
  std::shared_ptr<const model::Model> model;
  std::vector<model::EpochStats> curve;
  bool cached = false;
};

// Reuses the cached model only if it was trained with exactly today's
// default config and dataset.
Trained desk_model(const Grammar& g, const fs::path& dir) {
  const model::TrainConfig config;
  const Json key = {{"config", model::train_config_to_json(config)},
                    {"examples", kTrainExamples},
                    {"data_seed", kTrainDataSeed},
                    {"catalog", g.catalog().version()}};
  const fs::path params = dir / "desk.gfm";
  const fs::path meta = dir / "desk.json";
  if (fs::exists(params) && fs::exists(meta)) {
    const Json cached = Json::parse(read_text_file(meta.string()));
    if (cached.value("key", Json()) == key) {
      Trained t{std::make_shared<const model::Model>(model::load_params_file(params.string())), {}, true};
      for (const auto& e : cached["curve"]) {
        t.curve.push_back({e["epoch"].get<int>(), e["masked_ce"].get<double>(), e["validity"].get<double>(),
                           e["seconds"].get<double>()});
      }
      return t;
    }
  }
  std::cout << "training desk model (" << kTrainExamples << " examples, " << config.epochs << " epochs)" << std::endl;
  const auto data = model::generate_dataset(g, kTrainExamples, kTrainDataSeed);
  auto result = model::train(g, data, config, [](const model::EpochStats& e) {
    std::cout << "  epoch " << e.epoch << " masked_ce " << fmt(e.masked_ce, 6) << " validity " << fmt(e.validity, 6)
              << " (" << fmt(e.seconds, 3) << " s)" << std::endl;
  });
  fs::create_directories(dir);
  model::save_params_file(result.model, params.string());
  write_text_file(meta.string(), Json{{"key", key}, {"curve", model::loss_curve_to_json(result.curve)}}.dump(2));
  return {std::make_shared<const model::Model>(std::move(result.model)), std::move(result.curve), false};
}

// All token strings <start> x1..xk <end>, k <= 5, that the grammar accepts,
// found by walking the masks.
void grammar_strings(const Grammar& g, const GrammarState& s, std::vector<int>& prefix, int budget,
                     std::set<std::vector<int>>& out) {
  const TokenMask mask = g.valid_next(s);
  if (mask[Vocabulary::kEnd]) {
    prefix.push_back(Vocabulary::kEnd);
    out.insert(prefix);
    prefix.pop_back();
  }
  if (budget == 0) return;
  for (int t = 0; t < g.vocabulary().size(); ++t) {
    if (!mask[t] || t == Vocabulary::kEnd) continue;
    prefix.push_back(t);
    grammar_strings(g, g.advance(s, g.vocabulary().token(t)), prefix, budget - 1, out);
    prefix.pop_back();
  }
}

void completeness_and_simulator(const Grammar& g) {
  constexpr int kMiddle = 5;  // <start> S g g place S <end> holds four components
  const int v = g.vocabulary().size();

  // Brute force: every string over the full vocabulary.
  std::set<std::vector<int>> brute;
  std::vector<int> s;
  long strings = 0;
  for (int k = 0; k <= kMiddle; ++k) {
    std::vector<int> digits(static_cast<std::size_t>(k), 0);
    s.assign(static_cast<std::size_t>(k) + 2, 0);
    s.front() = Vocabulary::kStart;
    s.back() = Vocabulary::kEnd;
    while (true) {
      for (int i = 0; i < k; ++i) s[static_cast<std::size_t>(i) + 1] = digits[static_cast<std::size_t>(i)];
      ++strings;
      if (oracle::accepts(g.catalog(), s, kDefaultMaxParts)) brute.insert(s);
      int i = k - 1;
      while (i >= 0 && ++digits[static_cast<std::size_t>(i)] == v) digits[static_cast<std::size_t>(i--)] = 0;
      if (i < 0) break;
    }
  }
  std::set<std::vector<int>> accepted;
  std::vector<int> prefix{Vocabulary::kStart};
  grammar_strings(g, g.initial_state(), prefix, kMiddle, accepted);
  const auto generated = oracle::enumerate_designs(g.catalog(), 4);
  const std::set<std::vector<int>> production(generated.begin(), generated.end());
  report(accepted == brute && production == brute, "grammar completeness (<= 4 components)",
         std::to_string(accepted.size()) + " grammar designs, " + std::to_string(brute.size()) +
             " oracle-accepted of " + std::to_string(strings) + " strings, " + std::to_string(production.size()) +
             " from production rules");

  long mismatches = 0;
  double worst = 0.0;
  for (const auto& d : accepted) {
    DesignSequence seq;
    for (int t : d) seq.tokens.push_back(g.vocabulary().token(t));
    const Kinematics k = simulate(build_assembly(g, seq), g.catalog());
    const auto p = oracle::propagate(g.catalog(), d);
    const double ratio_rel = std::abs(k.ratio - p.ratio) / p.ratio;
    const double pos_rel = (k.output_position - p.position).norm() / std::max(1.0, p.position.norm());
    worst = std::max({worst, ratio_rel, pos_rel});
    const bool ok = ratio_rel <= 1e-9 && pos_rel <= 1e-9 && unit_vector(k.output_axis).isApprox(p.axis) &&
                    k.output_direction == p.direction;
    mismatches += !ok;
  }
  report(mismatches == 0 && !accepted.empty(), "simulator oracle (<= 4 components)",
         std::to_string(accepted.size() - static_cast<std::size_t>(mismatches)) + "/" +
             std::to_string(accepted.size()) + " match, worst relative deviation " + fmt(worst, 3));
}

void soundness(const Engine& e) {
  int valid = 0, total = 10000;
  for (int i = 0; i < total; ++i) {
    Requirements r;
    r.target_ratio = std::exp(((i * 37) % 100) / 25.0 - 2.0);
    r.target_position = Vec3((i % 7) * 40.0, (i % 5) * 30.0 - 60.0, (i % 3) * 25.0);
    r.target_axis = kAllAxes[static_cast<std::size_t>(i % 6)];
    const auto gs = e.generate_one(r, SamplingMode::kStochastic, 1.0, static_cast<std::uint64_t>(i));
    valid += gs.complete && !e.grammar().validate(gs.sequence, e.max_parts());
  }
  report(valid == total, "grammar soundness", std::to_string(valid) + "/" + std::to_string(total) + " sampled sequences valid");
}

void pareto() {
  std::mt19937_64 rng(2718);
  int exact = 0;
  for (int set = 0; set < 1000; ++set) {
    std::vector<std::pair<double, double>> pts(1 + model::uniform_index(rng, 300));
    const int grid = set % 3 == 0 ? 0 : static_cast<int>(3 + set % 17);
    for (auto& p : pts) {
      if (grid == 0) {
        p = {model::uniform_unit(rng), model::uniform_unit(rng)};
      } else {
        p = {static_cast<double>(model::uniform_index(rng, static_cast<std::size_t>(grid))),
             static_cast<double>(model::uniform_index(rng, static_cast<std::size_t>(grid)))};
      }
    }
    exact += pareto_front(pts) == oracle::pareto_brute(pts);
  }
  report(exact == 1000, "pareto correctness", std::to_string(exact) + "/1000 sets match the O(n^2) oracle");
}

void explore_contract(const Engine& e, const std::vector<Requirements>& reqs) {
  int full = 0, revalidated = 0, returned = 0;
  for (int trial = 0; trial < 20; ++trial) {
    SamplingConfig c;
    c.seed = 1000 + static_cast<std::uint64_t>(trial);
    const auto& r = reqs[static_cast<std::size_t>(trial)];
    const auto result = e.explore(r, 100, c);
    std::set<std::string> ids;
    for (const auto& cand : result.candidates) {
      ids.insert(cand.id);
      const auto v = validate_design(e.grammar(), cand.sequence, r, e.max_parts());
      revalidated += v.feasible() && v.report == cand.report;
      ++returned;
    }
    full += result.candidates.size() == 100 && ids.size() == 100 && !result.diagnostics.exhausted;
  }
  report(full >= 19 && revalidated == returned, "explore contract",
         std::to_string(full) + "/20 trials returned 100 distinct feasible designs within the cap; " +
             std::to_string(revalidated) + "/" + std::to_string(returned) + " re-validate feasible");
}

void training_sanity(const Trained& t, const Engine& e, const std::vector<Requirements>& reqs) {
  const double first = t.curve.front().masked_ce, last = t.curve.back().masked_ce;
  const double ratio = last / first;
  std::vector<Requirements> rollouts(reqs.begin(), reqs.begin() + 1000);
  const auto v = model::unmasked_greedy_validity(e.model(), e.grammar(), rollouts, e.max_parts());
  report(ratio < 0.5 && v.token_rate() >= 0.9, "training sanity",
         "masked CE " + fmt(first) + " -> " + fmt(last) + " over " + std::to_string(t.curve.size()) +
             " epochs (final/first " + fmt(ratio, 3) + ", need < 0.5); unmasked greedy validity " +
             fmt(100 * v.token_rate(), 4) + "% of tokens, " + fmt(100 * v.rollout_rate(), 4) + "% of " +
             std::to_string(v.rollouts) + " rollouts (need >= 90%)" + (t.cached ? " [cached model]" : ""));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void requirement_following(const Engine& e, const std::vector<Requirements>& reqs) {
  std::vector<double> model_ratio, model_pos, base_ratio, base_pos;
  std::mt19937_64 rng(4242);
  for (int i = 0; i < 200; ++i) {
    const auto& r = reqs[static_cast<std::size_t>(i)];
    const auto gs = e.generate_one(r, SamplingMode::kGreedy, 1.0, 0);
    const auto m = validate_design(e.grammar(), gs.sequence, r, e.max_parts());
    const auto b = validate_design(e.grammar(), model::random_walk(e.grammar(), rng, e.max_parts()), r, e.max_parts());
    model_ratio.push_back(m.report->ratio_error);
    model_pos.push_back(m.report->position_error);
    base_ratio.push_back(b.report->ratio_error);
    base_pos.push_back(b.report->position_error);
  }
  const double mr = median(model_ratio), br = median(base_ratio), mp = median(model_pos), bp = median(base_pos);
  report(mr < br && mp < bp, "requirement following",
         "median ratio_error " + fmt(mr) + " vs baseline " + fmt(br) + "; median position_error " + fmt(mp) +
             " mm vs baseline " + fmt(bp) + " mm");
}

void temperature_diversity(const Engine& e, const std::vector<Requirements>& reqs) {
  int wins = 0;
  std::string counts;
  for (int rep = 0; rep < 10; ++rep) {
    const auto& r = reqs[static_cast<std::size_t>(500 + rep)];
    std::set<std::vector<int>> cold, hot;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const std::uint64_t s = 7919 * static_cast<std::uint64_t>(rep) + seed;
      cold.insert(indices(e.grammar(), e.generate_one(r, SamplingMode::kStochastic, 0.5, s).sequence));
      hot.insert(indices(e.grammar(), e.generate_one(r, SamplingMode::kStochastic, 1.5, s).sequence));
    }
    wins += hot.size() > cold.size();
    counts += (rep ? " " : "") + std::to_string(cold.size()) + "/" + std::to_string(hot.size());
  }
  report(wins >= 9, "temperature diversity",
         std::to_string(wins) + "/10 repetitions more distinct at T=1.5 (distinct T=0.5/T=1.5: " + counts + ")");
}

bool same_session(const CopilotSession& a, const CopilotSession& b) {
  if (!(a.prefix() == b.prefix())) return false;
  const auto& ra = a.recommendations().ranked;
  const auto& rb = b.recommendations().ranked;
  if (ra.size() != rb.size()) return false;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].token != rb[i].token || ra[i].probability != rb[i].probability) return false;
  }
  const auto& ma = a.metrics();
  const auto& mb = b.metrics();
  return ma.ratio == mb.ratio && ma.cursor == mb.cursor && ma.axis == mb.axis && ma.direction == mb.direction &&
         ma.cost_usd == mb.cost_usd && ma.weight_kg == mb.weight_kg && ma.parts_used == mb.parts_used;
}

void incremental_equals_batch(const Engine& e, const std::vector<Requirements>& reqs) {
  const Grammar& g = e.grammar();
  std::mt19937_64 rng(31337);
  int good = 0;
  long checks = 0;
  for (int path = 0; path < 1000; ++path) {
    const auto& r = reqs[static_cast<std::size_t>(path % 1000)];
    auto s = e.copilot_start(r);
    bool ok = true;
    while (ok) {
      const TokenMask mask = g.valid_next(s.state());
      std::vector<int> options;
      for (int i = 0; i < g.vocabulary().size(); ++i) {
        if (mask[i] && i != Vocabulary::kEnd) options.push_back(i);
      }
      if (options.empty() || model::uniform_unit(rng) < 0.08) break;
      e.copilot_step(s, options[model::uniform_index(rng, options.size())]);
      if (s.can_undo() && model::uniform_unit(rng) < 0.2) e.copilot_undo(s);

      // Rebuild from scratch and compare.
      const Assembly batch = build_assembly(g, s.prefix(), {}, e.max_parts());
      const auto& inc = s.assembly();
      ok &= batch.parts.size() == inc.parts.size() && batch.mesh_links == inc.mesh_links &&
            batch.mounts == inc.mounts && batch.pending_mate == inc.pending_mate;
      for (std::size_t i = 0; ok && i < batch.parts.size(); ++i) {
        ok &= (batch.parts[i].center - inc.parts[i].center).norm() <= 1e-12 &&
              batch.parts[i].axis == inc.parts[i].axis && batch.parts[i].component == inc.parts[i].component;
      }
      ok &= (batch.output_pose.center - inc.output_pose.center).norm() <= 1e-12 &&
            batch.output_pose.spin == inc.output_pose.spin;
      const auto state = g.replay_prefix(s.prefix(), e.max_parts());
      ok &= state.part_count == s.metrics().parts_used && state.phase == s.state().phase;
      auto fresh = e.copilot_start(r);
      for (std::size_t i = 1; i < s.prefix().tokens.size(); ++i) {
        e.copilot_step(fresh, g.vocabulary().index_of(s.prefix().tokens[i]));
      }
      ok &= same_session(s, fresh);
      ++checks;
    }
    good += ok;
  }
  report(good == 1000, "incremental = batch",
         std::to_string(good) + "/1000 copilot paths match a rebuild (" + std::to_string(checks) + " steps checked)");
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const std::size_t i = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
  return v[std::min(i, v.size() - 1)];
}

void latency(const Engine& e, const std::vector<Requirements>& reqs) {
  const Grammar& g = e.grammar();
  std::vector<double> steps;
  std::mt19937_64 rng(5);
  for (int n = 0; n < 40; ++n) {
    auto s = e.copilot_start(reqs[static_cast<std::size_t>(n)]);
    while (true) {
      const TokenMask mask = g.valid_next(s.state());
      std::vector<int> options;
      for (int i = 0; i < g.vocabulary().size(); ++i) {
        if (mask[i] && i != Vocabulary::kEnd) options.push_back(i);
      }
      if (options.empty()) break;
      const auto t0 = Clock::now();
      e.copilot_step(s, options[model::uniform_index(rng, options.size())]);
      steps.push_back(1000.0 * seconds_since(t0));
    }
  }
  const double p95 = percentile(steps, 0.95);
  std::vector<double> batches;
  for (int rep = 0; rep < 3; ++rep) {
    SamplingConfig c;
    c.seed = 77 + static_cast<std::uint64_t>(rep);
    const auto t0 = Clock::now();
    e.explore(reqs[static_cast<std::size_t>(600 + rep)], 16, c);
    batches.push_back(seconds_since(t0));
  }
  const double worst_batch = *std::max_element(batches.begin(), batches.end());
  report(p95 <= 150.0 && worst_batch <= 5.0, "latency",
         "copilot_step p95 " + fmt(p95, 3) + " ms over " + std::to_string(steps.size()) +
             " steps (limit 150 ms); explore of 16 worst " + fmt(worst_batch, 3) + " s over 3 runs (limit 5 s); " +
             std::to_string(std::thread::hardware_concurrency()) + " hardware threads");
}

void round_trips(const Engine& e, const std::vector<Requirements>& reqs) {
  const Grammar& g = e.grammar();
  const model::Model back = model::load_params(model::save_params(e.model()));
  std::mt19937_64 rng(8);
  int same = 0;
  for (int n = 0; n < 100; ++n) {
    const DesignSequence full = model::random_walk(g, rng, e.max_parts());
    const std::size_t cut = 1 + model::uniform_index(rng, full.tokens.size() - 1);
    const DesignSequence prefix{{full.tokens.begin(), full.tokens.begin() + static_cast<long>(cut)}};
    const TokenMask mask = g.valid_next(g.replay_prefix(prefix, e.max_parts()));
    const auto enc = model::encode_requirements(reqs[static_cast<std::size_t>(n)]);
    same += model::next_token_distribution(back, g, enc, prefix, mask).probabilities ==
            model::next_token_distribution(e.model(), g, enc, prefix, mask).probabilities;
  }
  SamplingConfig c;
  c.seed = 3;
  const auto& r = reqs[700];
  const auto found = e.explore(r, 100, c);
  int identical = 0;
  for (const auto& cand : found.candidates) {
    DesignFile f{g.catalog().version(), e.max_parts(), r, cand.sequence, cand.report};
    const DesignFile in = read_design_file(g, write_design_file(g, f));
    const auto v = validate_design(g, in.sequence, in.requirements, in.max_parts);
    identical += v.report && *v.report == cand.report && in.report == cand.report;
  }
  report(same == 100 && identical == static_cast<int>(found.candidates.size()) && !found.candidates.empty(),
         "round-trips",
         std::to_string(same) + "/100 distributions bit-identical after params reload (float32); " +
             std::to_string(identical) + "/" + std::to_string(found.candidates.size()) +
             " design files revalidate to identical reports");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the gear-train designer"};
  std::string cache = GEARFORMER_ACCEPTANCE_CACHE;
  app.add_option("--cache", cache, "Directory for the trained desk model");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto grammar = std::make_shared<const Grammar>(default_catalog());
    const auto reqs = held_out(*grammar, 1000);
    const auto t0 = Clock::now();

    completeness_and_simulator(*grammar);
    pareto();

    const Trained trained = desk_model(*grammar, cache);
    const Engine engine(grammar, trained.model);
    soundness(engine);
    explore_contract(engine, reqs);
    training_sanity(trained, engine, reqs);
    requirement_following(engine, reqs);
    temperature_diversity(engine, reqs);
    incremental_equals_batch(engine, reqs);
    latency(engine, reqs);
    round_trips(engine, reqs);

    std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
              << " (" << fmt(seconds_since(t0), 4) << " s)" << std::endl;
  } catch (const Error& e) {
    std::cout << "FAIL  acceptance run aborted: " << e.what() << std::endl;
    return 1;
  }
  return failures ? 1 : 0;
}

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "gearformer/catalog.hpp"
#include "gearformer/engine/engine.hpp"
#include "gearformer/error.hpp"
#include "gearformer/io.hpp"
#include "gearformer/model/dataset.hpp"
#include "gearformer/model/trainer.hpp"
#include "gearformer/service/service.hpp"

using namespace gearformer;

namespace {

struct RequirementFlags {
  std::string file;
  double ratio = 1.0;
  std::vector<double> position{0.0, 0.0, 0.0};
  std::string axis = "+X";
  int direction = 1;
};

void add_requirement_flags(CLI::App* cmd, RequirementFlags& f) {
  cmd->add_option("--requirements", f.file, "Requirements JSON file (overrides the flags below)");
  cmd->add_option("--ratio", f.ratio, "Target speed ratio (output / input)");
  cmd->add_option("--position", f.position, "Target output position x y z in mm")->expected(3);
  cmd->add_option("--axis", f.axis, "Target output axis, e.g. +Y");
  cmd->add_option("--direction", f.direction, "Target spin direction, 1 or -1");
}

Requirements requirements_of(const RequirementFlags& f) {
  if (!f.file.empty()) return requirements_from_json(Json::parse(read_text_file(f.file)));
  Json doc = {{"target_ratio", f.ratio},
              {"target_position", f.position},
              {"target_axis", f.axis},
              {"target_direction", f.direction}};
  return requirements_from_json(doc);
}

Catalog catalog_of(const std::string& path) { return path.empty() ? default_catalog() : load_catalog_file(path); }

std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string candidate_table(const Grammar& grammar, const std::vector<DesignCandidate>& candidates) {
  std::ostringstream out;
  out << "id,feasible,achieved_ratio,ratio_error,position_error,position_error_x,position_error_y,position_error_z,"
         "output_axis,axis_match,output_direction,direction_match,part_count,cost_usd,weight_kg,sequence\n";
  for (const auto& c : candidates) {
    const auto& r = c.report;
    out << c.id << ',' << (r.feasible ? 1 : 0) << ',' << csv_number(r.achieved_ratio) << ','
        << csv_number(r.ratio_error) << ',' << csv_number(r.position_error) << ','
        << csv_number(r.position_error_axes.x()) << ',' << csv_number(r.position_error_axes.y()) << ','
        << csv_number(r.position_error_axes.z()) << ',' << axis_name(r.output_axis) << ',' << (r.axis_match ? 1 : 0)
        << ',' << r.output_direction << ',' << (r.direction_match ? 1 : 0) << ',' << r.part_count << ','
        << csv_number(r.cost_usd) << ',' << csv_number(r.weight_kg) << ',' << grammar.serialize(c.sequence) << '\n';
  }
  return out.str();
}

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grammar-constrained gear train generator"};
  app.require_subcommand(1);
  std::string catalog_path;
  app.add_option("--catalog", catalog_path, "Catalog JSON (default: built-in desk-grid catalog)");

  // dataset gen
  auto* dataset = app.add_subcommand("dataset", "Dataset tools");
  dataset->require_subcommand(1);
  auto* gen = dataset->add_subcommand("gen", "Sample a synthetic training set");
  int gen_n = 50000, gen_parts = kDefaultMaxParts;
  std::uint64_t gen_seed = 7;
  std::string gen_out = "dataset.jsonl";
  gen->add_option("--n", gen_n, "Number of examples");
  gen->add_option("--seed", gen_seed, "Sampler seed");
  gen->add_option("--max-parts", gen_parts, "Component cap per design");
  gen->add_option("--out", gen_out, "Output JSONL path");

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  std::string train_data, train_config, train_out = "model.gfm", train_curve;
  std::optional<int> train_epochs;
  std::optional<std::uint64_t> train_seed;
  train->add_option("--data", train_data, "Dataset JSONL")->required();
  train->add_option("--config", train_config, "Training config JSON");
  train->add_option("--epochs", train_epochs, "Override epochs");
  train->add_option("--seed", train_seed, "Override seed");
  train->add_option("--out", train_out, "Params output path");
  train->add_option("--curve", train_curve, "Write the loss curve JSON here");

  // explore
  auto* explore = app.add_subcommand("explore", "Sample, validate and tabulate designs");
  RequirementFlags explore_req;
  add_requirement_flags(explore, explore_req);
  std::string explore_model = "model.gfm", explore_out, explore_mode = "stochastic";
  int explore_n = 100, explore_threads = 1, explore_parts = kDefaultMaxParts;
  double explore_temperature = 1.0;
  std::uint64_t explore_seed = 1;
  explore->add_option("--model", explore_model, "Params file");
  explore->add_option("--n", explore_n, "Number of distinct feasible designs");
  explore->add_option("--temperature", explore_temperature, "Sampling temperature");
  explore->add_option("--seed", explore_seed, "Sampling seed");
  explore->add_option("--mode", explore_mode, "stochastic or greedy");
  explore->add_option("--threads", explore_threads, "Worker threads");
  explore->add_option("--max-parts", explore_parts, "Component cap per design");
  explore->add_option("--out", explore_out, "CSV output path (default: stdout)");

  // validate
  auto* validate = app.add_subcommand("validate", "Check a design file and print its report");
  std::string validate_path;
  validate->add_option("design", validate_path, "Design file")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  std::string serve_config;
  std::optional<int> serve_port;
  std::optional<std::string> serve_model;
  serve->add_option("--config", serve_config, "Service config JSON");
  serve->add_option("--port", serve_port, "Override port");
  serve->add_option("--model", serve_model, "Override model path");

  // catalog
  auto* catalog_cmd = app.add_subcommand("catalog", "Print the catalog as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const Grammar grammar(catalog_of(catalog_path));
      const auto examples = model::generate_dataset(grammar, gen_n, gen_seed, gen_parts);
      int feasible = 0;
      for (const auto& ex : examples) {
        if (validate_design(grammar, ex.sequence, ex.requirements, gen_parts).feasible()) ++feasible;
      }
      model::save_dataset_file(grammar, examples, gen_out);
      std::cout << "wrote " << examples.size() << " examples to " << gen_out << "; feasible " << feasible << "\n";
    } else if (train->parsed()) {
      const Grammar grammar(catalog_of(catalog_path));
      model::TrainConfig config;
      if (!train_config.empty()) config = model::train_config_from_json(Json::parse(read_text_file(train_config)));
      if (train_epochs) config.epochs = *train_epochs;
      if (train_seed) config.seed = *train_seed;
      const auto examples = model::load_dataset_file(grammar, train_data);
      std::cout << "training on " << examples.size() << " examples\n";
      auto result = model::train(grammar, examples, config, [](const model::EpochStats& e) {
        std::printf("epoch %d  masked_ce %.5f  validity %.5f  %.1fs\n", e.epoch, e.masked_ce, e.validity, e.seconds);
        std::fflush(stdout);
      });
      model::save_params_file(result.model, train_out);
      if (!train_curve.empty()) write_text_file(train_curve, model::loss_curve_to_json(result.curve).dump(2));
      std::cout << "saved " << train_out << "\n";
    } else if (explore->parsed()) {
      auto grammar = std::make_shared<const Grammar>(catalog_of(catalog_path));
      auto loaded = std::make_shared<const model::Model>(model::load_params_file(explore_model));
      const Engine engine(grammar, loaded, explore_parts);
      SamplingConfig sc;
      if (explore_mode == "greedy") {
        sc.mode = SamplingMode::kGreedy;
      } else if (explore_mode != "stochastic") {
        throw Error(ErrorCode::kBadRequest, "mode must be stochastic or greedy", "mode");
      }
      sc.temperature = explore_temperature;
      sc.seed = explore_seed;
      sc.threads = explore_threads;
      const auto result = engine.explore(requirements_of(explore_req), explore_n, sc);
      const std::string table = candidate_table(*grammar, result.candidates);
      if (explore_out.empty()) {
        std::cout << table;
      } else {
        write_text_file(explore_out, table);
      }
      std::cerr << service::diagnostics_to_json(result.diagnostics).dump() << "\n";
      if (result.diagnostics.exhausted) {
        throw Error(ErrorCode::kCapacity,
                    "attempt cap reached with " + std::to_string(result.candidates.size()) + " designs", "attempts");
      }
    } else if (validate->parsed()) {
      const Grammar grammar(catalog_of(catalog_path));
      const DesignFile file = read_design_file(grammar, read_text_file(validate_path));
      const DesignValidation v = validate_design(grammar, file.sequence, file.requirements, file.max_parts);
      if (v.violation && v.violation->stage == Stage::kGrammar) {
        const auto& g = *v.violation->grammar;
        throw Error(ErrorCode::kGrammarViolation,
                    g.message.empty() ? "token " + std::to_string(g.index) + ": " + g.rule : g.message, g.rule);
      }
      if (!v.report) throw Error(ErrorCode::kInternal, v.violation ? v.violation->message : "design did not validate");
      Json out = {{"report", metrics_to_json(*v.report)}};
      if (file.report) out["matches_stored_report"] = (*file.report == *v.report);
      std::cout << out.dump(2) << "\n";
      if (!v.report->feasible) {
        throw Error(ErrorCode::kBadRequest, "design parts interfere", "interference");
      }
    } else if (serve->parsed()) {
      service::ServiceConfig config;
      if (!serve_config.empty()) {
        config = service::service_config_from_json(Json::parse(read_text_file(serve_config)));
      }
      service::apply_env_overrides(config);
      if (serve_port) config.port = *serve_port;
      if (serve_model) config.model_path = *serve_model;
      service::Api api(service::load_engine(config), config);
      service::HttpServer server(api);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const bool ok = server.listen(config.host, config.port, [&](int port) {
        std::cout << "listening on http://" << config.host << ":" << port << std::endl;
      });
      g_server = nullptr;
      if (!ok) throw Error(ErrorCode::kInternal, "could not bind " + config.host + ":" + std::to_string(config.port));
    } else if (catalog_cmd->parsed()) {
      std::cout << dump_catalog(catalog_of(catalog_path)) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << service::error_to_json(e).dump() << "\n";
    return exit_code_for(e.code());
  } catch (const Json::exception& e) {
    std::cerr << service::error_to_json(Error(ErrorCode::kBadRequest, e.what(), "json")).dump() << "\n";
    return exit_code_for(ErrorCode::kBadRequest);
  } catch (const std::exception& e) {
    std::cerr << service::error_to_json(Error(ErrorCode::kInternal, e.what())).dump() << "\n";
    return exit_code_for(ErrorCode::kInternal);
  }
  return 0;
}

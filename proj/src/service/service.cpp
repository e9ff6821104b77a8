#include "gearformer/service/service.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "gearformer/catalog.hpp"
#include "gearformer/model/model.hpp"

namespace gearformer::service {

namespace {

[[noreturn]] void bad_request(const std::string& message, const std::string& detail = "schema") {
  throw Error(ErrorCode::kBadRequest, message, detail);
}

Json component_to_json(const ComponentSpec& c) {
  Json doc = {{"id", c.id},
              {"name", c.display_name()},
              {"kind", kind_name(c.kind)},
              {"price_usd", c.price_usd},
              {"weight_kg", c.weight_kg},
              {"radius_mm", c.outer_radius_mm()},
              {"length_mm", c.axial_length_mm()}};
  if (c.is_gear()) {
    doc["module_mm"] = c.module_mm;
    doc["teeth"] = c.teeth;
  }
  return doc;
}

Json placed_to_json(const PlacedPart& part, const Catalog& catalog) {
  const ComponentSpec& c = catalog.at(part.component);
  return {{"component_id", c.id},
          {"kind", kind_name(c.kind)},
          {"role", role_name(part.role)},
          {"center", vec_to_json(part.center)},
          {"axis", axis_name(part.axis)},
          {"radius_mm", c.outer_radius_mm()},
          {"length_mm", c.axial_length_mm()}};
}

Json recommendation_to_json(const Recommendation& r, const Vocabulary& vocab, const Catalog& catalog) {
  Json doc = {{"token", r.name}, {"index", r.token}, {"probability", r.probability}};
  const Token t = vocab.token(r.token);
  if (t.kind == TokenKind::kComponent) doc["component"] = component_to_json(catalog.at(t.component));
  doc["preview"] = r.preview ? placed_to_json(*r.preview, catalog) : Json(nullptr);
  return doc;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = i;
    while (j < path.size() && path[j] != '/') ++j;
    if (j > i) parts.push_back(path.substr(i, j - i));
    i = j;
  }
  return parts;
}

Json parse_body(const std::string& body) {
  if (body.empty()) return Json::object();
  try {
    Json doc = Json::parse(body);
    if (!doc.is_object()) bad_request("request body must be a JSON object");
    return doc;
  } catch (const Json::parse_error& e) {
    bad_request(std::string("malformed JSON: ") + e.what());
  }
}

Response json_response(const Json& doc, int status = 200) { return {status, "application/json", doc.dump(), {}}; }

template <typename T>
T field(const Json& doc, const char* key, T fallback) {
  if (!doc.contains(key) || doc[key].is_null()) return fallback;
  try {
    return doc[key].get<T>();
  } catch (const Json::exception&) {
    bad_request(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

ServiceConfig service_config_from_json(const Json& doc, ServiceConfig c) {
  if (!doc.is_object()) bad_request("service config must be a JSON object");
  c.host = field(doc, "host", c.host);
  c.port = field(doc, "port", c.port);
  c.model_path = field(doc, "model_path", c.model_path);
  c.catalog_path = field(doc, "catalog_path", c.catalog_path);
  c.max_generate = field(doc, "max_generate", c.max_generate);
  c.max_parts = field(doc, "max_parts", c.max_parts);
  c.session_ttl_seconds = field(doc, "session_ttl_seconds", c.session_ttl_seconds);
  c.design_cache_limit = field(doc, "design_cache_limit", c.design_cache_limit);
  c.explore_threads = field(doc, "explore_threads", c.explore_threads);
  if (c.port < 0 || c.port > 65535) bad_request("port out of range");
  if (c.max_generate < 1 || c.max_parts < 1 || c.session_ttl_seconds < 1 || c.explore_threads < 1) {
    bad_request("max_generate, max_parts, session_ttl_seconds and explore_threads must be positive");
  }
  return c;
}

Json service_config_to_json(const ServiceConfig& c) {
  return {{"host", c.host},
          {"port", c.port},
          {"model_path", c.model_path},
          {"catalog_path", c.catalog_path},
          {"max_generate", c.max_generate},
          {"max_parts", c.max_parts},
          {"session_ttl_seconds", c.session_ttl_seconds},
          {"design_cache_limit", c.design_cache_limit},
          {"explore_threads", c.explore_threads}};
}

void apply_env_overrides(ServiceConfig& config, const std::function<const char*(const char*)>& getenv) {
  if (const char* port = getenv("GEARFORMER_PORT"); port && *port) {
    try {
      std::size_t used = 0;
      const int value = std::stoi(port, &used);
      if (used != std::string_view(port).size() || value < 0 || value > 65535) throw std::invalid_argument(port);
      config.port = value;
    } catch (const std::exception&) {
      bad_request(std::string("GEARFORMER_PORT is not a valid port: ") + port, "env");
    }
  }
  if (const char* model = getenv("GEARFORMER_MODEL"); model && *model) config.model_path = model;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBadRequest:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kGrammarViolation:
      return 422;
    case ErrorCode::kContextLimit:
      return 409;
    case ErrorCode::kCapacity:
      return 413;
    case ErrorCode::kInternal:
      return 500;
  }
  return 500;
}

Json error_to_json(const Error& e) {
  return {{"error",
           {{"code", error_code_name(e.code())},
            {"message", e.what()},
            {"detail", e.detail().empty() ? Json(nullptr) : Json(e.detail())}}}};
}

SessionStore::SessionStore(std::chrono::seconds ttl, Clock clock)
    : ttl_(ttl), clock_(std::move(clock)), rng_(std::random_device{}()) {
  // Mix in more entropy than one random_device call provides.
  std::seed_seq seq{std::random_device{}(), std::random_device{}(), std::random_device{}(), std::random_device{}()};
  rng_.seed(seq);
}

std::string SessionStore::fresh_id() {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng_()),
                static_cast<unsigned long long>(rng_()));
  return buf;
}

std::string SessionStore::create(CopilotSession session) {
  const auto now = clock_();
  std::lock_guard lock(mutex_);
  std::string id;
  do {
    id = fresh_id();
  } while (entries_.count(id));
  auto entry = std::make_shared<Entry>(std::move(session), now);
  entries_.emplace(id, std::move(entry));
  return id;
}

void SessionStore::with(const std::string& id, const std::function<void(CopilotSession&)>& fn) {
  std::shared_ptr<Entry> entry;
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(id);
    if (it == entries_.end()) throw Error(ErrorCode::kNotFound, "unknown session '" + id + "'", "session");
    if (clock_() - it->second->last_active > ttl_) {
      entries_.erase(it);
      throw Error(ErrorCode::kNotFound, "session '" + id + "' expired", "session-expired");
    }
    entry = it->second;
  }
  std::lock_guard session_lock(entry->mutex);
  fn(entry->session);
  entry->last_active = clock_();
}

bool SessionStore::erase(const std::string& id) {
  std::lock_guard lock(mutex_);
  return entries_.erase(id) > 0;
}

std::size_t SessionStore::sweep() {
  const auto now = clock_();
  std::lock_guard lock(mutex_);
  return std::erase_if(entries_, [&](const auto& kv) { return now - kv.second->last_active > ttl_; });
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void DesignCache::put(const DesignCandidate& candidate) {
  std::lock_guard lock(mutex_);
  if (items_.count(candidate.id)) return;
  items_.emplace(candidate.id, candidate);
  order_.push_back(candidate.id);
  while (order_.size() > limit_) {
    items_.erase(order_.front());
    order_.pop_front();
  }
}

std::optional<DesignCandidate> DesignCache::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = items_.find(id);
  if (it == items_.end()) return std::nullopt;
  return it->second;
}

std::size_t DesignCache::size() const {
  std::lock_guard lock(mutex_);
  return items_.size();
}

Json candidate_summary(const DesignCandidate& c) {
  return {{"id", c.id}, {"metrics", metrics_to_json(c.report)}, {"cost_usd", c.report.cost_usd}};
}

Json bom_to_json(const Assembly& assembly, const Catalog& catalog) {
  Json rows = Json::array();
  double total_price = 0.0, total_weight = 0.0;
  for (std::size_t i = 0; i < assembly.parts.size(); ++i) {
    const ComponentSpec& c = catalog.at(assembly.parts[i].component);
    rows.push_back({{"part", i},
                    {"component_id", c.id},
                    {"name", c.display_name()},
                    {"kind", kind_name(c.kind)},
                    {"price_usd", c.price_usd},
                    {"weight_kg", c.weight_kg}});
    total_price += c.price_usd;
    total_weight += c.weight_kg;
  }
  return {{"rows", rows}, {"total_price_usd", total_price}, {"total_weight_kg", total_weight}};
}

Json candidate_detail(const DesignCandidate& c, const Catalog& catalog) {
  return {{"id", c.id},
          {"requirements", requirements_to_json(c.requirements)},
          {"assembly", assembly_to_json(c.assembly, catalog)},
          {"bom", bom_to_json(c.assembly, catalog)},
          {"report", metrics_to_json(c.report)}};
}

Json recommendations_to_json(const RecommendationSet& recs, const Catalog& catalog) {
  const Vocabulary vocab(catalog);
  Json ranked = Json::array(), ghosts = Json::array();
  for (const auto& r : recs.ranked) ranked.push_back(recommendation_to_json(r, vocab, catalog));
  for (const auto& r : recs.ghosts) ghosts.push_back(recommendation_to_json(r, vocab, catalog));
  return {{"ranked", ranked}, {"ghosts", ghosts}, {"end_admissible", recs.end_admissible}};
}

Json running_metrics_to_json(const RunningMetrics& m) {
  return {{"ratio", m.ratio},
          {"cursor", vec_to_json(m.cursor)},
          {"axis", axis_name(m.axis)},
          {"direction", m.direction},
          {"cost_usd", m.cost_usd},
          {"weight_kg", m.weight_kg},
          {"parts_used", m.parts_used},
          {"max_parts", m.max_parts}};
}

Json diagnostics_to_json(const ExploreDiagnostics& d) {
  return {{"requested", d.requested},
          {"attempts", d.attempts},
          {"accepted", d.accepted},
          {"duplicates", d.duplicates},
          {"exhausted", d.exhausted},
          {"rejected",
           {{"grammar", d.rejected_grammar},
            {"incomplete", d.rejected_incomplete},
            {"interference", d.rejected_interference},
            {"simulation", d.rejected_simulation}}}};
}

Api::Api(std::shared_ptr<const Engine> engine, ServiceConfig config, Clock clock)
    : engine_(std::move(engine)),
      config_(std::move(config)),
      sessions_(std::chrono::seconds(config_.session_ttl_seconds), std::move(clock)),
      designs_(config_.design_cache_limit) {}

Response Api::handle(const Request& req) {
  try {
    const auto parts = split_path(req.path);
    const bool get = req.method == "GET", post = req.method == "POST";
    if (parts.size() == 1 && parts[0] == "health" && get) {
      return json_response({{"status", "ok"}, {"catalog_version", engine_->grammar().catalog().version()}});
    }
    if (parts.size() == 1 && parts[0] == "catalog" && get) {
      return json_response(Json::parse(dump_catalog(engine_->grammar().catalog())));
    }
    if (!parts.empty() && parts[0] == "designs") {
      if (parts.size() == 2 && parts[1] == "generate" && post) return json_response(generate(parse_body(req.body)));
      if (parts.size() == 2 && get) return json_response(design(parts[1]));
      if (parts.size() == 3 && parts[2] == "export" && get) {
        auto it = req.query.find("format");
        return export_design(parts[1], it == req.query.end() ? "design" : it->second);
      }
    }
    if (!parts.empty() && parts[0] == "sessions" && post) {
      if (parts.size() == 1) return json_response(start_session(parse_body(req.body)), 201);
      if (parts.size() == 3 && parts[2] == "step") return json_response(step_session(parts[1], parse_body(req.body)));
      if (parts.size() == 3 && parts[2] == "undo") return json_response(undo_session(parts[1]));
      if (parts.size() == 3 && parts[2] == "finish") return json_response(finish_session(parts[1]));
    }
    throw Error(ErrorCode::kNotFound, "no route for " + req.method + " " + req.path, "route");
  } catch (const Error& e) {
    return json_response(error_to_json(e), http_status(e.code()));
  } catch (const std::exception& e) {
    return json_response(error_to_json(Error(ErrorCode::kInternal, "internal error")), 500);
  }
}

Json Api::generate(const Json& body) {
  if (!body.contains("requirements")) bad_request("requirements is required");
  const Requirements req = requirements_from_json(body["requirements"]);
  if (!body.contains("n") || !body["n"].is_number_integer()) bad_request("n must be an integer");
  const long long n = body["n"].get<long long>();
  if (n < 1) bad_request("n must be at least 1", "n");
  if (n > config_.max_generate) {
    throw Error(ErrorCode::kCapacity,
                "n=" + std::to_string(n) + " exceeds the configured cap of " + std::to_string(config_.max_generate),
                "max_generate");
  }
  SamplingConfig sc;
  sc.threads = config_.explore_threads;
  sc.temperature = field(body, "temperature", 1.0);
  sc.seed = field<std::uint64_t>(body, "seed", std::random_device{}());
  const std::string mode = field<std::string>(body, "mode", "stochastic");
  if (mode == "greedy") {
    sc.mode = SamplingMode::kGreedy;
  } else if (mode != "stochastic") {
    bad_request("mode must be \"greedy\" or \"stochastic\"", "mode");
  }
  sc.max_attempts = field(body, "max_attempts", 0);
  const ExploreResult result = engine_->explore(req, static_cast<int>(n), sc);
  Json candidates = Json::array();
  for (const auto& c : result.candidates) {
    designs_.put(c);
    candidates.push_back(candidate_summary(c));
  }
  return {{"candidates", candidates}, {"diagnostics", diagnostics_to_json(result.diagnostics)}, {"seed", sc.seed}};
}

Json Api::design(const std::string& id) const {
  const auto c = designs_.get(id);
  if (!c) throw Error(ErrorCode::kNotFound, "unknown design '" + id + "'", "design");
  return candidate_detail(*c, engine_->grammar().catalog());
}

Response Api::export_design(const std::string& id, const std::string& format) const {
  if (format != "mesh" && format != "design") bad_request("unknown export format '" + format + "'", "format");
  const auto c = designs_.get(id);
  if (!c) throw Error(ErrorCode::kNotFound, "unknown design '" + id + "'", "design");
  const Grammar& grammar = engine_->grammar();
  if (format == "mesh") return {200, "model/obj", export_mesh(c->assembly, grammar.catalog()), id + ".obj"};
  DesignFile file{grammar.catalog().version(), engine_->max_parts(), c->requirements, c->sequence, c->report};
  return {200, "application/json", write_design_file(grammar, file), id + ".design.json"};
}

Json Api::session_view(const std::string& id, const CopilotSession& s) const {
  const Grammar& grammar = engine_->grammar();
  const RunningMetrics& m = s.metrics();
  return {{"session_id", id},
          {"prefix", grammar.token_names(s.prefix())},
          {"phase", phase_name(s.state().phase)},
          {"recommendations", recommendations_to_json(s.recommendations(), grammar.catalog())},
          {"metrics", running_metrics_to_json(m)},
          {"parts_used", m.parts_used},
          {"max_parts", m.max_parts},
          {"can_undo", s.can_undo()},
          {"assembly", assembly_to_json(s.assembly(), grammar.catalog())},
          {"target",
           {{"position", vec_to_json(s.requirements().target_position)},
            {"axis", axis_name(s.requirements().target_axis)},
            {"direction", s.requirements().target_direction}}}};
}

Json Api::start_session(const Json& body) {
  if (!body.contains("requirements")) bad_request("requirements is required");
  const Requirements req = requirements_from_json(body["requirements"]);
  const int max_parts = field(body, "max_parts", config_.max_parts);
  const int top_k = field(body, "top_k", 5);
  if (max_parts < 1) bad_request("max_parts must be at least 1", "max_parts");
  if (top_k < 1) bad_request("top_k must be at least 1", "top_k");
  CopilotSession session = engine_->copilot_start(req, max_parts, top_k);
  Json view = session_view("", session);
  const std::string id = sessions_.create(std::move(session));
  view["session_id"] = id;
  return view;
}

Json Api::step_session(const std::string& id, const Json& body) {
  if (!body.contains("token")) bad_request("token is required", "token");
  const auto& vocab = engine_->grammar().vocabulary();
  int index = -1;
  if (body["token"].is_string()) {
    const auto parsed = vocab.parse(body["token"].get<std::string>());
    if (!parsed) bad_request("unknown token '" + body["token"].get<std::string>() + "'", "token");
    index = *parsed;
  } else if (body["token"].is_number_integer()) {
    index = body["token"].get<int>();
  } else {
    bad_request("token must be a token name or vocabulary index", "token");
  }
  Json view;
  sessions_.with(id, [&](CopilotSession& s) {
    engine_->copilot_step(s, index);
    view = session_view(id, s);
  });
  return view;
}

Json Api::undo_session(const std::string& id) {
  Json view;
  sessions_.with(id, [&](CopilotSession& s) {
    engine_->copilot_undo(s);
    view = session_view(id, s);
  });
  return view;
}

Json Api::finish_session(const std::string& id) {
  std::optional<DesignCandidate> candidate;
  sessions_.with(id, [&](CopilotSession& s) { candidate = engine_->copilot_finish(s); });
  designs_.put(*candidate);
  return candidate_summary(*candidate);
}

std::shared_ptr<const Engine> load_engine(const ServiceConfig& config) {
  Catalog catalog = config.catalog_path.empty() ? default_catalog() : load_catalog_file(config.catalog_path);
  auto grammar = std::make_shared<const Grammar>(std::move(catalog));
  auto model = std::make_shared<const model::Model>(model::load_params_file(config.model_path));
  return std::make_shared<const Engine>(grammar, model, config.max_parts);
}

}  // namespace gearformer::service

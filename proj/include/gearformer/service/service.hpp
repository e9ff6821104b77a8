#pragma once

#include <chrono>
#include <cstdlib>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>

#include "gearformer/engine/engine.hpp"
#include "gearformer/error.hpp"
#include "gearformer/io.hpp"

namespace gearformer::service {

// Service config file, JSON. Keys: "host", "port", "model_path",
// "catalog_path" (empty: built-in catalog), "max_generate", "max_parts",
// "session_ttl_seconds", "design_cache_limit", "explore_threads".
// GEARFORMER_PORT and GEARFORMER_MODEL override port and model_path.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string model_path = "model.gfm";
  std::string catalog_path;
  int max_generate = 2000;
  int max_parts = kDefaultMaxParts;
  int session_ttl_seconds = 1800;
  std::size_t design_cache_limit = 20000;
  int explore_threads = 1;
};

ServiceConfig service_config_from_json(const Json& doc, ServiceConfig base = {});
Json service_config_to_json(const ServiceConfig& config);
// `getenv` is injectable for tests.
void apply_env_overrides(ServiceConfig& config,
                         const std::function<const char*(const char*)>& getenv = [](const char* k) {
                           return std::getenv(k);
                         });

int http_status(ErrorCode code);
// {"error": {"code": "...", "message": "...", "detail": "..."|null}}
Json error_to_json(const Error& error);

using Clock = std::function<std::chrono::steady_clock::time_point()>;

// Live copilot sessions keyed by 128-bit random hex ids. Each session has its
// own mutex: a second request on a busy session waits for the first.
class SessionStore {
 public:
  explicit SessionStore(std::chrono::seconds ttl, Clock clock = std::chrono::steady_clock::now);

  std::string create(CopilotSession session);
  // Runs `fn` with exclusive access to the session. Throws Error(kNotFound)
  // for unknown or expired ids; expired sessions are dropped.
  void with(const std::string& id, const std::function<void(CopilotSession&)>& fn);
  bool erase(const std::string& id);
  // Drops every expired session; returns how many were removed.
  std::size_t sweep();
  std::size_t size() const;

 private:
  struct Entry {
    Entry(CopilotSession s, std::chrono::steady_clock::time_point now)
        : session(std::move(s)), created(now), last_active(now) {}
    std::mutex mutex;
    CopilotSession session;
    std::chrono::steady_clock::time_point created;
    std::chrono::steady_clock::time_point last_active;
  };

  std::string fresh_id();

  std::chrono::seconds ttl_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<Entry>> entries_;
  std::mt19937_64 rng_;
};

// Designs surfaced by generate or finish, fetchable by id. Oldest entries
// are evicted past `limit`.
class DesignCache {
 public:
  explicit DesignCache(std::size_t limit) : limit_(limit) {}
  void put(const DesignCandidate& candidate);
  std::optional<DesignCandidate> get(const std::string& id) const;
  std::size_t size() const;

 private:
  std::size_t limit_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, DesignCandidate> items_;
  std::deque<std::string> order_;
};

struct Request {
  std::string method;
  std::string path;
  std::string body;
  std::map<std::string, std::string> query;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::string filename;  // set for downloads
};

// JSON views shared by the API and the CLI.
Json candidate_summary(const DesignCandidate& candidate);
Json candidate_detail(const DesignCandidate& candidate, const Catalog& catalog);
Json bom_to_json(const Assembly& assembly, const Catalog& catalog);
Json recommendations_to_json(const RecommendationSet& recs, const Catalog& catalog);
Json running_metrics_to_json(const RunningMetrics& metrics);
Json diagnostics_to_json(const ExploreDiagnostics& diagnostics);

// Transport-independent request handling. Endpoints:
//   GET  /health
//   GET  /catalog
//   POST /designs/generate     {"requirements", "n", "temperature"?, "seed"?, "mode"?}
//   GET  /designs/{id}
//   GET  /designs/{id}/export?format=mesh|design
//   POST /sessions             {"requirements", "max_parts"?, "top_k"?}
//   POST /sessions/{id}/step   {"token": "<name>"}
//   POST /sessions/{id}/undo
//   POST /sessions/{id}/finish
// Every failure is an ApiError body with the matching HTTP status.
class Api {
 public:
  Api(std::shared_ptr<const Engine> engine, ServiceConfig config, Clock clock = std::chrono::steady_clock::now);

  Response handle(const Request& request);

  SessionStore& sessions() { return sessions_; }
  DesignCache& designs() { return designs_; }
  const Engine& engine() const { return *engine_; }

 private:
  Json generate(const Json& body);
  Json design(const std::string& id) const;
  Response export_design(const std::string& id, const std::string& format) const;
  Json start_session(const Json& body);
  Json step_session(const std::string& id, const Json& body);
  Json undo_session(const std::string& id);
  Json finish_session(const std::string& id);
  Json session_view(const std::string& id, const CopilotSession& session) const;

  std::shared_ptr<const Engine> engine_;
  ServiceConfig config_;
  SessionStore sessions_;
  DesignCache designs_;
};

// Blocking HTTP server over `api`. `on_ready` receives the bound port (useful
// with port 0). Returns when `stop` is called from another thread.
class HttpServer {
 public:
  explicit HttpServer(Api& api);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and serves; returns false if the port could not be bound.
  bool listen(const std::string& host, int port, const std::function<void(int)>& on_ready = {});
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Loads catalog and model as configured and builds an engine.
std::shared_ptr<const Engine> load_engine(const ServiceConfig& config);

}  // namespace gearformer::service

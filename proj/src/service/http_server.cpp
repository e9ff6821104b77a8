// Eigen must come before httplib: <resolv.h> defines a `_res` macro.
#include "gearformer/service/service.hpp"

#include <httplib.h>

namespace gearformer::service {

struct HttpServer::Impl {
  Api* api;
  httplib::Server server;
};

HttpServer::HttpServer(Api& api) : impl_(std::make_unique<Impl>()) {
  impl_->api = &api;
  auto handler = [this](const httplib::Request& hreq, httplib::Response& hres) {
    Request req{hreq.method, hreq.path, hreq.body, {}};
    for (const auto& [key, value] : hreq.params) req.query.emplace(key, value);
    const Response res = impl_->api->handle(req);
    hres.status = res.status;
    if (!res.filename.empty()) {
      hres.set_header("Content-Disposition", "attachment; filename=\"" + res.filename + "\"");
    }
    hres.set_content(res.body, res.content_type);
  };
  const char* pattern = R"(/.*)";
  impl_->server.Get(pattern, handler);
  impl_->server.Post(pattern, handler);
  impl_->server.Options(pattern, [](const httplib::Request&, httplib::Response& hres) { hres.status = 204; });
  impl_->server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                     {"Access-Control-Allow-Headers", "Content-Type"},
                                     {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port, const std::function<void(int)>& on_ready) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) return false;
  } else if (!impl_->server.bind_to_port(host, port)) {
    return false;
  }
  if (on_ready) on_ready(bound);
  return impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace gearformer::service

#include "anamnesis/error.hpp"
#include "anamnesis/service.hpp"
#include "http_util.hpp"

namespace anamnesis {

struct HttpServer::Impl {
    httplib::Server server;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>()) {
    auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
        const HttpResponse out = service.handle({req.method, req.path, req.body});
        res.status = out.status;
        res.set_content(out.body, "application/json");
    };
    auto& s = impl_->server;
    s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    s.Get(".*", handler);
    s.Post(".*", handler);
    s.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        throw ExternalError("cannot bind " + host + ":" + std::to_string(port));
    }
    return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace anamnesis

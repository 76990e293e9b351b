#include "hse/service.hpp"

#include <httplib.h>

#include "hse/error.hpp"

namespace hse {

struct HttpServer::Impl {
    LabelingService& service;
    httplib::Server server;

    explicit Impl(LabelingService& s) : service(s) {
        auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
            const Response r = service.handle(req.method, req.path, req.body);
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json");
        };
        // SO_REUSEADDR only: with SO_REUSEPORT a second server could bind a busy port.
        server.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
        });
        server.Get(R"(/api/.*)", dispatch);
        server.Post(R"(/api/.*)", dispatch);
        server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (!res.body.empty()) return;
            const Json body{{"code", res.status == 404 ? "not_found" : "error"},
                            {"message", "no route for " + req.method + " " + req.path}};
            res.set_content(body.dump(), "application/json");
        });
    }
};

HttpServer::HttpServer(LabelingService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void HttpServer::run(const std::string& host, int port) {
    if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    impl_->server.listen_after_bind();
}

void HttpServer::stop() {
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace hse

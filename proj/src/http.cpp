#include <stdexcept>
#include <thread>

#include <httplib.h>

#include "fluxvm/mgmt.hpp"

namespace fluxvm::mgmt {

struct HttpServer::Impl {
    Service& service;
    httplib::Server server;
    std::thread thread;

    explicit Impl(Service& s) : service(s) {}
};

namespace {

void allow_cors(httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
}

}  // namespace

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
    auto& srv = impl_->server;
    Service& svc = service;
    srv.Post("/api", [&svc](const httplib::Request& req, httplib::Response& res) {
        allow_cors(res);
        res.set_content(svc.handle_body(req.body), "application/json");
    });
    srv.Get("/api/metrics", [&svc](const httplib::Request&, httplib::Response& res) {
        allow_cors(res);
        res.set_content(svc.handle_request(Request{"metrics", json::object()}).to_json().dump(), "application/json");
    });
    srv.Get("/api/sites", [&svc](const httplib::Request&, httplib::Response& res) {
        allow_cors(res);
        res.set_content(svc.handle_request(Request{"listCallSites", json::object()}).to_json().dump(), "application/json");
    });
    srv.Options(R"(/api.*)", [](const httplib::Request&, httplib::Response& res) {
        allow_cors(res);
        res.status = 204;
    });
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start(const std::string& address, int port) {
    auto& srv = impl_->server;
    int bound = port == 0 ? srv.bind_to_any_port(address) : (srv.bind_to_port(address, port) ? port : -1);
    if (bound < 0) throw std::runtime_error("cannot bind " + address + ":" + std::to_string(port));
    port_ = bound;
    impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
    srv.wait_until_ready();
}

void HttpServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace fluxvm::mgmt

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "fluxvm/patch.hpp"

namespace fluxvm::mgmt {

using json = nlohmann::json;

struct Request {
    std::string op;
    json params = json::object();
};

struct ErrorInfo {
    std::string code;
    std::string message;
};

/// Exactly one of `result` and `error` is populated.
struct Response {
    bool ok = false;
    json result;
    std::optional<ErrorInfo> error;

    static Response success(json result);
    static Response failure(std::string code, std::string message);

    /// `{"ok":..,"result":..,"error":..}`
    json to_json() const;
    static Response from_json(const json& j);
};

/// Parses a wire request. Malformed input yields `bad_request`.
std::optional<Request> parse_request(const json& j, std::string* why = nullptr);

json metrics_json(const Metrics& m);
json sites_json(const std::vector<SiteSummary>& sites);

/// Routes protocol operations onto a patch engine. Holds no registry state of its own.
class Service {
public:
    explicit Service(PatchEngine& engine) : engine_(engine) {}

    Response handle_request(const Request& r);

    /// Whole-body entry point used by the transport: parse, route, serialize.
    std::string handle_body(std::string_view body);

private:
    PatchEngine& engine_;
};

/// Bind address: `FLUXVM_BIND` if set, else loopback.
std::string default_bind_address();

/// HTTP/1.1 transport: `POST /api`, `GET /api/metrics`, `GET /api/sites`, CORS enabled.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds and starts serving on a background thread. Port 0 picks a free port.
    /// Throws std::runtime_error on bind failure.
    void start(const std::string& address, int port);
    void stop();
    int port() const noexcept { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

}  // namespace fluxvm::mgmt

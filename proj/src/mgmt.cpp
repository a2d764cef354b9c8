#include "fluxvm/mgmt.hpp"

#include <cstdlib>

namespace fluxvm::mgmt {

Response Response::success(json result) {
    Response r;
    r.ok = true;
    r.result = std::move(result);
    return r;
}

Response Response::failure(std::string code, std::string message) {
    Response r;
    r.error = ErrorInfo{std::move(code), std::move(message)};
    return r;
}

json Response::to_json() const {
    json j{{"ok", ok}, {"result", nullptr}, {"error", nullptr}};
    if (ok) j["result"] = result;
    if (error) j["error"] = json{{"code", error->code}, {"message", error->message}};
    return j;
}

Response Response::from_json(const json& j) {
    Response r;
    r.ok = j.value("ok", false);
    if (j.contains("result")) r.result = j["result"];
    if (j.contains("error") && j["error"].is_object())
        r.error = ErrorInfo{j["error"].value("code", ""), j["error"].value("message", "")};
    return r;
}

std::optional<Request> parse_request(const json& j, std::string* why) {
    auto fail = [&](const char* msg) -> std::optional<Request> {
        if (why) *why = msg;
        return std::nullopt;
    };
    if (!j.is_object()) return fail("request must be a JSON object");
    if (!j.contains("op") || !j["op"].is_string()) return fail("request needs a string 'op'");
    Request r;
    r.op = j["op"].get<std::string>();
    if (j.contains("params")) {
        if (j["params"].is_null()) return r;
        if (!j["params"].is_object()) return fail("'params' must be an object");
        r.params = j["params"];
    }
    return r;
}

json metrics_json(const Metrics& m) {
    return json{{"callSites", m.call_sites},
                {"bootstraps", m.bootstraps},
                {"retargets", m.retargets},
                {"advicesApplied", m.advices_applied},
                {"totalInvocations", m.total_invocations}};
}

json sites_json(const std::vector<SiteSummary>& sites) {
    json rows = json::array();
    for (const auto& s : sites) {
        rows.push_back(json{{"kind", std::string(to_string(s.kind))},
                            {"key", s.key},
                            {"siteCount", s.site_count},
                            {"invocationCount", s.invocation_count},
                            {"advices", json{{"before", s.before_advices}, {"after", s.after_advices}}}});
    }
    return json{{"sites", rows}};
}

namespace {

struct MissingParam {
    std::string name;
};

std::string param(const Request& r, const char* name) {
    auto it = r.params.find(name);
    if (it == r.params.end() || !it->is_string()) throw MissingParam{name};
    return it->get<std::string>();
}

}  // namespace

Response Service::handle_request(const Request& r) {
    try {
        if (r.op == "metrics") return Response::success(metrics_json(engine_.metrics()));
        if (r.op == "listCallSites") return Response::success(sites_json(engine_.list_call_sites()));
        if (r.op == "changeCallSiteTarget") {
            auto kind = param(r, "methodType");
            auto old_target = param(r, "oldTarget");
            auto new_target = param(r, "newTarget");
            return Response::success(json{{"retargeted", engine_.change_call_site_target(kind, old_target, new_target)}});
        }
        if (r.op == "applyBeforeAspect" || r.op == "applyAfterAspect") {
            auto key = param(r, "callSitesKey");
            auto cls = param(r, "aspectClass");
            auto method = param(r, "aspectMethod");
            std::size_t n = r.op == "applyBeforeAspect" ? engine_.apply_before_aspect(key, cls, method)
                                                        : engine_.apply_after_aspect(key, cls, method);
            return Response::success(json{{"adviced", n}});
        }
        if (r.op == "removeAspects") return Response::success(json{{"cleared", engine_.remove_aspects(param(r, "callSitesKey"))}});
        return Response::failure("unknown_op", "unknown operation '" + r.op + "'");
    } catch (const MissingParam& m) {
        return Response::failure("bad_request", "missing string parameter '" + m.name + "'");
    } catch (const PatchError& e) {
        return Response::failure(std::string(to_string(e.code())), e.what());
    }
}

std::string Service::handle_body(std::string_view body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) return Response::failure("bad_request", "body is not valid JSON").to_json().dump();
    std::string why;
    auto req = parse_request(j, &why);
    if (!req) return Response::failure("bad_request", why).to_json().dump();
    return handle_request(*req).to_json().dump();
}

std::string default_bind_address() {
    const char* env = std::getenv("FLUXVM_BIND");
    return env && *env ? env : "127.0.0.1";
}

}  // namespace fluxvm::mgmt

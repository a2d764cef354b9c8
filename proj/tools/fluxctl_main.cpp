// fluxctl: command-line client for a running fluxvm management service.
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

using json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kServerError = 1, kUnreachable = 2 };

struct Outcome {
    int code = kOk;
    json result;
};

Outcome post(const std::string& host, int port, const json& request) {
    httplib::Client client(host, port);
    client.set_connection_timeout(3);
    auto res = client.Post("/api", request.dump(), "application/json");
    if (!res) {
        std::cerr << "fluxctl: cannot reach " << host << ":" << port << " (" << httplib::to_string(res.error()) << ")\n";
        return {kUnreachable, {}};
    }
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
        std::cerr << "fluxctl: malformed response (HTTP " << res->status << ")\n";
        return {kServerError, {}};
    }
    if (!body.value("ok", false)) {
        const json& err = body["error"];
        std::cerr << "error " << err.value("code", "?") << ": " << err.value("message", "") << "\n";
        return {kServerError, {}};
    }
    return {kOk, body["result"]};
}

void print_sites(const json& result) {
    const auto& sites = result["sites"];
    std::size_t kw = 4, keyw = 3;
    for (const auto& s : sites) {
        kw = std::max(kw, s["kind"].get<std::string>().size());
        keyw = std::max(keyw, s["key"].get<std::string>().size());
    }
    std::cout << std::left << std::setw(static_cast<int>(kw)) << "KIND" << "  " << std::setw(static_cast<int>(keyw))
              << "KEY" << "  " << std::right << std::setw(5) << "SITES" << "  " << std::setw(12) << "INVOCATIONS"
              << "  " << std::setw(6) << "BEFORE" << "  " << std::setw(5) << "AFTER" << "\n";
    for (const auto& s : sites) {
        std::cout << std::left << std::setw(static_cast<int>(kw)) << s["kind"].get<std::string>() << "  "
                  << std::setw(static_cast<int>(keyw)) << s["key"].get<std::string>() << "  " << std::right
                  << std::setw(5) << s["siteCount"].get<std::uint64_t>() << "  " << std::setw(12)
                  << s["invocationCount"].get<std::uint64_t>() << "  " << std::setw(6)
                  << s["advices"]["before"].get<std::uint64_t>() << "  " << std::setw(5)
                  << s["advices"]["after"].get<std::uint64_t>() << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fluxctl: inspect and patch a running fluxvm"};
    app.require_subcommand(1);
    std::string host = "127.0.0.1";
    int port = 7070;
    bool raw = false;
    app.add_option("--host", host, "service address");
    app.add_option("--port", port, "service port");
    app.add_flag("--json", raw, "print the raw result object");

    auto* sites = app.add_subcommand("sites", "list monitored call sites");
    auto* metrics = app.add_subcommand("metrics", "show registry counters");

    std::string kind, old_target, new_target, key, cls, method;
    auto* retarget = app.add_subcommand("retarget", "rebind every call site under a key");
    retarget->add_option("methodType", kind, "static, virtual, special or interface")->required();
    retarget->add_option("oldTarget", old_target)->required();
    retarget->add_option("newTarget", new_target)->required();

    auto* before = app.add_subcommand("before", "weave a before advice into matching call sites");
    auto* after = app.add_subcommand("after", "weave an after advice into matching call sites");
    for (auto* sub : {before, after}) {
        sub->add_option("callSitesKey", key)->required();
        sub->add_option("aspectClass", cls)->required();
        sub->add_option("aspectMethod", method)->required();
    }
    auto* clear = app.add_subcommand("clear", "remove every advice from matching call sites");
    clear->add_option("callSitesKey", key)->required();

    CLI11_PARSE(app, argc, argv);

    json request;
    if (*sites) request = {{"op", "listCallSites"}};
    if (*metrics) request = {{"op", "metrics"}};
    if (*retarget)
        request = {{"op", "changeCallSiteTarget"},
                   {"params", {{"methodType", kind}, {"oldTarget", old_target}, {"newTarget", new_target}}}};
    if (*before || *after)
        request = {{"op", *before ? "applyBeforeAspect" : "applyAfterAspect"},
                   {"params", {{"callSitesKey", key}, {"aspectClass", cls}, {"aspectMethod", method}}}};
    if (*clear) request = {{"op", "removeAspects"}, {"params", {{"callSitesKey", key}}}};

    Outcome out = post(host, port, request);
    if (out.code != kOk) return out.code;
    if (raw) {
        std::cout << out.result.dump() << "\n";
    } else if (*sites) {
        print_sites(out.result);
    } else if (*metrics) {
        for (const char* k : {"callSites", "bootstraps", "retargets", "advicesApplied", "totalInvocations"})
            std::cout << k << ": " << out.result[k] << "\n";
    } else {
        for (auto it = out.result.begin(); it != out.result.end(); ++it) std::cout << it.key() << ": " << it.value() << "\n";
    }
    return kOk;
}

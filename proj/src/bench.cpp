#include "fluxvm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "fluxvm/assembler.hpp"
#include "fluxvm/transformer.hpp"
#include "fluxvm/verifier.hpp"
#include "fluxvm/vm.hpp"

namespace fluxvm::bench {

std::string_view to_string(Variant v) noexcept {
    switch (v) {
        case Variant::ClassicFibo: return "classicfibo";
        case Variant::FastFibo: return "fastfibo";
        case Variant::FastestFibo: return "fastestfibo";
        case Variant::ReflectiveFibo: return "reflectivefibo";
    }
    return "?";
}

std::string_view to_string(Config c) noexcept {
    switch (c) {
        case Config::Plain: return "plain";
        case Config::Transformed: return "transformed";
        case Config::Before: return "transformed+before";
        case Config::After: return "transformed+after";
        case Config::BeforeAfter: return "transformed+before+after";
    }
    return "?";
}

std::optional<Variant> parse_variant(std::string_view text) {
    for (auto v : {Variant::ClassicFibo, Variant::FastFibo, Variant::FastestFibo, Variant::ReflectiveFibo})
        if (to_string(v) == text) return v;
    return std::nullopt;
}

std::optional<Config> parse_config(std::string_view text) {
    for (auto c : all_configs())
        if (to_string(c) == text) return c;
    return std::nullopt;
}

Quartiles quartiles(std::vector<double> s) {
    Quartiles q;
    if (s.empty()) return q;
    std::sort(s.begin(), s.end());
    auto rank = [&](double p) {
        auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(s.size())));
        return s[std::clamp<std::size_t>(k, 1, s.size()) - 1];
    };
    q.min = s.front();
    q.q25 = rank(0.25);
    q.median = rank(0.5);
    q.q75 = rank(0.75);
    q.max = s.back();
    return q;
}

double overhead_percent(double median, double baseline_median) { return (median / baseline_median - 1.0) * 100.0; }

std::uint64_t count_calls_oracle(int n) {
    std::uint64_t calls = 0;
    auto fib = [&](auto&& self, int k) -> std::uint64_t {
        ++calls;
        return k < 2 ? static_cast<std::uint64_t>(k) : self(self, k - 1) + self(self, k - 2);
    };
    fib(fib, n);
    return calls;
}

namespace {

struct Target {
    const char* owner;
    const char* type;
};

Target target_of(Variant v) {
    switch (v) {
        case Variant::ClassicFibo: return {"ClassicFibo", "(O)O"};
        case Variant::FastFibo: return {"FastFibo", "(I)O"};
        case Variant::FastestFibo: return {"FastestFibo", "(I)I"};
        case Variant::ReflectiveFibo: return {"ReflectiveFibo", "(O)O"};
    }
    return {"ClassicFibo", "(O)O"};
}

std::string impl_label(Variant v, Config c) {
    std::string base(to_string(v));
    switch (c) {
        case Config::Plain: return base;
        case Config::Transformed: return base + " + indy";
        case Config::Before: return base + " + before aspect";
        case Config::After: return base + " + after aspect";
        case Config::BeforeAfter: return base + " + before aspect & after aspect";
    }
    return base;
}

BenchRow run_config(const Module& plain, const Module& transformed, const BenchSpec& spec, Config config) {
    BenchRow row;
    row.config = config;
    row.impl = impl_label(spec.variant, config);

    const Target t = target_of(spec.variant);
    const bool dynamic = config != Config::Plain;
    VirtualMachine vm(dynamic ? transformed : plain);
    const std::string key = std::string(t.owner) + ".fib:" + t.type;
    const MethodType mtype = parse_method_type(t.type);

    CallSite* entry_site = nullptr;
    if (dynamic) {
        entry_site = &vm.engine().bootstrap(InvocationKind::Static, key, mtype);
        if (config == Config::Before || config == Config::BeforeAfter) vm.engine().apply_before_aspect(key, "Advices", "same");
        if (config == Config::After || config == Config::BeforeAfter) vm.engine().apply_after_aspect(key, "Advices", "keep");
    }
    const Value arg = Value::integer(spec.n);
    auto once = [&]() {
        if (entry_site) {
            return vm.interpreter().capture([&] { return entry_site->invoke(std::span<const Value>(&arg, 1), vm.interpreter()); });
        }
        return vm.run(t.owner, "fib", {arg});
    };

    ExitReport warm = once();  // discarded
    if (warm.trap) {
        row.error = warm.trap->describe();
        return row;
    }
    for (int i = 0; i < spec.runs; ++i) {
        auto start = std::chrono::steady_clock::now();
        ExitReport r = once();
        auto stop = std::chrono::steady_clock::now();
        if (r.trap) {
            row.error = r.trap->describe();
            return row;
        }
        row.samples_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
        if (r.return_value && r.return_value->is_int()) row.result = r.return_value->as_int();
    }
    row.q = quartiles(row.samples_ms);
    return row;
}

std::string fmt(double v, const char* pattern) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

}  // namespace

BenchReport run_benchmark(const BenchSpec& spec) {
    Module plain = assemble_file(spec.source);
    require_verified(plain);
    Module transformed = transform_module(plain).module;

    BenchReport report;
    report.platform = spec.platform;
    report.variant = spec.variant;
    report.n = spec.n;
    report.runs = spec.runs;
    for (auto c : spec.configs) report.rows.push_back(run_config(plain, transformed, spec, c));
    if (!report.rows.empty() && !report.rows.front().error) {
        const double base = report.rows.front().q.median;
        for (auto& r : report.rows)
            if (!r.error) r.overhead = overhead_percent(r.q.median, base);
    }
    return report;
}

bool BenchReport::results_agree() const {
    std::optional<std::int64_t> seen;
    for (const auto& r : rows) {
        if (r.error || !r.result) continue;
        if (seen && *seen != *r.result) return false;
        seen = r.result;
    }
    return true;
}

std::string BenchReport::to_table() const {
    const std::vector<std::string> head{"Exec. Plat.", "Impl.", "Q1-min", "Q2-25%", "Q3-median", "Q4-75%", "Q5-max", "Overhead"};
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
        if (r.error) {
            cells.push_back({platform, r.impl, "-", "-", "-", "-", "-", "trap: " + *r.error});
            continue;
        }
        cells.push_back({platform, r.impl, fmt(r.q.min, "%.3f"), fmt(r.q.q25, "%.3f"), fmt(r.q.median, "%.3f"),
                         fmt(r.q.q75, "%.3f"), fmt(r.q.max, "%.3f"), fmt(r.overhead, "%+.1f%%")});
    }
    std::vector<std::size_t> width(head.size());
    for (std::size_t c = 0; c < head.size(); ++c) {
        width[c] = head[c].size();
        for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
    }
    auto line = [&](const std::vector<std::string>& row) {
        std::string out = "|";
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::string cell = row[c];
            cell.resize(width[c], ' ');
            out += " " + cell + " |";
        }
        return out + "\n";
    };
    std::string out = "Fibo(" + std::to_string(n) + ") " + std::string(to_string(variant)) + ", " +
                      std::to_string(runs) + " runs, durations in ms\n";
    out += line(head);
    std::string rule = "|";
    for (auto w : width) rule += std::string(w + 2, '-') + "|";
    out += rule + "\n";
    for (const auto& row : cells) out += line(row);
    return out;
}

std::string BenchReport::to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json row{{"config", std::string(to_string(r.config))},
                           {"impl", r.impl},
                           {"samplesMs", r.samples_ms},
                           {"q1Min", r.q.min},
                           {"q2P25", r.q.q25},
                           {"q3Median", r.q.median},
                           {"q4P75", r.q.q75},
                           {"q5Max", r.q.max},
                           {"overheadPercent", r.overhead},
                           {"result", nullptr},
                           {"error", nullptr}};
        if (r.result) row["result"] = *r.result;
        if (r.error) row["error"] = *r.error;
        rows_json.push_back(std::move(row));
    }
    nlohmann::json j{{"platform", platform},
                     {"variant", std::string(to_string(variant))},
                     {"n", n},
                     {"runs", runs},
                     {"resultsAgree", results_agree()},
                     {"rows", rows_json}};
    return j.dump(2);
}

}  // namespace fluxvm::bench

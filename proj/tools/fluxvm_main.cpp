// fluxvm: run, transform, verify, disassemble and benchmark .fas programs.
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "fluxvm/assembler.hpp"
#include "fluxvm/bench.hpp"
#include "fluxvm/corpus.hpp"
#include "fluxvm/mgmt.hpp"
#include "fluxvm/transformer.hpp"
#include "fluxvm/verifier.hpp"
#include "fluxvm/vm.hpp"

using namespace fluxvm;

namespace {

Value parse_arg(const std::string& text) {
    if (text == "null") return Value::null();
    if (text == "true" || text == "false") return Value::boolean(text == "true");
    try {
        std::size_t used = 0;
        long long v = std::stoll(text, &used);
        if (used == text.size()) return Value::integer(v);
    } catch (const std::exception&) {
    }
    return Value::string(text);
}

int cmd_run(const std::string& file, const std::string& entry, const std::vector<std::string>& raw_args, bool transform,
            int serve_port, int tick_ms, bool linger) {
    std::unique_ptr<VirtualMachine> vm = VirtualMachine::load(file, transform);
    auto& hooks = vm->interpreter().hooks();
    hooks.on_output = [](const std::string& line) { std::cout << line << std::endl; };
    if (tick_ms > 0) hooks.on_tick = [tick_ms](std::int64_t) { std::this_thread::sleep_for(std::chrono::milliseconds(tick_ms)); };

    mgmt::Service service(vm->engine());
    mgmt::HttpServer server(service);
    if (serve_port >= 0) {
        if (!transform) std::cerr << "note: without --transform there are no call sites to manage\n";
        std::string addr = mgmt::default_bind_address();
        server.start(addr, serve_port);
        std::cerr << "management service on http://" << addr << ":" << server.port() << "/api" << std::endl;
    }

    std::string cls, method;
    if (!entry.empty()) {
        auto dot = entry.rfind('.');
        if (dot == std::string::npos) throw std::runtime_error("--entry must be Class.method");
        cls = entry.substr(0, dot);
        method = entry.substr(dot + 1);
    } else if (const auto& e = vm->program().module().entry) {
        cls = e->class_name;
        method = e->method;
    } else {
        throw std::runtime_error(file + " declares no entry; pass --entry");
    }
    std::vector<Value> args;
    for (const auto& a : raw_args) args.push_back(parse_arg(a));

    ExitReport report = vm->run(cls, method, std::move(args));
    if (report.return_value && !report.return_value->is_null())
        std::cerr << "=> " << vm->interpreter().render(*report.return_value) << std::endl;
    if (serve_port >= 0 && linger) {
        std::cerr << "guest finished; service stays up until stdin closes" << std::endl;
        std::string ignored;
        while (std::getline(std::cin, ignored)) {
        }
    }
    server.stop();
    if (report.trap) {
        std::cerr << report.trap->describe() << std::endl;
        return 3;
    }
    return 0;
}

int cmd_transform(const std::string& in, const std::string& out, const std::string& report_format) {
    TransformReport report;
    Module m = transform_at_load(in, &report);
    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot write " + out);
    os << disassemble(m);
    if (report_format == "json") {
        std::cout << report.to_json() << std::endl;
    } else if (!report_format.empty()) {
        std::cout << "rewrote " << report.total_sites() << " call sites (static " << report.sites(InvocationKind::Static)
                  << ", virtual " << report.sites(InvocationKind::Virtual) << ", special "
                  << report.sites(InvocationKind::Special) << ", interface " << report.sites(InvocationKind::Interface)
                  << ") in " << report.methods_transformed << " methods of " << report.classes_transformed
                  << " classes in " << report.elapsed_ms << "ms" << std::endl;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fluxvm: a stack VM whose call sites can be rebound while it runs"};
    app.require_subcommand(1);

    std::string file, entry, out, report_format;
    std::vector<std::string> run_args;
    bool transform = false, linger = false;
    int serve_port = -1, tick_ms = 0;
    auto* run = app.add_subcommand("run", "assemble, verify and run a program");
    run->add_option("file", file, ".fas source")->required();
    run->add_option("--entry", entry, "Class.method (default: the module's entry directive)");
    run->add_option("--arg", run_args, "entry argument; integers, true/false and null are typed, the rest are strings");
    run->add_flag("--transform", transform, "rewrite every invocation into invoke_dynamic at load");
    run->add_option("--serve", serve_port, "start the management service on this port (0 picks one)");
    run->add_option("--tick-ms", tick_ms, "sleep this long on every Sys.tick");
    run->add_flag("--linger", linger, "keep serving after the guest returns, until stdin closes");

    auto* tr = app.add_subcommand("transform", "rewrite invocations into invoke_dynamic");
    tr->add_option("in", file, ".fas source")->required();
    tr->add_option("-o,--output", out, "where to write the rewritten source")->required();
    tr->add_option("--report", report_format, "print a report: json or text");

    auto* ver = app.add_subcommand("verify", "print verifier diagnostics");
    ver->add_option("file", file)->required();

    auto* dis = app.add_subcommand("disasm", "assemble and print the canonical listing");
    dis->add_option("file", file)->required();

    std::string variant = "classicfibo", source;
    std::vector<std::string> configs;
    int n = 20, runs = 10;
    bool as_json = false, as_table = false;
    auto* be = app.add_subcommand("bench", "Fibonacci micro-benchmark across execution configurations");
    be->add_option("--variant", variant, "classicfibo, fastfibo, fastestfibo or reflectivefibo");
    be->add_option("--n", n, "Fibonacci input")->check(CLI::Range(0, 40));
    be->add_option("--runs", runs, "measured runs per configuration")->check(CLI::Range(3, 100000));
    be->add_option("--configs", configs, "configurations, first is the baseline")->delimiter(',');
    be->add_option("--source", source, "benchmark program (default: fibo.fas in the corpus)");
    auto* json_flag = be->add_flag("--json", as_json);
    be->add_flag("--table", as_table)->excludes(json_flag);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(file, entry, run_args, transform, serve_port, tick_ms, linger);
        if (*tr) return cmd_transform(file, out, report_format);
        if (*ver) {
            auto diags = verify(assemble_file(file));
            for (const auto& d : diags) std::cout << d.to_string() << "\n";
            return diags.empty() ? 0 : 1;
        }
        if (*dis) {
            std::cout << disassemble(assemble_file(file));
            return 0;
        }
        if (*be) {
            bench::BenchSpec spec;
            spec.source = source.empty() ? corpus_dir() + "/fibo.fas" : source;
            auto v = bench::parse_variant(variant);
            if (!v) throw std::runtime_error("unknown variant '" + variant + "'");
            spec.variant = *v;
            if (!configs.empty()) {
                spec.configs.clear();
                for (const auto& c : configs) {
                    auto parsed = bench::parse_config(c);
                    if (!parsed) throw std::runtime_error("unknown configuration '" + c + "'");
                    spec.configs.push_back(*parsed);
                }
            }
            spec.n = n;
            spec.runs = runs;
            auto report = bench::run_benchmark(spec);
            std::cout << (as_json ? report.to_json() + "\n" : report.to_table());
            if (!report.results_agree()) {
                std::cerr << "configurations disagree on fib(" << n << ")\n";
                return 1;
            }
            return 0;
        }
    } catch (const AssembleError& e) {
        std::cerr << file << ":" << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

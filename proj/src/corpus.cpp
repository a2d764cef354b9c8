#include "fluxvm/corpus.hpp"

#include <cstdlib>
#include <fstream>
#include <future>
#include <stdexcept>

#include "fluxvm/transformer.hpp"
#include "fluxvm/vm.hpp"

#ifndef FLUXVM_CORPUS_DIR
#define FLUXVM_CORPUS_DIR "corpus"
#endif

namespace fluxvm {

std::string corpus_dir() {
    const char* env = std::getenv("FLUXVM_CORPUS_DIR");
    return env && *env ? env : FLUXVM_CORPUS_DIR;
}

Value value_from_json(const mgmt::json& j) {
    if (j.is_null()) return Value::null();
    if (j.is_boolean()) return Value::boolean(j.get<bool>());
    if (j.is_number_integer()) return Value::integer(j.get<std::int64_t>());
    if (j.is_string()) return Value::string(j.get<std::string>());
    if (j.is_array()) {
        ArrayData elems;
        for (const auto& e : j) elems.push_back(value_from_json(e));
        return Value::array(std::move(elems));
    }
    throw std::invalid_argument("unsupported JSON value " + j.dump());
}

mgmt::json value_to_json(const Value& v) {
    switch (v.kind()) {
        case ValueKind::Null: return nullptr;
        case ValueKind::Int: return v.as_int();
        case ValueKind::Bool: return v.as_bool();
        case ValueKind::Str: return v.as_str();
        case ValueKind::Ref: return mgmt::json{{"ref", v.as_ref().id}};
        case ValueKind::Arr: {
            mgmt::json a = mgmt::json::array();
            for (const auto& e : v.as_arr()) a.push_back(value_to_json(e));
            return a;
        }
    }
    return nullptr;
}

std::vector<CorpusEntry> load_manifest(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw std::runtime_error("cannot open " + dir + "/manifest.json");
    mgmt::json j = mgmt::json::parse(in);
    std::vector<CorpusEntry> out;
    for (const auto& e : j.at("entries")) {
        CorpusEntry entry;
        entry.id = e.at("id").get<std::string>();
        entry.source = dir + "/" + e.at("source").get<std::string>();
        std::string ep = e.at("entry").get<std::string>();
        auto dot = ep.rfind('.');
        entry.entry = EntryPoint{ep.substr(0, dot), ep.substr(dot + 1)};
        for (const auto& c : e.at("cases")) {
            CorpusCase cc;
            for (const auto& a : c.at("args")) cc.args.push_back(value_from_json(a));
            cc.output = c.at("output").get<std::vector<std::string>>();
            if (c.contains("return")) cc.ret = value_from_json(c["return"]);
            entry.cases.push_back(std::move(cc));
        }
        out.push_back(std::move(entry));
    }
    return out;
}

DemoResult handler_demo(const Module& m, std::int64_t ticks, const std::vector<ScriptOp>& script) {
    VirtualMachine vm(transform_module(m).module);
    mgmt::Service service(vm.engine());
    DemoResult result;
    result.responses.resize(script.size());
    vm.interpreter().hooks().on_tick = [&](std::int64_t tick) {
        std::vector<std::size_t> due;
        for (std::size_t i = 0; i < script.size(); ++i)
            if (script[i].after_tick == tick) due.push_back(i);
        if (due.empty()) return;
        auto done = std::async(std::launch::async, [&] {
            for (auto i : due) result.responses[i] = service.handle_request(script[i].request);
        });
        done.get();
    };
    result.report = vm.run("Switcher", "main", {Value::integer(ticks)});
    return result;
}

}  // namespace fluxvm

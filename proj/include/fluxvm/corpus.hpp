#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fluxvm/interpreter.hpp"
#include "fluxvm/mgmt.hpp"
#include "fluxvm/module.hpp"

namespace fluxvm {

struct CorpusCase {
    std::vector<Value> args;
    std::vector<std::string> output;
    std::optional<Value> ret;  // absent for void entries
};

struct CorpusEntry {
    std::string id;
    std::string source;  // absolute path
    EntryPoint entry;
    std::vector<CorpusCase> cases;
};

/// Directory holding the shipped `.fas` files: `FLUXVM_CORPUS_DIR` if set, else the build-time default.
std::string corpus_dir();

/// Reads `manifest.json` from `dir`.
std::vector<CorpusEntry> load_manifest(const std::string& dir);

/// JSON scalars and arrays map onto Int/Str/Bool/Null/Arr.
Value value_from_json(const mgmt::json& j);
mgmt::json value_to_json(const Value& v);

struct ScriptOp {
    std::int64_t after_tick = 0;
    mgmt::Request request;
};

struct DemoResult {
    ExitReport report;
    std::vector<mgmt::Response> responses;  // in script order
};

/// Transforms the handler program and runs `Switcher.main(ticks)`. After each tick the guest
/// waits while the ops scheduled for that tick run on a management thread through the protocol
/// layer, so the swap lands between two presses.
DemoResult handler_demo(const Module& m, std::int64_t ticks, const std::vector<ScriptOp>& script);

}  // namespace fluxvm

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fluxvm/handles.hpp"
#include "fluxvm/module.hpp"
#include "fluxvm/program.hpp"
#include "fluxvm/trap.hpp"

namespace fluxvm {

class PatchEngine;
class CallSite;

/// Where invoke_dynamic goes and how the guest talks to its host.
struct RuntimeHooks {
    PatchEngine* engine = nullptr;                     // required once an invoke_dynamic executes
    std::function<void(std::int64_t)> on_tick;         // `Sys.tick(k)`
    std::function<void(const std::string&)> on_output; // every printed line, as it happens
};

struct ExitReport {
    std::optional<Value> return_value;
    std::vector<std::string> output;
    std::uint64_t instructions_executed = 0;
    std::uint64_t indy_invocations = 0;
    std::optional<Trap> trap;

    bool ok() const noexcept { return !trap.has_value(); }
};

struct HeapObject {
    std::uint32_t class_id = 0;
    std::vector<Value> fields;  // Program::instance_fields order
};

/// Single-threaded executor. Owns the heap and static storage; the patch engine it calls into
/// may be mutated concurrently from other threads.
class Interpreter : public Invoker {
public:
    static constexpr std::size_t kMaxDepth = 3000;

    explicit Interpreter(std::shared_ptr<const Program> program, RuntimeHooks hooks = {});

    const Program& program() const noexcept { return *program_; }
    RuntimeHooks& hooks() noexcept { return hooks_; }

    /// Runs a static entry point and reports. Traps are captured in the report.
    ExitReport run(std::string_view class_name, std::string_view method, std::vector<Value> args);

    /// Runs `body` with fresh counters and output capture; any trap lands in the report.
    ExitReport capture(const std::function<Value()>& body);

    /// Binding step for the classic invoke opcodes.
    const FunctionDef& dispatch(InvocationKind kind, const MethodRef& ref, const Value* receiver);

    /// Full name/type lookup and argument check on every call; nothing is cached.
    Value reflective_invoke(std::string_view owner, std::string_view name, const MethodType& mtype,
                            std::span<const Value> args);

    Value call(const FunctionDef& fn, std::span<const Value> args) override;
    const FunctionDef& select(InvocationKind kind, const FunctionDef& declared, const Value& receiver) override;
    bool conforms(const Value& v, const TypeTag& t) const override;

    /// Text form used by `print` and string concatenation.
    std::string render(const Value& v) const;
    void emit(std::string line);
    void tick(std::int64_t k);

    /// Runtime class of a Ref or Str value.
    std::optional<std::uint32_t> class_of(const Value& v) const;

    Value allocate(std::uint32_t class_id);
    const HeapObject& object(Ref r) const { return heap_.at(r.id); }
    std::size_t heap_size() const noexcept { return heap_.size(); }

private:
    struct FunctionRuntime {
        std::vector<Value> constants;                // push_const operands, by pc
        std::vector<const FunctionDef*> targets;     // static/special target or declared virtual method, by pc
        std::vector<std::optional<std::uint32_t>> slots;  // field / static / class id operands, by pc
        std::vector<CallSite*> sites;                // bootstrapped invoke_dynamic sites, by pc
        std::size_t max_stack = 0;
    };

    Value execute(const FunctionDef& fn, std::span<const Value> args);
    FunctionRuntime& runtime_for(const FunctionDef& fn);
    Value& static_ref(std::uint32_t slot) { return statics_.at(slot); }
    HeapObject& deref(const Value& v, const char* what);

    std::shared_ptr<const Program> program_;
    RuntimeHooks hooks_;
    std::vector<HeapObject> heap_;
    std::vector<Value> statics_;
    std::unordered_map<const FunctionDef*, std::unique_ptr<FunctionRuntime>> runtime_;
    std::unordered_map<const FunctionDef*, std::vector<const FunctionDef*>> overrides_;  // by receiver class id
    std::size_t depth_ = 0;

    std::vector<std::string> output_;
    std::uint64_t instructions_ = 0;
    std::uint64_t indy_ = 0;
};

/// One-shot convenience: links `m` (or reuses the engine's program when hooks carry one) and runs
/// `entry` with `args`.
ExitReport run(const Module& m, const EntryPoint& entry, std::vector<Value> args, RuntimeHooks hooks = {});

}  // namespace fluxvm

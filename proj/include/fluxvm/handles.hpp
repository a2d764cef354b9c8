#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fluxvm/module.hpp"
#include "fluxvm/program.hpp"
#include "fluxvm/value.hpp"

namespace fluxvm {

/// Execution services a handle chain needs at its leaves. Implemented by the interpreter.
class Invoker {
public:
    virtual ~Invoker() = default;

    /// Runs a concrete method.
    virtual Value call(const FunctionDef& fn, std::span<const Value> args) = 0;

    /// Late binding for virtual and interface handles: the override selected by the runtime
    /// class of `receiver`. Traps on null or non-implementing receivers.
    virtual const FunctionDef& select(InvocationKind kind, const FunctionDef& declared, const Value& receiver) = 0;

    /// Runtime type test used by narrowing conversions.
    virtual bool conforms(const Value& v, const TypeTag& t) const = 0;
};

/// Resolves direct handles against a linked program.
class Lookup {
public:
    explicit Lookup(std::shared_ptr<const Program> program) : program_(std::move(program)) {}
    const Program& program() const noexcept { return *program_; }
    const std::shared_ptr<const Program>& program_ptr() const noexcept { return program_; }

private:
    std::shared_ptr<const Program> program_;
};

/// Construction-time failure of a handle or combinator.
class HandleError : public std::runtime_error {
public:
    enum class Code { UnknownMethod, TypeMismatch, BadPosition, VoidReturn };
    HandleError(Code code, const std::string& message) : std::runtime_error(message), code_(code) {}
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

namespace detail {
struct HandleNode;
}

enum class HandleKind { Direct, InsertArguments, FilterArguments, FilterReturnValue, AsSpreader, AsCollector, AsType };

/// Immutable, typed reference to a method or a combinator over other handles. Copies share the
/// node tree.
class MethodHandle {
public:
    const MethodType& type() const noexcept;
    HandleKind kind() const noexcept;

    /// Children in construction order: target first, then filters.
    std::vector<MethodHandle> children() const;

    /// Direct handles only.
    const FunctionDef* function() const noexcept;
    InvocationKind invocation_kind() const noexcept;

    /// Human-readable chain, e.g. `as_type(filter_return(direct static Fib.fib:(I)I, ...))`.
    std::string describe() const;

    /// Node identity (two copies of one handle compare equal).
    friend bool operator==(const MethodHandle& a, const MethodHandle& b) noexcept { return a.node_ == b.node_; }

private:
    friend struct HandleAccess;
    explicit MethodHandle(std::shared_ptr<const detail::HandleNode> node) : node_(std::move(node)) {}
    std::shared_ptr<const detail::HandleNode> node_;
};

/// Direct reference to `owner.name` with type `mtype`. Static and special handles bind the
/// exact method now; virtual and interface handles re-dispatch on the receiver at each call.
MethodHandle direct(const Lookup& lookup, InvocationKind kind, std::string_view owner, std::string_view name,
                    const MethodType& mtype);

/// Pre-binds `values` at parameter positions [pos, pos + values.size()).
MethodHandle insert_arguments(const MethodHandle& h, std::size_t pos, std::vector<Value> values);

/// Applies unary filter i to argument pos + i before calling `h`.
MethodHandle filter_arguments(const MethodHandle& h, std::size_t pos, std::vector<MethodHandle> filters);

/// Pipes the result of `h` through the unary `filter`.
MethodHandle filter_return_value(const MethodHandle& h, const MethodHandle& filter);

/// Collapses the trailing `array_len` parameters into one Arr parameter that is spread on call.
MethodHandle as_spreader(const MethodHandle& h, std::size_t array_len);

/// Replaces a trailing Arr parameter by `array_len` Obj parameters that are packed on call.
MethodHandle as_collector(const MethodHandle& h, std::size_t array_len);

/// Adapts `h` to `new_type`. Widenings are free; narrowings are checked on each call.
MethodHandle as_type(const MethodHandle& h, const MethodType& new_type);

/// Checks `args` against the handle type, then evaluates the chain. A mismatch raises a
/// Structural trap before any guest code runs.
Value invoke_handle(const MethodHandle& h, std::span<const Value> args, Invoker& invoker);

/// Evaluates the chain without the entry check. Callers guarantee `args` fit `h.type()`.
Value invoke_exact(const MethodHandle& h, std::span<const Value> args, Invoker& invoker);

/// Re-derives the type of a handle bottom-up from its node parameters.
MethodType recompute_type(const MethodHandle& h);

}  // namespace fluxvm

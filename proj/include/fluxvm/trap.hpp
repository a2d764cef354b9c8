#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fluxvm {

enum class TrapKind : std::uint8_t {
    Internal,          // stack underflow, bad index: the verifier should have caught it
    UnknownMethod,
    DoesNotImplement,
    NullReceiver,
    Type,              // operand or argument of the wrong type
    Cast,              // failed narrowing conversion inside a handle chain
    ArrayLength,       // spreader received an array of the wrong length
    Structural,        // invoke_handle called with arguments that do not fit the handle type
    Bootstrap,
    StackOverflow,
};

std::string_view to_string(TrapKind kind) noexcept;

/// Guest execution fault. Halts the run; the innermost interpreted frame stamps its location.
class Trap : public std::runtime_error {
public:
    Trap(TrapKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

    TrapKind kind() const noexcept { return kind_; }

    bool located() const noexcept { return located_; }
    const std::string& class_name() const noexcept { return class_name_; }
    const std::string& method() const noexcept { return method_; }
    std::int64_t pc() const noexcept { return pc_; }

    void locate(std::string class_name, std::string method, std::int64_t pc) {
        class_name_ = std::move(class_name);
        method_ = std::move(method);
        pc_ = pc;
        located_ = true;
    }

    /// `<kind> trap at Class.method pc=N: message`
    std::string describe() const;

private:
    TrapKind kind_;
    bool located_ = false;
    std::string class_name_;
    std::string method_;
    std::int64_t pc_ = -1;
};

}  // namespace fluxvm

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fluxvm/module.hpp"

namespace fluxvm {

struct Diagnostic {
    std::string class_name;  // empty for module-level problems
    std::string method;      // empty for class-level problems
    std::int64_t pc = -1;
    std::string message;

    std::string to_string() const;
};

/// Structural verification. Never throws; an empty result means the module is safe to run.
///
/// Checks the type invariants of classes and methods, branch targets, constant-pool and
/// symbolic-reference resolution, and stack discipline (every path reaching an instruction
/// agrees on the operand-stack depth).
std::vector<Diagnostic> verify(const Module& m);

/// Maximum operand-stack depth of a method, or nullopt if its stack discipline is broken.
std::optional<std::size_t> max_stack_depth(const FunctionDef& fn, const ConstantPool& pool);

class VerifyError : public std::runtime_error {
public:
    explicit VerifyError(std::vector<Diagnostic> diagnostics);
    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

/// Throws VerifyError unless verify(m) is empty.
void require_verified(const Module& m);

}  // namespace fluxvm

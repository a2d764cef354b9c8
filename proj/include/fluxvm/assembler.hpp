#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "fluxvm/module.hpp"

namespace fluxvm {

/// Syntax or structural error in assembly text. Line and column are 1-based.
class AssembleError : public std::runtime_error {
public:
    AssembleError(std::size_t line, std::size_t column, const std::string& message);

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t line_;
    std::size_t column_;
    std::string detail_;
};

/// Assembles `.fas` text.
///
/// Line-oriented grammar (`;` starts a comment):
///
///     entry <Class>.<method>
///     class <Name> [extends <Name>] [implements <Name>,...]
///     field [static] <name> <type>
///     method <kind> <name> (<types>)<ret> [locals=<n>]
///     <label>:
///     <mnemonic> [operands]
///
/// A method without instructions is abstract.
Module assemble(std::string_view text);

/// Renders a module back to assembly. Branch targets become `L<index>` labels.
std::string disassemble(const Module& m);

/// Reads and assembles a file.
Module assemble_file(const std::string& path);

/// Escapes a string for use as a `push_const` literal.
std::string quote_literal(std::string_view s);

}  // namespace fluxvm

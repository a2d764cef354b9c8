#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fluxvm/value.hpp"

namespace fluxvm {

class Interpreter;

enum class Opcode : std::uint8_t {
    PushConst,
    Load,
    Store,
    Add,
    Sub,
    Mul,
    Lt,
    Eq,
    Jump,
    JumpIfFalse,
    New,
    GetField,
    PutField,
    GetStatic,
    PutStatic,
    Print,
    Ret,
    InvokeStatic,
    InvokeVirtual,
    InvokeSpecial,
    InvokeInterface,
    InvokeDynamic,
    MakeArr,
    ArrGet,
    ArrLen,
};

std::string_view mnemonic(Opcode op) noexcept;
std::optional<Opcode> opcode_from_mnemonic(std::string_view text) noexcept;

inline bool is_classic_invoke(Opcode op) noexcept {
    return op == Opcode::InvokeStatic || op == Opcode::InvokeVirtual || op == Opcode::InvokeSpecial ||
           op == Opcode::InvokeInterface;
}

InvocationKind invoke_kind(Opcode op) noexcept;
Opcode invoke_opcode(InvocationKind kind) noexcept;

/// Operand layout:
///   push_const, invoke_{static,virtual,special,interface}: `index` into the constant pool
///   load, store: `index` is the local slot
///   jump, jump_if_false: `index` is the target instruction
///   make_arr: `index` is the element count
///   new, get_field, put_field, get_static, put_static: `owner` (+ `member` for fields)
///   invoke_dynamic: `owner` holds the symbolic name, plus `mtype` and `tag`
struct Instruction {
    Opcode op = Opcode::Ret;
    std::int64_t index = 0;
    std::string owner;
    std::string member;
    MethodType mtype;
    InvocationKind tag = InvocationKind::Static;

    friend bool operator==(const Instruction&, const Instruction&) = default;
};

/// Counts constructions of code units so tests can audit that nothing is re-created after load.
template <class Tag>
class InstanceCounter {
public:
    InstanceCounter() noexcept { created_.fetch_add(1, std::memory_order_relaxed); }
    InstanceCounter(const InstanceCounter&) noexcept : InstanceCounter() {}
    InstanceCounter(InstanceCounter&&) noexcept : InstanceCounter() {}
    InstanceCounter& operator=(const InstanceCounter&) noexcept { return *this; }
    InstanceCounter& operator=(InstanceCounter&&) noexcept { return *this; }

    static std::uint64_t created() noexcept { return created_.load(std::memory_order_relaxed); }
    friend bool operator==(const InstanceCounter&, const InstanceCounter&) noexcept { return true; }

private:
    static inline std::atomic<std::uint64_t> created_{0};
};

using NativeFn = Value (*)(Interpreter&, std::span<const Value>);

struct FunctionDef {
    std::string owner;
    std::string name;
    MethodType mtype;
    InvocationKind kind = InvocationKind::Static;
    std::vector<Instruction> code;
    std::uint32_t locals = 0;
    NativeFn native = nullptr;
    [[no_unique_address]] InstanceCounter<FunctionDef> audit{};

    bool is_abstract() const noexcept { return code.empty() && native == nullptr; }
    bool is_static() const noexcept { return kind == InvocationKind::Static; }

    friend bool operator==(const FunctionDef&, const FunctionDef&) = default;
};

struct FieldDef {
    std::string name;
    TypeTag type;
    bool is_static = false;

    friend bool operator==(const FieldDef&, const FieldDef&) = default;
};

struct ClassDef {
    std::string name;
    std::optional<std::string> super;
    std::vector<std::string> interfaces;
    std::vector<FieldDef> fields;
    std::vector<FunctionDef> methods;
    [[no_unique_address]] InstanceCounter<ClassDef> audit{};

    const FunctionDef* find_method(std::string_view name, const MethodType& mtype) const noexcept;
    const FieldDef* find_field(std::string_view name) const noexcept;

    friend bool operator==(const ClassDef&, const ClassDef&) = default;
};

/// Symbolic method reference `Owner.name:(params)ret`.
struct MethodRef {
    std::string owner;
    std::string name;
    MethodType mtype;

    /// Assembly spelling with descriptor types.
    std::string to_string() const;

    friend bool operator==(const MethodRef&, const MethodRef&) = default;
};

/// Throws TypeSyntaxError on malformed text. Accepts descriptor and key type spellings.
MethodRef parse_method_ref(std::string_view text);

struct Constant {
    enum class Tag : std::uint8_t { Int, Str, Method };
    Tag tag = Tag::Int;
    std::int64_t int_value = 0;
    std::string text;  // Str payload, or the canonical method reference spelling

    friend bool operator==(const Constant&, const Constant&) = default;
};

class ConstantPool {
public:
    /// Returns the index of a value-equal entry, appending one if needed.
    std::uint32_t intern(const Constant& c);
    std::uint32_t intern_int(std::int64_t v) { return intern(Constant{Constant::Tag::Int, v, {}}); }
    std::uint32_t intern_str(std::string s) { return intern(Constant{Constant::Tag::Str, 0, std::move(s)}); }
    std::uint32_t intern_method(const MethodRef& ref) {
        return intern(Constant{Constant::Tag::Method, 0, ref.to_string()});
    }

    std::size_t size() const noexcept { return entries_.size(); }
    bool contains(std::int64_t index) const noexcept {
        return index >= 0 && static_cast<std::size_t>(index) < entries_.size();
    }
    const Constant& at(std::size_t index) const { return entries_.at(index); }
    const std::vector<Constant>& entries() const noexcept { return entries_; }

    friend bool operator==(const ConstantPool&, const ConstantPool&) = default;

private:
    std::vector<Constant> entries_;
};

struct EntryPoint {
    std::string class_name;
    std::string method;
    friend bool operator==(const EntryPoint&, const EntryPoint&) = default;
};

struct Module {
    std::vector<ClassDef> classes;
    ConstantPool constants;
    std::optional<EntryPoint> entry;

    const ClassDef* find_class(std::string_view name) const noexcept;

    friend bool operator==(const Module&, const Module&) = default;
};

/// Structural equality with constant operands compared by value rather than by pool index.
bool structurally_equal(const Module& a, const Module& b);

/// Rebuilds the pool from the constants actually referenced, in instruction order.
Module canonicalize_pool(const Module& m);

}  // namespace fluxvm

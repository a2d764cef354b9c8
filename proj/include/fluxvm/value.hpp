#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fluxvm {

class Value;

using ArrayData = std::vector<Value>;

/// Heap object identifier. Only produced by `new`.
struct Ref {
    std::uint32_t id = 0;
    friend bool operator==(Ref, Ref) = default;
};

struct Null {
    friend bool operator==(Null, Null) = default;
};

enum class ValueKind : std::uint8_t { Null, Int, Bool, Str, Ref, Arr };

std::string_view to_string(ValueKind kind) noexcept;

/// Operand-stack element. Str and Arr payloads are immutable and shared.
class Value {
public:
    Value() = default;

    static Value null() { return Value{}; }
    static Value integer(std::int64_t v) { return Value{Storage{std::in_place_index<1>, v}}; }
    static Value boolean(bool v) { return Value{Storage{std::in_place_index<2>, v}}; }
    static Value string(std::string s);
    static Value ref(Ref r) { return Value{Storage{std::in_place_index<4>, r}}; }
    static Value array(ArrayData elements);

    ValueKind kind() const noexcept { return static_cast<ValueKind>(data_.index()); }

    bool is_null() const noexcept { return kind() == ValueKind::Null; }
    bool is_int() const noexcept { return kind() == ValueKind::Int; }
    bool is_bool() const noexcept { return kind() == ValueKind::Bool; }
    bool is_str() const noexcept { return kind() == ValueKind::Str; }
    bool is_ref() const noexcept { return kind() == ValueKind::Ref; }
    bool is_arr() const noexcept { return kind() == ValueKind::Arr; }

    std::int64_t as_int() const { return std::get<1>(data_); }
    bool as_bool() const { return std::get<2>(data_); }
    const std::string& as_str() const { return *std::get<3>(data_); }
    Ref as_ref() const { return std::get<4>(data_); }
    const ArrayData& as_arr() const { return *std::get<5>(data_); }

    /// Deep equality for Str and Arr, identity for Ref.
    friend bool operator==(const Value& a, const Value& b);

private:
    using Storage = std::variant<Null, std::int64_t, bool, std::shared_ptr<const std::string>, Ref,
                                 std::shared_ptr<const ArrayData>>;
    explicit Value(Storage s) : data_(std::move(s)) {}
    Storage data_;
};

/// Two's complement wrapping arithmetic.
inline std::int64_t wrapping_add(std::int64_t a, std::int64_t b) noexcept {
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
inline std::int64_t wrapping_sub(std::int64_t a, std::int64_t b) noexcept {
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
inline std::int64_t wrapping_mul(std::int64_t a, std::int64_t b) noexcept {
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

// ---------------------------------------------------------------------------
// Types and signatures

enum class TypeKind : std::uint8_t { Int, Str, Bool, Obj, Arr, Void, Class };

struct TypeTag {
    TypeKind kind = TypeKind::Obj;
    std::string class_name;  // only for TypeKind::Class

    static TypeTag of(TypeKind k) { return TypeTag{k, {}}; }
    static TypeTag klass(std::string name) { return TypeTag{TypeKind::Class, std::move(name)}; }

    bool is_void() const noexcept { return kind == TypeKind::Void; }
    bool is_reference() const noexcept { return kind == TypeKind::Obj || kind == TypeKind::Class; }

    friend bool operator==(const TypeTag&, const TypeTag&) = default;
};

struct MethodType {
    std::vector<TypeTag> params;
    TypeTag ret = TypeTag::of(TypeKind::Void);

    /// Assembly spelling, e.g. `(LFoo;I)V`.
    std::string descriptor() const;

    /// Same type with the first parameter removed.
    MethodType drop_first() const;

    friend bool operator==(const MethodType&, const MethodType&) = default;
};

class TypeSyntaxError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Single-letter or `L<Name>;` spelling.
std::string descriptor(const TypeTag& t);

/// Spelling used inside call-site keys: `I`, `MyClass`, `void`, ...
std::string key_spelling(const TypeTag& t);

/// Accepts `(LA;II)V`, `(O,S,S)S`, `(MyActionListener)void` and mixes thereof.
MethodType parse_method_type(std::string_view text);

/// Parses one type token (`I`, `LFoo;`, `Foo`, `void`).
TypeTag parse_type(std::string_view token);

/// True when `name` could be confused with a primitive spelling inside a type list.
bool is_reserved_type_name(std::string_view name) noexcept;

bool is_identifier(std::string_view name) noexcept;

enum class InvocationKind : std::uint8_t { Static, Virtual, Special, Interface };

std::string_view to_string(InvocationKind kind) noexcept;

/// Parses `static`, `virtual`, `special`, `interface`. Returns false on anything else.
bool parse_invocation_kind(std::string_view text, InvocationKind& out) noexcept;

}  // namespace fluxvm

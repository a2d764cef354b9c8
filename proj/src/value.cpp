#include "fluxvm/value.hpp"

#include <algorithm>

namespace fluxvm {

std::string_view to_string(ValueKind kind) noexcept {
    switch (kind) {
        case ValueKind::Null: return "Null";
        case ValueKind::Int: return "Int";
        case ValueKind::Bool: return "Bool";
        case ValueKind::Str: return "Str";
        case ValueKind::Ref: return "Ref";
        case ValueKind::Arr: return "Arr";
    }
    return "?";
}

Value Value::string(std::string s) {
    return Value{Storage{std::in_place_index<3>, std::make_shared<const std::string>(std::move(s))}};
}

Value Value::array(ArrayData elements) {
    return Value{Storage{std::in_place_index<5>, std::make_shared<const ArrayData>(std::move(elements))}};
}

bool operator==(const Value& a, const Value& b) {
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
        case ValueKind::Null: return true;
        case ValueKind::Int: return a.as_int() == b.as_int();
        case ValueKind::Bool: return a.as_bool() == b.as_bool();
        case ValueKind::Str: return a.as_str() == b.as_str();
        case ValueKind::Ref: return a.as_ref() == b.as_ref();
        case ValueKind::Arr: return a.as_arr() == b.as_arr();
    }
    return false;
}

// ---------------------------------------------------------------------------

std::string descriptor(const TypeTag& t) {
    switch (t.kind) {
        case TypeKind::Int: return "I";
        case TypeKind::Str: return "S";
        case TypeKind::Bool: return "Z";
        case TypeKind::Obj: return "O";
        case TypeKind::Arr: return "A";
        case TypeKind::Void: return "V";
        case TypeKind::Class: return "L" + t.class_name + ";";
    }
    return "?";
}

std::string key_spelling(const TypeTag& t) {
    switch (t.kind) {
        case TypeKind::Void: return "void";
        case TypeKind::Class: return t.class_name;
        default: return descriptor(t);
    }
}

std::string MethodType::descriptor() const {
    std::string out = "(";
    for (const auto& p : params) out += fluxvm::descriptor(p);
    out += ")";
    out += fluxvm::descriptor(ret);
    return out;
}

MethodType MethodType::drop_first() const {
    MethodType out;
    if (!params.empty()) out.params.assign(params.begin() + 1, params.end());
    out.ret = ret;
    return out;
}

namespace {

bool primitive_letter(char c, TypeTag& out) {
    switch (c) {
        case 'I': out = TypeTag::of(TypeKind::Int); return true;
        case 'S': out = TypeTag::of(TypeKind::Str); return true;
        case 'Z': out = TypeTag::of(TypeKind::Bool); return true;
        case 'O': out = TypeTag::of(TypeKind::Obj); return true;
        case 'A': out = TypeTag::of(TypeKind::Arr); return true;
        case 'V': out = TypeTag::of(TypeKind::Void); return true;
        default: return false;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

// Descriptor-sequence parse (`LA;II`). Returns false if the text is not one.
bool parse_descriptor_sequence(std::string_view s, std::vector<TypeTag>& out) {
    out.clear();
    std::size_t i = 0;
    while (i < s.size()) {
        TypeTag t;
        if (s[i] == 'L') {
            auto semi = s.find(';', i);
            if (semi == std::string_view::npos) return false;
            auto name = s.substr(i + 1, semi - i - 1);
            if (!is_identifier(name)) return false;
            out.push_back(TypeTag::klass(std::string(name)));
            i = semi + 1;
        } else if (primitive_letter(s[i], t)) {
            out.push_back(t);
            ++i;
        } else {
            return false;
        }
    }
    return true;
}

}  // namespace

bool is_identifier(std::string_view name) noexcept {
    if (name.empty()) return false;
    if (name.front() >= '0' && name.front() <= '9') return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
               c == '$' || c == '/' || c == '<' || c == '>';
    });
}

bool is_reserved_type_name(std::string_view name) noexcept {
    if (name == "void") return true;
    std::vector<TypeTag> ignored;
    return parse_descriptor_sequence(name, ignored);
}

TypeTag parse_type(std::string_view token) {
    token = trim(token);
    TypeTag t;
    if (token.size() == 1 && primitive_letter(token[0], t)) return t;
    if (token == "void") return TypeTag::of(TypeKind::Void);
    if (token.size() >= 3 && token.front() == 'L' && token.back() == ';') {
        auto name = token.substr(1, token.size() - 2);
        if (is_identifier(name)) return TypeTag::klass(std::string(name));
    }
    if (is_identifier(token) && !is_reserved_type_name(token)) return TypeTag::klass(std::string(token));
    throw TypeSyntaxError("bad type '" + std::string(token) + "'");
}

MethodType parse_method_type(std::string_view text) {
    text = trim(text);
    if (text.empty() || text.front() != '(') throw TypeSyntaxError("method type must start with '('");
    auto close = text.find(')');
    if (close == std::string_view::npos) throw TypeSyntaxError("method type is missing ')'");
    auto inner = trim(text.substr(1, close - 1));
    auto ret = text.substr(close + 1);
    if (trim(ret).empty()) throw TypeSyntaxError("method type is missing a return type");

    MethodType mt;
    if (inner.find(',') != std::string_view::npos) {
        while (true) {
            auto comma = inner.find(',');
            mt.params.push_back(parse_type(inner.substr(0, comma)));
            if (comma == std::string_view::npos) break;
            inner.remove_prefix(comma + 1);
        }
    } else if (!inner.empty()) {
        if (!parse_descriptor_sequence(inner, mt.params)) {
            mt.params.clear();
            mt.params.push_back(parse_type(inner));
        }
    }
    for (const auto& p : mt.params)
        if (p.is_void()) throw TypeSyntaxError("V is only legal in return position");
    mt.ret = parse_type(ret);
    return mt;
}

std::string_view to_string(InvocationKind kind) noexcept {
    switch (kind) {
        case InvocationKind::Static: return "static";
        case InvocationKind::Virtual: return "virtual";
        case InvocationKind::Special: return "special";
        case InvocationKind::Interface: return "interface";
    }
    return "?";
}

bool parse_invocation_kind(std::string_view text, InvocationKind& out) noexcept {
    if (text == "static") out = InvocationKind::Static;
    else if (text == "virtual") out = InvocationKind::Virtual;
    else if (text == "special") out = InvocationKind::Special;
    else if (text == "interface") out = InvocationKind::Interface;
    else return false;
    return true;
}

}  // namespace fluxvm

#include "fluxvm/module.hpp"

#include <array>

namespace fluxvm {

namespace {

constexpr std::array<std::pair<Opcode, std::string_view>, 25> kMnemonics{{
    {Opcode::PushConst, "push_const"},
    {Opcode::Load, "load"},
    {Opcode::Store, "store"},
    {Opcode::Add, "add"},
    {Opcode::Sub, "sub"},
    {Opcode::Mul, "mul"},
    {Opcode::Lt, "lt"},
    {Opcode::Eq, "eq"},
    {Opcode::Jump, "jump"},
    {Opcode::JumpIfFalse, "jump_if_false"},
    {Opcode::New, "new"},
    {Opcode::GetField, "get_field"},
    {Opcode::PutField, "put_field"},
    {Opcode::GetStatic, "get_static"},
    {Opcode::PutStatic, "put_static"},
    {Opcode::Print, "print"},
    {Opcode::Ret, "ret"},
    {Opcode::InvokeStatic, "invoke_static"},
    {Opcode::InvokeVirtual, "invoke_virtual"},
    {Opcode::InvokeSpecial, "invoke_special"},
    {Opcode::InvokeInterface, "invoke_interface"},
    {Opcode::InvokeDynamic, "invoke_dynamic"},
    {Opcode::MakeArr, "make_arr"},
    {Opcode::ArrGet, "arr_get"},
    {Opcode::ArrLen, "arr_len"},
}};

}  // namespace

std::string_view mnemonic(Opcode op) noexcept {
    for (const auto& [code, text] : kMnemonics)
        if (code == op) return text;
    return "?";
}

std::optional<Opcode> opcode_from_mnemonic(std::string_view text) noexcept {
    for (const auto& [code, name] : kMnemonics)
        if (name == text) return code;
    return std::nullopt;
}

InvocationKind invoke_kind(Opcode op) noexcept {
    switch (op) {
        case Opcode::InvokeVirtual: return InvocationKind::Virtual;
        case Opcode::InvokeSpecial: return InvocationKind::Special;
        case Opcode::InvokeInterface: return InvocationKind::Interface;
        default: return InvocationKind::Static;
    }
}

Opcode invoke_opcode(InvocationKind kind) noexcept {
    switch (kind) {
        case InvocationKind::Static: return Opcode::InvokeStatic;
        case InvocationKind::Virtual: return Opcode::InvokeVirtual;
        case InvocationKind::Special: return Opcode::InvokeSpecial;
        case InvocationKind::Interface: return Opcode::InvokeInterface;
    }
    return Opcode::InvokeStatic;
}

const FunctionDef* ClassDef::find_method(std::string_view method_name, const MethodType& mtype) const noexcept {
    for (const auto& f : methods)
        if (f.name == method_name && f.mtype == mtype) return &f;
    return nullptr;
}

const FieldDef* ClassDef::find_field(std::string_view field_name) const noexcept {
    for (const auto& f : fields)
        if (f.name == field_name) return &f;
    return nullptr;
}

std::string MethodRef::to_string() const { return owner + "." + name + ":" + mtype.descriptor(); }

MethodRef parse_method_ref(std::string_view text) {
    auto colon = text.find(':');
    if (colon == std::string_view::npos) throw TypeSyntaxError("method reference is missing ':'");
    auto head = text.substr(0, colon);
    auto dot = head.rfind('.');
    if (dot == std::string_view::npos) throw TypeSyntaxError("method reference is missing 'Owner.'");
    MethodRef ref;
    ref.owner = std::string(head.substr(0, dot));
    ref.name = std::string(head.substr(dot + 1));
    if (!is_identifier(ref.owner)) throw TypeSyntaxError("bad owner '" + ref.owner + "'");
    if (!is_identifier(ref.name)) throw TypeSyntaxError("bad method name '" + ref.name + "'");
    ref.mtype = parse_method_type(text.substr(colon + 1));
    return ref;
}

std::uint32_t ConstantPool::intern(const Constant& c) {
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i] == c) return static_cast<std::uint32_t>(i);
    entries_.push_back(c);
    return static_cast<std::uint32_t>(entries_.size() - 1);
}

const ClassDef* Module::find_class(std::string_view name) const noexcept {
    for (const auto& c : classes)
        if (c.name == name) return &c;
    return nullptr;
}

namespace {

bool uses_pool(Opcode op) noexcept { return op == Opcode::PushConst || is_classic_invoke(op); }

bool same_instruction(const Instruction& a, const ConstantPool& pa, const Instruction& b, const ConstantPool& pb) {
    if (a.op != b.op) return false;
    if (uses_pool(a.op)) {
        if (!pa.contains(a.index) || !pb.contains(b.index)) return a.index == b.index;
        return pa.at(static_cast<std::size_t>(a.index)) == pb.at(static_cast<std::size_t>(b.index));
    }
    return a == b;
}

}  // namespace

bool structurally_equal(const Module& a, const Module& b) {
    if (a.entry != b.entry || a.classes.size() != b.classes.size()) return false;
    for (std::size_t c = 0; c < a.classes.size(); ++c) {
        const auto& ca = a.classes[c];
        const auto& cb = b.classes[c];
        if (ca.name != cb.name || ca.super != cb.super || ca.interfaces != cb.interfaces || ca.fields != cb.fields ||
            ca.methods.size() != cb.methods.size())
            return false;
        for (std::size_t m = 0; m < ca.methods.size(); ++m) {
            const auto& fa = ca.methods[m];
            const auto& fb = cb.methods[m];
            if (fa.owner != fb.owner || fa.name != fb.name || fa.mtype != fb.mtype || fa.kind != fb.kind ||
                fa.locals != fb.locals || fa.native != fb.native || fa.code.size() != fb.code.size())
                return false;
            for (std::size_t i = 0; i < fa.code.size(); ++i)
                if (!same_instruction(fa.code[i], a.constants, fb.code[i], b.constants)) return false;
        }
    }
    return true;
}

Module canonicalize_pool(const Module& m) {
    Module out;
    out.entry = m.entry;
    out.classes = m.classes;
    for (auto& cls : out.classes) {
        for (auto& fn : cls.methods) {
            for (auto& ins : fn.code) {
                if (uses_pool(ins.op) && m.constants.contains(ins.index))
                    ins.index = out.constants.intern(m.constants.at(static_cast<std::size_t>(ins.index)));
            }
        }
    }
    return out;
}

}  // namespace fluxvm

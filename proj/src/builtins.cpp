#include <string>

#include "fluxvm/interpreter.hpp"
#include "fluxvm/program.hpp"

namespace fluxvm {

namespace {

Value str_replace_all(Interpreter&, std::span<const Value> a) {
    if (!a[0].is_str()) throw Trap(TrapKind::Type, "replace_all receiver is not a string");
    if (!a[1].is_str() || !a[2].is_str()) throw Trap(TrapKind::Type, "replace_all expects string arguments");
    const std::string& text = a[0].as_str();
    const std::string& from = a[1].as_str();
    const std::string& to = a[2].as_str();
    if (from.empty()) return a[0];
    std::string out;
    std::size_t pos = 0;
    for (std::size_t hit; (hit = text.find(from, pos)) != std::string::npos; pos = hit + from.size())
        out.append(text, pos, hit - pos).append(to);
    out.append(text, pos);
    return Value::string(std::move(out));
}

Value str_length(Interpreter&, std::span<const Value> a) {
    if (!a[0].is_str()) throw Trap(TrapKind::Type, "length receiver is not a string");
    return Value::integer(static_cast<std::int64_t>(a[0].as_str().size()));
}

Value arrays_empty(Interpreter&, std::span<const Value>) { return Value::array({}); }

Value arrays_tail(Interpreter&, std::span<const Value> a) {
    if (a[0].is_null()) throw Trap(TrapKind::NullReceiver, "tail of null");
    const auto& elems = a[0].as_arr();
    if (elems.empty()) return a[0];
    return Value::array(ArrayData(elems.begin() + 1, elems.end()));
}

Value arrays_push(Interpreter&, std::span<const Value> a) {
    if (a[0].is_null()) throw Trap(TrapKind::NullReceiver, "push onto null");
    ArrayData elems = a[0].as_arr();
    elems.push_back(a[1]);
    return Value::array(std::move(elems));
}

Value sys_tick(Interpreter& vm, std::span<const Value> a) {
    vm.tick(a[0].as_int());
    return Value::null();
}

Value stream_println(Interpreter& vm, std::span<const Value> a) {
    vm.emit(vm.render(a[1]));
    return Value::null();
}

Value reflect_invoke(Interpreter& vm, std::span<const Value> a) {
    for (int i = 0; i < 3; ++i)
        if (!a[static_cast<std::size_t>(i)].is_str()) throw Trap(TrapKind::Type, "Reflect.invoke expects owner, name and type strings");
    if (!a[3].is_arr()) throw Trap(TrapKind::Type, "Reflect.invoke expects an argument array");
    MethodType mtype;
    try {
        mtype = parse_method_type(a[2].as_str());
    } catch (const TypeSyntaxError& e) {
        throw Trap(TrapKind::Type, std::string("Reflect.invoke: ") + e.what());
    }
    const auto& args = a[3].as_arr();
    return vm.reflective_invoke(a[0].as_str(), a[1].as_str(), mtype, args);
}

TypeTag T(TypeKind k) { return TypeTag::of(k); }

FunctionDef native(std::string owner, std::string name, InvocationKind kind, MethodType mtype, NativeFn fn) {
    FunctionDef f;
    f.owner = std::move(owner);
    f.name = std::move(name);
    f.kind = kind;
    f.mtype = std::move(mtype);
    f.locals = static_cast<std::uint32_t>(f.mtype.params.size());
    f.native = fn;
    return f;
}

ClassDef named(std::string name) {
    ClassDef c;
    c.name = std::move(name);
    return c;
}

Module build() {
    using K = TypeKind;
    using IK = InvocationKind;
    Module m;

    ClassDef str = named("Str");
    str.methods.push_back(native("Str", "replace_all", IK::Virtual, {{T(K::Obj), T(K::Str), T(K::Str)}, T(K::Str)}, str_replace_all));
    str.methods.push_back(native("Str", "length", IK::Virtual, {{T(K::Obj)}, T(K::Int)}, str_length));
    m.classes.push_back(std::move(str));

    ClassDef arrays = named("Arrays");
    arrays.methods.push_back(native("Arrays", "empty", IK::Static, {{}, T(K::Arr)}, arrays_empty));
    arrays.methods.push_back(native("Arrays", "tail", IK::Static, {{T(K::Arr)}, T(K::Arr)}, arrays_tail));
    arrays.methods.push_back(native("Arrays", "push", IK::Static, {{T(K::Arr), T(K::Obj)}, T(K::Arr)}, arrays_push));
    m.classes.push_back(std::move(arrays));

    ClassDef stream = named("PrintStream");
    stream.methods.push_back(
        native("PrintStream", "println", IK::Virtual, {{TypeTag::klass("PrintStream"), T(K::Obj)}, T(K::Void)}, stream_println));
    m.classes.push_back(std::move(stream));

    ClassDef sys = named("Sys");
    sys.fields.push_back(FieldDef{"out", TypeTag::klass("PrintStream"), true});
    sys.methods.push_back(native("Sys", "tick", IK::Static, {{T(K::Int)}, T(K::Void)}, sys_tick));
    m.classes.push_back(std::move(sys));

    ClassDef reflect = named("Reflect");
    reflect.methods.push_back(native("Reflect", "invoke", IK::Static,
                                     {{T(K::Str), T(K::Str), T(K::Str), T(K::Arr)}, T(K::Obj)}, reflect_invoke));
    m.classes.push_back(std::move(reflect));
    return m;
}

}  // namespace

const Module& system_library() {
    static const Module lib = build();
    return lib;
}

}  // namespace fluxvm

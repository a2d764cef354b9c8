#include "fluxvm/interpreter.hpp"

#include "fluxvm/patch.hpp"
#include "fluxvm/verifier.hpp"

namespace fluxvm {

namespace {

struct DepthGuard {
    std::size_t& depth;
    explicit DepthGuard(std::size_t& d) : depth(d) {
        if (++depth > Interpreter::kMaxDepth) {
            --depth;
            throw Trap(TrapKind::StackOverflow, "call depth exceeds " + std::to_string(Interpreter::kMaxDepth));
        }
    }
    ~DepthGuard() { --depth; }
};

[[noreturn]] void type_trap(const std::string& msg) { throw Trap(TrapKind::Type, msg); }

std::int64_t want_int(const Value& v, const char* op) {
    if (!v.is_int()) type_trap(std::string(op) + " expects I, got " + std::string(to_string(v.kind())));
    return v.as_int();
}

}  // namespace

Interpreter::Interpreter(std::shared_ptr<const Program> program, RuntimeHooks hooks)
    : program_(std::move(program)), hooks_(std::move(hooks)) {
    statics_.resize(program_->static_count());
    for (std::uint32_t i = 0; i < statics_.size(); ++i) {
        const TypeTag& t = program_->static_field(i).type;
        if (t.kind == TypeKind::Int) statics_[i] = Value::integer(0);
        if (t.kind == TypeKind::Bool) statics_[i] = Value::boolean(false);
    }
    if (auto out = program_->static_slot("Sys", "out")) {
        if (auto ps = program_->class_id("PrintStream")) statics_[*out] = allocate(*ps);
    }
}

ExitReport Interpreter::capture(const std::function<Value()>& body) {
    ExitReport report;
    output_.clear();
    instructions_ = 0;
    indy_ = 0;
    depth_ = 0;
    try {
        report.return_value = body();
    } catch (const Trap& t) {
        report.trap = t;
    }
    report.output = std::move(output_);
    output_.clear();
    report.instructions_executed = instructions_;
    report.indy_invocations = indy_;
    return report;
}

ExitReport Interpreter::run(std::string_view class_name, std::string_view method, std::vector<Value> args) {
    return capture([&]() -> Value {
        const ClassDef* cls = program_->find_class(class_name);
        const FunctionDef* fn = nullptr;
        if (cls)
            for (const auto& f : cls->methods)
                if (f.name == method && f.is_static()) fn = &f;
        if (!fn)
            throw Trap(TrapKind::UnknownMethod,
                       "no static entry " + std::string(class_name) + "." + std::string(method));
        return call(*fn, args);
    });
}

Value Interpreter::allocate(std::uint32_t class_id) {
    HeapObject obj;
    obj.class_id = class_id;
    const auto& fields = program_->instance_fields(class_id);
    obj.fields.resize(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i]->type.kind == TypeKind::Int) obj.fields[i] = Value::integer(0);
        if (fields[i]->type.kind == TypeKind::Bool) obj.fields[i] = Value::boolean(false);
    }
    heap_.push_back(std::move(obj));
    return Value::ref(Ref{static_cast<std::uint32_t>(heap_.size() - 1)});
}

HeapObject& Interpreter::deref(const Value& v, const char* what) {
    if (v.is_null()) throw Trap(TrapKind::NullReceiver, std::string(what) + " on null");
    if (!v.is_ref()) type_trap(std::string(what) + " on " + std::string(to_string(v.kind())));
    return heap_.at(v.as_ref().id);
}

std::optional<std::uint32_t> Interpreter::class_of(const Value& v) const {
    if (v.is_ref()) return heap_.at(v.as_ref().id).class_id;
    if (v.is_str()) return program_->class_id("Str");
    return std::nullopt;
}

bool Interpreter::conforms(const Value& v, const TypeTag& t) const {
    switch (v.kind()) {
        case ValueKind::Int: return t.kind == TypeKind::Int || t.kind == TypeKind::Obj;
        case ValueKind::Bool: return t.kind == TypeKind::Bool || t.kind == TypeKind::Obj;
        case ValueKind::Str:
            return t.kind == TypeKind::Str || t.kind == TypeKind::Obj ||
                   (t.kind == TypeKind::Class && t.class_name == "Str");
        case ValueKind::Arr: return t.kind == TypeKind::Arr || t.kind == TypeKind::Obj;
        case ValueKind::Null:
            return t.kind == TypeKind::Obj || t.kind == TypeKind::Class || t.kind == TypeKind::Str ||
                   t.kind == TypeKind::Arr;
        case ValueKind::Ref:
            if (t.kind == TypeKind::Obj) return true;
            if (t.kind != TypeKind::Class) return false;
            return program_->is_subclass(program_->class_at(heap_.at(v.as_ref().id).class_id).name, t.class_name);
    }
    return false;
}

std::string Interpreter::render(const Value& v) const {
    switch (v.kind()) {
        case ValueKind::Null: return "null";
        case ValueKind::Int: return std::to_string(v.as_int());
        case ValueKind::Bool: return v.as_bool() ? "true" : "false";
        case ValueKind::Str: return v.as_str();
        case ValueKind::Ref: return program_->class_at(heap_.at(v.as_ref().id).class_id).name + "@" + std::to_string(v.as_ref().id);
        case ValueKind::Arr: {
            std::string out = "[";
            const auto& a = v.as_arr();
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (i) out += ", ";
                out += render(a[i]);
            }
            return out + "]";
        }
    }
    return "?";
}

void Interpreter::emit(std::string line) {
    if (hooks_.on_output) hooks_.on_output(line);
    output_.push_back(std::move(line));
}

void Interpreter::tick(std::int64_t k) {
    if (hooks_.on_tick) hooks_.on_tick(k);
}

const FunctionDef& Interpreter::select(InvocationKind kind, const FunctionDef& declared, const Value& receiver) {
    if (receiver.is_null())
        throw Trap(TrapKind::NullReceiver, "invoke " + declared.owner + "." + declared.name + " on null");
    auto cid = class_of(receiver);
    if (!cid) type_trap("receiver of " + declared.owner + "." + declared.name + " is " + std::string(to_string(receiver.kind())));
    auto& row = overrides_[&declared];
    if (row.size() <= *cid) row.resize(program_->class_count(), nullptr);
    if (const FunctionDef* hit = row[*cid]) return *hit;

    const std::string& cname = program_->class_at(*cid).name;
    if (!program_->is_subclass(cname, declared.owner)) {
        if (kind == InvocationKind::Interface)
            throw Trap(TrapKind::DoesNotImplement, cname + " does not implement " + declared.owner);
        type_trap("receiver " + cname + " is not a " + declared.owner);
    }
    const FunctionDef* f = program_->select_override(declared, *cid);
    if (!f) throw Trap(TrapKind::UnknownMethod, "no implementation of " + declared.owner + "." + declared.name + " in " + cname);
    row[*cid] = f;
    return *f;
}

const FunctionDef& Interpreter::dispatch(InvocationKind kind, const MethodRef& ref, const Value* receiver) {
    const FunctionDef* declared = program_->resolve(kind, ref);
    if (!declared) throw Trap(TrapKind::UnknownMethod, "unknown method " + ref.to_string());
    switch (kind) {
        case InvocationKind::Static: return *declared;
        case InvocationKind::Special:
            if (!receiver || receiver->is_null())
                throw Trap(TrapKind::NullReceiver, "invoke_special " + ref.to_string() + " on null");
            return *declared;
        case InvocationKind::Virtual:
        case InvocationKind::Interface:
            if (!receiver) throw Trap(TrapKind::NullReceiver, "no receiver for " + ref.to_string());
            return select(kind, *declared, *receiver);
    }
    throw Trap(TrapKind::Internal, "bad invocation kind");
}

Value Interpreter::reflective_invoke(std::string_view owner, std::string_view name, const MethodType& mtype,
                                     std::span<const Value> args) {
    const std::string where = std::string(owner) + "." + std::string(name) + ":" + mtype.descriptor();
    const FunctionDef* fn = program_->find_method(owner, name, mtype);
    if (!fn) throw Trap(TrapKind::UnknownMethod, "reflective lookup failed for " + where);
    if (args.size() != mtype.params.size())
        type_trap("reflective call to " + where + " with " + std::to_string(args.size()) + " arguments");
    for (std::size_t i = 0; i < args.size(); ++i)
        if (!conforms(args[i], mtype.params[i]))
            type_trap("reflective call to " + where + ": argument " + std::to_string(i) + " is " +
                      std::string(to_string(args[i].kind())));
    if (fn->is_static() || fn->kind == InvocationKind::Special) return call(*fn, args);
    // Late binding without the dispatch cache.
    if (args[0].is_null()) throw Trap(TrapKind::NullReceiver, "reflective call to " + where + " on null");
    auto cid = class_of(args[0]);
    if (!cid) type_trap("reflective receiver is " + std::string(to_string(args[0].kind())));
    const FunctionDef* impl = program_->select_override(*fn, *cid);
    if (!impl) throw Trap(TrapKind::UnknownMethod, "no implementation of " + where);
    return call(*impl, args);
}

Value Interpreter::call(const FunctionDef& fn, std::span<const Value> args) {
    if (args.size() != fn.mtype.params.size())
        type_trap(fn.owner + "." + fn.name + " expects " + std::to_string(fn.mtype.params.size()) + " arguments, got " +
                  std::to_string(args.size()));
    for (std::size_t i = 0; i < args.size(); ++i)
        if (!conforms(args[i], fn.mtype.params[i]))
            type_trap(fn.owner + "." + fn.name + ": argument " + std::to_string(i) + " is " +
                      std::string(to_string(args[i].kind())) + ", expected " + descriptor(fn.mtype.params[i]));
    if (fn.native) {
        DepthGuard guard(depth_);
        return fn.native(*this, args);
    }
    if (fn.is_abstract()) throw Trap(TrapKind::UnknownMethod, "abstract method " + fn.owner + "." + fn.name);
    return execute(fn, args);
}

Interpreter::FunctionRuntime& Interpreter::runtime_for(const FunctionDef& fn) {
    auto& slot = runtime_[&fn];
    if (slot) return *slot;
    auto rt = std::make_unique<FunctionRuntime>();
    const ConstantPool& pool = program_->module().constants;
    const std::size_t n = fn.code.size();
    rt->constants.resize(n);
    rt->targets.resize(n, nullptr);
    rt->slots.resize(n);
    rt->sites.resize(n, nullptr);
    rt->max_stack = max_stack_depth(fn, pool).value_or(16);
    for (std::size_t pc = 0; pc < n; ++pc) {
        const Instruction& ins = fn.code[pc];
        switch (ins.op) {
            case Opcode::PushConst:
                if (pool.contains(ins.index)) {
                    const Constant& c = pool.at(static_cast<std::size_t>(ins.index));
                    if (c.tag == Constant::Tag::Int) rt->constants[pc] = Value::integer(c.int_value);
                    if (c.tag == Constant::Tag::Str) rt->constants[pc] = Value::string(c.text);
                }
                break;
            case Opcode::New: rt->slots[pc] = program_->class_id(ins.owner); break;
            case Opcode::GetField:
            case Opcode::PutField: rt->slots[pc] = program_->field_slot(ins.owner, ins.member); break;
            case Opcode::GetStatic:
            case Opcode::PutStatic: rt->slots[pc] = program_->static_slot(ins.owner, ins.member); break;
            case Opcode::InvokeStatic:
            case Opcode::InvokeVirtual:
            case Opcode::InvokeSpecial:
            case Opcode::InvokeInterface:
                if (pool.contains(ins.index) && pool.at(static_cast<std::size_t>(ins.index)).tag == Constant::Tag::Method) {
                    try {
                        MethodRef ref = parse_method_ref(pool.at(static_cast<std::size_t>(ins.index)).text);
                        rt->targets[pc] = program_->resolve(invoke_kind(ins.op), ref);
                    } catch (const TypeSyntaxError&) {
                    }
                }
                break;
            default: break;
        }
    }
    slot = std::move(rt);
    return *slot;
}

Value Interpreter::execute(const FunctionDef& fn, std::span<const Value> args) {
    DepthGuard guard(depth_);
    FunctionRuntime& rt = runtime_for(fn);
    std::vector<Value> locals(std::max<std::size_t>(fn.locals, args.size()));
    std::copy(args.begin(), args.end(), locals.begin());
    std::vector<Value> stack;
    stack.reserve(rt.max_stack);

    const auto& code = fn.code;
    std::size_t pc = 0;
    auto pop = [&]() -> Value {
        if (stack.empty()) throw Trap(TrapKind::Internal, "stack underflow");
        Value v = std::move(stack.back());
        stack.pop_back();
        return v;
    };
    auto pop_args = [&](std::size_t n) {
        if (stack.size() < n) throw Trap(TrapKind::Internal, "stack underflow");
        std::vector<Value> a(std::make_move_iterator(stack.end() - static_cast<std::ptrdiff_t>(n)),
                             std::make_move_iterator(stack.end()));
        stack.resize(stack.size() - n);
        return a;
    };
    auto local = [&](std::int64_t i) -> Value& {
        if (i < 0 || static_cast<std::size_t>(i) >= locals.size())
            throw Trap(TrapKind::Internal, "bad local slot " + std::to_string(i));
        return locals[static_cast<std::size_t>(i)];
    };
    auto operand_slot = [&](const char* what) -> std::uint32_t {
        if (!rt.slots[pc]) throw Trap(TrapKind::Internal, std::string("unresolved ") + what + " operand");
        return *rt.slots[pc];
    };

    try {
        while (true) {
            if (pc >= code.size()) throw Trap(TrapKind::Internal, "execution fell off the end of the code");
            const Instruction& ins = code[pc];
            ++instructions_;
            std::size_t next = pc + 1;
            switch (ins.op) {
                case Opcode::PushConst: {
                    const Value& c = rt.constants[pc];
                    if (c.is_null()) throw Trap(TrapKind::Internal, "bad constant index " + std::to_string(ins.index));
                    stack.push_back(c);
                    break;
                }
                case Opcode::Load: stack.push_back(local(ins.index)); break;
                case Opcode::Store: {
                    Value v = pop();
                    local(ins.index) = std::move(v);
                    break;
                }
                case Opcode::Add: {
                    Value b = pop();
                    Value a = pop();
                    if (a.is_int() && b.is_int())
                        stack.push_back(Value::integer(wrapping_add(a.as_int(), b.as_int())));
                    else if (a.is_str() || b.is_str())
                        stack.push_back(Value::string(render(a) + render(b)));
                    else
                        type_trap("add on " + std::string(to_string(a.kind())) + " and " + std::string(to_string(b.kind())));
                    break;
                }
                case Opcode::Sub: {
                    Value b = pop();
                    Value a = pop();
                    stack.push_back(Value::integer(wrapping_sub(want_int(a, "sub"), want_int(b, "sub"))));
                    break;
                }
                case Opcode::Mul: {
                    Value b = pop();
                    Value a = pop();
                    stack.push_back(Value::integer(wrapping_mul(want_int(a, "mul"), want_int(b, "mul"))));
                    break;
                }
                case Opcode::Lt: {
                    Value b = pop();
                    Value a = pop();
                    stack.push_back(Value::boolean(want_int(a, "lt") < want_int(b, "lt")));
                    break;
                }
                case Opcode::Eq: {
                    Value b = pop();
                    Value a = pop();
                    stack.push_back(Value::boolean(a == b));
                    break;
                }
                case Opcode::Jump: next = static_cast<std::size_t>(ins.index); break;
                case Opcode::JumpIfFalse: {
                    Value c = pop();
                    if (!c.is_bool()) type_trap("jump_if_false on " + std::string(to_string(c.kind())));
                    if (!c.as_bool()) next = static_cast<std::size_t>(ins.index);
                    break;
                }
                case Opcode::New: stack.push_back(allocate(operand_slot("class"))); break;
                case Opcode::GetField: {
                    Value obj = pop();
                    HeapObject& o = deref(obj, "get_field");
                    std::uint32_t s = operand_slot("field");
                    if (s >= o.fields.size()) type_trap(program_->class_at(o.class_id).name + " has no field " + ins.member);
                    stack.push_back(o.fields[s]);
                    break;
                }
                case Opcode::PutField: {
                    Value v = pop();
                    Value obj = pop();
                    HeapObject& o = deref(obj, "put_field");
                    std::uint32_t s = operand_slot("field");
                    if (s >= o.fields.size()) type_trap(program_->class_at(o.class_id).name + " has no field " + ins.member);
                    o.fields[s] = std::move(v);
                    break;
                }
                case Opcode::GetStatic: stack.push_back(static_ref(operand_slot("static"))); break;
                case Opcode::PutStatic: {
                    Value v = pop();
                    static_ref(operand_slot("static")) = std::move(v);
                    break;
                }
                case Opcode::Print: emit(render(pop())); break;
                case Opcode::Ret: {
                    if (fn.mtype.ret.is_void()) return Value::null();
                    Value r = pop();
                    if (!conforms(r, fn.mtype.ret))
                        type_trap("returns " + std::string(to_string(r.kind())) + ", declared " + descriptor(fn.mtype.ret));
                    return r;
                }
                case Opcode::InvokeStatic:
                case Opcode::InvokeVirtual:
                case Opcode::InvokeSpecial:
                case Opcode::InvokeInterface: {
                    const FunctionDef* declared = rt.targets[pc];
                    if (!declared) throw Trap(TrapKind::UnknownMethod, "unresolvable invocation target");
                    auto a = pop_args(declared->mtype.params.size());
                    const InvocationKind kind = invoke_kind(ins.op);
                    const FunctionDef* target = declared;
                    if (kind == InvocationKind::Special) {
                        if (a.empty() || a[0].is_null())
                            throw Trap(TrapKind::NullReceiver, "invoke_special " + declared->name + " on null");
                    } else if (kind != InvocationKind::Static) {
                        target = &select(kind, *declared, a[0]);
                    }
                    Value r = call(*target, a);
                    if (!declared->mtype.ret.is_void()) stack.push_back(std::move(r));
                    break;
                }
                case Opcode::InvokeDynamic: {
                    CallSite* site = rt.sites[pc];
                    if (!site) {
                        if (!hooks_.engine)
                            throw Trap(TrapKind::Bootstrap, "no patch engine for invoke_dynamic " + ins.owner);
                        site = &hooks_.engine->bootstrap(ins.tag, ins.owner, ins.mtype);
                        rt.sites[pc] = site;
                    }
                    auto a = pop_args(ins.mtype.params.size());
                    ++indy_;
                    Value r = site->invoke(a, *this);
                    if (!ins.mtype.ret.is_void()) stack.push_back(std::move(r));
                    break;
                }
                case Opcode::MakeArr: {
                    if (ins.index < 0) throw Trap(TrapKind::Internal, "negative array size");
                    stack.push_back(Value::array(pop_args(static_cast<std::size_t>(ins.index))));
                    break;
                }
                case Opcode::ArrGet: {
                    Value i = pop();
                    Value arr = pop();
                    std::int64_t idx = want_int(i, "arr_get");
                    if (!arr.is_arr()) type_trap("arr_get on " + std::string(to_string(arr.kind())));
                    const auto& elems = arr.as_arr();
                    if (idx < 0 || static_cast<std::size_t>(idx) >= elems.size())
                        throw Trap(TrapKind::ArrayLength, "index " + std::to_string(idx) + " outside array of length " +
                                                              std::to_string(elems.size()));
                    stack.push_back(elems[static_cast<std::size_t>(idx)]);
                    break;
                }
                case Opcode::ArrLen: {
                    Value arr = pop();
                    if (!arr.is_arr()) type_trap("arr_len on " + std::string(to_string(arr.kind())));
                    stack.push_back(Value::integer(static_cast<std::int64_t>(arr.as_arr().size())));
                    break;
                }
            }
            pc = next;
        }
    } catch (Trap& t) {
        if (!t.located()) t.locate(fn.owner, fn.name, static_cast<std::int64_t>(pc));
        throw;
    }
}

ExitReport run(const Module& m, const EntryPoint& entry, std::vector<Value> args, RuntimeHooks hooks) {
    std::shared_ptr<const Program> program =
        hooks.engine ? hooks.engine->lookup().program_ptr() : std::make_shared<const Program>(std::make_shared<const Module>(m));
    Interpreter interp(std::move(program), std::move(hooks));
    return interp.run(entry.class_name, entry.method, std::move(args));
}

}  // namespace fluxvm

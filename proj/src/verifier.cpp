#include "fluxvm/verifier.hpp"

#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "fluxvm/program.hpp"

namespace fluxvm {

std::string Diagnostic::to_string() const {
    std::string out;
    if (!class_name.empty()) {
        out += class_name;
        if (!method.empty()) out += "." + method;
        if (pc >= 0) out += " pc=" + std::to_string(pc);
        out += ": ";
    }
    return out + message;
}

namespace {

struct Effect {
    int pops = 0;
    int pushes = 0;
};

// nullopt when the effect cannot be determined (unresolvable reference).
std::optional<Effect> stack_effect(const Instruction& ins, const ConstantPool& pool, const FunctionDef& fn) {
    switch (ins.op) {
        case Opcode::PushConst:
        case Opcode::Load:
        case Opcode::New:
        case Opcode::GetStatic: return Effect{0, 1};
        case Opcode::Store:
        case Opcode::JumpIfFalse:
        case Opcode::PutStatic:
        case Opcode::Print: return Effect{1, 0};
        case Opcode::Add:
        case Opcode::Sub:
        case Opcode::Mul:
        case Opcode::Lt:
        case Opcode::Eq:
        case Opcode::ArrGet: return Effect{2, 1};
        case Opcode::Jump: return Effect{0, 0};
        case Opcode::GetField:
        case Opcode::ArrLen: return Effect{1, 1};
        case Opcode::PutField: return Effect{2, 0};
        case Opcode::MakeArr:
            if (ins.index < 0) return std::nullopt;
            return Effect{static_cast<int>(ins.index), 1};
        case Opcode::Ret: return Effect{fn.mtype.ret.is_void() ? 0 : 1, 0};
        case Opcode::InvokeDynamic:
            return Effect{static_cast<int>(ins.mtype.params.size()), ins.mtype.ret.is_void() ? 0 : 1};
        case Opcode::InvokeStatic:
        case Opcode::InvokeVirtual:
        case Opcode::InvokeSpecial:
        case Opcode::InvokeInterface: {
            if (!pool.contains(ins.index)) return std::nullopt;
            const Constant& c = pool.at(static_cast<std::size_t>(ins.index));
            if (c.tag != Constant::Tag::Method) return std::nullopt;
            try {
                MethodRef ref = parse_method_ref(c.text);
                return Effect{static_cast<int>(ref.mtype.params.size()), ref.mtype.ret.is_void() ? 0 : 1};
            } catch (const TypeSyntaxError&) {
                return std::nullopt;
            }
        }
    }
    return std::nullopt;
}

bool ends_flow(Opcode op) { return op == Opcode::Ret || op == Opcode::Jump; }

struct StackResult {
    std::size_t max_depth = 0;
    std::vector<std::pair<std::int64_t, std::string>> problems;
    bool unknown = false;  // analysis stopped on an undeterminable effect
};

StackResult analyze_stack(const FunctionDef& fn, const ConstantPool& pool) {
    StackResult r;
    const auto n = static_cast<std::int64_t>(fn.code.size());
    if (n == 0) return r;
    std::vector<int> depth(static_cast<std::size_t>(n), -1);
    std::vector<std::int64_t> work{0};
    depth[0] = 0;
    std::set<std::int64_t> reported;

    auto flow_to = [&](std::int64_t target, int d, std::int64_t from) {
        if (target < 0 || target >= n) return;  // reported by the branch check
        auto& slot = depth[static_cast<std::size_t>(target)];
        if (slot < 0) {
            slot = d;
            work.push_back(target);
        } else if (slot != d && reported.insert(target).second) {
            r.problems.emplace_back(target, "inconsistent stack depth (" + std::to_string(slot) + " vs " +
                                                std::to_string(d) + " from pc " + std::to_string(from) + ")");
        }
    };

    while (!work.empty()) {
        std::int64_t pc = work.back();
        work.pop_back();
        const Instruction& ins = fn.code[static_cast<std::size_t>(pc)];
        int d = depth[static_cast<std::size_t>(pc)];
        auto eff = stack_effect(ins, pool, fn);
        if (!eff) {
            r.unknown = true;
            continue;
        }
        if (d < eff->pops) {
            r.problems.emplace_back(pc, "stack underflow");
            continue;
        }
        int after = d - eff->pops + eff->pushes;
        r.max_depth = std::max<std::size_t>(r.max_depth, static_cast<std::size_t>(after));
        r.max_depth = std::max<std::size_t>(r.max_depth, static_cast<std::size_t>(d));
        if (ins.op == Opcode::Jump || ins.op == Opcode::JumpIfFalse) flow_to(ins.index, after, pc);
        if (!ends_flow(ins.op)) {
            if (pc + 1 >= n) r.problems.emplace_back(pc, "execution falls off the end of the code");
            else flow_to(pc + 1, after, pc);
        }
    }
    return r;
}

class Verifier {
public:
    explicit Verifier(const Module& m)
        : module_(m), program_(std::shared_ptr<const Module>(&m, [](const Module*) {})) {}

    std::vector<Diagnostic> run() {
        check_classes();
        for (const auto& cls : module_.classes)
            for (const auto& fn : cls.methods) check_method(cls, fn);
        check_entry();
        return std::move(out_);
    }

private:
    void report(std::string cls, std::string method, std::int64_t pc, std::string msg) {
        out_.push_back(Diagnostic{std::move(cls), std::move(method), pc, std::move(msg)});
    }

    bool known_class(std::string_view name) const { return program_.find_class(name) != nullptr; }

    void check_type(const TypeTag& t, const std::string& cls, const std::string& method, std::int64_t pc) {
        if (t.kind == TypeKind::Class && !known_class(t.class_name))
            report(cls, method, pc, "unknown class '" + t.class_name + "' in type");
    }

    void check_mtype(const MethodType& mt, const std::string& cls, const std::string& method, std::int64_t pc) {
        for (const auto& p : mt.params) {
            if (p.is_void()) report(cls, method, pc, "V is only legal in return position");
            check_type(p, cls, method, pc);
        }
        check_type(mt.ret, cls, method, pc);
    }

    void check_classes() {
        std::set<std::string> names;
        for (const auto& cls : module_.classes) {
            if (!names.insert(cls.name).second) report(cls.name, "", -1, "duplicate class");
            if (system_library().find_class(cls.name)) report(cls.name, "", -1, "class name is reserved by the runtime");
            if (cls.super && !known_class(*cls.super)) report(cls.name, "", -1, "unknown superclass '" + *cls.super + "'");
            for (const auto& i : cls.interfaces)
                if (!known_class(i)) report(cls.name, "", -1, "unknown interface '" + i + "'");

            // Acyclic superclass chain.
            std::unordered_set<std::string> seen{cls.name};
            for (const ClassDef* c = &cls; c->super;) {
                if (!seen.insert(*c->super).second) {
                    report(cls.name, "", -1, "cyclic superclass chain");
                    break;
                }
                c = program_.find_class(*c->super);
                if (!c) break;
            }

            std::set<std::string> field_names;
            for (const auto& f : cls.fields) {
                if (!field_names.insert(f.name).second) report(cls.name, "", -1, "duplicate field '" + f.name + "'");
                if (f.type.is_void()) report(cls.name, "", -1, "field '" + f.name + "' has type V");
                check_type(f.type, cls.name, "", -1);
            }

            std::set<std::tuple<std::string, std::string, int>> sigs;
            for (const auto& fn : cls.methods) {
                if (!sigs.emplace(fn.name, fn.mtype.descriptor(), static_cast<int>(fn.kind)).second)
                    report(cls.name, fn.name, -1, "duplicate method " + fn.name + ":" + fn.mtype.descriptor());
            }
        }
        for (std::size_t i = 0; i < module_.constants.size(); ++i) {
            const auto& c = module_.constants.at(i);
            if (c.tag != Constant::Tag::Method) continue;
            try {
                parse_method_ref(c.text);
            } catch (const TypeSyntaxError& e) {
                report("", "", -1, "constant #" + std::to_string(i) + ": " + e.what());
            }
        }
    }

    void check_method(const ClassDef& cls, const FunctionDef& fn) {
        const std::string& cn = cls.name;
        const std::string& mn = fn.name;
        if (fn.owner != cls.name) report(cn, mn, -1, "owner '" + fn.owner + "' does not match the declaring class");
        check_mtype(fn.mtype, cn, mn, -1);
        if (!fn.is_static()) {
            if (fn.mtype.params.empty()) {
                report(cn, mn, -1, "instance method is missing its receiver parameter");
            } else {
                const TypeTag& recv = fn.mtype.params[0];
                bool ok = recv.kind == TypeKind::Obj ||
                          (recv.kind == TypeKind::Class && program_.is_subclass(cls.name, recv.class_name));
                if (!ok) report(cn, mn, -1, "receiver type " + descriptor(recv) + " is not " + cls.name + " or a supertype");
            }
        }
        if (fn.locals < fn.mtype.params.size()) report(cn, mn, -1, "locals=" + std::to_string(fn.locals) + " is smaller than the parameter count");
        if (fn.is_abstract()) {
            if (fn.kind == InvocationKind::Static || fn.kind == InvocationKind::Special)
                report(cn, mn, -1, "static and special methods need code");
            return;
        }

        const auto n = static_cast<std::int64_t>(fn.code.size());
        bool refs_ok = true;
        for (std::int64_t pc = 0; pc < n; ++pc) {
            const Instruction& ins = fn.code[static_cast<std::size_t>(pc)];
            switch (ins.op) {
                case Opcode::PushConst: {
                    if (!module_.constants.contains(ins.index)) {
                        report(cn, mn, pc, "unresolvable reference: constant #" + std::to_string(ins.index));
                    } else if (module_.constants.at(static_cast<std::size_t>(ins.index)).tag == Constant::Tag::Method) {
                        report(cn, mn, pc, "push_const of a method reference");
                    }
                    break;
                }
                case Opcode::Load:
                case Opcode::Store:
                    if (ins.index < 0 || ins.index >= static_cast<std::int64_t>(fn.locals))
                        report(cn, mn, pc, "local slot " + std::to_string(ins.index) + " out of range");
                    break;
                case Opcode::Jump:
                case Opcode::JumpIfFalse:
                    if (ins.index < 0 || ins.index >= n) report(cn, mn, pc, "branch target out of range");
                    break;
                case Opcode::MakeArr:
                    if (ins.index < 0) report(cn, mn, pc, "negative array length");
                    break;
                case Opcode::New:
                    if (!known_class(ins.owner)) report(cn, mn, pc, "unknown class '" + ins.owner + "'");
                    break;
                case Opcode::GetField:
                case Opcode::PutField:
                    if (!program_.field_slot(ins.owner, ins.member))
                        report(cn, mn, pc, "unresolvable field " + ins.owner + "." + ins.member);
                    break;
                case Opcode::GetStatic:
                case Opcode::PutStatic:
                    if (!program_.static_slot(ins.owner, ins.member))
                        report(cn, mn, pc, "unresolvable static field " + ins.owner + "." + ins.member);
                    break;
                case Opcode::InvokeStatic:
                case Opcode::InvokeVirtual:
                case Opcode::InvokeSpecial:
                case Opcode::InvokeInterface: {
                    if (!module_.constants.contains(ins.index) ||
                        module_.constants.at(static_cast<std::size_t>(ins.index)).tag != Constant::Tag::Method) {
                        report(cn, mn, pc, "unresolvable reference: constant #" + std::to_string(ins.index));
                        refs_ok = false;
                        break;
                    }
                    const auto& text = module_.constants.at(static_cast<std::size_t>(ins.index)).text;
                    try {
                        MethodRef ref = parse_method_ref(text);
                        if (!program_.resolve(invoke_kind(ins.op), ref))
                            report(cn, mn, pc, "unresolvable reference: no " + std::string(to_string(invoke_kind(ins.op))) +
                                                   " method " + text);
                    } catch (const TypeSyntaxError&) {
                        refs_ok = false;  // already reported on the pool entry
                    }
                    break;
                }
                case Opcode::InvokeDynamic: {
                    check_mtype(ins.mtype, cn, mn, pc);
                    try {
                        parse_method_ref(ins.owner);
                    } catch (const TypeSyntaxError& e) {
                        report(cn, mn, pc, std::string("malformed call-site name: ") + e.what());
                    }
                    break;
                }
                default: break;
            }
        }
        if (!refs_ok) return;
        auto stack = analyze_stack(fn, module_.constants);
        for (auto& [pc, msg] : stack.problems) report(cn, mn, pc, std::move(msg));
    }

    void check_entry() {
        if (!module_.entry) return;
        const ClassDef* cls = module_.find_class(module_.entry->class_name);
        if (!cls) {
            report("", "", -1, "entry class '" + module_.entry->class_name + "' does not exist");
            return;
        }
        for (const auto& fn : cls->methods)
            if (fn.name == module_.entry->method && fn.is_static()) return;
        report(cls->name, module_.entry->method, -1, "entry method must exist and be static");
    }

    const Module& module_;
    Program program_;
    std::vector<Diagnostic> out_;
};

std::string join(const std::vector<Diagnostic>& diags) {
    std::ostringstream ss;
    ss << "module failed verification:";
    for (const auto& d : diags) ss << "\n  " << d.to_string();
    return ss.str();
}

}  // namespace

std::vector<Diagnostic> verify(const Module& m) { return Verifier(m).run(); }

std::optional<std::size_t> max_stack_depth(const FunctionDef& fn, const ConstantPool& pool) {
    auto r = analyze_stack(fn, pool);
    if (!r.problems.empty() || r.unknown) return std::nullopt;
    return r.max_depth;
}

VerifyError::VerifyError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}

void require_verified(const Module& m) {
    auto d = verify(m);
    if (!d.empty()) throw VerifyError(std::move(d));
}

}  // namespace fluxvm

#include "fluxvm/handles.hpp"

#include <unordered_set>

#include "fluxvm/trap.hpp"

namespace fluxvm {

namespace detail {

struct HandleNode {
    HandleKind kind = HandleKind::Direct;
    MethodType type;
    std::shared_ptr<const Program> program;

    // Direct
    const FunctionDef* function = nullptr;
    InvocationKind invocation = InvocationKind::Static;

    // Combinators
    std::shared_ptr<const HandleNode> target;
    std::size_t pos = 0;
    std::vector<Value> bound;
    std::vector<std::shared_ptr<const HandleNode>> filters;
    std::size_t array_len = 0;
    std::vector<bool> narrow_params;
    bool narrow_ret = false;
};

}  // namespace detail

using detail::HandleNode;
using NodePtr = std::shared_ptr<const HandleNode>;

struct HandleAccess {
    static const NodePtr& node(const MethodHandle& h) { return h.node_; }
    static MethodHandle wrap(NodePtr n) { return MethodHandle(std::move(n)); }
};

namespace {

[[noreturn]] void mismatch(const std::string& msg) { throw HandleError(HandleError::Code::TypeMismatch, msg); }

const HandleNode& node_of(const MethodHandle& h) {
    const auto& n = HandleAccess::node(h);
    if (!n) throw std::invalid_argument("empty method handle");
    return *n;
}

std::shared_ptr<HandleNode> derive(const MethodHandle& target, HandleKind kind) {
    auto n = std::make_shared<HandleNode>();
    n->kind = kind;
    n->target = HandleAccess::node(target);
    n->program = n->target->program;
    n->type = n->target->type;
    return n;
}

// Construction-time compatibility of a bound value with a parameter type. Ref values are
// accepted for any reference type; their class is only known to a running heap.
bool value_fits(const Value& v, const TypeTag& t) {
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
        case ValueKind::Ref: return t.kind == TypeKind::Obj || t.kind == TypeKind::Class;
    }
    return false;
}

Value eval(const HandleNode& n, std::span<const Value> args, Invoker& inv);

Value eval_unary(const HandleNode& n, const Value& v, Invoker& inv) { return eval(n, std::span<const Value>(&v, 1), inv); }

[[noreturn]] void cast_trap(const TypeTag& want, const Value& got) {
    throw Trap(TrapKind::Cast, "cannot narrow " + std::string(to_string(got.kind())) + " to " + descriptor(want));
}

Value eval(const HandleNode& n, std::span<const Value> args, Invoker& inv) {
    switch (n.kind) {
        case HandleKind::Direct: {
            if (n.invocation == InvocationKind::Static || n.invocation == InvocationKind::Special)
                return inv.call(*n.function, args);
            const FunctionDef& f = inv.select(n.invocation, *n.function, args[0]);
            return inv.call(f, args);
        }
        case HandleKind::InsertArguments: {
            std::vector<Value> a;
            a.reserve(args.size() + n.bound.size());
            a.insert(a.end(), args.begin(), args.begin() + static_cast<std::ptrdiff_t>(n.pos));
            a.insert(a.end(), n.bound.begin(), n.bound.end());
            a.insert(a.end(), args.begin() + static_cast<std::ptrdiff_t>(n.pos), args.end());
            return eval(*n.target, a, inv);
        }
        case HandleKind::FilterArguments: {
            std::vector<Value> a(args.begin(), args.end());
            for (std::size_t i = 0; i < n.filters.size(); ++i) a[n.pos + i] = eval_unary(*n.filters[i], a[n.pos + i], inv);
            return eval(*n.target, a, inv);
        }
        case HandleKind::FilterReturnValue: {
            Value r = eval(*n.target, args, inv);
            return eval_unary(*n.filters.front(), r, inv);
        }
        case HandleKind::AsSpreader: {
            const Value& packed = args.back();
            if (!packed.is_arr()) cast_trap(TypeTag::of(TypeKind::Arr), packed);
            const auto& elems = packed.as_arr();
            if (elems.size() != n.array_len)
                throw Trap(TrapKind::ArrayLength, "spreader expects " + std::to_string(n.array_len) +
                                                      " elements, got " + std::to_string(elems.size()));
            const auto& tparams = n.target->type.params;
            std::size_t lead = args.size() - 1;
            std::vector<Value> a;
            a.reserve(lead + elems.size());
            a.insert(a.end(), args.begin(), args.begin() + static_cast<std::ptrdiff_t>(lead));
            for (std::size_t i = 0; i < elems.size(); ++i) {
                if (!inv.conforms(elems[i], tparams[lead + i])) cast_trap(tparams[lead + i], elems[i]);
                a.push_back(elems[i]);
            }
            return eval(*n.target, a, inv);
        }
        case HandleKind::AsCollector: {
            std::size_t lead = args.size() - n.array_len;
            std::vector<Value> a(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(lead));
            a.push_back(Value::array(ArrayData(args.begin() + static_cast<std::ptrdiff_t>(lead), args.end())));
            return eval(*n.target, a, inv);
        }
        case HandleKind::AsType: {
            const auto& tparams = n.target->type.params;
            for (std::size_t i = 0; i < args.size(); ++i)
                if (n.narrow_params[i] && !inv.conforms(args[i], tparams[i])) cast_trap(tparams[i], args[i]);
            Value r = eval(*n.target, args, inv);
            if (n.narrow_ret && !inv.conforms(r, n.type.ret)) cast_trap(n.type.ret, r);
            return r;
        }
    }
    throw Trap(TrapKind::Internal, "corrupt handle node");
}

std::string kind_name(HandleKind k) {
    switch (k) {
        case HandleKind::Direct: return "direct";
        case HandleKind::InsertArguments: return "insert_arguments";
        case HandleKind::FilterArguments: return "filter_arguments";
        case HandleKind::FilterReturnValue: return "filter_return_value";
        case HandleKind::AsSpreader: return "as_spreader";
        case HandleKind::AsCollector: return "as_collector";
        case HandleKind::AsType: return "as_type";
    }
    return "?";
}

std::string describe_node(const HandleNode& n) {
    if (n.kind == HandleKind::Direct) {
        return "direct " + std::string(to_string(n.invocation)) + " " + n.function->owner + "." + n.function->name +
               ":" + n.type.descriptor();
    }
    std::string out = kind_name(n.kind) + "(" + describe_node(*n.target);
    for (const auto& f : n.filters) out += ", " + describe_node(*f);
    return out + ")";
}

MethodType recompute(const HandleNode& n) {
    switch (n.kind) {
        case HandleKind::Direct:
        case HandleKind::AsType: return n.type;
        case HandleKind::InsertArguments: {
            MethodType t = recompute(*n.target);
            t.params.erase(t.params.begin() + static_cast<std::ptrdiff_t>(n.pos),
                           t.params.begin() + static_cast<std::ptrdiff_t>(n.pos + n.bound.size()));
            return t;
        }
        case HandleKind::FilterArguments: {
            MethodType t = recompute(*n.target);
            for (std::size_t i = 0; i < n.filters.size(); ++i) t.params[n.pos + i] = recompute(*n.filters[i]).params.at(0);
            return t;
        }
        case HandleKind::FilterReturnValue: {
            MethodType t = recompute(*n.target);
            t.ret = recompute(*n.filters.front()).ret;
            return t;
        }
        case HandleKind::AsSpreader: {
            MethodType t = recompute(*n.target);
            t.params.resize(t.params.size() - n.array_len);
            t.params.push_back(TypeTag::of(TypeKind::Arr));
            return t;
        }
        case HandleKind::AsCollector: {
            MethodType t = recompute(*n.target);
            t.params.pop_back();
            t.params.insert(t.params.end(), n.array_len, TypeTag::of(TypeKind::Obj));
            return t;
        }
    }
    return n.type;
}

}  // namespace

const MethodType& MethodHandle::type() const noexcept { return node_->type; }
HandleKind MethodHandle::kind() const noexcept { return node_->kind; }
const FunctionDef* MethodHandle::function() const noexcept { return node_->function; }
InvocationKind MethodHandle::invocation_kind() const noexcept { return node_->invocation; }
std::string MethodHandle::describe() const { return describe_node(*node_); }

std::vector<MethodHandle> MethodHandle::children() const {
    std::vector<MethodHandle> out;
    if (node_->target) out.push_back(HandleAccess::wrap(node_->target));
    for (const auto& f : node_->filters) out.push_back(HandleAccess::wrap(f));
    return out;
}

MethodHandle direct(const Lookup& lookup, InvocationKind kind, std::string_view owner, std::string_view name,
                    const MethodType& mtype) {
    const Program& prog = lookup.program();
    const std::string where = std::string(owner) + "." + std::string(name) + ":" + mtype.descriptor();
    if (!prog.find_class(owner)) throw HandleError(HandleError::Code::UnknownMethod, "unknown class in " + where);

    auto name_exists = [&] {
        std::unordered_set<const ClassDef*> seen;
        for (const ClassDef* c = prog.find_class(owner); c && seen.insert(c).second;
             c = c->super ? prog.find_class(*c->super) : nullptr) {
            for (const auto& f : c->methods)
                if (f.name == name) return true;
        }
        return false;
    };

    MethodRef ref{std::string(owner), std::string(name), mtype};
    const FunctionDef* fn = nullptr;
    if (kind == InvocationKind::Static) {
        fn = prog.resolve(InvocationKind::Static, ref);
    } else {
        if (mtype.params.empty()) mismatch("instance handle " + where + " has no receiver parameter");
        fn = prog.resolve(kind, ref);
        if (fn) {
            const TypeTag& want = mtype.params[0];
            const TypeTag& have = fn->mtype.params[0];
            bool ok = want == have || (want.kind == TypeKind::Class && prog.is_subclass(want.class_name, fn->owner));
            if (!ok) mismatch("receiver type " + descriptor(want) + " does not fit " + fn->owner + "." + fn->name);
        }
    }
    if (!fn) {
        if (name_exists()) mismatch("type " + mtype.descriptor() + " does not match any declaration of " + where);
        throw HandleError(HandleError::Code::UnknownMethod, "unknown method " + where);
    }
    if ((kind == InvocationKind::Static || kind == InvocationKind::Special) && fn->is_abstract())
        mismatch("cannot bind abstract method " + where);

    auto n = std::make_shared<HandleNode>();
    n->kind = HandleKind::Direct;
    n->type = mtype;
    n->program = lookup.program_ptr();
    n->function = fn;
    n->invocation = kind;
    return HandleAccess::wrap(std::move(n));
}

MethodHandle insert_arguments(const MethodHandle& h, std::size_t pos, std::vector<Value> values) {
    const auto& params = node_of(h).type.params;
    if (pos > params.size() || values.size() > params.size() - pos)
        throw HandleError(HandleError::Code::BadPosition, "cannot bind " + std::to_string(values.size()) +
                                                              " values at position " + std::to_string(pos) + " of " +
                                                              h.type().descriptor());
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!value_fits(values[i], params[pos + i]))
            mismatch("bound " + std::string(to_string(values[i].kind())) + " does not fit parameter " +
                     std::to_string(pos + i) + " of type " + descriptor(params[pos + i]));
    auto n = derive(h, HandleKind::InsertArguments);
    n->pos = pos;
    n->type.params.erase(n->type.params.begin() + static_cast<std::ptrdiff_t>(pos),
                         n->type.params.begin() + static_cast<std::ptrdiff_t>(pos + values.size()));
    n->bound = std::move(values);
    return HandleAccess::wrap(std::move(n));
}

MethodHandle filter_arguments(const MethodHandle& h, std::size_t pos, std::vector<MethodHandle> filters) {
    const auto& params = node_of(h).type.params;
    if (pos > params.size() || filters.size() > params.size() - pos)
        throw HandleError(HandleError::Code::BadPosition, "filters do not fit at position " + std::to_string(pos));
    auto n = derive(h, HandleKind::FilterArguments);
    n->pos = pos;
    for (std::size_t i = 0; i < filters.size(); ++i) {
        const HandleNode& f = node_of(filters[i]);
        if (f.type.params.size() != 1) mismatch("filter " + std::to_string(i) + " is not unary");
        if (f.type.ret != params[pos + i])
            mismatch("filter " + std::to_string(i) + " returns " + descriptor(f.type.ret) + " but parameter " +
                     std::to_string(pos + i) + " is " + descriptor(params[pos + i]));
        n->type.params[pos + i] = f.type.params[0];
        n->filters.push_back(HandleAccess::node(filters[i]));
    }
    return HandleAccess::wrap(std::move(n));
}

MethodHandle filter_return_value(const MethodHandle& h, const MethodHandle& filter) {
    const HandleNode& t = node_of(h);
    const HandleNode& f = node_of(filter);
    if (t.type.ret.is_void()) throw HandleError(HandleError::Code::VoidReturn, "cannot filter the result of a V handle");
    if (f.type.params.size() != 1) mismatch("return filter is not unary");
    if (f.type.params[0] != t.type.ret)
        mismatch("return filter takes " + descriptor(f.type.params[0]) + " but the target returns " + descriptor(t.type.ret));
    auto n = derive(h, HandleKind::FilterReturnValue);
    n->type.ret = f.type.ret;
    n->filters.push_back(HandleAccess::node(filter));
    return HandleAccess::wrap(std::move(n));
}

MethodHandle as_spreader(const MethodHandle& h, std::size_t array_len) {
    const auto& params = node_of(h).type.params;
    if (array_len > params.size())
        throw HandleError(HandleError::Code::BadPosition, "cannot spread " + std::to_string(array_len) +
                                                              " elements over " + h.type().descriptor());
    auto n = derive(h, HandleKind::AsSpreader);
    n->array_len = array_len;
    n->type.params.resize(params.size() - array_len);
    n->type.params.push_back(TypeTag::of(TypeKind::Arr));
    return HandleAccess::wrap(std::move(n));
}

MethodHandle as_collector(const MethodHandle& h, std::size_t array_len) {
    const auto& params = node_of(h).type.params;
    if (params.empty() || params.back().kind != TypeKind::Arr)
        mismatch("collector target " + h.type().descriptor() + " does not end in A");
    auto n = derive(h, HandleKind::AsCollector);
    n->array_len = array_len;
    n->type.params.pop_back();
    n->type.params.insert(n->type.params.end(), array_len, TypeTag::of(TypeKind::Obj));
    return HandleAccess::wrap(std::move(n));
}

MethodHandle as_type(const MethodHandle& h, const MethodType& new_type) {
    const HandleNode& t = node_of(h);
    const Program& prog = *t.program;
    if (new_type.params.size() != t.type.params.size())
        mismatch("as_type cannot change arity: " + t.type.descriptor() + " to " + new_type.descriptor());
    auto n = derive(h, HandleKind::AsType);
    n->type = new_type;
    for (std::size_t i = 0; i < new_type.params.size(); ++i) {
        const TypeTag& from = new_type.params[i];
        const TypeTag& to = t.type.params[i];
        if (from.is_void() || !prog.is_convertible(from, to))
            mismatch("parameter " + std::to_string(i) + ": no conversion from " + descriptor(from) + " to " + descriptor(to));
        n->narrow_params.push_back(!prog.is_assignable(from, to));
    }
    if (t.type.ret.is_void() || new_type.ret.is_void()) {
        if (t.type.ret != new_type.ret)
            mismatch("return: no conversion from " + descriptor(t.type.ret) + " to " + descriptor(new_type.ret));
    } else {
        if (!prog.is_convertible(t.type.ret, new_type.ret))
            mismatch("return: no conversion from " + descriptor(t.type.ret) + " to " + descriptor(new_type.ret));
        n->narrow_ret = !prog.is_assignable(t.type.ret, new_type.ret);
    }
    return HandleAccess::wrap(std::move(n));
}

Value invoke_exact(const MethodHandle& h, std::span<const Value> args, Invoker& invoker) {
    return eval(node_of(h), args, invoker);
}

Value invoke_handle(const MethodHandle& h, std::span<const Value> args, Invoker& invoker) {
    const MethodType& t = node_of(h).type;
    if (args.size() != t.params.size())
        throw Trap(TrapKind::Structural, "handle of type " + t.descriptor() + " invoked with " +
                                             std::to_string(args.size()) + " arguments");
    for (std::size_t i = 0; i < args.size(); ++i)
        if (!invoker.conforms(args[i], t.params[i]))
            throw Trap(TrapKind::Structural, "argument " + std::to_string(i) + " is " +
                                                 std::string(to_string(args[i].kind())) + ", handle expects " +
                                                 descriptor(t.params[i]));
    return eval(node_of(h), args, invoker);
}

MethodType recompute_type(const MethodHandle& h) { return recompute(node_of(h)); }

}  // namespace fluxvm

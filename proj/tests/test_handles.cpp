#include <gtest/gtest.h>

#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <random>

#include "fluxvm/handles.hpp"
#include "fluxvm/interpreter.hpp"
#include "support.hpp"

using namespace fluxvm;
using namespace fluxvm::testing;

namespace {

MethodType T(const char* text) { return parse_method_type(text); }

class Handles : public ::testing::Test {
protected:
    Handles() {
        std::ifstream in(corpus_path("fib.fas"));
        std::stringstream fib;
        fib << in.rdbuf();
        program = link(assemble(std::string(kCalcSource) + fib.str()));
        lookup = std::make_unique<Lookup>(program);
        interp = std::make_unique<Interpreter>(program);
    }

    MethodHandle calc(const char* name, const char* type) {
        return direct(*lookup, InvocationKind::Static, "Calc", name, T(type));
    }
    Value call(const MethodHandle& h, std::vector<Value> args) { return invoke_handle(h, args, *interp); }

    std::shared_ptr<const Program> program;
    std::unique_ptr<Lookup> lookup;
    std::unique_ptr<Interpreter> interp;
};

TrapKind trap_kind(const std::function<void()>& f) {
    try {
        f();
    } catch (const Trap& t) {
        return t.kind();
    }
    ADD_FAILURE() << "no trap";
    return TrapKind::Internal;
}

}  // namespace

// ---------------------------------------------------------------------------
// examples

TEST_F(Handles, DirectHandles) {
    auto h = direct(*lookup, InvocationKind::Virtual, "Str", "replace_all", T("(OSS)S"));
    EXPECT_EQ(h.type(), T("(OSS)S"));
    auto fib = direct(*lookup, InvocationKind::Static, "Fib", "fib", T("(I)I"));
    EXPECT_EQ(call(fib, {I(10)}), I(55));
    try {
        direct(*lookup, InvocationKind::Static, "Fib", "nope", T("(I)I"));
        FAIL();
    } catch (const HandleError& e) {
        EXPECT_EQ(e.code(), HandleError::Code::UnknownMethod);
    }
    EXPECT_THROW(direct(*lookup, InvocationKind::Static, "Fib", "fib", T("(S)I")), HandleError);
}

TEST_F(Handles, ReplaceAllWithBoundArguments) {
    auto h = direct(*lookup, InvocationKind::Virtual, "Str", "replace_all", T("(OSS)S"));
    auto bound = insert_arguments(h, 1, {S("%20"), S(" ")});
    EXPECT_EQ(bound.type(), T("(O)S"));
    EXPECT_EQ(call(bound, {S("A%20B%20C")}), S("A B C"));
}

TEST_F(Handles, InsertArguments) {
    auto add = calc("add", "(II)I");
    auto same = insert_arguments(add, 0, {});
    EXPECT_EQ(same.type(), add.type());
    EXPECT_EQ(call(same, {I(2), I(3)}), call(add, {I(2), I(3)}));
    EXPECT_EQ(call(insert_arguments(add, 1, {I(10)}), {I(5)}), I(15));
    try {
        insert_arguments(add, 0, {S("x")});
        FAIL();
    } catch (const HandleError& e) {
        EXPECT_EQ(e.code(), HandleError::Code::TypeMismatch);
    }
    EXPECT_THROW(insert_arguments(add, 1, {I(1), I(2)}), HandleError);
    EXPECT_THROW(insert_arguments(add, 3, {}), HandleError);
}

TEST_F(Handles, FilterArguments) {
    auto add = calc("add", "(II)I");
    auto h = filter_arguments(add, 0, {calc("negate", "(I)I")});
    EXPECT_EQ(call(h, {I(3), I(4)}), I(1));
    EXPECT_EQ(call(filter_arguments(add, 0, {calc("id", "(I)I"), calc("id", "(I)I")}), {I(3), I(4)}), I(7));
    EXPECT_THROW(filter_arguments(add, 0, {calc("label", "(I)S")}), HandleError);
    EXPECT_THROW(filter_arguments(add, 0, {add}), HandleError);
    // the filter's parameter type replaces the slot's
    auto via_len = filter_arguments(add, 1, {direct(*lookup, InvocationKind::Virtual, "Str", "length", T("(O)I"))});
    EXPECT_EQ(via_len.type(), T("(IO)I"));
    EXPECT_EQ(call(via_len, {I(1), S("abcd")}), I(5));
}

TEST_F(Handles, FilterReturnValue) {
    auto fib = direct(*lookup, InvocationKind::Static, "Fib", "fib", T("(I)I"));
    EXPECT_EQ(call(filter_return_value(fib, calc("twice", "(I)I")), {I(10)}), I(110));
    EXPECT_EQ(call(filter_return_value(fib, calc("id", "(I)I")), {I(10)}), I(55));
    EXPECT_EQ(call(filter_return_value(fib, calc("label", "(I)S")), {I(6)}), S("n8"));
    try {
        filter_return_value(calc("nothing", "(I)V"), calc("id", "(I)I"));
        FAIL();
    } catch (const HandleError& e) {
        EXPECT_EQ(e.code(), HandleError::Code::VoidReturn);
    }
    EXPECT_THROW(filter_return_value(fib, calc("idStr", "(S)S")), HandleError);
}

TEST_F(Handles, SpreaderAndCollector) {
    auto add = calc("add", "(II)I");
    auto spread = as_spreader(add, 2);
    EXPECT_EQ(spread.type(), T("(A)I"));
    EXPECT_EQ(call(spread, {Value::array({I(3), I(4)})}), I(7));
    EXPECT_EQ(trap_kind([&] { call(spread, {Value::array({I(1), I(2), I(3)})}); }), TrapKind::ArrayLength);
    EXPECT_EQ(trap_kind([&] { call(spread, {Value::array({S("x"), I(2)})}); }), TrapKind::Cast);

    auto zero = as_spreader(add, 0);
    EXPECT_EQ(zero.type(), T("(IIA)I"));
    EXPECT_EQ(call(zero, {I(3), I(4), Value::array({})}), I(7));
    EXPECT_THROW(as_spreader(add, 3), HandleError);

    auto sum = calc("sum_arr", "(A)I");
    auto collected = as_collector(sum, 3);
    EXPECT_EQ(collected.type(), T("(OOO)I"));
    EXPECT_EQ(call(collected, {I(1), I(2), I(3)}), I(6));
    EXPECT_EQ(call(as_spreader(collected, 3), {Value::array({I(1), I(2), I(3)})}), I(6));
    EXPECT_THROW(as_collector(add, 2), HandleError);
}

TEST_F(Handles, AsType) {
    auto fib = direct(*lookup, InvocationKind::Static, "Fib", "fib", T("(I)I"));
    auto wide = as_type(fib, T("(O)O"));
    auto back = as_type(wide, T("(I)I"));
    for (int n : {0, 1, 2, 7, 12}) EXPECT_EQ(call(back, {I(n)}), call(fib, {I(n)}));
    EXPECT_EQ(trap_kind([&] { call(wide, {S("ten")}); }), TrapKind::Cast);
    auto same = as_type(fib, fib.type());
    EXPECT_EQ(call(same, {I(9)}), I(34));
    EXPECT_THROW(as_type(fib, T("(S)I")), HandleError);
    EXPECT_THROW(as_type(fib, T("(I)S")), HandleError);
    EXPECT_THROW(as_type(fib, T("(II)I")), HandleError);
    EXPECT_THROW(as_type(fib, T("(I)V")), HandleError);
}

TEST_F(Handles, InvokeChecksArgumentsBeforeRunningGuestCode) {
    auto fib = direct(*lookup, InvocationKind::Static, "Fib", "fib", T("(I)I"));
    interp->capture([] { return Value{}; });
    std::uint64_t before = 0;
    EXPECT_EQ(trap_kind([&] { call(fib, {I(1), I(2)}); }), TrapKind::Structural);
    EXPECT_EQ(trap_kind([&] { call(fib, {S("x")}); }), TrapKind::Structural);
    auto report = interp->capture([&] {
        try {
            call(fib, {});
        } catch (const Trap&) {
        }
        return Value{};
    });
    EXPECT_EQ(report.instructions_executed, before);
}

TEST_F(Handles, VirtualHandlesRedispatchOnTheReceiver) {
    Module m = corpus_module("dispatch.fas");
    auto prog = link(m);
    Lookup lk(prog);
    Interpreter in(prog);
    auto greet = direct(lk, InvocationKind::Virtual, "Animal", "greet", T("(LAnimal;)S"));
    auto make = direct(lk, InvocationKind::Static, "Zoo", "make", T("(IS)LAnimal;"));
    std::vector<Value> a0{I(0), S("x")}, a1{I(1), S("y")}, a2{I(2), S("z")};
    Value animal = invoke_handle(make, a0, in);
    Value dog = invoke_handle(make, a1, in);
    Value puppy = invoke_handle(make, a2, in);
    std::vector<std::string> got;
    for (const Value& v : {animal, dog, puppy}) got.push_back(invoke_handle(greet, std::vector<Value>{v}, in).as_str());
    // the direct handle agrees with the interpreter's own virtual dispatch
    const std::vector<Value> receivers{animal, dog, puppy};
    for (std::size_t i = 0; i < 3; ++i) {
        const Value& v = receivers[i];
        const FunctionDef& f = in.dispatch(InvocationKind::Virtual, parse_method_ref("Animal.greet:(LAnimal;)S"), &v);
        EXPECT_EQ(got[i], in.call(f, std::vector<Value>{v}).as_str());
    }
    EXPECT_NE(got[0], got[1]);
}

// ---------------------------------------------------------------------------
// randomized properties

namespace {

/// What a parameter really accepts once every narrowing in the chain is accounted for.
struct Dom {
    enum Kind { Int, Str, Bool, Any, Ints, Tuple } kind = Any;
    std::vector<Dom> elems;  // Tuple only

    static Dom of(const TypeTag& t) {
        switch (t.kind) {
            case TypeKind::Int: return {Int, {}};
            case TypeKind::Str: return {Str, {}};
            case TypeKind::Bool: return {Bool, {}};
            case TypeKind::Arr: return {Ints, {}};
            default: return {Any, {}};
        }
    }
};

struct Gen {
    MethodHandle h;
    std::vector<Dom> dom;
};

class Random {
public:
    explicit Random(std::uint32_t seed) : rng_(seed) {}
    std::size_t below(std::size_t n) { return n == 0 ? 0 : std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
    bool coin() { return below(2) == 0; }

    Value value(const Dom& d) {
        switch (d.kind) {
            case Dom::Int: return I(static_cast<std::int64_t>(below(2001)) - 1000);
            case Dom::Str: return S(std::string(below(4), static_cast<char>('a' + below(26))));
            case Dom::Bool: return Value::boolean(coin());
            case Dom::Any: return coin() ? value(Dom{Dom::Int, {}}) : value(Dom{Dom::Str, {}});
            case Dom::Ints: {
                ArrayData a;
                for (std::size_t i = 0, n = below(5); i < n; ++i) a.push_back(value(Dom{Dom::Int, {}}));
                return Value::array(std::move(a));
            }
            case Dom::Tuple: {
                ArrayData a;
                for (const auto& e : d.elems) a.push_back(value(e));
                return Value::array(std::move(a));
            }
        }
        return {};
    }
    std::vector<Value> args(const std::vector<Dom>& dom) {
        std::vector<Value> out;
        for (const auto& d : dom) out.push_back(value(d));
        return out;
    }

private:
    std::mt19937 rng_;
};

class Properties : public Handles {
protected:
    static constexpr int kCases = 600;

    std::vector<Gen> bases() {
        std::vector<Gen> out;
        for (auto [n, t] : std::vector<std::pair<const char*, const char*>>{
                 {"add", "(II)I"}, {"negate", "(I)I"}, {"twice", "(I)I"}, {"add3", "(III)I"}, {"concat", "(SIS)S"},
                 {"label", "(I)S"}, {"sum_arr", "(A)I"}, {"idObj", "(O)O"}, {"idStr", "(S)S"}, {"idArr", "(A)A"}}) {
            auto h = calc(n, t);
            std::vector<Dom> d;
            for (const auto& p : h.type().params) d.push_back(Dom::of(p));
            out.push_back({h, d});
        }
        return out;
    }

    /// Unary filters whose result has type `t`.
    std::vector<MethodHandle> filters_returning(const TypeTag& t) {
        switch (t.kind) {
            case TypeKind::Int: return {calc("negate", "(I)I"), calc("twice", "(I)I"), calc("id", "(I)I"), calc("sum_arr", "(A)I")};
            case TypeKind::Str: return {calc("idStr", "(S)S"), calc("label", "(I)S")};
            case TypeKind::Arr: return {calc("idArr", "(A)A")};
            case TypeKind::Obj: return {calc("idObj", "(O)O")};
            default: return {};
        }
    }

    MethodHandle identity_for(const TypeTag& t) {
        switch (t.kind) {
            case TypeKind::Int: return calc("id", "(I)I");
            case TypeKind::Str: return calc("idStr", "(S)S");
            case TypeKind::Arr: return calc("idArr", "(A)A");
            default: return calc("idObj", "(O)O");
        }
    }

    /// Random well-typed chain over the Calc library, with the domain of its parameters.
    Gen chain(Random& r, int depth) {
        auto bs = bases();
        Gen g = bs[r.below(bs.size())];
        for (int step = 0; step < depth; ++step) {
            const auto& params = g.h.type().params;
            switch (r.below(6)) {
                case 0: {  // insert
                    std::size_t pos = r.below(params.size() + 1);
                    std::size_t k = r.below(params.size() - pos + 1);
                    std::vector<Value> vals;
                    for (std::size_t i = 0; i < k; ++i) vals.push_back(r.value(g.dom[pos + i]));
                    g.h = insert_arguments(g.h, pos, vals);
                    g.dom.erase(g.dom.begin() + static_cast<std::ptrdiff_t>(pos), g.dom.begin() + static_cast<std::ptrdiff_t>(pos + k));
                    break;
                }
                case 1: {  // filter one argument
                    if (params.empty()) break;
                    std::size_t pos = r.below(params.size());
                    auto fs = filters_returning(params[pos]);
                    if (fs.empty()) break;
                    auto f = fs[r.below(fs.size())];
                    // a filter only sees values the slot already accepted when it is an identity on Obj
                    if (params[pos].kind == TypeKind::Obj) break;
                    if (f.type().params[0] != params[pos]) g.dom[pos] = Dom::of(f.type().params[0]);
                    g.h = filter_arguments(g.h, pos, {f});
                    break;
                }
                case 2: {  // filter the result
                    if (g.h.type().ret.is_void()) break;
                    const TypeTag& ret = g.h.type().ret;
                    std::vector<MethodHandle> fs;
                    if (ret.kind == TypeKind::Int) fs = {calc("negate", "(I)I"), calc("twice", "(I)I"), calc("label", "(I)S")};
                    else fs = {identity_for(ret)};
                    g.h = filter_return_value(g.h, fs[r.below(fs.size())]);
                    break;
                }
                case 3: {  // spread a tail
                    std::size_t k = r.below(params.size() + 1);
                    Dom tuple{Dom::Tuple, {}};
                    tuple.elems.assign(g.dom.end() - static_cast<std::ptrdiff_t>(k), g.dom.end());
                    g.h = as_spreader(g.h, k);
                    g.dom.resize(g.dom.size() - k);
                    g.dom.push_back(tuple);
                    break;
                }
                case 4: {  // collect a trailing array
                    if (params.empty() || params.back().kind != TypeKind::Arr) break;
                    const Dom last = g.dom.back();
                    std::size_t k = last.kind == Dom::Tuple ? last.elems.size() : r.below(4);
                    g.h = as_collector(g.h, k);
                    g.dom.pop_back();
                    for (std::size_t i = 0; i < k; ++i) g.dom.push_back(last.kind == Dom::Tuple ? last.elems[i] : Dom{Dom::Int, {}});
                    break;
                }
                case 5: {  // widen everything
                    MethodType wide = g.h.type();
                    for (auto& p : wide.params) p = TypeTag::of(TypeKind::Obj);
                    if (!wide.ret.is_void()) wide.ret = TypeTag::of(TypeKind::Obj);
                    g.h = as_type(g.h, wide);
                    break;
                }
            }
        }
        return g;
    }
};

}  // namespace

TEST_F(Properties, SpreaderCollectorInversion) {
    Random r(1);
    int checked = 0;
    for (int c = 0; c < kCases; ++c) {
        Gen g = chain(r, static_cast<int>(r.below(4)));
        std::size_t arity = g.h.type().params.size();
        // as_collector(as_spreader(h, n), n) == h
        std::size_t n = r.below(arity + 1);
        auto round = as_collector(as_spreader(g.h, n), n);
        auto args = r.args(g.dom);
        ASSERT_EQ(call(round, args), call(g.h, args)) << g.h.describe() << " n=" << n;
        ++checked;
        // as_spreader(as_collector(h, n), n) == h when h ends in an array
        if (arity > 0 && g.h.type().params.back().kind == TypeKind::Arr) {
            Dom last = g.dom.back();
            std::size_t k = last.kind == Dom::Tuple ? last.elems.size() : r.below(4);
            if (last.kind != Dom::Tuple) {
                last = Dom{Dom::Tuple, std::vector<Dom>(k, Dom{Dom::Int, {}})};
                g.dom.back() = last;
            }
            auto other = as_spreader(as_collector(g.h, k), k);
            EXPECT_EQ(other.type(), g.h.type());
            auto a = r.args(g.dom);
            ASSERT_EQ(call(other, a), call(g.h, a)) << g.h.describe();
        }
    }
    EXPECT_GE(checked, 500);
}

TEST_F(Properties, AsTypeRoundTrip) {
    Random r(2);
    for (int c = 0; c < kCases; ++c) {
        Gen g = chain(r, static_cast<int>(r.below(4)));
        MethodType wide = g.h.type();
        for (auto& p : wide.params) p = TypeTag::of(TypeKind::Obj);
        if (!wide.ret.is_void()) wide.ret = TypeTag::of(TypeKind::Obj);
        auto back = as_type(as_type(g.h, wide), g.h.type());
        EXPECT_EQ(back.type(), g.h.type());
        auto args = r.args(g.dom);
        ASSERT_EQ(call(back, args), call(g.h, args)) << g.h.describe();
        ASSERT_EQ(call(as_type(g.h, g.h.type()), args), call(g.h, args));
    }
}

TEST_F(Properties, IdentityFiltersAreNoOps) {
    Random r(3);
    for (int c = 0; c < kCases; ++c) {
        Gen g = chain(r, static_cast<int>(r.below(4)));
        const auto& params = g.h.type().params;
        std::size_t pos = r.below(params.size() + 1);
        std::size_t k = r.below(params.size() - pos + 1);
        std::vector<MethodHandle> ids;
        for (std::size_t i = 0; i < k; ++i) ids.push_back(identity_for(params[pos + i]));
        auto filtered = filter_arguments(g.h, pos, ids);
        auto args = r.args(g.dom);
        Value expect = call(g.h, args);
        ASSERT_EQ(call(filtered, args), expect) << g.h.describe();
        if (!g.h.type().ret.is_void()) {
            ASSERT_EQ(call(filter_return_value(g.h, identity_for(g.h.type().ret)), args), expect);
        }
    }
}

TEST_F(Properties, IdentityFiltersOverCorpusInputs) {
    // every corpus Fib input through identity-filtered chains
    auto fib = direct(*lookup, InvocationKind::Static, "Fib", "fib", T("(I)I"));
    auto arg_id = filter_arguments(fib, 0, {calc("id", "(I)I")});
    auto ret_id = filter_return_value(fib, calc("id", "(I)I"));
    for (const auto& e : load_manifest(corpus_dir())) {
        if (e.entry.class_name != "Fib") continue;
        for (const auto& cs : e.cases) {
            ASSERT_EQ(call(arg_id, cs.args), call(fib, cs.args));
            ASSERT_EQ(call(ret_id, cs.args), call(fib, cs.args));
        }
    }
    auto rep = insert_arguments(direct(*lookup, InvocationKind::Virtual, "Str", "replace_all", T("(OSS)S")), 1, {S("%20"), S(" ")});
    auto rep_id = filter_return_value(filter_arguments(rep, 0, {calc("idObj", "(O)O")}), calc("idStr", "(S)S"));
    EXPECT_EQ(call(rep_id, {S("A%20B%20C")}), call(rep, {S("A%20B%20C")}));
}

// Random constructions, well-typed or not: failures surface as HandleError at construction, and a
// chain that was built never fails structurally when invoked with arguments of its own type.
TEST_F(Properties, TypeErrorsSurfaceOnlyAtConstruction) {
    Random r(4);
    int built = 0, rejected = 0, invoked = 0;
    const TypeKind kinds[] = {TypeKind::Int, TypeKind::Str, TypeKind::Bool, TypeKind::Obj, TypeKind::Arr};
    for (int c = 0; invoked < kCases && c < 50 * kCases; ++c) {
        Gen g = chain(r, static_cast<int>(r.below(3)));
        MethodHandle h = g.h;
        std::vector<Dom> dom = g.dom;
        try {
            const auto& params = h.type().params;
            switch (r.below(5)) {
                case 0: {
                    std::size_t pos = r.below(params.size() + 2);
                    std::vector<Value> vals{r.value(Dom{r.coin() ? Dom::Int : Dom::Str, {}})};
                    h = insert_arguments(h, pos, vals);
                    dom.erase(dom.begin() + static_cast<std::ptrdiff_t>(pos));
                    break;
                }
                case 1: {
                    std::size_t pos = r.below(params.size() + 1);
                    auto bs = bases();
                    auto f = bs[r.below(bs.size())];
                    h = filter_arguments(h, pos, {f.h});
                    dom[pos] = f.dom[0];
                    break;
                }
                case 2: {
                    auto bs = bases();
                    h = filter_return_value(h, bs[r.below(bs.size())].h);
                    break;
                }
                case 3: {
                    std::size_t k = r.below(4);
                    h = as_collector(h, k);
                    Dom last = dom.back();
                    dom.pop_back();
                    for (std::size_t i = 0; i < k; ++i)
                        dom.push_back(last.kind == Dom::Tuple && i < last.elems.size() ? last.elems[i] : Dom{Dom::Int, {}});
                    break;
                }
                case 4: {
                    MethodType t = h.type();
                    for (auto& p : t.params) p = TypeTag::of(kinds[r.below(5)]);
                    if (!t.ret.is_void()) t.ret = TypeTag::of(kinds[r.below(5)]);
                    h = as_type(h, t);
                    for (std::size_t i = 0; i < t.params.size(); ++i)
                        if (dom[i].kind == Dom::Any) dom[i] = Dom::of(t.params[i]);
                    break;
                }
            }
        } catch (const HandleError&) {
            ++rejected;
            continue;
        }
        ++built;
        auto args = r.args(dom);
        // the generated arguments must fit the declared type, or the case says nothing
        bool fits = true;
        for (std::size_t i = 0; i < args.size(); ++i) fits = fits && interp->conforms(args[i], h.type().params[i]);
        if (!fits) continue;
        ++invoked;
        try {
            call(h, args);
        } catch (const Trap& t) {
            // explicit narrowings and spreader lengths are the only runtime failures a chain adds;
            // anything else must come from inside guest code the chain reached
            ASSERT_TRUE(t.kind() == TrapKind::Cast || t.kind() == TrapKind::ArrayLength || t.located())
                << t.describe() << " in " << h.describe();
            ASSERT_NE(t.kind(), TrapKind::Structural) << h.describe();
        }
    }
    EXPECT_GE(invoked, kCases);
    EXPECT_GT(rejected, 100);
    std::cout << "built " << built << ", rejected " << rejected << ", invoked " << invoked << "\n";
}

TEST_F(Properties, CachedTypeMatchesRecomputedType) {
    Random r(5);
    for (int c = 0; c < kCases; ++c) {
        Gen g = chain(r, static_cast<int>(r.below(6)));
        ASSERT_EQ(recompute_type(g.h), g.h.type()) << g.h.describe();
        for (const auto& child : g.h.children()) ASSERT_EQ(recompute_type(child), child.type());
    }
}

#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "fluxvm/bench.hpp"
#include "fluxvm/patch.hpp"
#include "fluxvm/transformer.hpp"
#include "support.hpp"

using namespace fluxvm;
using namespace fluxvm::testing;

namespace {

const char* kTags = R"(
class Tags
  method static echo (S)S
    load 0
    ret
  method static preA (A)A
    load 0
    push_const 0
    arr_get
    push_const "a"
    add
    make_arr 1
    ret
  method static preB (A)A
    load 0
    push_const 0
    arr_get
    push_const "b"
    add
    make_arr 1
    ret
  method static preC (A)A
    load 0
    push_const 0
    arr_get
    push_const "c"
    add
    make_arr 1
    ret
  method static postA (O)O
    load 0
    push_const "A"
    add
    ret
  method static postB (O)O
    load 0
    push_const "B"
    add
    ret
  method static postC (O)O
    load 0
    push_const "C"
    add
    ret
)";

const std::string kFib = "Fib.fib:(I)I";
const MethodType kFibType = parse_method_type("(I)I");

Module fib_module() { return transform_module(corpus_module("fib.fas")).module; }

std::size_t count_prefixed(const std::vector<std::string>& lines, const std::string& prefix) {
    std::size_t n = 0;
    for (const auto& l : lines) n += l.rfind(prefix, 0) == 0 ? 1 : 0;
    return n;
}

PatchErrorCode patch_error(const std::function<void()>& f) {
    try {
        f();
    } catch (const PatchError& e) {
        return e.code();
    }
    ADD_FAILURE() << "no patch error";
    return PatchErrorCode::UnknownKind;
}

}  // namespace

TEST(Bootstrap, RegistersAndMemoizes) {
    VirtualMachine vm(fib_module());
    EXPECT_TRUE(vm.engine().list_call_sites().empty());
    auto m0 = vm.engine().metrics();
    EXPECT_EQ(m0.call_sites, 0u);
    EXPECT_EQ(m0.bootstraps, 0u);
    EXPECT_EQ(m0.total_invocations, 0u);

    // fib(1) never reaches the recursive sites
    vm.run("Fib", "fib", {I(1)});
    EXPECT_TRUE(vm.engine().list_call_sites().empty());

    vm.run("Fib", "fib", {I(2)});
    auto sites = vm.engine().list_call_sites();
    ASSERT_EQ(sites.size(), 1u);
    EXPECT_EQ(sites[0].kind, InvocationKind::Static);
    EXPECT_EQ(sites[0].key, kFib);
    EXPECT_EQ(sites[0].site_count, 2u);
    EXPECT_EQ(sites[0].invocation_count, 2u);
    auto boots = vm.engine().metrics().bootstraps;
    EXPECT_EQ(boots, 2u);

    vm.run("Fib", "fib", {I(6)});
    EXPECT_EQ(vm.engine().metrics().bootstraps, boots);
    EXPECT_EQ(vm.engine().list_call_sites()[0].site_count, 2u);
}

TEST(Bootstrap, MissingTargetTraps) {
    VirtualMachine vm(fib_module());
    try {
        vm.engine().bootstrap(InvocationKind::Static, "Fib.gone:(I)I", kFibType);
        FAIL();
    } catch (const Trap& t) {
        EXPECT_EQ(t.kind(), TrapKind::Bootstrap);
        EXPECT_NE(std::string(t.what()).find("Fib.gone:(I)I"), std::string::npos);
    }
    // an invoke_dynamic naming a deleted method traps when first executed
    Module m = fib_module();
    for (auto& c : m.classes)
        for (auto& f : c.methods)
            for (auto& i : f.code)
                if (i.op == Opcode::InvokeDynamic) i.owner = "Fib.gone:(I)I";
    VirtualMachine broken(m);
    auto r = broken.run("Fib", "fib", {I(5)});
    ASSERT_TRUE(r.trap);
    EXPECT_EQ(r.trap->kind(), TrapKind::Bootstrap);
}

TEST(Site, InvokeAndCount) {
    VirtualMachine vm(fib_module());
    CallSite& site = vm.engine().bootstrap(InvocationKind::Static, kFib, kFibType);
    std::vector<Value> ten{I(10)};
    EXPECT_EQ(site.invoke(ten, vm.interpreter()), I(55));
    auto before = site.invocation_count();
    site.invoke(ten, vm.interpreter());
    site.invoke(ten, vm.interpreter());
    EXPECT_EQ(site.invocation_count(), before + 2);
    EXPECT_EQ(site.target().type(), site.type());
}

TEST(Retarget, ToConstantSeven) {
    VirtualMachine vm(fib_module());
    EXPECT_EQ(vm.run("Fib", "fib", {I(10)}).return_value, I(55));
    EXPECT_EQ(vm.engine().change_call_site_target("static", kFib, "Fib.seven:(I)I"), 2u);
    // fib(10) = fib(9) + fib(8) with both recursive sites now answering 7
    EXPECT_EQ(vm.run("Fib", "fib", {I(10)}).return_value, I(14));
    CallSite* outer = nullptr;
    auto r = vm.run_through_site(InvocationKind::Static, kFib, kFibType, {I(10)}, &outer);
    EXPECT_EQ(r.return_value, I(7));
    EXPECT_EQ(vm.engine().metrics().retargets, 1u);
    // the key keeps its bootstrap identity
    EXPECT_EQ(vm.engine().list_call_sites().at(0).key, kFib);
}

TEST(Retarget, IdentityKeepsBehavior) {
    VirtualMachine vm(fib_module());
    vm.run("Fib", "fib", {I(5)});
    EXPECT_GE(vm.engine().change_call_site_target("static", kFib, kFib), 1u);
    EXPECT_EQ(vm.run("Fib", "fib", {I(12)}).return_value, I(144));
}

TEST(Retarget, Errors) {
    VirtualMachine vm(fib_module());
    vm.run("Fib", "fib", {I(5)});
    auto& e = vm.engine();
    EXPECT_EQ(patch_error([&] { e.change_call_site_target("static", kFib, "Fib.shout:(S)S"); }), PatchErrorCode::TypeMismatch);
    EXPECT_EQ(vm.run("Fib", "fib", {I(10)}).return_value, I(55));  // untouched
    EXPECT_EQ(patch_error([&] { e.change_call_site_target("bogus", kFib, kFib); }), PatchErrorCode::UnknownKind);
    EXPECT_EQ(patch_error([&] { e.change_call_site_target("virtual", kFib, kFib); }), PatchErrorCode::UnknownKey);
    EXPECT_EQ(patch_error([&] { e.change_call_site_target("static", "Fib.nope:(I)I", kFib); }), PatchErrorCode::UnknownKey);
    EXPECT_EQ(patch_error([&] { e.change_call_site_target("static", kFib, "Fib.nope:(I)I"); }), PatchErrorCode::UnknownTarget);
    EXPECT_EQ(patch_error([&] { e.change_call_site_target("static", kFib, "not a key"); }), PatchErrorCode::UnknownTarget);
    EXPECT_EQ(e.metrics().retargets, 0u);
}

TEST(Retarget, ReceiverDroppingHandler) {
    VirtualMachine vm(transform_module(corpus_module("handler.fas")).module);
    vm.run("Switcher", "main", {I(1)});
    const std::string key = "MyActionListener.counterIncrement:(MyActionListener)void";
    EXPECT_EQ(vm.engine().change_call_site_target("virtual", key, "MyActionListener.pictureSwitch:()V"), 1u);
    auto r = vm.run("Switcher", "main", {I(2)});
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.output, (std::vector<std::string>{"picture!", "picture!"}));
    EXPECT_EQ(patch_error([&] { vm.engine().change_call_site_target("virtual", key, "MyActionListener.badHandler:(I)I"); }),
              PatchErrorCode::TypeMismatch);
}

TEST(Aspects, BeforeAdviceSeesEveryCall) {
    for (int n : {0, 1, 5, 10}) {
        VirtualMachine vm(fib_module());
        vm.run("Fib", "fib", {I(5)});  // register the key
        EXPECT_GE(vm.engine().apply_before_aspect(kFib, "Dumpers", "onCall"), 1u);
        auto r = vm.run_through_site(InvocationKind::Static, kFib, kFibType, {I(n)});
        ASSERT_TRUE(r.ok()) << r.trap->describe();
        EXPECT_EQ(count_prefixed(r.output, ">>> "), bench::count_calls_oracle(n)) << n;
        EXPECT_EQ(r.output.size(), bench::count_calls_oracle(n));
    }
    EXPECT_EQ(bench::count_calls_oracle(5), 15u);
}

TEST(Aspects, AppliedBeforeFirstRunReachesLaterSites) {
    VirtualMachine vm(fib_module());
    CallSite* site = nullptr;
    vm.run_through_site(InvocationKind::Static, kFib, kFibType, {I(0)}, &site);
    vm.engine().apply_before_aspect(kFib, "Dumpers", "onCall");
    auto r = vm.run_through_site(InvocationKind::Static, kFib, kFibType, {I(5)});
    EXPECT_EQ(count_prefixed(r.output, ">>> "), 15u);
}

TEST(Aspects, IdentityAndClampingAdvice) {
    VirtualMachine vm(fib_module());
    vm.run("Fib", "fib", {I(3)});
    vm.engine().apply_before_aspect(kFib, "Advices", "same");
    EXPECT_EQ(vm.run_through_site(InvocationKind::Static, kFib, kFibType, {I(10)}).return_value, I(55));
    vm.engine().remove_aspects(kFib);
    vm.engine().apply_before_aspect(kFib, "Advices", "one");
    for (int n : {0, 2, 9, 20}) EXPECT_EQ(vm.run_through_site(InvocationKind::Static, kFib, kFibType, {I(n)}).return_value, I(1));
}

TEST(Aspects, AfterAdviceOnOneSite) {
    VirtualMachine vm(fib_module());
    CallSite& outer = vm.engine().bootstrap(InvocationKind::Static, kFib, kFibType);
    outer.push_advice(AdviceRecord{AdvicePosition::After, vm.engine().advice_handle("Advices", "twice", AdvicePosition::After),
                                   "Advices", "twice"});
    std::vector<Value> ten{I(10)};
    EXPECT_EQ(outer.invoke(ten, vm.interpreter()), I(110));
    // the recursive sites of the guest are not adviced
    EXPECT_EQ(vm.run("Fib", "fib", {I(10)}).return_value, I(55));
}

TEST(Aspects, AfterAdviceIdentityAcrossCorpus) {
    for (const auto& e : load_manifest(corpus_dir())) {
        Module m = transform_at_load(e.source);
        if (!m.find_class("Advices")) continue;
        VirtualMachine clean(m), adviced(m);
        for (const auto& c : m.classes)
            for (const auto& f : c.methods)
                for (const auto& i : f.code) {
                    if (i.op != Opcode::InvokeDynamic || i.mtype.ret.is_void()) continue;
                    adviced.engine().bootstrap(i.tag, i.owner, i.mtype);
                    adviced.engine().apply_after_aspect(i.owner, "Advices", "keep");
                }
        for (const auto& cs : e.cases) {
            auto a = clean.run(e.entry.class_name, e.entry.method, cs.args);
            auto b = adviced.run(e.entry.class_name, e.entry.method, cs.args);
            EXPECT_EQ(a.output, b.output) << e.id;
            EXPECT_EQ(a.return_value, b.return_value) << e.id;
        }
    }
}

TEST(Aspects, Errors) {
    VirtualMachine vm(transform_module(corpus_module("handler.fas")).module);
    vm.run("Switcher", "main", {I(1)});
    auto& e = vm.engine();
    const std::string key = "MyActionListener.counterIncrement:(MyActionListener)void";
    EXPECT_EQ(patch_error([&] { e.apply_after_aspect(key, "MyActionListener", "badHandler"); }), PatchErrorCode::TypeMismatch);
    VirtualMachine fvm(fib_module());
    fvm.run("Fib", "fib", {I(3)});
    auto& f = fvm.engine();
    EXPECT_EQ(patch_error([&] { f.apply_before_aspect("Fib.nope:(I)I", "Dumpers", "onCall"); }), PatchErrorCode::UnknownKey);
    EXPECT_EQ(patch_error([&] { f.apply_before_aspect(kFib, "Dumpers", "missing"); }), PatchErrorCode::UnknownTarget);
    EXPECT_EQ(patch_error([&] { f.apply_before_aspect(kFib, "Dumpers", "onReturn"); }), PatchErrorCode::TypeMismatch);
    EXPECT_EQ(patch_error([&] { f.apply_after_aspect(kFib, "Dumpers", "onCall"); }), PatchErrorCode::TypeMismatch);
    EXPECT_EQ(patch_error([&] { f.remove_aspects("Fib.nope:(I)I"); }), PatchErrorCode::UnknownKey);
    EXPECT_EQ(f.metrics().advices_applied, 0u);
}

TEST(Aspects, VoidReturningSiteRejectsAfterAdvice) {
    // a void handler site with an (O)O advice available in the same module
    std::ifstream in(corpus_path("handler.fas"));
    std::stringstream src;
    src << in.rdbuf() << "\nclass Keep\n  method static keep (O)O\n    load 0\n    ret\n";
    VirtualMachine vm(transform_module(assemble(src.str())).module);
    vm.run("Switcher", "main", {I(1)});
    const std::string key = "MyActionListener.counterIncrement:(MyActionListener)void";
    EXPECT_EQ(patch_error([&] { vm.engine().apply_after_aspect(key, "Keep", "keep"); }), PatchErrorCode::VoidReturn);
    auto r = vm.run("Switcher", "main", {I(2)});
    EXPECT_EQ(r.output, (std::vector<std::string>{"count=1", "count=2"}));
    EXPECT_EQ(vm.engine().sites(InvocationKind::Virtual, key).at(0)->advices().size(), 0u);
}

TEST(Aspects, RemoveRestoresCleanBehavior) {
    VirtualMachine clean(fib_module()), vm(fib_module());
    auto expect = clean.run_through_site(InvocationKind::Static, kFib, kFibType, {I(7)});
    vm.run("Fib", "fib", {I(2)});
    vm.engine().apply_before_aspect(kFib, "Dumpers", "onCall");
    vm.engine().apply_after_aspect(kFib, "Dumpers", "onReturn");
    auto noisy = vm.run_through_site(InvocationKind::Static, kFib, kFibType, {I(7)});
    EXPECT_FALSE(noisy.output.empty());
    EXPECT_GE(vm.engine().remove_aspects(kFib), 2u);
    auto quiet = vm.run_through_site(InvocationKind::Static, kFib, kFibType, {I(7)});
    EXPECT_EQ(quiet.output, expect.output);
    EXPECT_EQ(quiet.return_value, expect.return_value);
    // removing again is harmless
    EXPECT_GE(vm.engine().remove_aspects(kFib), 2u);
    EXPECT_EQ(vm.run_through_site(InvocationKind::Static, kFib, kFibType, {I(7)}).return_value, I(13));
}

TEST(Aspects, SummaryAndMetrics) {
    VirtualMachine vm(fib_module());
    vm.run_through_site(InvocationKind::Static, kFib, kFibType, {I(5)});
    auto m = vm.engine().metrics();
    EXPECT_EQ(m.total_invocations, bench::count_calls_oracle(5));
    std::uint64_t sum = 0;
    std::size_t sites = 0;
    for (const auto& s : vm.engine().list_call_sites()) {
        sum += s.invocation_count;
        sites += s.site_count;
    }
    EXPECT_EQ(sum, m.total_invocations);
    EXPECT_EQ(sites, m.bootstraps);
    EXPECT_EQ(sites, m.call_sites);
    vm.engine().apply_before_aspect(kFib, "Dumpers", "onCall");
    auto list = vm.engine().list_call_sites();
    ASSERT_EQ(list.size(), 1u);
    EXPECT_EQ(list[0].before_advices, 1u);
    EXPECT_EQ(list[0].after_advices, 0u);
    EXPECT_EQ(vm.engine().metrics().advices_applied, 1u);  // operations, not sites
}

// Advices wrap outward in application order: the most recently applied before-advice sees the
// arguments first, and the most recently applied after-advice sees the result last.
TEST(Properties, AdviceOrdering) {
    VirtualMachine vm(transform_module(assemble(kTags)).module);
    const std::string key = "Tags.echo:(S)S";
    const MethodType type = parse_method_type("(S)S");
    vm.run_through_site(InvocationKind::Static, key, type, {S("")});
    std::mt19937 rng(17);
    const char* pre[] = {"preA", "preB", "preC"};
    const char* post[] = {"postA", "postB", "postC"};
    for (int c = 0; c < 600; ++c) {
        vm.engine().remove_aspects(key);
        std::string suffix_in, suffix_out;
        for (std::size_t k = 0, n = rng() % 7; k < n; ++k) {
            std::size_t which = rng() % 3;
            if (rng() % 2) {
                vm.engine().apply_before_aspect(key, "Tags", pre[which]);
                suffix_in.insert(suffix_in.begin(), static_cast<char>('a' + which));
            } else {
                vm.engine().apply_after_aspect(key, "Tags", post[which]);
                suffix_out += static_cast<char>('A' + which);
            }
        }
        auto r = vm.run_through_site(InvocationKind::Static, key, type, {S("x")});
        ASSERT_TRUE(r.ok()) << r.trap->describe();
        ASSERT_EQ(r.return_value, S("x" + suffix_in + suffix_out));
    }
}

// The live target always equals the base target with the advice stack replayed over it.
TEST(Properties, ChainReconstruction) {
    VirtualMachine vm(fib_module());
    vm.run("Fib", "fib", {I(3)});
    std::mt19937 rng(23);
    struct Op {
        const char* owner;
        const char* method;
        bool before;
    };
    const Op ops[] = {{"Advices", "same", true}, {"Advices", "one", true}, {"Advices", "keep", false}, {"Advices", "twice", false}};
    for (int c = 0; c < 500; ++c) {
        switch (rng() % 6) {
            case 0: vm.engine().remove_aspects(kFib); break;
            case 1: vm.engine().change_call_site_target("static", kFib, rng() % 2 ? kFib : "Fib.seven:(I)I"); break;
            default: {
                const Op& op = ops[rng() % 4];
                if (op.before) vm.engine().apply_before_aspect(kFib, op.owner, op.method);
                else vm.engine().apply_after_aspect(kFib, op.owner, op.method);
            }
        }
        for (const auto& site : vm.engine().sites(InvocationKind::Static, kFib)) {
            auto advices = site->advices();
            MethodHandle rebuilt = weave(site->base_target(), advices);
            ASSERT_EQ(rebuilt.type(), site->target().type());
            ASSERT_EQ(site->target().type(), site->type());
            std::vector<Value> arg{I(static_cast<std::int64_t>(rng() % 12))};
            ASSERT_EQ(invoke_handle(rebuilt, arg, vm.interpreter()), invoke_handle(site->target(), arg, vm.interpreter()));
        }
    }
}

TEST(Properties, NoReloadAcrossAScript) {
    VirtualMachine vm(fib_module());
    vm.run("Fib", "fib", {I(4)});
    const auto before = vm.program().all_functions();
    std::set<const FunctionDef*> functions(before.begin(), before.end());
    const Module* module = &vm.program().module();
    const auto fn_created = InstanceCounter<FunctionDef>::created();
    const auto cls_created = InstanceCounter<ClassDef>::created();
    std::mt19937 rng(5);
    for (int op = 0; op < 100; ++op) {
        switch (rng() % 4) {
            case 0: vm.engine().change_call_site_target("static", kFib, rng() % 2 ? "Fib.seven:(I)I" : kFib); break;
            case 1: vm.engine().apply_before_aspect(kFib, "Advices", "same"); break;
            case 2: vm.engine().apply_after_aspect(kFib, "Advices", "keep"); break;
            case 3: vm.engine().remove_aspects(kFib); break;
        }
        vm.run("Fib", "fib", {I(6)});
    }
    EXPECT_EQ(InstanceCounter<FunctionDef>::created(), fn_created);
    EXPECT_EQ(InstanceCounter<ClassDef>::created(), cls_created);
    EXPECT_EQ(&vm.program().module(), module);
    auto now = vm.program().all_functions();
    EXPECT_EQ(std::set<const FunctionDef*>(now.begin(), now.end()), functions);
}

TEST(Properties, AtomicRetargetsUnderLoad) {
    VirtualMachine vm(transform_at_load(corpus_path("stress.fas")));
    const std::string key = "Stress.pick:(I)I";
    vm.engine().bootstrap(InvocationKind::Static, key, kFibType);
    std::atomic<bool> stop{false};
    std::atomic<std::uint64_t> swaps{0};
    std::thread mutator([&] {
        bool flip = false;
        while (!stop.load()) {
            vm.engine().change_call_site_target("static", key, flip ? "Stress.one:(I)I" : "Stress.two:(I)I");
            flip = !flip;
            swaps.fetch_add(1);
        }
    });
    auto r = vm.run("Stress", "loop", {I(200000)});
    stop = true;
    mutator.join();
    ASSERT_TRUE(r.ok()) << r.trap->describe();
    EXPECT_EQ(r.return_value, I(0));  // every result came from exactly one of the two targets
    EXPECT_GT(swaps.load(), 0u);
}

#include "fluxvm/vm.hpp"

#include "fluxvm/assembler.hpp"
#include "fluxvm/transformer.hpp"
#include "fluxvm/verifier.hpp"

namespace fluxvm {

VirtualMachine::VirtualMachine(Module m, RuntimeHooks hooks)
    : program_(std::make_shared<const Program>(std::make_shared<const Module>(std::move(m)))),
      engine_(std::make_unique<PatchEngine>(program_)) {
    hooks.engine = engine_.get();
    interp_ = std::make_unique<Interpreter>(program_, std::move(hooks));
}

std::unique_ptr<VirtualMachine> VirtualMachine::load(const std::string& path, bool transform) {
    if (transform) return std::make_unique<VirtualMachine>(transform_at_load(path));
    Module m = assemble_file(path);
    require_verified(m);
    return std::make_unique<VirtualMachine>(std::move(m));
}

ExitReport VirtualMachine::run(std::string_view class_name, std::string_view method, std::vector<Value> args) {
    return interp_->run(class_name, method, std::move(args));
}

ExitReport VirtualMachine::run_entry(std::vector<Value> args) {
    const auto& entry = program_->module().entry;
    if (!entry) {
        ExitReport r;
        r.trap = Trap(TrapKind::UnknownMethod, "module declares no entry point");
        return r;
    }
    return run(entry->class_name, entry->method, std::move(args));
}

ExitReport VirtualMachine::run_through_site(InvocationKind kind, std::string_view key, const MethodType& type,
                                            std::vector<Value> args, CallSite** site) {
    CallSite* s = nullptr;
    ExitReport r = interp_->capture([&]() -> Value {
        s = &engine_->bootstrap(kind, key, type);
        if (args.size() != type.params.size()) throw Trap(TrapKind::Type, "wrong argument count for " + s->key());
        for (std::size_t i = 0; i < args.size(); ++i)
            if (!interp_->conforms(args[i], type.params[i]))
                throw Trap(TrapKind::Type, "argument " + std::to_string(i) + " does not fit " + s->key());
        return s->invoke(args, *interp_);
    });
    if (site) *site = s;
    return r;
}

}  // namespace fluxvm

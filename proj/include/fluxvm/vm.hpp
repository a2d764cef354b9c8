#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fluxvm/interpreter.hpp"
#include "fluxvm/module.hpp"
#include "fluxvm/patch.hpp"
#include "fluxvm/program.hpp"

namespace fluxvm {

/// One linked program with its own patch engine and interpreter.
class VirtualMachine {
public:
    explicit VirtualMachine(Module m, RuntimeHooks hooks = {});

    /// Assembles and verifies `path`, applying the load-time transformer when asked.
    static std::unique_ptr<VirtualMachine> load(const std::string& path, bool transform);

    const Program& program() const noexcept { return *program_; }
    const std::shared_ptr<const Program>& program_ptr() const noexcept { return program_; }
    PatchEngine& engine() noexcept { return *engine_; }
    Interpreter& interpreter() noexcept { return *interp_; }

    ExitReport run(std::string_view class_name, std::string_view method, std::vector<Value> args = {});

    /// Runs the module's declared entry point.
    ExitReport run_entry(std::vector<Value> args = {});

    /// Enters through a call site bootstrapped under `key`, so the outermost call is counted and
    /// adviced exactly like the ones inside the guest. The site is returned through `site`.
    ExitReport run_through_site(InvocationKind kind, std::string_view key, const MethodType& type,
                                std::vector<Value> args, CallSite** site = nullptr);

private:
    std::shared_ptr<const Program> program_;
    std::unique_ptr<PatchEngine> engine_;
    std::unique_ptr<Interpreter> interp_;
};

}  // namespace fluxvm

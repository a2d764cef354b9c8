#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fluxvm/handles.hpp"
#include "fluxvm/program.hpp"

namespace fluxvm {

enum class AdvicePosition : std::uint8_t { Before, After };

std::string_view to_string(AdvicePosition p) noexcept;

/// One woven advice. Before advices have type (A)A over the packed arguments; After advices
/// have type (O)O over the widened return value.
struct AdviceRecord {
    AdvicePosition position = AdvicePosition::Before;
    MethodHandle advice;
    std::string owner;
    std::string method;
};

/// Wraps `target` so its packed arguments pass through `advice` first.
MethodHandle weave_before(const MethodHandle& target, const MethodHandle& advice);

/// Wraps `target` so its widened return value passes through `advice`.
MethodHandle weave_after(const MethodHandle& target, const MethodHandle& advice);

/// Replays `advices` over `base` in application order; the last applied ends up outermost.
MethodHandle weave(const MethodHandle& base, std::span<const AdviceRecord> advices);

/// Mutable binding of one invoke_dynamic instruction to a handle chain.
class CallSite {
public:
    CallSite(std::uint64_t id, InvocationKind kind, std::string key, MethodType type, MethodHandle base);

    std::uint64_t id() const noexcept { return id_; }
    InvocationKind kind() const noexcept { return kind_; }
    const std::string& key() const noexcept { return key_; }
    const MethodType& type() const noexcept { return type_; }

    /// Current chain. Atomic snapshot; never a partially updated chain.
    MethodHandle target() const;
    MethodHandle base_target() const;
    std::vector<AdviceRecord> advices() const;
    std::uint64_t invocation_count() const noexcept { return invocations_.load(std::memory_order_relaxed); }

    /// Counts the invocation, reads the target once, and runs it.
    Value invoke(std::span<const Value> args, Invoker& invoker) {
        invocations_.fetch_add(1, std::memory_order_relaxed);
        auto chain = std::atomic_load_explicit(&target_, std::memory_order_acquire);
        return invoke_exact(*chain, args, invoker);
    }

    /// Replaces the base target and advice stack, then publishes the rebuilt chain.
    void install(MethodHandle base, std::vector<AdviceRecord> advices);

    /// Pushes one advice on top of the current stack.
    void push_advice(AdviceRecord record);

private:
    void publish_locked();

    const std::uint64_t id_;
    const InvocationKind kind_;
    const std::string key_;
    const MethodType type_;

    mutable std::mutex mutate_;  // guards base_ and advices_; never held while guest code runs
    MethodHandle base_;
    std::vector<AdviceRecord> advices_;

    std::shared_ptr<const MethodHandle> target_;  // accessed only through std::atomic_load/store
    std::atomic<std::uint64_t> invocations_{0};
};

enum class PatchErrorCode { UnknownKind, UnknownKey, UnknownTarget, TypeMismatch, VoidReturn };

/// Wire name of the code: `unknown_kind`, `unknown_key`, ...
std::string_view to_string(PatchErrorCode code) noexcept;

class PatchError : public std::runtime_error {
public:
    PatchError(PatchErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}
    PatchErrorCode code() const noexcept { return code_; }

private:
    PatchErrorCode code_;
};

struct SiteSummary {
    InvocationKind kind = InvocationKind::Static;
    std::string key;
    std::size_t site_count = 0;
    std::uint64_t invocation_count = 0;
    std::size_t before_advices = 0;  // largest advice stack among the key's sites
    std::size_t after_advices = 0;
};

struct Metrics {
    std::size_t call_sites = 0;
    std::uint64_t bootstraps = 0;
    std::uint64_t retargets = 0;
    std::uint64_t advices_applied = 0;
    std::uint64_t total_invocations = 0;
};

/// Runtime core: bootstraps invoke_dynamic sites, keeps the central registry, and rebinds
/// sites live. Mutating operations may run on any thread concurrently with guest execution.
class PatchEngine {
public:
    explicit PatchEngine(std::shared_ptr<const Program> program);

    const Lookup& lookup() const noexcept { return lookup_; }

    /// Binds a new site to its original target and registers it. Traps (Bootstrap) if the key
    /// does not name an existing method.
    CallSite& bootstrap(InvocationKind kind, std::string_view key, const MethodType& site_type);

    /// Rebinds every site under (kind, old_key) to the method named by new_key. Clears advices.
    /// Sites bootstrapped later under the same key start from the new binding.
    std::size_t change_call_site_target(std::string_view kind, std::string_view old_key, std::string_view new_key);

    /// Weaves a static (A)A advice before every site whose key matches, across all kinds. Sites
    /// bootstrapped later under the key receive the same advice stack.
    std::size_t apply_before_aspect(std::string_view key, std::string_view advice_owner, std::string_view advice_method);

    /// Weaves a static (O)O advice after every site whose key matches, across all kinds.
    std::size_t apply_after_aspect(std::string_view key, std::string_view advice_owner, std::string_view advice_method);

    /// Restores every matching site to its base target.
    std::size_t remove_aspects(std::string_view key);

    std::vector<SiteSummary> list_call_sites() const;
    Metrics metrics() const;

    /// Live sites registered under (kind, key). Key spelling is normalized first.
    std::vector<std::shared_ptr<CallSite>> sites(InvocationKind kind, std::string_view key) const;
    std::vector<std::shared_ptr<CallSite>> all_sites() const;

    /// Resolves a static advice method of the given type.
    MethodHandle advice_handle(std::string_view owner, std::string_view method, AdvicePosition position) const;

private:
    /// Everything registered under one (kind, key), plus the patch state new sites inherit.
    struct KeyState {
        std::vector<std::shared_ptr<CallSite>> sites;
        std::optional<MethodHandle> base;  // set once the key has been retargeted
        std::vector<AdviceRecord> advices;
    };
    using Registry = std::map<std::pair<InvocationKind, std::string>, KeyState>;

    /// Entries for `key` under every kind that has sites. Caller holds the registry lock.
    std::vector<KeyState*> entries_for_any_kind(const std::string& key);
    MethodHandle retarget_handle(const MethodType& site_type, InvocationKind site_kind, const std::string& site_key,
                                 std::string_view new_key) const;
    std::size_t apply_aspect(std::string_view key, std::string_view owner, std::string_view method, AdvicePosition pos);

    Lookup lookup_;
    mutable std::shared_mutex registry_mutex_;  // never held while guest code runs
    Registry registry_;
    std::atomic<std::uint64_t> next_id_{1};
    std::atomic<std::uint64_t> bootstraps_{0};
    std::atomic<std::uint64_t> retargets_{0};
    std::atomic<std::uint64_t> advices_applied_{0};
};

}  // namespace fluxvm

#include "fluxvm/patch.hpp"

#include <algorithm>

#include "fluxvm/trap.hpp"
#include "fluxvm/transformer.hpp"

namespace fluxvm {

std::string_view to_string(AdvicePosition p) noexcept { return p == AdvicePosition::Before ? "before" : "after"; }

std::string_view to_string(PatchErrorCode code) noexcept {
    switch (code) {
        case PatchErrorCode::UnknownKind: return "unknown_kind";
        case PatchErrorCode::UnknownKey: return "unknown_key";
        case PatchErrorCode::UnknownTarget: return "unknown_target";
        case PatchErrorCode::TypeMismatch: return "type_mismatch";
        case PatchErrorCode::VoidReturn: return "void_return";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Weaving

MethodHandle weave_before(const MethodHandle& target, const MethodHandle& advice) {
    // spread the arguments into one array, filter the array, collect it back into parameters
    const std::size_t n = target.type().params.size();
    auto packed = filter_arguments(as_spreader(target, n), 0, {advice});
    return as_type(as_collector(packed, n), target.type());
}

MethodHandle weave_after(const MethodHandle& target, const MethodHandle& advice) {
    // widen the return to Obj, filter it, narrow back
    MethodType widened = target.type();
    widened.ret = TypeTag::of(TypeKind::Obj);
    return as_type(filter_return_value(as_type(target, widened), advice), target.type());
}

MethodHandle weave(const MethodHandle& base, std::span<const AdviceRecord> advices) {
    MethodHandle chain = base;
    for (const auto& a : advices)
        chain = a.position == AdvicePosition::Before ? weave_before(chain, a.advice) : weave_after(chain, a.advice);
    return chain;
}

// ---------------------------------------------------------------------------
// CallSite

CallSite::CallSite(std::uint64_t id, InvocationKind kind, std::string key, MethodType type, MethodHandle base)
    : id_(id), kind_(kind), key_(std::move(key)), type_(std::move(type)), base_(std::move(base)) {
    std::lock_guard lock(mutate_);
    publish_locked();
}

MethodHandle CallSite::target() const { return *std::atomic_load_explicit(&target_, std::memory_order_acquire); }

MethodHandle CallSite::base_target() const {
    std::lock_guard lock(mutate_);
    return base_;
}

std::vector<AdviceRecord> CallSite::advices() const {
    std::lock_guard lock(mutate_);
    return advices_;
}

void CallSite::install(MethodHandle base, std::vector<AdviceRecord> advices) {
    std::lock_guard lock(mutate_);
    base_ = std::move(base);
    advices_ = std::move(advices);
    publish_locked();
}

void CallSite::push_advice(AdviceRecord record) {
    std::lock_guard lock(mutate_);
    advices_.push_back(std::move(record));
    publish_locked();
}

void CallSite::publish_locked() {
    auto chain = std::make_shared<const MethodHandle>(weave(base_, advices_));
    std::atomic_store_explicit(&target_, std::move(chain), std::memory_order_release);
}

// ---------------------------------------------------------------------------
// PatchEngine

PatchEngine::PatchEngine(std::shared_ptr<const Program> program) : lookup_(std::move(program)) {}

CallSite& PatchEngine::bootstrap(InvocationKind kind, std::string_view key, const MethodType& site_type) {
    MethodRef ref;
    std::string canonical;
    try {
        ref = parse_call_site_key(key);
        canonical = encode_key(ref);
    } catch (const TypeSyntaxError& e) {
        throw Trap(TrapKind::Bootstrap, "bootstrap failed for '" + std::string(key) + "': " + e.what());
    }
    MethodHandle h = [&] {
        try {
            MethodHandle d = direct(lookup_, kind, ref.owner, ref.name, ref.mtype);
            return d.type() == site_type ? d : as_type(d, site_type);
        } catch (const HandleError& e) {
            throw Trap(TrapKind::Bootstrap,
                       "bootstrap failed for " + std::string(to_string(kind)) + " " + canonical + ": " + e.what());
        }
    }();
    auto site = std::make_shared<CallSite>(next_id_.fetch_add(1), kind, canonical, site_type, std::move(h));
    {
        std::unique_lock lock(registry_mutex_);
        KeyState& state = registry_[{kind, canonical}];
        if (state.base && state.base->type() == site_type)
            site->install(*state.base, state.advices);
        else if (!state.advices.empty())
            site->install(site->base_target(), state.advices);
        state.sites.push_back(site);
    }
    bootstraps_.fetch_add(1);
    return *site;
}

std::vector<std::shared_ptr<CallSite>> PatchEngine::sites(InvocationKind kind, std::string_view key) const {
    std::string canonical;
    try {
        canonical = normalize_key(key);
    } catch (const TypeSyntaxError&) {
        return {};
    }
    std::shared_lock lock(registry_mutex_);
    auto it = registry_.find({kind, canonical});
    if (it == registry_.end()) return {};
    return it->second.sites;
}

std::vector<PatchEngine::KeyState*> PatchEngine::entries_for_any_kind(const std::string& key) {
    std::vector<KeyState*> out;
    std::string canonical;
    try {
        canonical = normalize_key(key);
    } catch (const TypeSyntaxError&) {
        return out;
    }
    for (auto kind : {InvocationKind::Static, InvocationKind::Virtual, InvocationKind::Special, InvocationKind::Interface}) {
        auto it = registry_.find({kind, canonical});
        if (it != registry_.end() && !it->second.sites.empty()) out.push_back(&it->second);
    }
    return out;
}

std::vector<std::shared_ptr<CallSite>> PatchEngine::all_sites() const {
    std::shared_lock lock(registry_mutex_);
    std::vector<std::shared_ptr<CallSite>> out;
    for (const auto& [k, v] : registry_) out.insert(out.end(), v.sites.begin(), v.sites.end());
    return out;
}

MethodHandle PatchEngine::retarget_handle(const MethodType& want, InvocationKind site_kind, const std::string& site_key,
                                          std::string_view new_key) const {
    MethodRef ref;
    try {
        ref = parse_call_site_key(new_key);
    } catch (const TypeSyntaxError& e) {
        throw PatchError(PatchErrorCode::UnknownTarget, "malformed target '" + std::string(new_key) + "': " + e.what());
    }
    const FunctionDef* fn = lookup_.program().find_method(ref.owner, ref.name, ref.mtype);
    if (!fn) throw PatchError(PatchErrorCode::UnknownTarget, "no method " + encode_key(ref));

    const bool site_has_receiver = site_kind != InvocationKind::Static && !want.params.empty();
    auto incompatible = [&](const std::string& why) {
        return PatchError(PatchErrorCode::TypeMismatch, encode_key(ref) + " cannot replace " + site_key + ": " + why);
    };
    try {
        if (fn->is_static()) {
            MethodHandle h = direct(lookup_, InvocationKind::Static, fn->owner, fn->name, fn->mtype);
            if (fn->mtype == want) return h;
            if (site_has_receiver && fn->mtype == want.drop_first()) {
                // Drop the receiver: pack all arguments, strip element 0, unpack the rest.
                const std::size_t k = fn->mtype.params.size();
                MethodType tail_type{{TypeTag::of(TypeKind::Arr)}, TypeTag::of(TypeKind::Arr)};
                MethodHandle tail = direct(lookup_, InvocationKind::Static, "Arrays", "tail", tail_type);
                MethodHandle packed = filter_arguments(as_spreader(h, k), 0, {tail});
                return as_type(as_collector(packed, k + 1), want);
            }
            throw incompatible("type " + fn->mtype.descriptor() + " does not match " + want.descriptor());
        }
        if (!site_has_receiver || fn->mtype.drop_first() != want.drop_first())
            throw incompatible("type " + fn->mtype.descriptor() + " does not match " + want.descriptor());
        InvocationKind kind = fn->kind == InvocationKind::Special ? InvocationKind::Special : InvocationKind::Virtual;
        MethodHandle h = direct(lookup_, kind, fn->owner, fn->name, fn->mtype);
        return h.type() == want ? h : as_type(h, want);
    } catch (const HandleError& e) {
        throw incompatible(e.what());
    }
}

std::size_t PatchEngine::change_call_site_target(std::string_view kind_text, std::string_view old_key,
                                                 std::string_view new_key) {
    InvocationKind kind{};
    if (!parse_invocation_kind(kind_text, kind))
        throw PatchError(PatchErrorCode::UnknownKind, "unknown invocation kind '" + std::string(kind_text) + "'");
    std::string canonical;
    try {
        canonical = normalize_key(old_key);
    } catch (const TypeSyntaxError&) {
    }
    std::unique_lock lock(registry_mutex_);
    auto it = canonical.empty() ? registry_.end() : registry_.find({kind, canonical});
    if (it == registry_.end() || it->second.sites.empty())
        throw PatchError(PatchErrorCode::UnknownKey,
                         "no " + std::string(kind_text) + " call sites under '" + std::string(old_key) + "'");
    KeyState& state = it->second;
    // Build every replacement first so a rejected swap leaves all sites untouched.
    std::vector<MethodHandle> replacements;
    replacements.reserve(state.sites.size());
    for (const auto& site : state.sites) replacements.push_back(retarget_handle(site->type(), kind, canonical, new_key));
    for (std::size_t i = 0; i < state.sites.size(); ++i) state.sites[i]->install(replacements[i], {});
    state.base = replacements.front();
    state.advices.clear();
    retargets_.fetch_add(1);
    return state.sites.size();
}

MethodHandle PatchEngine::advice_handle(std::string_view owner, std::string_view method, AdvicePosition position) const {
    const TypeTag slot = TypeTag::of(position == AdvicePosition::Before ? TypeKind::Arr : TypeKind::Obj);
    const MethodType expected{{slot}, slot};
    const ClassDef* cls = lookup_.program().find_class(owner);
    if (!cls) throw PatchError(PatchErrorCode::UnknownTarget, "unknown aspect class '" + std::string(owner) + "'");
    bool named = false;
    for (const auto& f : cls->methods) {
        if (f.name != method) continue;
        named = true;
        if (f.is_static() && f.mtype == expected)
            return direct(lookup_, InvocationKind::Static, cls->name, f.name, expected);
    }
    if (!named)
        throw PatchError(PatchErrorCode::UnknownTarget,
                         "unknown aspect method " + std::string(owner) + "." + std::string(method));
    throw PatchError(PatchErrorCode::TypeMismatch, std::string(to_string(position)) + " advice " + std::string(owner) +
                                                       "." + std::string(method) + " must be static " +
                                                       expected.descriptor());
}

std::size_t PatchEngine::apply_aspect(std::string_view key, std::string_view owner, std::string_view method,
                                      AdvicePosition pos) {
    std::unique_lock lock(registry_mutex_);
    auto entries = entries_for_any_kind(std::string(key));
    if (entries.empty()) throw PatchError(PatchErrorCode::UnknownKey, "no call sites under '" + std::string(key) + "'");
    MethodHandle advice = advice_handle(owner, method, pos);
    if (pos == AdvicePosition::After) {
        for (const KeyState* e : entries)
            for (const auto& s : e->sites)
                if (s->type().ret.is_void())
                    throw PatchError(PatchErrorCode::VoidReturn, "call site " + s->key() + " returns no value");
    }
    AdviceRecord record{pos, advice, std::string(owner), std::string(method)};
    std::size_t n = 0;
    for (KeyState* e : entries) {
        e->advices.push_back(record);
        for (const auto& s : e->sites) s->push_advice(record);
        n += e->sites.size();
    }
    advices_applied_.fetch_add(1);
    return n;
}

std::size_t PatchEngine::apply_before_aspect(std::string_view key, std::string_view owner, std::string_view method) {
    return apply_aspect(key, owner, method, AdvicePosition::Before);
}

std::size_t PatchEngine::apply_after_aspect(std::string_view key, std::string_view owner, std::string_view method) {
    return apply_aspect(key, owner, method, AdvicePosition::After);
}

std::size_t PatchEngine::remove_aspects(std::string_view key) {
    std::unique_lock lock(registry_mutex_);
    auto entries = entries_for_any_kind(std::string(key));
    if (entries.empty()) throw PatchError(PatchErrorCode::UnknownKey, "no call sites under '" + std::string(key) + "'");
    std::size_t n = 0;
    for (KeyState* e : entries) {
        e->advices.clear();
        for (const auto& s : e->sites) s->install(s->base_target(), {});
        n += e->sites.size();
    }
    return n;
}

std::vector<SiteSummary> PatchEngine::list_call_sites() const {
    std::shared_lock lock(registry_mutex_);
    std::vector<SiteSummary> out;
    out.reserve(registry_.size());
    for (const auto& [k, v] : registry_) {
        SiteSummary s;
        s.kind = k.first;
        s.key = k.second;
        s.site_count = v.sites.size();
        for (const auto& site : v.sites) {
            s.invocation_count += site->invocation_count();
            std::size_t before = 0;
            std::size_t after = 0;
            for (const auto& a : site->advices()) (a.position == AdvicePosition::Before ? before : after) += 1;
            s.before_advices = std::max(s.before_advices, before);
            s.after_advices = std::max(s.after_advices, after);
        }
        out.push_back(std::move(s));
    }
    return out;
}

Metrics PatchEngine::metrics() const {
    Metrics m;
    {
        std::shared_lock lock(registry_mutex_);
        for (const auto& [k, v] : registry_) {
            m.call_sites += v.sites.size();
            for (const auto& site : v.sites) m.total_invocations += site->invocation_count();
        }
    }
    m.bootstraps = bootstraps_.load();
    m.retargets = retargets_.load();
    m.advices_applied = advices_applied_.load();
    return m;
}

}  // namespace fluxvm

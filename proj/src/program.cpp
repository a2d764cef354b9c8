#include "fluxvm/program.hpp"

#include <deque>
#include <functional>
#include <unordered_set>

namespace fluxvm {

bool same_signature(const FunctionDef& a, const FunctionDef& b) noexcept {
    if (a.name != b.name || a.mtype.ret != b.mtype.ret) return false;
    if (a.mtype.params.size() != b.mtype.params.size() || a.mtype.params.empty()) return false;
    return std::equal(a.mtype.params.begin() + 1, a.mtype.params.end(), b.mtype.params.begin() + 1);
}

namespace {

bool matches_ref_signature(const FunctionDef& f, const MethodRef& ref) {
    if (f.name != ref.name || f.mtype.ret != ref.mtype.ret) return false;
    if (f.mtype.params.size() != ref.mtype.params.size() || f.mtype.params.empty()) return false;
    return std::equal(f.mtype.params.begin() + 1, f.mtype.params.end(), ref.mtype.params.begin() + 1);
}

}  // namespace

Program::Program(std::shared_ptr<const Module> module) : module_(std::move(module)) {
    for (const auto& c : module_->classes) {
        if (ids_.count(c.name)) continue;
        ids_.emplace(c.name, static_cast<std::uint32_t>(classes_.size()));
        classes_.push_back(&c);
    }
    for (const auto& c : system_library().classes) {
        if (ids_.count(c.name)) continue;
        ids_.emplace(c.name, static_cast<std::uint32_t>(classes_.size()));
        classes_.push_back(&c);
    }

    // Instance layouts: superclass fields first. Cycles are cut; the verifier reports them.
    layouts_.resize(classes_.size());
    std::vector<int> state(classes_.size(), 0);  // 0 = todo, 1 = in progress, 2 = done
    std::function<void(std::uint32_t)> build = [&](std::uint32_t id) {
        if (state[id] != 0) return;
        state[id] = 1;
        const ClassDef& c = *classes_[id];
        std::vector<const FieldDef*> layout;
        if (c.super) {
            if (auto sid = class_id(*c.super); sid && state[*sid] != 1) {
                build(*sid);
                layout = layouts_[*sid];
            }
        }
        for (const auto& f : c.fields)
            if (!f.is_static) layout.push_back(&f);
        layouts_[id] = std::move(layout);
        state[id] = 2;
    };
    for (std::uint32_t id = 0; id < classes_.size(); ++id) build(id);

    for (const ClassDef* c : classes_) {
        for (const auto& f : c->fields) {
            if (!f.is_static) continue;
            std::string key = c->name + "." + f.name;
            static_ids_.emplace(key, static_cast<std::uint32_t>(statics_.size()));
            statics_.emplace_back(std::move(key), &f);
        }
    }
}

std::optional<std::uint32_t> Program::class_id(std::string_view name) const {
    auto it = ids_.find(std::string(name));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

const ClassDef* Program::find_class(std::string_view name) const {
    auto id = class_id(name);
    return id ? classes_[*id] : nullptr;
}

bool Program::is_subclass(std::string_view sub, std::string_view super) const {
    if (sub == super) return true;
    std::deque<const ClassDef*> work;
    std::unordered_set<const ClassDef*> seen;
    if (const ClassDef* c = find_class(sub)) work.push_back(c);
    while (!work.empty()) {
        const ClassDef* c = work.front();
        work.pop_front();
        if (!seen.insert(c).second) continue;
        if (c->name == super) return true;
        if (c->super)
            if (const ClassDef* s = find_class(*c->super)) work.push_back(s);
        for (const auto& i : c->interfaces)
            if (const ClassDef* s = find_class(i)) work.push_back(s);
    }
    return false;
}

bool Program::is_assignable(const TypeTag& from, const TypeTag& to) const {
    if (from == to) return true;
    if (from.is_void() || to.is_void()) return false;
    if (to.kind == TypeKind::Obj) return true;
    if (from.kind == TypeKind::Class && to.kind == TypeKind::Class) return is_subclass(from.class_name, to.class_name);
    return false;
}

const FunctionDef* Program::find_method(std::string_view owner, std::string_view name, const MethodType& mtype) const {
    std::unordered_set<const ClassDef*> seen;
    for (const ClassDef* c = find_class(owner); c && seen.insert(c).second;
         c = c->super ? find_class(*c->super) : nullptr) {
        if (const FunctionDef* f = c->find_method(name, mtype)) return f;
    }
    return nullptr;
}

const FunctionDef* Program::resolve(InvocationKind kind, const MethodRef& ref) const {
    if (kind == InvocationKind::Static) {
        std::unordered_set<const ClassDef*> seen;
        for (const ClassDef* c = find_class(ref.owner); c && seen.insert(c).second;
             c = c->super ? find_class(*c->super) : nullptr) {
            for (const auto& f : c->methods)
                if (f.is_static() && f.name == ref.name && f.mtype == ref.mtype) return &f;
        }
        return nullptr;
    }
    if (ref.mtype.params.empty()) return nullptr;

    // Superclass chain first, then interfaces breadth-first.
    std::deque<const ClassDef*> work;
    std::unordered_set<const ClassDef*> seen;
    std::vector<const ClassDef*> interfaces;
    for (const ClassDef* c = find_class(ref.owner); c && seen.insert(c).second;
         c = c->super ? find_class(*c->super) : nullptr) {
        for (const auto& f : c->methods)
            if (!f.is_static() && matches_ref_signature(f, ref)) return &f;
        for (const auto& i : c->interfaces)
            if (const ClassDef* ic = find_class(i)) interfaces.push_back(ic);
    }
    if (kind == InvocationKind::Special) return nullptr;
    work.assign(interfaces.begin(), interfaces.end());
    while (!work.empty()) {
        const ClassDef* c = work.front();
        work.pop_front();
        if (!seen.insert(c).second) continue;
        for (const auto& f : c->methods)
            if (!f.is_static() && matches_ref_signature(f, ref)) return &f;
        if (c->super)
            if (const ClassDef* s = find_class(*c->super)) work.push_back(s);
        for (const auto& i : c->interfaces)
            if (const ClassDef* s = find_class(i)) work.push_back(s);
    }
    return nullptr;
}

const FunctionDef* Program::select_override(const FunctionDef& declared, std::uint32_t receiver_class) const {
    if (declared.kind == InvocationKind::Special || declared.is_static()) return &declared;
    std::unordered_set<const ClassDef*> seen;
    for (const ClassDef* c = &class_at(receiver_class); c && seen.insert(c).second;
         c = c->super ? find_class(*c->super) : nullptr) {
        for (const auto& f : c->methods) {
            if (f.is_static() || f.kind == InvocationKind::Special || f.is_abstract()) continue;
            if (same_signature(f, declared)) return &f;
        }
    }
    return declared.is_abstract() ? nullptr : &declared;
}

std::optional<std::uint32_t> Program::field_slot(std::string_view cls, std::string_view field) const {
    auto id = class_id(cls);
    if (!id) return std::nullopt;
    const auto& layout = layouts_[*id];
    // Search from the end so a redeclared field shadows the inherited one.
    for (std::size_t i = layout.size(); i-- > 0;)
        if (layout[i]->name == field) return static_cast<std::uint32_t>(i);
    return std::nullopt;
}

std::optional<std::uint32_t> Program::static_slot(std::string_view cls, std::string_view field) const {
    std::unordered_set<const ClassDef*> seen;
    for (const ClassDef* c = find_class(cls); c && seen.insert(c).second;
         c = c->super ? find_class(*c->super) : nullptr) {
        auto it = static_ids_.find(c->name + "." + std::string(field));
        if (it != static_ids_.end()) return it->second;
    }
    return std::nullopt;
}

std::vector<const FunctionDef*> Program::all_functions() const {
    std::vector<const FunctionDef*> out;
    for (const ClassDef* c : classes_)
        for (const auto& f : c->methods) out.push_back(&f);
    return out;
}

}  // namespace fluxvm

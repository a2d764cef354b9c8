#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fluxvm/module.hpp"

namespace fluxvm {

/// Built-in classes every program links against: `Str`, `Arrays`, `Sys`, `PrintStream`, `Reflect`.
const Module& system_library();

/// A module linked with the system library: class ids, field layouts, hierarchy queries and
/// method resolution. Immutable; share freely across threads.
class Program {
public:
    explicit Program(std::shared_ptr<const Module> module);

    const Module& module() const noexcept { return *module_; }
    const std::shared_ptr<const Module>& module_ptr() const noexcept { return module_; }

    std::optional<std::uint32_t> class_id(std::string_view name) const;
    const ClassDef& class_at(std::uint32_t id) const { return *classes_.at(id); }
    const ClassDef* find_class(std::string_view name) const;
    std::size_t class_count() const noexcept { return classes_.size(); }

    /// Reflexive; follows superclasses and (transitively) implemented interfaces.
    bool is_subclass(std::string_view sub, std::string_view super) const;

    /// Static widening: identity, anything non-void to Obj, Class to superclass.
    bool is_assignable(const TypeTag& from, const TypeTag& to) const;

    /// A widening or a narrowing exists between the two types.
    bool is_convertible(const TypeTag& a, const TypeTag& b) const {
        return is_assignable(a, b) || is_assignable(b, a);
    }

    /// Exact (name, mtype) lookup along the superclass chain starting at `owner`.
    const FunctionDef* find_method(std::string_view owner, std::string_view name, const MethodType& mtype) const;

    /// Resolves a symbolic reference for the given invocation kind. Non-static lookups
    /// compare the signature without the receiver; virtual and interface lookups also
    /// search implemented interfaces. Returns nullptr if nothing matches.
    const FunctionDef* resolve(InvocationKind kind, const MethodRef& ref) const;

    /// Most-derived non-abstract override of `declared` for a receiver of class `receiver_class`.
    const FunctionDef* select_override(const FunctionDef& declared, std::uint32_t receiver_class) const;

    /// Instance field slot (inherited fields first) and the class that declares it.
    std::optional<std::uint32_t> field_slot(std::string_view cls, std::string_view field) const;
    std::size_t instance_field_count(std::uint32_t class_id) const { return layouts_.at(class_id).size(); }
    const std::vector<const FieldDef*>& instance_fields(std::uint32_t class_id) const { return layouts_.at(class_id); }

    std::optional<std::uint32_t> static_slot(std::string_view cls, std::string_view field) const;
    std::size_t static_count() const noexcept { return statics_.size(); }
    const FieldDef& static_field(std::uint32_t slot) const { return *statics_.at(slot).second; }

    /// Every FunctionDef reachable from this program (module and system library).
    std::vector<const FunctionDef*> all_functions() const;

private:
    std::shared_ptr<const Module> module_;
    std::vector<const ClassDef*> classes_;
    std::unordered_map<std::string, std::uint32_t> ids_;
    std::vector<std::vector<const FieldDef*>> layouts_;
    std::vector<std::pair<std::string, const FieldDef*>> statics_;  // "Class.field" -> def
    std::unordered_map<std::string, std::uint32_t> static_ids_;
};

/// True when both methods have the same name and the same signature ignoring the receiver.
bool same_signature(const FunctionDef& a, const FunctionDef& b) noexcept;

}  // namespace fluxvm

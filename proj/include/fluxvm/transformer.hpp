#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

#include "fluxvm/module.hpp"

namespace fluxvm {

/// Symbolic call-site name derived from an invocation target: `Owner.name:(P1,P2)R`, with
/// class types spelled by bare name and `V` spelled `void`. Non-static kinds carry the
/// receiver as the first parameter.
struct CallSiteKey {
    InvocationKind kind = InvocationKind::Static;
    std::string key;

    friend bool operator==(const CallSiteKey&, const CallSiteKey&) = default;
};

CallSiteKey call_site_key(InvocationKind kind, std::string_view owner, std::string_view name, const MethodType& mtype);

std::string encode_key(const MethodRef& ref);

/// Accepts the canonical key spelling and the assembly descriptor spelling.
MethodRef parse_call_site_key(std::string_view key);

/// `encode_key(parse_call_site_key(key))`.
std::string normalize_key(std::string_view key);

struct TransformReport {
    std::size_t classes_transformed = 0;
    std::size_t methods_transformed = 0;
    std::array<std::size_t, 4> sites_rewritten{};  // indexed by InvocationKind
    double elapsed_ms = 0.0;

    std::size_t sites(InvocationKind kind) const noexcept { return sites_rewritten[static_cast<std::size_t>(kind)]; }
    std::size_t total_sites() const noexcept;

    /// `{"classesTransformed":..,"methodsTransformed":..,"sitesRewritten":{"static":..},"elapsedMs":..}`
    std::string to_json() const;
};

struct TransformResult {
    Module module;
    TransformReport report;
};

/// Rewrites every invoke_static/virtual/special/interface into an invoke_dynamic carrying the
/// call-site key, the original target type and the original kind as bootstrap tag. One
/// instruction in, one out; branch targets are untouched. Idempotent.
TransformResult transform_module(const Module& m);

/// Assembles, verifies, transforms and re-verifies a `.fas` file, as a load-time agent would.
Module transform_at_load(const std::string& path, TransformReport* report = nullptr);

}  // namespace fluxvm

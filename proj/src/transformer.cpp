#include "fluxvm/transformer.hpp"

#include <chrono>

#include <json.hpp>

#include "fluxvm/assembler.hpp"
#include "fluxvm/verifier.hpp"

namespace fluxvm {

CallSiteKey call_site_key(InvocationKind kind, std::string_view owner, std::string_view name, const MethodType& mtype) {
    return CallSiteKey{kind, encode_key(MethodRef{std::string(owner), std::string(name), mtype})};
}

std::string encode_key(const MethodRef& ref) {
    std::string out = ref.owner + "." + ref.name + ":(";
    for (std::size_t i = 0; i < ref.mtype.params.size(); ++i) {
        if (i) out += ",";
        out += key_spelling(ref.mtype.params[i]);
    }
    out += ")";
    out += key_spelling(ref.mtype.ret);
    return out;
}

MethodRef parse_call_site_key(std::string_view key) { return parse_method_ref(key); }

std::string normalize_key(std::string_view key) { return encode_key(parse_call_site_key(key)); }

std::size_t TransformReport::total_sites() const noexcept {
    std::size_t n = 0;
    for (auto s : sites_rewritten) n += s;
    return n;
}

std::string TransformReport::to_json() const {
    nlohmann::json sites = nlohmann::json::object();
    for (auto kind : {InvocationKind::Static, InvocationKind::Virtual, InvocationKind::Special, InvocationKind::Interface})
        sites[std::string(to_string(kind))] = this->sites(kind);
    nlohmann::json j{{"classesTransformed", classes_transformed},
                     {"methodsTransformed", methods_transformed},
                     {"sitesRewritten", sites},
                     {"elapsedMs", elapsed_ms}};
    return j.dump();
}

TransformResult transform_module(const Module& m) {
    auto start = std::chrono::steady_clock::now();
    Module out = m;
    TransformReport report;
    for (auto& cls : out.classes) {
        bool class_touched = false;
        for (auto& fn : cls.methods) {
            bool method_touched = false;
            for (auto& ins : fn.code) {
                if (!is_classic_invoke(ins.op) || !m.constants.contains(ins.index)) continue;
                const Constant& c = m.constants.at(static_cast<std::size_t>(ins.index));
                if (c.tag != Constant::Tag::Method) continue;
                MethodRef ref = parse_method_ref(c.text);
                InvocationKind kind = invoke_kind(ins.op);
                Instruction indy;
                indy.op = Opcode::InvokeDynamic;
                indy.owner = call_site_key(kind, ref.owner, ref.name, ref.mtype).key;
                indy.mtype = ref.mtype;
                indy.tag = kind;
                ins = std::move(indy);
                ++report.sites_rewritten[static_cast<std::size_t>(kind)];
                method_touched = true;
            }
            if (method_touched) ++report.methods_transformed;
            class_touched |= method_touched;
        }
        if (class_touched) ++report.classes_transformed;
    }
    out = canonicalize_pool(out);
    report.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return TransformResult{std::move(out), report};
}

Module transform_at_load(const std::string& path, TransformReport* report) {
    Module m = assemble_file(path);
    require_verified(m);
    auto result = transform_module(m);
    require_verified(result.module);
    if (report) *report = result.report;
    return std::move(result.module);
}

}  // namespace fluxvm

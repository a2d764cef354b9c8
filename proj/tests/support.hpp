#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "fluxvm/assembler.hpp"
#include "fluxvm/corpus.hpp"
#include "fluxvm/verifier.hpp"
#include "fluxvm/vm.hpp"

namespace fluxvm {

/// Readable gtest output for values.
inline void PrintTo(const Value& v, std::ostream* os) {
    switch (v.kind()) {
        case ValueKind::Null: *os << "null"; break;
        case ValueKind::Int: *os << v.as_int(); break;
        case ValueKind::Bool: *os << (v.as_bool() ? "true" : "false"); break;
        case ValueKind::Str: *os << '"' << v.as_str() << '"'; break;
        case ValueKind::Ref: *os << "ref#" << v.as_ref().id; break;
        case ValueKind::Arr: {
            *os << "[";
            for (std::size_t i = 0; i < v.as_arr().size(); ++i) {
                if (i) *os << ", ";
                PrintTo(v.as_arr()[i], os);
            }
            *os << "]";
            break;
        }
    }
}

}  // namespace fluxvm

namespace fluxvm::testing {

inline std::string corpus_path(const std::string& file) { return corpus_dir() + "/" + file; }

inline Module corpus_module(const std::string& file) { return assemble_file(corpus_path(file)); }

inline std::shared_ptr<const Program> link(Module m) {
    return std::make_shared<const Program>(std::make_shared<const Module>(std::move(m)));
}

inline Value I(std::int64_t v) { return Value::integer(v); }
inline Value S(std::string s) { return Value::string(std::move(s)); }

/// Small arithmetic library for handle tests.
inline const char* kCalcSource = R"(
class Calc
  method static add (II)I
    load 0
    load 1
    add
    ret
  method static negate (I)I
    push_const 0
    load 0
    sub
    ret
  method static twice (I)I
    load 0
    push_const 2
    mul
    ret
  method static id (I)I
    load 0
    ret
  method static idObj (O)O
    load 0
    ret
  method static idArr (A)A
    load 0
    ret
  method static idStr (S)S
    load 0
    ret
  method static label (I)S
    push_const "n"
    load 0
    add
    ret
  method static add3 (III)I
    load 0
    load 1
    add
    load 2
    add
    ret
  method static concat (SIS)S
    load 0
    load 1
    add
    load 2
    add
    ret
  method static nothing (I)V
    ret
  ; sum of an array of ints
  method static sum_arr (A)I locals=3
    push_const 0
    store 1
    push_const 0
    store 2
  loop:
    load 2
    load 0
    arr_len
    lt
    jump_if_false done
    load 1
    load 0
    load 2
    arr_get
    add
    store 1
    load 2
    push_const 1
    add
    store 2
    jump loop
  done:
    load 1
    ret
  ; puts a tag on the packed argument list and on returned strings
  method static tagA (A)A
    load 0
    push_const "a"
    invoke_static Arrays.push:(AO)A
    ret
  method static tagB (A)A
    load 0
    push_const "b"
    invoke_static Arrays.push:(AO)A
    ret
  method static retA (O)O
    load 0
    push_const "a"
    add
    ret
  method static retB (O)O
    load 0
    push_const "b"
    add
    ret
  method static trace (A)S
    push_const ""
    load 0
    add
    ret
)";

}  // namespace fluxvm::testing

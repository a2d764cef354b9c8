#include "fluxvm/assembler.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace fluxvm {

AssembleError::AssembleError(std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column),
      detail_(message) {}

namespace {

struct Token {
    std::string text;
    std::size_t column = 0;  // 1-based
    bool quoted = false;
};

std::vector<Token> tokenize(std::string_view line, std::size_t line_no) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        char c = line[i];
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            continue;
        }
        if (c == ';') break;
        Token tok;
        tok.column = i + 1;
        if (c == '"') {
            tok.quoted = true;
            ++i;
            bool closed = false;
            while (i < line.size()) {
                char d = line[i++];
                if (d == '"') {
                    closed = true;
                    break;
                }
                if (d == '\\') {
                    if (i >= line.size()) break;
                    char e = line[i++];
                    switch (e) {
                        case 'n': tok.text += '\n'; break;
                        case 't': tok.text += '\t'; break;
                        case '"': tok.text += '"'; break;
                        case '\\': tok.text += '\\'; break;
                        default: throw AssembleError(line_no, i - 1, std::string("unknown escape \\") + e);
                    }
                } else {
                    tok.text += d;
                }
            }
            if (!closed) throw AssembleError(line_no, tok.column, "unterminated string literal");
        } else {
            while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') tok.text += line[i++];
        }
        out.push_back(std::move(tok));
    }
    return out;
}

bool parse_int(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

struct PendingJump {
    std::size_t instruction;
    std::string label;
    std::size_t line;
    std::size_t column;
};

class Assembler {
public:
    Module run(std::string_view text) {
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            auto nl = text.find('\n', pos);
            auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
            ++line_no;
            handle_line(tokenize(line, line_no), line_no);
            if (nl == std::string_view::npos) break;
            pos = nl + 1;
        }
        finish_method();
        return std::move(module_);
    }

private:
    [[noreturn]] void fail(std::size_t line, const Token& tok, const std::string& msg) {
        throw AssembleError(line, tok.column, msg);
    }

    void expect_count(const std::vector<Token>& toks, std::size_t n, std::size_t line) {
        if (toks.size() < n) {
            const Token& last = toks.back();
            throw AssembleError(line, last.column + last.text.size(), "missing operand");
        }
        if (toks.size() > n) fail(line, toks[n], "unexpected token '" + toks[n].text + "'");
    }

    ClassDef& current_class(const Token& tok, std::size_t line) {
        if (module_.classes.empty()) fail(line, tok, "declaration outside of a class");
        return module_.classes.back();
    }

    void handle_line(const std::vector<Token>& toks, std::size_t line) {
        if (toks.empty()) return;
        const Token& head = toks[0];
        if (head.quoted) fail(line, head, "unexpected string literal");
        if (head.text == "entry") return entry_directive(toks, line);
        if (head.text == "class") return class_directive(toks, line);
        if (head.text == "field") return field_directive(toks, line);
        if (head.text == "method") return method_directive(toks, line);
        if (head.text.size() > 1 && head.text.back() == ':' && toks.size() == 1) return label(head, line);
        instruction(toks, line);
    }

    void entry_directive(const std::vector<Token>& toks, std::size_t line) {
        expect_count(toks, 2, line);
        const auto& t = toks[1].text;
        auto dot = t.rfind('.');
        if (dot == std::string::npos || dot == 0 || dot + 1 == t.size())
            fail(line, toks[1], "entry must be written Class.method");
        if (module_.entry) fail(line, toks[0], "duplicate entry directive");
        module_.entry = EntryPoint{t.substr(0, dot), t.substr(dot + 1)};
    }

    void check_class_name(const Token& tok, std::size_t line) {
        if (!is_identifier(tok.text) || is_reserved_type_name(tok.text))
            fail(line, tok, "invalid class name '" + tok.text + "'");
    }

    void class_directive(const std::vector<Token>& toks, std::size_t line) {
        finish_method();
        if (toks.size() < 2) expect_count(toks, 2, line);
        check_class_name(toks[1], line);
        if (module_.find_class(toks[1].text)) fail(line, toks[1], "duplicate class '" + toks[1].text + "'");
        ClassDef cls;
        cls.name = toks[1].text;
        std::size_t i = 2;
        while (i < toks.size()) {
            const auto& kw = toks[i];
            if (i + 1 >= toks.size()) fail(line, kw, "missing name after '" + kw.text + "'");
            if (kw.text == "extends" && !cls.super) {
                check_class_name(toks[i + 1], line);
                cls.super = toks[i + 1].text;
            } else if (kw.text == "implements" && cls.interfaces.empty()) {
                std::string_view list = toks[i + 1].text;
                while (true) {
                    auto comma = list.find(',');
                    std::string name(list.substr(0, comma));
                    if (!is_identifier(name)) fail(line, toks[i + 1], "invalid interface name '" + name + "'");
                    cls.interfaces.push_back(name);
                    if (comma == std::string_view::npos) break;
                    list.remove_prefix(comma + 1);
                }
            } else {
                fail(line, kw, "unexpected token '" + kw.text + "'");
            }
            i += 2;
        }
        module_.classes.push_back(std::move(cls));
    }

    void field_directive(const std::vector<Token>& toks, std::size_t line) {
        finish_method();
        ClassDef& cls = current_class(toks[0], line);
        std::size_t i = 1;
        FieldDef f;
        if (toks.size() > 1 && toks[1].text == "static") {
            f.is_static = true;
            ++i;
        }
        expect_count(toks, i + 2, line);
        if (!is_identifier(toks[i].text)) fail(line, toks[i], "invalid field name '" + toks[i].text + "'");
        f.name = toks[i].text;
        try {
            f.type = parse_type(toks[i + 1].text);
        } catch (const TypeSyntaxError& e) {
            fail(line, toks[i + 1], e.what());
        }
        if (f.type.is_void()) fail(line, toks[i + 1], "field cannot have type V");
        if (cls.find_field(f.name)) fail(line, toks[i], "duplicate field '" + f.name + "'");
        cls.fields.push_back(std::move(f));
    }

    void method_directive(const std::vector<Token>& toks, std::size_t line) {
        finish_method();
        ClassDef& cls = current_class(toks[0], line);
        if (toks.size() < 4) expect_count(toks, 4, line);
        FunctionDef fn;
        fn.owner = cls.name;
        if (!parse_invocation_kind(toks[1].text, fn.kind))
            fail(line, toks[1], "unknown invocation kind '" + toks[1].text + "'");
        if (!is_identifier(toks[2].text)) fail(line, toks[2], "invalid method name '" + toks[2].text + "'");
        fn.name = toks[2].text;
        try {
            fn.mtype = parse_method_type(toks[3].text);
        } catch (const TypeSyntaxError& e) {
            fail(line, toks[3], e.what());
        }
        fn.locals = static_cast<std::uint32_t>(fn.mtype.params.size());
        if (toks.size() > 4) {
            expect_count(toks, 5, line);
            const auto& opt = toks[4].text;
            std::int64_t n = 0;
            if (opt.rfind("locals=", 0) != 0 || !parse_int(std::string_view(opt).substr(7), n) || n < 0)
                fail(line, toks[4], "expected locals=<n>");
            fn.locals = static_cast<std::uint32_t>(n);
        }
        for (const auto& m : cls.methods)
            if (m.name == fn.name && m.mtype == fn.mtype && m.kind == fn.kind)
                fail(line, toks[2], "duplicate method " + cls.name + "." + fn.name + ":" + fn.mtype.descriptor());
        cls.methods.push_back(std::move(fn));
        in_method_ = true;
        labels_.clear();
        pending_.clear();
    }

    FunctionDef& current_method(const Token& tok, std::size_t line) {
        if (!in_method_) fail(line, tok, "instruction outside of a method");
        return module_.classes.back().methods.back();
    }

    void label(const Token& tok, std::size_t line) {
        FunctionDef& fn = current_method(tok, line);
        std::string name = tok.text.substr(0, tok.text.size() - 1);
        if (!is_identifier(name)) fail(line, tok, "invalid label '" + name + "'");
        if (!labels_.emplace(name, fn.code.size()).second) fail(line, tok, "duplicate label '" + name + "'");
    }

    void instruction(const std::vector<Token>& toks, std::size_t line) {
        const Token& head = toks[0];
        auto op = opcode_from_mnemonic(head.text);
        if (!op) fail(line, head, "unknown opcode '" + head.text + "'");
        FunctionDef& fn = current_method(head, line);
        Instruction ins;
        ins.op = *op;
        switch (*op) {
            case Opcode::PushConst: {
                expect_count(toks, 2, line);
                if (toks[1].quoted) {
                    ins.index = module_.constants.intern_str(toks[1].text);
                } else {
                    std::int64_t v = 0;
                    if (!parse_int(toks[1].text, v)) fail(line, toks[1], "expected integer or string literal");
                    ins.index = module_.constants.intern_int(v);
                }
                break;
            }
            case Opcode::Load:
            case Opcode::Store:
            case Opcode::MakeArr: {
                expect_count(toks, 2, line);
                if (!parse_int(toks[1].text, ins.index) || ins.index < 0)
                    fail(line, toks[1], "expected a non-negative integer");
                break;
            }
            case Opcode::Jump:
            case Opcode::JumpIfFalse: {
                expect_count(toks, 2, line);
                if (!parse_int(toks[1].text, ins.index)) {
                    if (!is_identifier(toks[1].text)) fail(line, toks[1], "expected a label");
                    pending_.push_back({fn.code.size(), toks[1].text, line, toks[1].column});
                }
                break;
            }
            case Opcode::New: {
                expect_count(toks, 2, line);
                if (!is_identifier(toks[1].text)) fail(line, toks[1], "expected a class name");
                ins.owner = toks[1].text;
                break;
            }
            case Opcode::GetField:
            case Opcode::PutField:
            case Opcode::GetStatic:
            case Opcode::PutStatic: {
                expect_count(toks, 3, line);
                if (!is_identifier(toks[1].text)) fail(line, toks[1], "expected a class name");
                if (!is_identifier(toks[2].text)) fail(line, toks[2], "expected a field name");
                ins.owner = toks[1].text;
                ins.member = toks[2].text;
                break;
            }
            case Opcode::InvokeStatic:
            case Opcode::InvokeVirtual:
            case Opcode::InvokeSpecial:
            case Opcode::InvokeInterface: {
                expect_count(toks, 2, line);
                try {
                    ins.index = module_.constants.intern_method(parse_method_ref(toks[1].text));
                } catch (const TypeSyntaxError& e) {
                    fail(line, toks[1], e.what());
                }
                break;
            }
            case Opcode::InvokeDynamic: {
                expect_count(toks, 4, line);
                if (toks[1].quoted || toks[1].text.empty()) fail(line, toks[1], "expected a symbolic name");
                ins.owner = toks[1].text;
                try {
                    ins.mtype = parse_method_type(toks[2].text);
                } catch (const TypeSyntaxError& e) {
                    fail(line, toks[2], e.what());
                }
                if (!parse_invocation_kind(toks[3].text, ins.tag))
                    fail(line, toks[3], "unknown bootstrap tag '" + toks[3].text + "'");
                break;
            }
            default: expect_count(toks, 1, line); break;
        }
        fn.code.push_back(std::move(ins));
    }

    void finish_method() {
        if (!in_method_) return;
        FunctionDef& fn = module_.classes.back().methods.back();
        for (const auto& p : pending_) {
            auto it = labels_.find(p.label);
            if (it == labels_.end()) throw AssembleError(p.line, p.column, "undefined label '" + p.label + "'");
            fn.code[p.instruction].index = static_cast<std::int64_t>(it->second);
        }
        pending_.clear();
        labels_.clear();
        in_method_ = false;
    }

    Module module_;
    bool in_method_ = false;
    std::map<std::string, std::size_t> labels_;
    std::vector<PendingJump> pending_;
};

}  // namespace

Module assemble(std::string_view text) { return Assembler{}.run(text); }

Module assemble_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return assemble(ss.str());
}

std::string quote_literal(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            default: out += c;
        }
    }
    out += '"';
    return out;
}

std::string disassemble(const Module& m) {
    std::ostringstream out;
    if (m.entry) out << "entry " << m.entry->class_name << "." << m.entry->method << "\n";
    for (const auto& cls : m.classes) {
        out << "\nclass " << cls.name;
        if (cls.super) out << " extends " << *cls.super;
        if (!cls.interfaces.empty()) {
            out << " implements ";
            for (std::size_t i = 0; i < cls.interfaces.size(); ++i) out << (i ? "," : "") << cls.interfaces[i];
        }
        out << "\n";
        for (const auto& f : cls.fields)
            out << "  field " << (f.is_static ? "static " : "") << f.name << " " << descriptor(f.type) << "\n";
        for (const auto& fn : cls.methods) {
            out << "  method " << to_string(fn.kind) << " " << fn.name << " " << fn.mtype.descriptor()
                << " locals=" << fn.locals << "\n";
            std::set<std::int64_t> targets;
            auto in_range = [&](std::int64_t t) { return t >= 0 && static_cast<std::size_t>(t) < fn.code.size(); };
            for (const auto& ins : fn.code)
                if ((ins.op == Opcode::Jump || ins.op == Opcode::JumpIfFalse) && in_range(ins.index))
                    targets.insert(ins.index);
            for (std::size_t pc = 0; pc < fn.code.size(); ++pc) {
                if (targets.count(static_cast<std::int64_t>(pc))) out << "  L" << pc << ":\n";
                const auto& ins = fn.code[pc];
                out << "    " << mnemonic(ins.op);
                switch (ins.op) {
                    case Opcode::PushConst:
                        if (m.constants.contains(ins.index)) {
                            const auto& c = m.constants.at(static_cast<std::size_t>(ins.index));
                            if (c.tag == Constant::Tag::Int) out << " " << c.int_value;
                            else out << " " << quote_literal(c.text);
                        } else {
                            out << " #" << ins.index;
                        }
                        break;
                    case Opcode::Load:
                    case Opcode::Store:
                    case Opcode::MakeArr: out << " " << ins.index; break;
                    case Opcode::Jump:
                    case Opcode::JumpIfFalse:
                        if (in_range(ins.index)) out << " L" << ins.index;
                        else out << " " << ins.index;
                        break;
                    case Opcode::New: out << " " << ins.owner; break;
                    case Opcode::GetField:
                    case Opcode::PutField:
                    case Opcode::GetStatic:
                    case Opcode::PutStatic: out << " " << ins.owner << " " << ins.member; break;
                    case Opcode::InvokeStatic:
                    case Opcode::InvokeVirtual:
                    case Opcode::InvokeSpecial:
                    case Opcode::InvokeInterface:
                        if (m.constants.contains(ins.index))
                            out << " " << m.constants.at(static_cast<std::size_t>(ins.index)).text;
                        else
                            out << " #" << ins.index;
                        break;
                    case Opcode::InvokeDynamic:
                        out << " " << ins.owner << " " << ins.mtype.descriptor() << " " << to_string(ins.tag);
                        break;
                    default: break;
                }
                out << "\n";
            }
        }
    }
    return out.str();
}

}  // namespace fluxvm

#include "bankscan/smali.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <memory>
#include <sstream>
#include <unordered_map>

namespace bankscan::smali {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Strip a trailing '#' comment, honoring string literals.
std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_str) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_str = false;
            }
        } else if (c == '"') {
            in_str = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

// Split on whitespace outside of string literals.
std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    bool in_str = false;
    for (size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (in_str) {
            cur += c;
            if (c == '\\' && i + 1 < s.size()) {
                cur += s[++i];
            } else if (c == '"') {
                in_str = false;
            }
            continue;
        }
        if (c == '"') {
            in_str = true;
            cur += c;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Split an operand list on commas outside braces and string literals.
std::vector<std::string> split_operands(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    bool in_str = false;
    int brace = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (in_str) {
            cur += c;
            if (c == '\\' && i + 1 < s.size()) {
                cur += s[++i];
            } else if (c == '"') {
                in_str = false;
            }
            continue;
        }
        switch (c) {
        case '"':
            in_str = true;
            cur += c;
            break;
        case '{':
            ++brace;
            cur += c;
            break;
        case '}':
            --brace;
            cur += c;
            break;
        case ',':
            if (brace == 0) {
                out.push_back(trim(cur));
                cur.clear();
            } else {
                cur += c;
            }
            break;
        default:
            cur += c;
        }
    }
    std::string last = trim(cur);
    if (!last.empty()) out.push_back(last);
    return out;
}

std::string unescape(const std::string& s, const std::string& file, int line) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c != '\\') {
            out += c;
            continue;
        }
        if (i + 1 >= s.size()) throw SyntaxError(file, line, "dangling escape");
        char e = s[++i];
        switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case '0': out += '\0'; break;
        case '\'':
        case '"':
        case '\\': out += e; break;
        case 'u': {
            if (i + 4 >= s.size())
                throw SyntaxError(file, line, "truncated \\u escape");
            unsigned code = 0;
            for (int k = 0; k < 4; ++k) {
                char h = s[++i];
                code <<= 4;
                if (h >= '0' && h <= '9') code |= h - '0';
                else if (h >= 'a' && h <= 'f') code |= h - 'a' + 10;
                else if (h >= 'A' && h <= 'F') code |= h - 'A' + 10;
                else throw SyntaxError(file, line, "bad \\u escape");
            }
            // UTF-8 encode
            if (code < 0x80) {
                out += static_cast<char>(code);
            } else if (code < 0x800) {
                out += static_cast<char>(0xC0 | (code >> 6));
                out += static_cast<char>(0x80 | (code & 0x3F));
            } else {
                out += static_cast<char>(0xE0 | (code >> 12));
                out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
                out += static_cast<char>(0x80 | (code & 0x3F));
            }
            break;
        }
        default:
            out += e; // keep unknown escapes verbatim
        }
    }
    return out;
}

int64_t parse_literal(std::string tok, const std::string& file, int line) {
    // Trailing type suffixes: t (byte), s (short), L (long), f/d ignored here.
    if (!tok.empty() && (tok.back() == 't' || tok.back() == 's' ||
                         tok.back() == 'L' || tok.back() == 'l'))
        tok.pop_back();
    bool neg = false;
    size_t pos = 0;
    if (pos < tok.size() && (tok[pos] == '-' || tok[pos] == '+')) {
        neg = tok[pos] == '-';
        ++pos;
    }
    int base = 10;
    if (tok.compare(pos, 2, "0x") == 0 || tok.compare(pos, 2, "0X") == 0) {
        base = 16;
        pos += 2;
    }
    uint64_t v = 0;
    if (pos >= tok.size()) throw SyntaxError(file, line, "bad literal: " + tok);
    for (; pos < tok.size(); ++pos) {
        char c = tok[pos];
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (base == 16 && c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (base == 16 && c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else throw SyntaxError(file, line, "bad literal: " + tok);
        v = v * base + static_cast<uint64_t>(d);
    }
    int64_t sv = static_cast<int64_t>(v);
    return neg ? -sv : sv;
}

MethodRef parse_method_ref(const std::string& tok, const std::string& file,
                           int line) {
    size_t arrow = tok.find("->");
    size_t paren = tok.find('(', arrow == std::string::npos ? 0 : arrow);
    if (arrow == std::string::npos || paren == std::string::npos)
        throw SyntaxError(file, line, "bad method reference: " + tok);
    MethodRef ref;
    ref.class_desc = tok.substr(0, arrow);
    ref.name = tok.substr(arrow + 2, paren - arrow - 2);
    ref.proto = tok.substr(paren);
    return ref;
}

FieldRef parse_field_ref(const std::string& tok, const std::string& file,
                         int line) {
    size_t arrow = tok.find("->");
    if (arrow == std::string::npos)
        throw SyntaxError(file, line, "bad field reference: " + tok);
    size_t colon = tok.find(':', arrow);
    if (colon == std::string::npos)
        throw SyntaxError(file, line, "bad field reference: " + tok);
    FieldRef ref;
    ref.class_desc = tok.substr(0, arrow);
    ref.name = tok.substr(arrow + 2, colon - arrow - 2);
    ref.type = tok.substr(colon + 1);
    return ref;
}

// Operand shape of an opcode family.
enum class Shape {
    None,          // nop, return-void
    R,             // one register
    RR,            // two registers
    RRR,           // three registers
    RLit,          // register, literal
    RStr,          // register, string
    RType,         // register, type
    RRType,        // two registers, type (instance-of, new-array)
    RField,        // sget/sput
    RRField,       // iget/iput
    RLabel,        // ifz, fill-array-data, switches
    RRLabel,       // if-test
    Label,         // goto
    RRLit,         // binop/lit
    ArgsMethod,    // invoke
    ArgsType,      // filled-new-array
};

struct OpInfo {
    Op op;
    Shape shape;
};

const std::unordered_map<std::string, OpInfo>& opcode_table() {
    static const std::unordered_map<std::string, OpInfo> table = [] {
        std::unordered_map<std::string, OpInfo> t;
        auto put = [&](const std::string& m, Op op, Shape sh) {
            t.emplace(m, OpInfo{op, sh});
        };
        put("nop", Op::Nop, Shape::None);

        for (const char* m : {"move", "move/from16", "move/16", "move-wide",
                              "move-wide/from16", "move-wide/16", "move-object",
                              "move-object/from16", "move-object/16"})
            put(m, Op::Move, Shape::RR);
        for (const char* m :
             {"move-result", "move-result-wide", "move-result-object"})
            put(m, Op::MoveResult, Shape::R);
        put("move-exception", Op::MoveException, Shape::R);

        put("return-void", Op::ReturnVoid, Shape::None);
        for (const char* m : {"return", "return-wide", "return-object"})
            put(m, Op::Return, Shape::R);

        for (const char* m :
             {"const/4", "const/16", "const", "const/high16", "const-wide/16",
              "const-wide/32", "const-wide", "const-wide/high16"})
            put(m, Op::Const, Shape::RLit);
        put("const-string", Op::ConstString, Shape::RStr);
        put("const-string/jumbo", Op::ConstString, Shape::RStr);
        put("const-class", Op::ConstClass, Shape::RType);

        put("monitor-enter", Op::Monitor, Shape::R);
        put("monitor-exit", Op::Monitor, Shape::R);

        put("check-cast", Op::CheckCast, Shape::RType);
        put("instance-of", Op::InstanceOf, Shape::RRType);
        put("array-length", Op::ArrayLength, Shape::RR);
        put("new-instance", Op::NewInstance, Shape::RType);
        put("new-array", Op::NewArray, Shape::RRType);
        put("filled-new-array", Op::FilledNewArray, Shape::ArgsType);
        put("filled-new-array/range", Op::FilledNewArray, Shape::ArgsType);
        put("fill-array-data", Op::FillArrayData, Shape::RLabel);
        put("throw", Op::Throw, Shape::R);

        for (const char* m : {"goto", "goto/16", "goto/32"})
            put(m, Op::Goto, Shape::Label);
        put("packed-switch", Op::PackedSwitch, Shape::RLabel);
        put("sparse-switch", Op::SparseSwitch, Shape::RLabel);

        for (const char* m : {"cmpl-float", "cmpg-float", "cmpl-double",
                              "cmpg-double", "cmp-long"})
            put(m, Op::Cmp, Shape::RRR);

        for (const char* m :
             {"if-eq", "if-ne", "if-lt", "if-ge", "if-gt", "if-le"})
            put(m, Op::If, Shape::RRLabel);
        for (const char* m :
             {"if-eqz", "if-nez", "if-ltz", "if-gez", "if-gtz", "if-lez"})
            put(m, Op::IfZ, Shape::RLabel);

        const char* aget[] = {"aget",         "aget-wide",  "aget-object",
                              "aget-boolean", "aget-byte",  "aget-char",
                              "aget-short"};
        for (const char* m : aget) put(m, Op::AGet, Shape::RRR);
        const char* aput[] = {"aput",         "aput-wide",  "aput-object",
                              "aput-boolean", "aput-byte",  "aput-char",
                              "aput-short"};
        for (const char* m : aput) put(m, Op::APut, Shape::RRR);

        const char* suffixes[] = {"", "-wide", "-object", "-boolean",
                                  "-byte", "-char", "-short"};
        for (const char* sfx : suffixes) {
            put(std::string("iget") + sfx, Op::IGet, Shape::RRField);
            put(std::string("iput") + sfx, Op::IPut, Shape::RRField);
            put(std::string("sget") + sfx, Op::SGet, Shape::RField);
            put(std::string("sput") + sfx, Op::SPut, Shape::RField);
        }

        for (const char* m : {"invoke-virtual", "invoke-super", "invoke-direct",
                              "invoke-static", "invoke-interface",
                              "invoke-virtual/range", "invoke-super/range",
                              "invoke-direct/range", "invoke-static/range",
                              "invoke-interface/range"})
            put(m, Op::Invoke, Shape::ArgsMethod);

        const char* unops[] = {
            "neg-int",        "not-int",       "neg-long",      "not-long",
            "neg-float",      "neg-double",    "int-to-long",   "int-to-float",
            "int-to-double",  "long-to-int",   "long-to-float", "long-to-double",
            "float-to-int",   "float-to-long", "float-to-double",
            "double-to-int",  "double-to-long","double-to-float",
            "int-to-byte",    "int-to-char",   "int-to-short"};
        for (const char* m : unops) put(m, Op::UnOp, Shape::RR);

        const char* binbases[] = {"add", "sub",  "mul", "div", "rem", "and",
                                  "or",  "xor",  "shl", "shr", "ushr"};
        const char* bintypes[] = {"-int", "-long", "-float", "-double"};
        for (const char* b : binbases) {
            for (const char* ty : bintypes) {
                std::string base = std::string(b) + ty;
                put(base, Op::BinOp, Shape::RRR);
                put(base + "/2addr", Op::BinOp, Shape::RR);
            }
            put(std::string(b) + "-int/lit8", Op::BinOpLit, Shape::RRLit);
            put(std::string(b) + "-int/lit16", Op::BinOpLit, Shape::RRLit);
        }
        put("rsub-int", Op::BinOpLit, Shape::RRLit);
        put("rsub-int/lit8", Op::BinOpLit, Shape::RRLit);
        return t;
    }();
    return table;
}

InvokeKind invoke_kind_of(const std::string& mnemonic) {
    if (mnemonic.find("virtual") != std::string::npos) return InvokeKind::Virtual;
    if (mnemonic.find("super") != std::string::npos) return InvokeKind::Super;
    if (mnemonic.find("direct") != std::string::npos) return InvokeKind::Direct;
    if (mnemonic.find("static") != std::string::npos) return InvokeKind::Static;
    return InvokeKind::Interface;
}

class MethodParser {
public:
    MethodParser(MethodDef& m, const std::string& file) : m_(m), file_(file) {}

    int parse_register(const std::string& tok, int line) const {
        if (tok.size() < 2 || (tok[0] != 'v' && tok[0] != 'p'))
            throw SyntaxError(file_, line, "bad register: " + tok);
        int n = 0;
        auto res = std::from_chars(tok.data() + 1, tok.data() + tok.size(), n);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
            throw SyntaxError(file_, line, "bad register: " + tok);
        if (tok[0] == 'p') n += m_.param_reg_base;
        if (n < 0 || n >= m_.register_count)
            throw SyntaxError(file_, line,
                              "register " + tok + " out of range (" +
                                  std::to_string(m_.register_count) + ")");
        return n;
    }

    std::vector<int> parse_reg_list(const std::string& tok, int line) const {
        std::string inner = trim(tok);
        if (inner.size() < 2 || inner.front() != '{' || inner.back() != '}')
            throw SyntaxError(file_, line, "bad register list: " + tok);
        inner = trim(inner.substr(1, inner.size() - 2));
        std::vector<int> regs;
        if (inner.empty()) return regs;
        size_t dots = inner.find("..");
        if (dots != std::string::npos) {
            int first = parse_register(trim(inner.substr(0, dots)), line);
            int last = parse_register(trim(inner.substr(dots + 2)), line);
            if (last < first)
                throw SyntaxError(file_, line, "bad register range: " + tok);
            for (int r = first; r <= last; ++r) regs.push_back(r);
            return regs;
        }
        std::stringstream ss(inner);
        std::string piece;
        while (std::getline(ss, piece, ',')) {
            piece = trim(piece);
            if (!piece.empty()) regs.push_back(parse_register(piece, line));
        }
        return regs;
    }

    Instruction parse_instruction(const std::string& mnemonic,
                                  const std::string& operand_text, int line) {
        Instruction ins;
        ins.mnemonic = mnemonic;
        ins.loc = {file_, line};
        auto it = opcode_table().find(mnemonic);
        if (it == opcode_table().end()) {
            ins.op = Op::Opaque;
            ins.raw = operand_text;
            return ins;
        }
        ins.op = it->second.op;
        std::vector<std::string> ops = split_operands(operand_text);
        auto need = [&](size_t n) {
            if (ops.size() != n)
                throw SyntaxError(file_, line,
                                  mnemonic + ": expected " + std::to_string(n) +
                                      " operands, got " +
                                      std::to_string(ops.size()));
        };
        switch (it->second.shape) {
        case Shape::None:
            need(0);
            break;
        case Shape::R:
            need(1);
            ins.regs.push_back(parse_register(ops[0], line));
            break;
        case Shape::RR:
            need(2);
            ins.regs.push_back(parse_register(ops[0], line));
            ins.regs.push_back(parse_register(ops[1], line));
            if (ins.op == Op::BinOp) {
                // normalize 2addr to dest, src1, src2
                ins.regs = {ins.regs[0], ins.regs[0], ins.regs[1]};
            }
            break;
        case Shape::RRR:
            need(3);
            for (int k = 0; k < 3; ++k)
                ins.regs.push_back(parse_register(ops[k], line));
            break;
        case Shape::RLit:
            need(2);
            ins.regs.push_back(parse_register(ops[0], line));
            ins.lit = parse_literal(ops[1], file_, line);
            break;
        case Shape::RStr: {
            need(2);
            ins.regs.push_back(parse_register(ops[0], line));
            std::string s = ops[1];
            if (s.size() < 2 || s.front() != '"' || s.back() != '"')
                throw SyntaxError(file_, line, "expected string literal");
            ins.str = unescape(s.substr(1, s.size() - 2), file_, line);
            break;
        }
        case Shape::RType:
            need(2);
            ins.regs.push_back(parse_register(ops[0], line));
            ins.type_desc = ops[1];
            break;
        case Shape::RRType:
            need(3);
            ins.regs.push_back(parse_register(ops[0], line));
            ins.regs.push_back(parse_register(ops[1], line));
            ins.type_desc = ops[2];
            break;
        case Shape::RField:
            need(2);
            ins.regs.push_back(parse_register(ops[0], line));
            ins.field = parse_field_ref(ops[1], file_, line);
            break;
        case Shape::RRField:
            need(3);
            ins.regs.push_back(parse_register(ops[0], line));
            ins.regs.push_back(parse_register(ops[1], line));
            ins.field = parse_field_ref(ops[2], file_, line);
            break;
        case Shape::RLabel:
            need(2);
            ins.regs.push_back(parse_register(ops[0], line));
            if (ops[1].empty() || ops[1][0] != ':')
                throw SyntaxError(file_, line, "expected label");
            ins.targets.push_back(ops[1].substr(1));
            break;
        case Shape::RRLabel:
            need(3);
            ins.regs.push_back(parse_register(ops[0], line));
            ins.regs.push_back(parse_register(ops[1], line));
            if (ops[2].empty() || ops[2][0] != ':')
                throw SyntaxError(file_, line, "expected label");
            ins.targets.push_back(ops[2].substr(1));
            break;
        case Shape::Label:
            need(1);
            if (ops[0].empty() || ops[0][0] != ':')
                throw SyntaxError(file_, line, "expected label");
            ins.targets.push_back(ops[0].substr(1));
            break;
        case Shape::RRLit:
            need(3);
            ins.regs.push_back(parse_register(ops[0], line));
            ins.regs.push_back(parse_register(ops[1], line));
            ins.lit = parse_literal(ops[2], file_, line);
            break;
        case Shape::ArgsMethod:
            need(2);
            ins.regs = parse_reg_list(ops[0], line);
            ins.method = parse_method_ref(ops[1], file_, line);
            ins.invoke_kind = invoke_kind_of(mnemonic);
            ins.is_range = mnemonic.find("/range") != std::string::npos;
            break;
        case Shape::ArgsType:
            need(2);
            ins.regs = parse_reg_list(ops[0], line);
            ins.type_desc = ops[1];
            ins.is_range = mnemonic.find("/range") != std::string::npos;
            break;
        }
        return ins;
    }

private:
    MethodDef& m_;
    const std::string& file_;
};

struct PendingData {
    enum Kind { Packed, Sparse, Array } kind;
    std::vector<int64_t> keys;           // packed: first key only
    std::vector<std::string> targets;    // switch case labels
    std::vector<int64_t> values;         // array payload
    int elem_width = 0;
};

} // namespace

int param_register_width(const std::vector<std::string>& param_types) {
    int width = 0;
    for (const auto& t : param_types) width += type_is_wide(t) ? 2 : 1;
    return width;
}

bool type_is_wide(const std::string& desc) {
    return desc == "J" || desc == "D";
}

std::vector<std::string> parse_proto_params(const std::string& proto) {
    std::vector<std::string> params;
    size_t i = 1; // skip '('
    while (i < proto.size() && proto[i] != ')') {
        size_t start = i;
        while (i < proto.size() && proto[i] == '[') ++i;
        if (i >= proto.size()) break;
        if (proto[i] == 'L') {
            size_t semi = proto.find(';', i);
            if (semi == std::string::npos) break;
            i = semi + 1;
        } else {
            ++i;
        }
        params.push_back(proto.substr(start, i - start));
    }
    return params;
}

std::string proto_return_type(const std::string& proto) {
    size_t close = proto.find(')');
    return close == std::string::npos ? "V" : proto.substr(close + 1);
}

const MethodDef* ClassDef::find_method(const std::string& method_name,
                                       const std::string& method_proto) const {
    for (const auto& m : methods)
        if (m.name == method_name && m.proto == method_proto) return &m;
    return nullptr;
}

const FieldDef* ClassDef::find_field(const std::string& field_name) const {
    for (const auto& f : fields)
        if (f.name == field_name) return &f;
    return nullptr;
}

bool Instruction::structurally_equal(const Instruction& o) const {
    return op == o.op && mnemonic == o.mnemonic && regs == o.regs &&
           lit == o.lit && str == o.str && type_desc == o.type_desc &&
           field == o.field && method == o.method &&
           invoke_kind == o.invoke_kind && is_range == o.is_range &&
           targets == o.targets && switch_keys == o.switch_keys &&
           array_data == o.array_data && array_elem_width == o.array_elem_width &&
           data_label == o.data_label && raw == o.raw;
}

bool MethodDef::structurally_equal(const MethodDef& o) const {
    if (name != o.name || proto != o.proto || flags != o.flags ||
        is_static != o.is_static || is_abstract != o.is_abstract ||
        is_native != o.is_native || register_count != o.register_count ||
        param_types != o.param_types || param_reg_base != o.param_reg_base ||
        labels != o.labels)
        return false;
    if (instructions.size() != o.instructions.size()) return false;
    for (size_t i = 0; i < instructions.size(); ++i)
        if (!instructions[i].structurally_equal(o.instructions[i])) return false;
    if (try_blocks.size() != o.try_blocks.size()) return false;
    for (size_t i = 0; i < try_blocks.size(); ++i)
        if (!try_blocks[i].structurally_equal(o.try_blocks[i])) return false;
    return true;
}

bool ClassDef::structurally_equal(const ClassDef& o) const {
    if (name != o.name || superclass != o.superclass ||
        interfaces != o.interfaces || flags != o.flags ||
        source_attr != o.source_attr)
        return false;
    if (fields.size() != o.fields.size() || methods.size() != o.methods.size())
        return false;
    for (size_t i = 0; i < fields.size(); ++i)
        if (!fields[i].structurally_equal(o.fields[i])) return false;
    for (size_t i = 0; i < methods.size(); ++i)
        if (!methods[i].structurally_equal(o.methods[i])) return false;
    return true;
}

ClassDef parse_class(const std::string& text, const std::string& filename) {
    ClassDef cls;
    cls.loc = {filename, 1};

    std::vector<std::string> lines;
    {
        std::stringstream ss(text);
        std::string line;
        while (std::getline(ss, line)) lines.push_back(line);
    }

    MethodDef* method = nullptr;
    std::unique_ptr<MethodParser> mp;
    int annotation_depth = 0;
    // Data blocks found while inside a method, keyed by their label.
    std::map<std::string, PendingData> data_blocks;
    std::vector<std::string> pending_labels;
    PendingData* open_data = nullptr;

    auto finish_method = [&](int line_no) {
        // Attach switch/array data and resolve label indices.
        for (auto& ins : method->instructions) {
            if (ins.op == Op::PackedSwitch || ins.op == Op::SparseSwitch ||
                ins.op == Op::FillArrayData) {
                if (ins.targets.empty())
                    throw SyntaxError(filename, ins.loc.line,
                                      ins.mnemonic + " without data label");
                std::string label = ins.targets[0];
                auto it = data_blocks.find(label);
                if (it == data_blocks.end())
                    throw SyntaxError(filename, ins.loc.line,
                                      "unresolved data label :" + label);
                ins.data_label = label;
                ins.targets.clear();
                if (ins.op == Op::FillArrayData) {
                    ins.array_data = it->second.values;
                    ins.array_elem_width = it->second.elem_width;
                } else {
                    ins.switch_keys = it->second.keys;
                    ins.targets = it->second.targets;
                }
            }
        }
        // Validate branch targets.
        for (const auto& ins : method->instructions) {
            for (const auto& t : ins.targets) {
                if (!method->labels.count(t))
                    throw SyntaxError(filename, ins.loc.line,
                                      "unresolved label :" + t);
            }
        }
        for (auto& tb : method->try_blocks) {
            auto resolve = [&](const std::string& l) {
                auto it = method->labels.find(l);
                if (it == method->labels.end())
                    throw SyntaxError(filename, line_no,
                                      "unresolved try label :" + l);
                return it->second;
            };
            tb.start = resolve(tb.start_label);
            tb.end = resolve(tb.end_label);
            tb.handler = resolve(tb.handler_label);
        }
        method = nullptr;
        mp.reset();
        data_blocks.clear();
        pending_labels.clear();
        open_data = nullptr;
    };

    for (size_t idx = 0; idx < lines.size(); ++idx) {
        int line_no = static_cast<int>(idx) + 1;
        std::string line = trim(strip_comment(lines[idx]));
        if (line.empty()) continue;

        if (annotation_depth > 0) {
            if (line.rfind(".annotation", 0) == 0 ||
                line.rfind(".subannotation", 0) == 0)
                ++annotation_depth;
            else if (line == ".end annotation" || line == ".end subannotation")
                --annotation_depth;
            continue;
        }
        if (open_data) {
            if (line == ".end packed-switch" || line == ".end sparse-switch" ||
                line == ".end array-data") {
                open_data = nullptr;
                continue;
            }
            if (open_data->kind == PendingData::Packed) {
                if (line[0] != ':')
                    throw SyntaxError(filename, line_no,
                                      "expected label in packed-switch data");
                open_data->targets.push_back(line.substr(1));
            } else if (open_data->kind == PendingData::Sparse) {
                // "key -> :label"
                size_t arrow = line.find("->");
                if (arrow == std::string::npos)
                    throw SyntaxError(filename, line_no,
                                      "expected 'key -> :label'");
                std::string key = trim(line.substr(0, arrow));
                std::string lab = trim(line.substr(arrow + 2));
                if (lab.empty() || lab[0] != ':')
                    throw SyntaxError(filename, line_no, "expected label");
                open_data->keys.push_back(parse_literal(key, filename, line_no));
                open_data->targets.push_back(lab.substr(1));
            } else {
                open_data->values.push_back(
                    parse_literal(line, filename, line_no));
            }
            continue;
        }

        if (line[0] == ':') {
            std::string label = line.substr(1);
            if (method == nullptr)
                throw SyntaxError(filename, line_no, "label outside method");
            pending_labels.push_back(label);
            continue;
        }

        if (line[0] == '.') {
            std::vector<std::string> toks = split_ws(line);
            const std::string& dir = toks[0];
            if (dir == ".class") {
                if (toks.size() < 2)
                    throw SyntaxError(filename, line_no, "bad .class");
                cls.name = toks.back();
                cls.flags.assign(toks.begin() + 1, toks.end() - 1);
            } else if (dir == ".super") {
                if (toks.size() != 2)
                    throw SyntaxError(filename, line_no, "bad .super");
                cls.superclass = toks[1];
            } else if (dir == ".implements") {
                if (toks.size() != 2)
                    throw SyntaxError(filename, line_no, "bad .implements");
                cls.interfaces.push_back(toks[1]);
            } else if (dir == ".source") {
                if (toks.size() == 2 && toks[1].size() >= 2)
                    cls.source_attr =
                        unescape(toks[1].substr(1, toks[1].size() - 2),
                                 filename, line_no);
            } else if (dir == ".field") {
                if (method)
                    throw SyntaxError(filename, line_no, ".field inside method");
                // .field <flags> name:type [= literal]
                FieldDef f;
                f.loc = {filename, line_no};
                size_t eq = std::string::npos;
                for (size_t t = 1; t < toks.size(); ++t)
                    if (toks[t] == "=") { eq = t; break; }
                size_t name_idx = (eq == std::string::npos ? toks.size() : eq) - 1;
                if (name_idx < 1)
                    throw SyntaxError(filename, line_no, "bad .field");
                const std::string& decl = toks[name_idx];
                size_t colon = decl.find(':');
                if (colon == std::string::npos)
                    throw SyntaxError(filename, line_no, "bad .field: " + decl);
                f.name = decl.substr(0, colon);
                f.type = decl.substr(colon + 1);
                f.flags.assign(toks.begin() + 1, toks.begin() + name_idx);
                f.is_static =
                    std::find(f.flags.begin(), f.flags.end(), "static") !=
                    f.flags.end();
                if (eq != std::string::npos) {
                    std::string init;
                    for (size_t t = eq + 1; t < toks.size(); ++t) {
                        if (!init.empty()) init += ' ';
                        init += toks[t];
                    }
                    f.init_literal = init;
                }
                cls.fields.push_back(std::move(f));
            } else if (dir == ".method") {
                if (method)
                    throw SyntaxError(filename, line_no, "nested .method");
                MethodDef m;
                m.loc = {filename, line_no};
                if (toks.size() < 2)
                    throw SyntaxError(filename, line_no, "bad .method");
                const std::string& sig = toks.back();
                size_t paren = sig.find('(');
                if (paren == std::string::npos)
                    throw SyntaxError(filename, line_no,
                                      "bad method signature: " + sig);
                m.name = sig.substr(0, paren);
                m.proto = sig.substr(paren);
                m.flags.assign(toks.begin() + 1, toks.end() - 1);
                auto has_flag = [&](const char* f) {
                    return std::find(m.flags.begin(), m.flags.end(), f) !=
                           m.flags.end();
                };
                m.is_static = has_flag("static");
                m.is_abstract = has_flag("abstract");
                m.is_native = has_flag("native");
                m.param_types = parse_proto_params(m.proto);
                cls.methods.push_back(std::move(m));
                method = &cls.methods.back();
                mp = std::make_unique<MethodParser>(*method, filename);
            } else if (dir == ".end") {
                if (toks.size() >= 2 && toks[1] == "method") {
                    if (!method)
                        throw SyntaxError(filename, line_no,
                                          ".end method outside method");
                    for (const auto& l : pending_labels)
                        method->labels[l] =
                            static_cast<int>(method->instructions.size());
                    pending_labels.clear();
                    finish_method(line_no);
                } else if (toks.size() >= 2 &&
                           (toks[1] == "field" || toks[1] == "param")) {
                    // annotation-block terminators, nothing to do
                } else {
                    throw SyntaxError(filename, line_no,
                                      "unexpected directive: " + line);
                }
            } else if (dir == ".registers" || dir == ".locals") {
                if (!method)
                    throw SyntaxError(filename, line_no,
                                      dir + " outside method");
                if (toks.size() != 2)
                    throw SyntaxError(filename, line_no, "bad " + dir);
                int n = static_cast<int>(
                    parse_literal(toks[1], filename, line_no));
                int param_width =
                    param_register_width(method->param_types) +
                    (method->is_static ? 0 : 1);
                method->register_count =
                    dir == ".registers" ? n : n + param_width;
                method->param_reg_base = method->register_count - param_width;
                if (method->param_reg_base < 0)
                    throw SyntaxError(filename, line_no,
                                      "register count below parameter width");
            } else if (dir == ".param") {
                // debug info; any attached annotation block is handled by
                // the .annotation branch below
            } else if (dir == ".annotation") {
                annotation_depth = 1;
            } else if (dir == ".catch" || dir == ".catchall") {
                if (!method)
                    throw SyntaxError(filename, line_no, dir + " outside method");
                // .catch Ltype; {:start .. :end} :handler
                // .catchall {:start .. :end} :handler
                TryBlock tb;
                size_t pos = 1;
                if (dir == ".catch") {
                    if (toks.size() < 2)
                        throw SyntaxError(filename, line_no, "bad .catch");
                    tb.exception_type = toks[1];
                    pos = 2;
                }
                std::string rest;
                for (size_t t = pos; t < toks.size(); ++t) rest += toks[t];
                size_t ob = rest.find('{');
                size_t dots = rest.find("..");
                size_t cb = rest.find('}');
                if (ob == std::string::npos || dots == std::string::npos ||
                    cb == std::string::npos)
                    throw SyntaxError(filename, line_no, "bad " + dir);
                auto strip_label = [&](std::string s) {
                    s = trim(s);
                    if (s.empty() || s[0] != ':')
                        throw SyntaxError(filename, line_no,
                                          "expected label in " + dir);
                    return s.substr(1);
                };
                tb.start_label = strip_label(rest.substr(ob + 1, dots - ob - 1));
                tb.end_label = strip_label(rest.substr(dots + 2, cb - dots - 2));
                tb.handler_label = strip_label(rest.substr(cb + 1));
                method->try_blocks.push_back(std::move(tb));
            } else if (dir == ".packed-switch" || dir == ".sparse-switch" ||
                       dir == ".array-data") {
                if (!method)
                    throw SyntaxError(filename, line_no, dir + " outside method");
                if (pending_labels.empty())
                    throw SyntaxError(filename, line_no,
                                      dir + " without a label");
                // Data labels are attachment points, not code labels.
                std::string label = pending_labels.back();
                pending_labels.pop_back();
                for (const auto& l : pending_labels)
                    method->labels[l] =
                        static_cast<int>(method->instructions.size());
                pending_labels.clear();
                PendingData pd;
                if (dir == ".packed-switch") {
                    pd.kind = PendingData::Packed;
                    if (toks.size() != 2)
                        throw SyntaxError(filename, line_no, "bad " + dir);
                    pd.keys.push_back(
                        parse_literal(toks[1], filename, line_no));
                } else if (dir == ".sparse-switch") {
                    pd.kind = PendingData::Sparse;
                } else {
                    pd.kind = PendingData::Array;
                    if (toks.size() != 2)
                        throw SyntaxError(filename, line_no, "bad " + dir);
                    pd.elem_width = static_cast<int>(
                        parse_literal(toks[1], filename, line_no));
                }
                auto [it, _] = data_blocks.emplace(label, std::move(pd));
                open_data = &it->second;
            } else if (dir == ".line" || dir == ".prologue" ||
                       dir == ".local" || dir == ".restart" ||
                       dir == ".epilogue") {
                // debug info, ignored
            } else {
                // Unknown directive outside our subset: ignore at class level,
                // reject inside methods where it could hide control flow.
                if (method)
                    throw SyntaxError(filename, line_no,
                                      "unsupported directive in method body: " +
                                          dir);
            }
            continue;
        }

        // Instruction line.
        if (!method)
            throw SyntaxError(filename, line_no, "instruction outside method");
        size_t sp = line.find_first_of(" \t");
        std::string mnemonic = sp == std::string::npos ? line : line.substr(0, sp);
        std::string rest = sp == std::string::npos ? "" : trim(line.substr(sp));
        for (const auto& l : pending_labels)
            method->labels[l] = static_cast<int>(method->instructions.size());
        pending_labels.clear();
        method->instructions.push_back(
            mp->parse_instruction(mnemonic, rest, line_no));
    }

    if (method)
        throw SyntaxError(filename, static_cast<int>(lines.size()),
                          "unterminated .method (truncated file?)");
    if (cls.name.empty())
        throw SyntaxError(filename, 1, "missing .class directive");
    return cls;
}

SmaliProgram load_program(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    SmaliProgram program;
    program.source_root = root.string();

    std::vector<fs::path> trees;
    if (fs::is_directory(root / "smali")) trees.push_back(root / "smali");
    for (int i = 2; i < 64; ++i) {
        fs::path p = root / ("smali_classes" + std::to_string(i));
        if (fs::is_directory(p))
            trees.push_back(p);
        else if (i > 2)
            break;
    }
    if (trees.empty())
        throw MissingInputError("no smali/ directory under " + root.string());

    std::vector<fs::path> files;
    for (const auto& tree : trees)
        for (const auto& entry : fs::recursive_directory_iterator(tree))
            if (entry.is_regular_file() && entry.path().extension() == ".smali")
                files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        std::string rel = fs::relative(f, root).string();
        try {
            ClassDef cls = parse_class(buf.str(), rel);
            auto [it, inserted] = program.classes.emplace(cls.name, std::move(cls));
            if (!inserted)
                program.diagnostics.push_back(
                    {rel, 1, "duplicate class " + it->first + ", keeping first"});
        } catch (const SyntaxError& e) {
            program.diagnostics.push_back({rel, e.line(), e.what()});
        }
    }
    return program;
}

} // namespace bankscan::smali

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bankscan/diagnostics.hpp"

namespace bankscan::smali {

// Opcode families the analyses understand. Everything else parses as
// Opaque with "taints nothing, kills nothing" semantics.
enum class Op {
    Nop,
    Const,        // const, const/4, const/16, const/high16, const-wide*
    ConstString,
    ConstClass,
    Move,         // move, move-object, move-wide and width variants
    MoveResult,
    MoveException,
    Invoke,
    ReturnVoid,
    Return,
    IGet,
    IPut,
    SGet,
    SPut,
    AGet,
    APut,
    NewInstance,
    NewArray,
    FilledNewArray,
    FillArrayData,
    ArrayLength,
    Goto,
    If,           // two-register compare-and-branch
    IfZ,          // compare-to-zero branch
    PackedSwitch,
    SparseSwitch,
    CheckCast,
    InstanceOf,
    Throw,
    Cmp,
    BinOp,        // dest, src1, src2 (2addr forms normalized)
    BinOpLit,     // dest, src, literal
    UnOp,         // neg-*, not-*, conversions
    Monitor,
    Opaque,
};

enum class InvokeKind { Virtual, Super, Direct, Static, Interface };

struct MethodRef {
    std::string class_desc; // La/B;
    std::string name;
    std::string proto;      // (args)ret

    std::string key() const { return class_desc + "->" + name + proto; }
    bool operator==(const MethodRef&) const = default;
    bool operator<(const MethodRef& o) const { return key() < o.key(); }
};

struct FieldRef {
    std::string class_desc;
    std::string name;
    std::string type;

    std::string key() const { return class_desc + "->" + name + ":" + type; }
    bool operator==(const FieldRef&) const = default;
    bool operator<(const FieldRef& o) const { return key() < o.key(); }
};

struct SourceLoc {
    std::string file;
    int line = 0;
};

struct Instruction {
    Op op = Op::Opaque;
    std::string mnemonic;                  // opcode text as written
    std::vector<int> regs;                 // registers, p-regs normalized to v-space
    std::optional<int64_t> lit;
    std::optional<std::string> str;        // const-string payload (unescaped)
    std::optional<std::string> type_desc;  // const-class / new-instance / check-cast / ...
    std::optional<FieldRef> field;
    std::optional<MethodRef> method;
    InvokeKind invoke_kind = InvokeKind::Virtual;
    bool is_range = false;
    std::vector<std::string> targets;      // branch labels; switches: data label then cases
    std::vector<int64_t> switch_keys;      // sparse-switch keys / packed-switch first key
    std::vector<int64_t> array_data;       // fill-array-data payload
    int array_elem_width = 0;
    std::string data_label;                // label of the attached data block
    std::string raw;                       // Opaque: untouched operand text
    SourceLoc loc;

    bool is_branch() const {
        return op == Op::Goto || op == Op::If || op == Op::IfZ ||
               op == Op::PackedSwitch || op == Op::SparseSwitch;
    }
    bool is_terminator() const {
        return op == Op::Goto || op == Op::ReturnVoid || op == Op::Return ||
               op == Op::Throw;
    }
    bool structurally_equal(const Instruction& o) const;
};

struct TryBlock {
    std::string start_label;
    std::string end_label;
    std::string handler_label;
    std::optional<std::string> exception_type; // absent for catchall
    int start = 0;   // resolved instruction indices [start, end)
    int end = 0;
    int handler = 0;

    bool structurally_equal(const TryBlock& o) const {
        return start_label == o.start_label && end_label == o.end_label &&
               handler_label == o.handler_label &&
               exception_type == o.exception_type && start == o.start &&
               end == o.end && handler == o.handler;
    }
};

struct MethodDef {
    std::string name;
    std::string proto;
    std::vector<std::string> flags;
    bool is_static = false;
    bool is_abstract = false;
    bool is_native = false;
    int register_count = 0;
    std::vector<std::string> param_types;
    int param_reg_base = 0; // first parameter register after normalization
    std::vector<Instruction> instructions;
    std::map<std::string, int> labels; // code labels only
    std::vector<TryBlock> try_blocks;
    SourceLoc loc;

    bool has_body() const { return !is_abstract && !is_native; }
    bool is_constructor() const { return name == "<init>" || name == "<clinit>"; }
    MethodRef ref(const std::string& class_desc) const {
        return MethodRef{class_desc, name, proto};
    }
    bool structurally_equal(const MethodDef& o) const;
};

struct FieldDef {
    std::string name;
    std::string type;
    std::vector<std::string> flags;
    bool is_static = false;
    std::optional<std::string> init_literal; // verbatim initializer text
    SourceLoc loc;

    bool structurally_equal(const FieldDef& o) const {
        return name == o.name && type == o.type && flags == o.flags &&
               is_static == o.is_static && init_literal == o.init_literal;
    }
};

enum class ComponentKind { None, Activity, Service, Receiver, Provider };

struct ClassDef {
    std::string name; // descriptor, La/B;
    std::string superclass;
    std::vector<std::string> interfaces;
    std::vector<std::string> flags;
    std::string source_attr; // .source payload, if any
    std::vector<FieldDef> fields;
    std::vector<MethodDef> methods;
    ComponentKind component = ComponentKind::None; // annotated from the manifest
    SourceLoc loc;

    const MethodDef* find_method(const std::string& method_name,
                                 const std::string& method_proto) const;
    const FieldDef* find_field(const std::string& field_name) const;
    bool structurally_equal(const ClassDef& o) const;
};

struct SmaliProgram {
    std::map<std::string, ClassDef> classes; // key = class descriptor
    std::string source_root;
    DiagnosticList diagnostics;

    const ClassDef* find_class(const std::string& desc) const {
        auto it = classes.find(desc);
        return it == classes.end() ? nullptr : &it->second;
    }
    const MethodDef* find_method(const MethodRef& ref) const {
        const ClassDef* c = find_class(ref.class_desc);
        return c ? c->find_method(ref.name, ref.proto) : nullptr;
    }
};

// Parse one class file. Throws SyntaxError on grammar violations.
ClassDef parse_class(const std::string& text, const std::string& filename);

// Load every smali/ (and smali_classes2/, ...) tree under root into one
// program. Per-file parse failures become diagnostics, never aborts.
// Throws MissingInputError when no smali tree exists.
SmaliProgram load_program(const std::filesystem::path& root);

// Canonical text form. parse_class(to_text(c)) is structurally equal to c.
std::string to_text(const ClassDef& cls);

// Number of registers a parameter list occupies (wide types take two).
int param_register_width(const std::vector<std::string>& param_types);

// Split "(Ljava/lang/String;I[BJ)V" into parameter descriptors.
std::vector<std::string> parse_proto_params(const std::string& proto);

// Return type descriptor of a proto.
std::string proto_return_type(const std::string& proto);

bool type_is_wide(const std::string& desc);

} // namespace bankscan::smali

#include "bankscan/smali.hpp"

#include <sstream>

namespace bankscan::smali {

namespace {

std::string escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 4);
    for (unsigned char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default:
            out += static_cast<char>(c);
        }
    }
    return out;
}

std::string hex(int64_t v) {
    std::ostringstream os;
    if (v < 0)
        os << "-0x" << std::hex << static_cast<uint64_t>(-v);
    else
        os << "0x" << std::hex << static_cast<uint64_t>(v);
    return os.str();
}

std::string reg(int r) { return "v" + std::to_string(r); }

std::string reg_list(const Instruction& ins) {
    std::string out = "{";
    if (ins.is_range && !ins.regs.empty()) {
        out += reg(ins.regs.front()) + " .. " + reg(ins.regs.back());
    } else {
        for (size_t i = 0; i < ins.regs.size(); ++i) {
            if (i) out += ", ";
            out += reg(ins.regs[i]);
        }
    }
    out += "}";
    return out;
}

void print_instruction(std::ostream& os, const Instruction& ins) {
    os << "    " << ins.mnemonic;
    auto sep = [first = true]() mutable {
        if (first) {
            first = false;
            return std::string(" ");
        }
        return std::string(", ");
    };
    switch (ins.op) {
    case Op::Nop:
    case Op::ReturnVoid:
        break;
    case Op::Const:
        os << sep() << reg(ins.regs[0]) << sep() << hex(*ins.lit);
        break;
    case Op::ConstString:
        os << sep() << reg(ins.regs[0]) << sep() << '"' << escape(*ins.str)
           << '"';
        break;
    case Op::ConstClass:
    case Op::NewInstance:
    case Op::CheckCast:
        os << sep() << reg(ins.regs[0]) << sep() << *ins.type_desc;
        break;
    case Op::Move:
    case Op::UnOp:
    case Op::ArrayLength:
        os << sep() << reg(ins.regs[0]) << sep() << reg(ins.regs[1]);
        break;
    case Op::MoveResult:
    case Op::MoveException:
    case Op::Return:
    case Op::Throw:
    case Op::Monitor:
        os << sep() << reg(ins.regs[0]);
        break;
    case Op::InstanceOf:
    case Op::NewArray:
        os << sep() << reg(ins.regs[0]) << sep() << reg(ins.regs[1]) << sep()
           << *ins.type_desc;
        break;
    case Op::IGet:
    case Op::IPut:
        os << sep() << reg(ins.regs[0]) << sep() << reg(ins.regs[1]) << sep()
           << ins.field->key();
        break;
    case Op::SGet:
    case Op::SPut:
        os << sep() << reg(ins.regs[0]) << sep() << ins.field->key();
        break;
    case Op::AGet:
    case Op::APut:
    case Op::Cmp:
        os << sep() << reg(ins.regs[0]) << sep() << reg(ins.regs[1]) << sep()
           << reg(ins.regs[2]);
        break;
    case Op::BinOp:
        if (ins.mnemonic.find("/2addr") != std::string::npos)
            os << sep() << reg(ins.regs[0]) << sep() << reg(ins.regs[2]);
        else
            os << sep() << reg(ins.regs[0]) << sep() << reg(ins.regs[1])
               << sep() << reg(ins.regs[2]);
        break;
    case Op::BinOpLit:
        os << sep() << reg(ins.regs[0]) << sep() << reg(ins.regs[1]) << sep()
           << hex(*ins.lit);
        break;
    case Op::Goto:
        os << sep() << ':' << ins.targets[0];
        break;
    case Op::If:
        os << sep() << reg(ins.regs[0]) << sep() << reg(ins.regs[1]) << sep()
           << ':' << ins.targets[0];
        break;
    case Op::IfZ:
        os << sep() << reg(ins.regs[0]) << sep() << ':' << ins.targets[0];
        break;
    case Op::PackedSwitch:
    case Op::SparseSwitch:
    case Op::FillArrayData:
        os << sep() << reg(ins.regs[0]) << sep() << ':' << ins.data_label;
        break;
    case Op::Invoke:
        os << sep() << reg_list(ins) << sep() << ins.method->key();
        break;
    case Op::FilledNewArray:
        os << sep() << reg_list(ins) << sep() << *ins.type_desc;
        break;
    case Op::Opaque:
        if (!ins.raw.empty()) os << ' ' << ins.raw;
        break;
    }
    os << '\n';
}

} // namespace

std::string to_text(const ClassDef& cls) {
    std::ostringstream os;
    os << ".class";
    for (const auto& f : cls.flags) os << ' ' << f;
    os << ' ' << cls.name << '\n';
    if (!cls.superclass.empty()) os << ".super " << cls.superclass << '\n';
    if (!cls.source_attr.empty())
        os << ".source \"" << escape(cls.source_attr) << "\"\n";
    for (const auto& i : cls.interfaces) os << ".implements " << i << '\n';

    for (const auto& f : cls.fields) {
        os << "\n.field";
        for (const auto& fl : f.flags) os << ' ' << fl;
        os << ' ' << f.name << ':' << f.type;
        if (f.init_literal) os << " = " << *f.init_literal;
        os << '\n';
    }

    for (const auto& m : cls.methods) {
        os << "\n.method";
        for (const auto& fl : m.flags) os << ' ' << fl;
        os << ' ' << m.name << m.proto << '\n';
        if (m.has_body()) {
            os << "    .registers " << m.register_count << '\n';
            // labels by index
            std::map<int, std::vector<std::string>> by_index;
            for (const auto& [label, index] : m.labels)
                by_index[index].push_back(label);
            for (size_t i = 0; i <= m.instructions.size(); ++i) {
                auto it = by_index.find(static_cast<int>(i));
                if (it != by_index.end())
                    for (const auto& l : it->second) os << "    :" << l << '\n';
                if (i < m.instructions.size())
                    print_instruction(os, m.instructions[i]);
            }
            for (const auto& tb : m.try_blocks) {
                if (tb.exception_type)
                    os << "    .catch " << *tb.exception_type << " {:"
                       << tb.start_label << " .. :" << tb.end_label << "} :"
                       << tb.handler_label << '\n';
                else
                    os << "    .catchall {:" << tb.start_label << " .. :"
                       << tb.end_label << "} :" << tb.handler_label << '\n';
            }
            // switch / array data blocks, deduplicated by label
            std::map<std::string, const Instruction*> data;
            for (const auto& ins : m.instructions)
                if (!ins.data_label.empty()) data.emplace(ins.data_label, &ins);
            for (const auto& [label, ins] : data) {
                os << "    :" << label << '\n';
                if (ins->op == Op::PackedSwitch) {
                    os << "    .packed-switch " << hex(ins->switch_keys.at(0))
                       << '\n';
                    for (const auto& t : ins->targets)
                        os << "        :" << t << '\n';
                    os << "    .end packed-switch\n";
                } else if (ins->op == Op::SparseSwitch) {
                    os << "    .sparse-switch\n";
                    for (size_t i = 0; i < ins->targets.size(); ++i)
                        os << "        " << hex(ins->switch_keys.at(i))
                           << " -> :" << ins->targets[i] << '\n';
                    os << "    .end sparse-switch\n";
                } else {
                    os << "    .array-data " << ins->array_elem_width << '\n';
                    for (int64_t v : ins->array_data)
                        os << "        " << hex(v) << '\n';
                    os << "    .end array-data\n";
                }
            }
        }
        os << ".end method\n";
    }
    return os.str();
}

} // namespace bankscan::smali

#include "bankscan/local_facts.hpp"

#include <algorithm>

namespace bankscan::facts {

using smali::Instruction;
using smali::InvokeKind;
using smali::MethodDef;
using smali::Op;

namespace {

std::optional<Fact> fact_from_field_initializer(const smali::FieldDef& f) {
    if (!f.init_literal) return std::nullopt;
    const std::string& lit = *f.init_literal;
    Fact fact;
    if (lit.size() >= 2 && lit.front() == '"' && lit.back() == '"') {
        fact.str_val = lit.substr(1, lit.size() - 2);
        return fact;
    }
    try {
        size_t pos = 0;
        std::string t = lit;
        if (!t.empty() && (t.back() == 'L' || t.back() == 't' || t.back() == 's'))
            t.pop_back();
        long long v = std::stoll(t, &pos, 0);
        if (pos == t.size()) {
            fact.int_val = v;
            return fact;
        }
    } catch (...) {
    }
    return std::nullopt;
}

bool is_external_dir_api(const smali::MethodRef& m) {
    return m.class_desc == "Landroid/os/Environment;" &&
           m.name.rfind("getExternalStorage", 0) == 0;
}

bool mentions_external_path(const std::string& s) {
    return s.rfind("/sdcard", 0) == 0 || s.find("/sdcard/") != std::string::npos;
}

} // namespace

ConstFieldTable build_const_field_table(const smali::SmaliProgram& program) {
    ConstFieldTable table;
    std::map<std::string, int> writes; // assignments seen per field

    for (const auto& [cls_name, cls] : program.classes) {
        for (const auto& f : cls.fields) {
            if (!f.is_static) continue;
            if (auto fact = fact_from_field_initializer(f))
                table.fields[smali::FieldRef{cls_name, f.name, f.type}.key()] =
                    *fact;
        }
        const MethodDef* clinit = cls.find_method("<clinit>", "()V");
        if (!clinit || !clinit->has_body()) continue;
        std::map<int, Fact> regs;
        for (const auto& ins : clinit->instructions) {
            if (ins.op == Op::Const) {
                regs[ins.regs[0]] = Fact{};
                regs[ins.regs[0]].int_val = *ins.lit;
            } else if (ins.op == Op::ConstString) {
                regs[ins.regs[0]] = Fact{};
                regs[ins.regs[0]].str_val = *ins.str;
            } else if (ins.op == Op::SPut) {
                std::string key = ins.field->key();
                ++writes[key];
                auto it = regs.find(ins.regs[0]);
                if (it != regs.end() && writes[key] == 1)
                    table.fields[key] = it->second;
                else
                    table.fields.erase(key);
            } else {
                for (int r : LocalScan::written_regs(ins)) regs.erase(r);
            }
        }
    }
    return table;
}

std::vector<int> LocalScan::written_regs(const Instruction& ins) {
    switch (ins.op) {
    case Op::Const:
    case Op::ConstString:
    case Op::ConstClass:
    case Op::Move:
    case Op::MoveResult:
    case Op::MoveException:
    case Op::IGet:
    case Op::SGet:
    case Op::AGet:
    case Op::NewInstance:
    case Op::NewArray:
    case Op::InstanceOf:
    case Op::ArrayLength:
    case Op::Cmp:
    case Op::BinOp:
    case Op::BinOpLit:
    case Op::UnOp:
        return {ins.regs[0]};
    default:
        return {};
    }
}

LocalScan::LocalScan(const MethodDef& method, const std::string& class_desc,
                     const ConstFieldTable* const_fields) {
    before_.resize(method.instructions.size());
    std::map<int, Fact> state;

    // Parameter registers carry their declared types.
    int reg = method.param_reg_base;
    if (!method.is_static) {
        state[reg].type_desc = class_desc;
        ++reg;
    }
    for (const auto& t : method.param_types) {
        state[reg].type_desc = t;
        reg += smali::type_is_wide(t) ? 2 : 1;
    }

    Fact pending_result; // value produced by the previous invoke
    bool have_pending = false;

    for (size_t i = 0; i < method.instructions.size(); ++i) {
        before_[i] = state;
        const Instruction& ins = method.instructions[i];

        auto kill = [&](int r) { state.erase(r); };
        auto set = [&](int r, Fact f) { state[r] = std::move(f); };

        switch (ins.op) {
        case Op::Const: {
            Fact f;
            f.int_val = *ins.lit;
            set(ins.regs[0], f);
            break;
        }
        case Op::ConstString: {
            Fact f;
            f.str_val = *ins.str;
            if (mentions_external_path(*ins.str)) f.external_path = true;
            set(ins.regs[0], f);
            break;
        }
        case Op::ConstClass: {
            Fact f;
            f.type_desc = *ins.type_desc; // class object of that type
            set(ins.regs[0], f);
            break;
        }
        case Op::Move: {
            auto it = state.find(ins.regs[1]);
            if (it != state.end())
                set(ins.regs[0], it->second);
            else
                kill(ins.regs[0]);
            break;
        }
        case Op::MoveResult:
            if (have_pending)
                set(ins.regs[0], pending_result);
            else
                kill(ins.regs[0]);
            break;
        case Op::MoveException:
            kill(ins.regs[0]);
            break;
        case Op::NewInstance: {
            Fact f;
            f.type_desc = *ins.type_desc;
            if (*ins.type_desc == "Landroid/content/Intent;")
                f.intent.kind = IntentAbstract::Kind::Unknown;
            if (*ins.type_desc == "Ljava/lang/StringBuilder;")
                f.sb_content = ""; // refined by <init>
            set(ins.regs[0], f);
            break;
        }
        case Op::NewArray: {
            Fact f;
            f.type_desc = *ins.type_desc;
            set(ins.regs[0], f);
            break;
        }
        case Op::FillArrayData: {
            Fact f = state.count(ins.regs[0]) ? state[ins.regs[0]] : Fact{};
            f.bytes = ins.array_data;
            set(ins.regs[0], f);
            break;
        }
        case Op::CheckCast: {
            auto it = state.find(ins.regs[0]);
            Fact f = it != state.end() ? it->second : Fact{};
            f.type_desc = *ins.type_desc;
            set(ins.regs[0], f);
            break;
        }
        case Op::IGet: {
            Fact f;
            f.type_desc = ins.field->type;
            set(ins.regs[0], f);
            break;
        }
        case Op::SGet: {
            Fact f;
            f.type_desc = ins.field->type;
            if (const_fields) {
                if (const Fact* cf = const_fields->find(*ins.field)) {
                    f = *cf;
                    f.type_desc = ins.field->type;
                }
            }
            // Stock allow-all verifier constants keep their field identity
            // via type_desc; nothing else to do here.
            set(ins.regs[0], f);
            break;
        }
        case Op::AGet:
        case Op::Cmp:
        case Op::BinOp:
        case Op::BinOpLit:
        case Op::UnOp:
        case Op::InstanceOf:
        case Op::ArrayLength:
            kill(ins.regs[0]);
            break;
        case Op::Invoke: {
            const smali::MethodRef& callee = *ins.method;
            have_pending = false;
            pending_result = Fact{};

            auto receiver_fact = [&]() -> const Fact* {
                if (ins.invoke_kind == InvokeKind::Static || ins.regs.empty())
                    return nullptr;
                auto it = state.find(ins.regs[0]);
                return it == state.end() ? nullptr : &it->second;
            };
            auto arg_fact = [&](size_t pos) -> const Fact* {
                // pos: 0-based over explicit params
                size_t base = ins.invoke_kind == InvokeKind::Static ? 0 : 1;
                auto params = smali::parse_proto_params(callee.proto);
                size_t ri = base;
                for (size_t p = 0; p < params.size(); ++p) {
                    if (p == pos) {
                        if (ri >= ins.regs.size()) return nullptr;
                        auto it = state.find(ins.regs[ri]);
                        return it == state.end() ? nullptr : &it->second;
                    }
                    ri += smali::type_is_wide(params[p]) ? 2 : 1;
                }
                return nullptr;
            };

            // Model a handful of calls the detectors depend on.
            if (callee.name == "<init>" && !ins.regs.empty()) {
                auto it = state.find(ins.regs[0]);
                if (it != state.end()) {
                    Fact& recv = it->second;
                    if (recv.intent.kind != IntentAbstract::Kind::None &&
                        callee.class_desc == "Landroid/content/Intent;") {
                        if (callee.proto.find("Ljava/lang/Class;") !=
                            std::string::npos) {
                            // (Context, Class): class object fact carries type
                            const Fact* cls = arg_fact(1);
                            if (cls && cls->type_desc) {
                                recv.intent.kind = IntentAbstract::Kind::Explicit;
                                recv.intent.target_desc = *cls->type_desc;
                            }
                        } else if (callee.proto.rfind("(Ljava/lang/String;)",
                                                      0) == 0) {
                            const Fact* act = arg_fact(0);
                            recv.intent.kind = IntentAbstract::Kind::Implicit;
                            if (act && act->str_val)
                                recv.intent.action = *act->str_val;
                        }
                    } else if (callee.class_desc ==
                               "Landroid/content/IntentFilter;") {
                        const Fact* act = arg_fact(0);
                        if (act && act->str_val)
                            recv.filter_action = *act->str_val;
                    } else if (callee.class_desc ==
                               "Ljava/lang/StringBuilder;") {
                        if (callee.proto.rfind("(Ljava/lang/String;)", 0) == 0) {
                            const Fact* a = arg_fact(0);
                            if (a && a->str_val)
                                recv.sb_content = *a->str_val;
                            else
                                recv.sb_content.reset();
                        }
                    } else if (callee.class_desc == "Ljava/io/File;" ||
                               callee.class_desc ==
                                   "Ljava/io/FileOutputStream;" ||
                               callee.class_desc == "Ljava/io/FileWriter;" ||
                               callee.class_desc ==
                                   "Ljava/io/OutputStreamWriter;" ||
                               callee.class_desc == "Ljava/io/BufferedWriter;" ||
                               callee.class_desc == "Ljava/io/PrintWriter;") {
                        // external-storage provenance flows into the stream
                        auto params = smali::parse_proto_params(callee.proto);
                        for (size_t p = 0; p < params.size(); ++p) {
                            const Fact* a = arg_fact(p);
                            if (a && a->external_path) recv.external_path = true;
                        }
                    }
                }
            } else if (callee.name == "setAction" &&
                       callee.class_desc == "Landroid/content/Intent;") {
                auto it = state.find(ins.regs[0]);
                if (it != state.end()) {
                    it->second.intent.kind = IntentAbstract::Kind::Implicit;
                    const Fact* act = arg_fact(0);
                    if (act && act->str_val)
                        it->second.intent.action = *act->str_val;
                    pending_result = it->second;
                    have_pending = true;
                }
            } else if ((callee.name == "setClass" ||
                        callee.name == "setClassName") &&
                       callee.class_desc == "Landroid/content/Intent;") {
                auto it = state.find(ins.regs[0]);
                if (it != state.end()) {
                    const Fact* cls = arg_fact(1);
                    if (cls && cls->type_desc) {
                        it->second.intent.kind = IntentAbstract::Kind::Explicit;
                        it->second.intent.target_desc = *cls->type_desc;
                    } else {
                        it->second.intent.kind = IntentAbstract::Kind::Unknown;
                    }
                    pending_result = it->second;
                    have_pending = true;
                }
            } else if (callee.name == "addAction" &&
                       callee.class_desc == "Landroid/content/IntentFilter;") {
                auto it = state.find(ins.regs[0]);
                if (it != state.end()) {
                    const Fact* act = arg_fact(0);
                    if (act && act->str_val && !it->second.filter_action)
                        it->second.filter_action = *act->str_val;
                }
            } else if (callee.name == "getBytes" &&
                       callee.class_desc == "Ljava/lang/String;") {
                const Fact* recv = receiver_fact();
                if (recv && recv->str_val) {
                    pending_result.bytes_source = *recv->str_val;
                    have_pending = true;
                }
            } else if (callee.name == "append" &&
                       callee.class_desc == "Ljava/lang/StringBuilder;") {
                auto it = state.find(ins.regs[0]);
                if (it != state.end()) {
                    Fact& recv = it->second;
                    if (recv.sb_content) {
                        const Fact* a = arg_fact(0);
                        if (a && a->str_val)
                            *recv.sb_content += *a->str_val;
                        else if (a && a->int_val)
                            *recv.sb_content += std::to_string(*a->int_val);
                        else
                            recv.sb_content.reset();
                    }
                    pending_result = recv;
                    have_pending = true;
                }
            } else if (callee.name == "toString" &&
                       callee.class_desc == "Ljava/lang/StringBuilder;") {
                const Fact* recv = receiver_fact();
                if (recv && recv->sb_content) {
                    pending_result.str_val = *recv->sb_content;
                    if (mentions_external_path(*recv->sb_content))
                        pending_result.external_path = true;
                    have_pending = true;
                }
            } else if (callee.name == "concat" &&
                       callee.class_desc == "Ljava/lang/String;") {
                const Fact* recv = receiver_fact();
                const Fact* a = arg_fact(0);
                if (recv && recv->str_val && a && a->str_val) {
                    pending_result.str_val = *recv->str_val + *a->str_val;
                    have_pending = true;
                }
            } else if (is_external_dir_api(callee)) {
                pending_result.external_path = true;
                pending_result.type_desc = "Ljava/io/File;";
                have_pending = true;
            } else if (callee.name == "getAbsolutePath" ||
                       callee.name == "getPath") {
                const Fact* recv = receiver_fact();
                if (recv && recv->external_path) {
                    pending_result.external_path = true;
                    pending_result.type_desc = "Ljava/lang/String;";
                    have_pending = true;
                }
            }

            if (!have_pending) {
                // Default: the result carries the callee's return type only.
                std::string ret = smali::proto_return_type(callee.proto);
                if (ret != "V") {
                    pending_result.type_desc = ret;
                    have_pending = true;
                }
            }
            break;
        }
        case Op::FilledNewArray: {
            pending_result = Fact{};
            pending_result.type_desc = *ins.type_desc;
            have_pending = true;
            break;
        }
        case Op::IPut:
        case Op::SPut:
        case Op::APut:
        case Op::Nop:
        case Op::ReturnVoid:
        case Op::Return:
        case Op::Goto:
        case Op::If:
        case Op::IfZ:
        case Op::PackedSwitch:
        case Op::SparseSwitch:
        case Op::Throw:
        case Op::Monitor:
        case Op::Opaque:
            break;
        }
        if (ins.op != Op::Invoke && ins.op != Op::FilledNewArray &&
            ins.op != Op::MoveResult)
            have_pending = false;
    }
}

const Fact* LocalScan::reg_fact(int index, int reg) const {
    if (index < 0 || index >= static_cast<int>(before_.size())) return nullptr;
    auto it = before_[index].find(reg);
    return it == before_[index].end() ? nullptr : &it->second;
}

} // namespace bankscan::facts

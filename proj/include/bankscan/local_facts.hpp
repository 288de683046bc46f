#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bankscan/smali.hpp"

namespace bankscan::facts {

// What a register is known to hold at a program point. Facts are computed
// by a straight-line scan: values fold through const/move chains (and a
// few modeled calls); control-flow joins are not merged, matching the
// constant-folding scope the detectors rely on.
struct IntentAbstract {
    enum class Kind { None, Unknown, Explicit, Implicit };
    Kind kind = Kind::None;
    std::string target_desc; // explicit target class descriptor
    std::string action;      // implicit action, when constant
};

struct Fact {
    std::optional<int64_t> int_val;
    std::optional<std::string> str_val;
    std::optional<std::string> type_desc;       // allocated/declared type
    std::optional<std::vector<int64_t>> bytes;  // literal array payload
    std::optional<std::string> bytes_source;    // string the bytes came from
    std::optional<std::string> sb_content;      // StringBuilder accumulation
    std::optional<std::string> filter_action;   // IntentFilter action
    bool external_path = false;                 // derives from external storage
    IntentAbstract intent;

    bool has_constant_material() const {
        return int_val.has_value() || str_val.has_value() ||
               bytes.has_value() || bytes_source.has_value();
    }
};

// Static fields whose value is a compile-time constant: field initializers
// plus single-assignment consts in <clinit>.
struct ConstFieldTable {
    std::map<std::string, Fact> fields; // FieldRef.key() → fact

    const Fact* find(const smali::FieldRef& ref) const {
        auto it = fields.find(ref.key());
        return it == fields.end() ? nullptr : &it->second;
    }
};

ConstFieldTable build_const_field_table(const smali::SmaliProgram& program);

// Per-method register facts, one snapshot per instruction.
class LocalScan {
public:
    LocalScan(const smali::MethodDef& method, const std::string& class_desc,
              const ConstFieldTable* const_fields);

    // Fact of register `reg` immediately before instruction `index` runs.
    const Fact* reg_fact(int index, int reg) const;

    // Registers an instruction writes (dest registers).
    static std::vector<int> written_regs(const smali::Instruction& ins);

private:
    std::vector<std::map<int, Fact>> before_; // per-instruction snapshots
};

} // namespace bankscan::facts

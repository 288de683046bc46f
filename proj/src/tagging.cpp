#include "bankscan/tagging.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "bankscan/builtin_data.hpp"
#include "bankscan/local_facts.hpp"

namespace bankscan::tag {

namespace {

std::string read_file_or_throw(const std::filesystem::path& p,
                               const char* what) {
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw MissingInputError(std::string(what) + " not readable: " +
                                p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> cols;
    std::string cur;
    for (char c : line) {
        if (c == '\t') {
            cols.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    cols.push_back(cur);
    return cols;
}

} // namespace

std::string to_string(Category c) {
    switch (c) {
    case Category::Identity: return "Identity";
    case Category::Credential: return "Credential";
    case Category::PersonalInfo: return "PersonalInfo";
    case Category::FinancialInfo: return "FinancialInfo";
    }
    return "?";
}

std::optional<Category> category_from_string(const std::string& s) {
    if (s == "Identity") return Category::Identity;
    if (s == "Credential") return Category::Credential;
    if (s == "PersonalInfo" || s == "Personal Info") return Category::PersonalInfo;
    if (s == "FinancialInfo" || s == "Financial Info")
        return Category::FinancialInfo;
    return std::nullopt;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    };
    for (size_t i = 0; i < text.size(); ++i) {
        unsigned char c = text[i];
        if (!std::isalnum(c)) {
            flush();
            continue;
        }
        if (!cur.empty()) {
            unsigned char prev = cur.back();
            bool prev_lower = std::islower(prev) != 0;
            bool prev_digit = std::isdigit(prev) != 0;
            bool c_upper = std::isupper(c) != 0;
            bool c_digit = std::isdigit(c) != 0;
            if (prev_lower && c_upper) {
                flush();
            } else if (prev_digit != c_digit) {
                flush();
            } else if (c_upper && i + 1 < text.size() &&
                       std::islower(static_cast<unsigned char>(text[i + 1])) &&
                       std::isupper(prev)) {
                // ...PINCode → pin | code
                flush();
            }
        }
        cur += static_cast<char>(std::tolower(c));
    }
    flush();
    return tokens;
}

std::string normalize_keyword(const std::string& keyword) {
    std::vector<std::string> toks = tokenize(keyword);
    std::string out;
    for (const auto& t : toks) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

bool KeywordCatalog::contains(const std::string& normalized) const {
    return find(normalized) != nullptr;
}

const KeywordEntry* KeywordCatalog::find(const std::string& normalized) const {
    for (const auto& e : entries)
        if (e.keyword == normalized) return &e;
    return nullptr;
}

size_t KeywordCatalog::count(Category c) const {
    return static_cast<size_t>(
        std::count_if(entries.begin(), entries.end(),
                      [&](const KeywordEntry& e) { return e.category == c; }));
}

KeywordCatalog parse_keyword_catalog(const std::string& text,
                                     const std::string& what,
                                     Provenance provenance) {
    KeywordCatalog catalog;
    int line_no = 0;
    for (const auto& line : split_lines(text)) {
        ++line_no;
        std::string trimmed = line;
        if (trimmed.empty() || trimmed[0] == '#') continue;
        std::vector<std::string> cols = split_tabs(trimmed);
        if (cols.size() != 2)
            throw CatalogError(what + ":" + std::to_string(line_no) +
                               ": expected keyword<TAB>category");
        auto cat = category_from_string(cols[1]);
        if (!cat)
            throw CatalogError(what + ":" + std::to_string(line_no) +
                               ": unknown category '" + cols[1] + "'");
        KeywordEntry e;
        e.keyword = normalize_keyword(cols[0]);
        if (e.keyword.empty())
            throw CatalogError(what + ":" + std::to_string(line_no) +
                               ": empty keyword");
        e.tokens = tokenize(e.keyword);
        e.category = *cat;
        e.provenance = provenance;
        if (!catalog.contains(e.keyword)) catalog.entries.push_back(std::move(e));
    }
    return catalog;
}

KeywordCatalog load_keyword_catalog() {
    return parse_keyword_catalog(builtin::kKeywordsTsv, "builtin keywords",
                                 Provenance::Builtin);
}

KeywordCatalog load_keyword_catalog(const std::filesystem::path& path) {
    return parse_keyword_catalog(read_file_or_throw(path, "keyword catalog"),
                                 path.string(), Provenance::File);
}

Stoplist load_stoplist() {
    Stoplist s;
    for (const auto& line : split_lines(builtin::kStoplistTxt)) {
        if (line.empty() || line[0] == '#') continue;
        s.entries.insert(normalize_keyword(line));
    }
    return s;
}

Stoplist load_stoplist(const std::filesystem::path& path) {
    Stoplist s;
    for (const auto& line :
         split_lines(read_file_or_throw(path, "stoplist"))) {
        if (line.empty() || line[0] == '#') continue;
        s.entries.insert(normalize_keyword(line));
    }
    return s;
}

std::vector<NeighborEntry> parse_neighbor_file(const std::string& text,
                                               const std::string& what) {
    std::vector<NeighborEntry> out;
    int line_no = 0;
    for (const auto& line : split_lines(text)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cols = split_tabs(line);
        if (cols.size() != 3)
            throw CatalogError(what + ":" + std::to_string(line_no) +
                               ": expected keyword<TAB>neighbor<TAB>similarity");
        NeighborEntry e;
        e.keyword = cols[0];
        e.neighbor = cols[1];
        try {
            e.similarity = std::stod(cols[2]);
        } catch (...) {
            throw CatalogError(what + ":" + std::to_string(line_no) +
                               ": bad similarity '" + cols[2] + "'");
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<NeighborEntry> load_neighbor_file(
    const std::filesystem::path& path) {
    return parse_neighbor_file(read_file_or_throw(path, "neighbor file"),
                               path.string());
}

KeywordCatalog expand_keywords(const KeywordCatalog& catalog,
                               const std::vector<NeighborEntry>& neighbors,
                               const Stoplist& stoplist, double threshold) {
    KeywordCatalog out = catalog;
    for (const auto& n : neighbors) {
        if (n.similarity < threshold) continue;
        const KeywordEntry* base = out.find(normalize_keyword(n.keyword));
        if (!base) continue; // unknown keyword rows are skipped silently
        std::string neighbor = normalize_keyword(n.neighbor);
        if (neighbor.empty() || stoplist.blocks(neighbor)) continue;
        if (out.contains(neighbor)) continue;
        KeywordEntry e;
        e.keyword = neighbor;
        e.tokens = tokenize(neighbor);
        e.category = base->category;
        e.provenance = Provenance::EmbeddingExpanded;
        out.entries.push_back(std::move(e));
    }
    return out;
}

std::optional<Match> match_keyword(const std::string& text,
                                   const KeywordCatalog& catalog) {
    std::vector<std::string> toks = tokenize(text);
    if (toks.empty()) return std::nullopt;

    const KeywordEntry* best = nullptr;
    size_t best_len = 0;
    for (const auto& e : catalog.entries) {
        size_t len = e.tokens.size();
        if (len == 0 || len > toks.size() || len <= best_len) continue;
        for (size_t start = 0; start + len <= toks.size(); ++start) {
            if (std::equal(e.tokens.begin(), e.tokens.end(),
                           toks.begin() + start)) {
                best = &e;
                best_len = len;
                break;
            }
        }
    }
    if (!best) return std::nullopt;
    return Match{best->keyword, best->category};
}

std::vector<TaggedView> tag_views(const std::vector<res::LabelPair>& pairs,
                                  const KeywordCatalog& catalog) {
    std::vector<TaggedView> out;
    for (const auto& p : pairs) {
        TaggedView tv;
        tv.view = p.target_view;
        if (auto m = match_keyword(p.label(), catalog)) {
            tv.keyword = m->keyword;
            tv.category = m->category;
            tv.evidence = MatchEvidence::LabelText;
            tv.matched_text = p.label();
        } else if (auto mi = match_keyword(p.target(), catalog)) {
            tv.keyword = mi->keyword;
            tv.category = mi->category;
            tv.evidence = MatchEvidence::ResourceId;
            tv.matched_text = p.target();
        } else {
            continue;
        }
        out.push_back(std::move(tv));
    }
    return out;
}

std::string VariableLocus::key() const {
    if (kind == LocusKind::Field) return field.key();
    return class_desc + "->" + method_name + method_proto + "/v" +
           std::to_string(reg);
}

std::map<std::string, uint32_t> build_id_table(
    const res::ResourceBundle& resources, const smali::SmaliProgram& program) {
    std::map<std::string, uint32_t> table = resources.id_table;
    for (const auto& [name, cls] : program.classes) {
        // R$id classes carry one static int per view id
        if (name.find("/R$id;") == std::string::npos &&
            name.find("$R$id;") == std::string::npos)
            continue;
        for (const auto& f : cls.fields) {
            if (!f.is_static || f.type != "I" || !f.init_literal) continue;
            try {
                uint32_t v = static_cast<uint32_t>(
                    std::stoul(*f.init_literal, nullptr, 0));
                table.emplace(f.name, v);
            } catch (...) {
            }
        }
    }
    return table;
}

std::vector<TaggedVariable> bind_variables(
    const smali::SmaliProgram& program, const std::vector<TaggedView>& tagged,
    const std::map<std::string, uint32_t>& id_table, DiagnosticList& diags) {
    // numeric id → first tagged view carrying it
    std::map<uint32_t, const TaggedView*> by_numeric_id;
    for (const auto& tv : tagged) {
        auto it = id_table.find(tv.view.resource_id);
        if (it != id_table.end()) by_numeric_id.emplace(it->second, &tv);
    }
    std::vector<TaggedVariable> out;
    if (by_numeric_id.empty()) return out;

    for (const auto& [cls_name, cls] : program.classes) {
        for (const auto& m : cls.methods) {
            if (!m.has_body()) continue;
            facts::LocalScan scan(m, cls_name, nullptr);
            for (size_t i = 0; i < m.instructions.size(); ++i) {
                const auto& ins = m.instructions[i];
                if (ins.op != smali::Op::Invoke ||
                    ins.method->name != "findViewById")
                    continue;
                // id argument: first explicit parameter
                size_t arg_index = ins.invoke_kind == smali::InvokeKind::Static
                                       ? 0
                                       : 1;
                if (ins.regs.size() <= arg_index) continue;
                const facts::Fact* fact =
                    scan.reg_fact(static_cast<int>(i), ins.regs[arg_index]);
                if (!fact || !fact->int_val) {
                    diags.push_back({ins.loc.file, ins.loc.line,
                                     "findViewById id is not a constant"});
                    continue;
                }
                auto hit =
                    by_numeric_id.find(static_cast<uint32_t>(*fact->int_val));
                if (hit == by_numeric_id.end()) continue;
                // result register
                if (i + 1 >= m.instructions.size() ||
                    m.instructions[i + 1].op != smali::Op::MoveResult)
                    continue;
                int view_reg = m.instructions[i + 1].regs[0];

                TaggedVariable var;
                var.keyword = hit->second->keyword;
                var.category = hit->second->category;
                var.view_id = hit->second->view.resource_id;
                var.binding_site = ins.loc;
                var.binding_method = m.ref(cls_name);
                var.binding_index = static_cast<int>(i);
                var.intro_index = static_cast<int>(i) + 1;
                var.intro_reg = view_reg;

                // Promote to a field locus when the view is stored to a
                // field before the register dies.
                var.locus.kind = LocusKind::Register;
                var.locus.class_desc = cls_name;
                var.locus.method_name = m.name;
                var.locus.method_proto = m.proto;
                var.locus.reg = view_reg;
                std::vector<int> aliases{view_reg};
                for (size_t j = i + 2; j < m.instructions.size(); ++j) {
                    const auto& next = m.instructions[j];
                    auto holds = [&](int r) {
                        return std::find(aliases.begin(), aliases.end(), r) !=
                               aliases.end();
                    };
                    if (next.op == smali::Op::IPut && holds(next.regs[0])) {
                        var.locus.kind = LocusKind::Field;
                        var.locus.field = *next.field;
                        break;
                    }
                    if (next.op == smali::Op::SPut && holds(next.regs[0])) {
                        var.locus.kind = LocusKind::Field;
                        var.locus.field = *next.field;
                        break;
                    }
                    if (next.op == smali::Op::Move && holds(next.regs[1])) {
                        aliases.push_back(next.regs[0]);
                        continue;
                    }
                    if (next.op == smali::Op::CheckCast) continue;
                    if (next.is_branch() || next.is_terminator()) break;
                    // any write that kills every alias ends the window
                    for (int w : facts::LocalScan::written_regs(next)) {
                        aliases.erase(
                            std::remove(aliases.begin(), aliases.end(), w),
                            aliases.end());
                    }
                    if (aliases.empty()) break;
                }
                out.push_back(std::move(var));
            }
        }
    }
    return out;
}

} // namespace bankscan::tag

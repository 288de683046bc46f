#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bankscan/resources.hpp"
#include "bankscan/smali.hpp"

namespace bankscan::tag {

enum class Category { Identity, Credential, PersonalInfo, FinancialInfo };

std::string to_string(Category c);
std::optional<Category> category_from_string(const std::string& s);

enum class Provenance { Builtin, File, EmbeddingExpanded };

struct KeywordEntry {
    std::string keyword; // normalized: lowercase, tokens joined by spaces
    std::vector<std::string> tokens;
    Category category = Category::Identity;
    Provenance provenance = Provenance::Builtin;
};

struct KeywordCatalog {
    std::vector<KeywordEntry> entries; // catalog order = match tie-break order

    bool contains(const std::string& normalized) const;
    size_t count(Category c) const;
    const KeywordEntry* find(const std::string& normalized) const;
};

// Identifier/label tokenization: splits on separators, camelCase humps and
// letter/digit boundaries, lowercases everything.
std::vector<std::string> tokenize(const std::string& text);

// Lowercased, separator-normalized form ("user-agent" → "user agent").
std::string normalize_keyword(const std::string& keyword);

KeywordCatalog load_keyword_catalog(); // builtin (Table-pinned 13/11/24/22)
KeywordCatalog load_keyword_catalog(const std::filesystem::path& path);
KeywordCatalog parse_keyword_catalog(const std::string& text,
                                     const std::string& what,
                                     Provenance provenance);

struct Stoplist {
    std::set<std::string> entries; // normalized

    bool blocks(const std::string& normalized) const {
        return entries.count(normalized) > 0;
    }
};

Stoplist load_stoplist(); // builtin
Stoplist load_stoplist(const std::filesystem::path& path);

struct NeighborEntry {
    std::string keyword;
    std::string neighbor;
    double similarity = 0.0;
};

std::vector<NeighborEntry> load_neighbor_file(const std::filesystem::path& path);
std::vector<NeighborEntry> parse_neighbor_file(const std::string& text,
                                               const std::string& what);

// Appends qualifying neighbors as embedding-expanded entries.
KeywordCatalog expand_keywords(const KeywordCatalog& catalog,
                               const std::vector<NeighborEntry>& neighbors,
                               const Stoplist& stoplist, double threshold);

struct Match {
    std::string keyword;
    Category category;
};

// Whole-token matching: a keyword matches only complete tokens or complete
// multi-token spans; the longest span wins, catalog order breaks ties.
std::optional<Match> match_keyword(const std::string& text,
                                   const KeywordCatalog& catalog);

enum class MatchEvidence { LabelText, ResourceId };

struct TaggedView {
    res::ViewElement view; // the described (target) element
    std::string keyword;
    Category category;
    MatchEvidence evidence = MatchEvidence::LabelText;
    std::string matched_text;
};

std::vector<TaggedView> tag_views(const std::vector<res::LabelPair>& pairs,
                                  const KeywordCatalog& catalog);

enum class LocusKind { Register, Field };

struct VariableLocus {
    LocusKind kind = LocusKind::Register;
    std::string class_desc;       // enclosing class
    std::string method_name;      // register loci
    std::string method_proto;
    int reg = -1;
    smali::FieldRef field;        // field loci

    std::string key() const;
};

struct TaggedVariable {
    VariableLocus locus;
    std::string keyword;
    Category category;
    std::string view_id;              // the bound view's resource id
    smali::SourceLoc binding_site;    // the findViewById call
    smali::MethodRef binding_method;
    int binding_index = -1;           // instruction index of the call
    int intro_index = -1;             // move-result that receives the view
    int intro_reg = -1;

    std::string key() const { return locus.key() + "#" + keyword; }
};

// Symbolic id → numeric id, from public.xml plus R$id classes in code.
std::map<std::string, uint32_t> build_id_table(
    const res::ResourceBundle& resources, const smali::SmaliProgram& program);

// findViewById binding: every call whose constant id resolves to a tagged
// view yields a TaggedVariable, promoted to a field locus when the result
// is immediately stored to a field.
std::vector<TaggedVariable> bind_variables(
    const smali::SmaliProgram& program, const std::vector<TaggedView>& tagged,
    const std::map<std::string, uint32_t>& id_table, DiagnosticList& diags);

} // namespace bankscan::tag

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bankscan/diagnostics.hpp"
#include "bankscan/smali.hpp"

namespace bankscan::res {

enum class ViewKind { TextView, EditText, Button, Other };

struct ViewElement {
    ViewKind kind = ViewKind::Other;
    std::string tag;                       // element name as written
    std::string resource_id;               // symbolic id, may be empty
    std::optional<std::string> label_text; // resolved display text
    std::string layout_file;
    int position = 0; // document order within the layout file

    bool operator==(const ViewElement&) const = default;
};

enum class PairKind { TextViewEditText, TextViewTextView };

// A describing TextView and the element it labels. target_view always
// carries a resource_id.
struct LabelPair {
    ViewElement label_view;
    ViewElement target_view;
    PairKind kind = PairKind::TextViewEditText;

    const std::string& label() const { return *label_view.label_text; }
    const std::string& target() const { return target_view.resource_id; }
};

struct ComponentInfo {
    std::string class_desc; // L...; form
    smali::ComponentKind kind = smali::ComponentKind::Activity;
    bool exported = false;
    bool has_intent_filter = false;
    std::vector<std::string> actions;
};

struct ManifestInfo {
    std::string package;
    std::string version_name;
    int64_t version_code = 0;
    std::vector<ComponentInfo> components;
    std::vector<std::string> permissions;

    const ComponentInfo* find_component(const std::string& class_desc) const {
        for (const auto& c : components)
            if (c.class_desc == class_desc) return &c;
        return nullptr;
    }
};

struct CertificateInfo {
    std::string subject;
    std::string issuer;
    int64_t not_before = 0; // unix seconds, UTC
    int64_t not_after = 0;
    std::string not_before_str; // ISO-8601 Z
    std::string not_after_str;
    std::string signature_algorithm; // e.g. "sha1WithRSAEncryption"
    std::string source_path;         // relative to the app root
};

struct ResourceBundle {
    std::map<std::string, std::vector<ViewElement>> layouts; // file → views
    std::map<std::string, std::string> strings;              // @string table
    ManifestInfo manifest;
    std::vector<CertificateInfo> certificates;
    std::map<std::string, uint32_t> id_table; // symbolic id → numeric id
    std::vector<std::string> embedded_private_keys; // paths of PEM key blocks
    DiagnosticList diagnostics;
};

// res/values/strings.xml; absent file yields an empty table.
std::map<std::string, std::string> parse_strings(
    const std::filesystem::path& root, DiagnosticList& diags);

// One decoded layout file, views in document order, @string refs resolved.
std::vector<ViewElement> parse_layout_xml(
    const std::string& xml_text, const std::string& layout_file,
    const std::map<std::string, std::string>& strings);

// Every res/layout/*.xml under root. Malformed files become diagnostics.
std::map<std::string, std::vector<ViewElement>> parse_layouts(
    const std::filesystem::path& root,
    const std::map<std::string, std::string>& strings, DiagnosticList& diags);

// Nearest-preceding-label pairing within one layout, labels consumed once.
std::vector<LabelPair> pair_labels(const std::vector<ViewElement>& views);

// Decoded AndroidManifest.xml. Throws MissingInputError when absent.
ManifestInfo parse_manifest(const std::filesystem::path& manifest_path);

// Certificates bundled under assets/ and res/raw/. Also records embedded
// PEM private-key blocks into key_paths.
std::vector<CertificateInfo> extract_certificates(
    const std::filesystem::path& root, std::vector<std::string>& key_paths,
    DiagnosticList& diags);

// res/values/public.xml (id entries only); absent file yields empty table.
std::map<std::string, uint32_t> parse_public_ids(
    const std::filesystem::path& root, DiagnosticList& diags);

// Full resource pass over an unpacked app. The manifest is required.
ResourceBundle load_resources(const std::filesystem::path& root);

// "com.example.Foo" or ".Foo" → "Lcom/example/Foo;"
std::string java_name_to_descriptor(const std::string& name,
                                    const std::string& package);

} // namespace bankscan::res

#include "bankscan/resources.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

namespace bankscan::res {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

namespace {

std::string attr(const pt::ptree& node, const std::string& name) {
    auto attrs = node.get_child_optional("<xmlattr>");
    if (!attrs) return "";
    auto v = attrs->get_optional<std::string>(name);
    return v ? *v : "";
}

std::string last_segment(const std::string& s, char sep) {
    size_t pos = s.rfind(sep);
    return pos == std::string::npos ? s : s.substr(pos + 1);
}

ViewKind kind_of_tag(const std::string& tag) {
    std::string simple = last_segment(tag, '.');
    if (simple == "TextView") return ViewKind::TextView;
    if (simple == "EditText" || simple == "AutoCompleteTextView" ||
        simple == "TextInputEditText")
        return ViewKind::EditText;
    if (simple == "Button" || simple == "ImageButton") return ViewKind::Button;
    return ViewKind::Other;
}

std::string resolve_id(const std::string& raw) {
    // "@+id/edit_pwd", "@id/edit_pwd", "@android:id/text1"
    if (raw.empty() || raw[0] != '@') return raw;
    return last_segment(raw, '/');
}

void walk_layout(const pt::ptree& node, const std::string& tag,
                 const std::string& layout_file,
                 const std::map<std::string, std::string>& strings,
                 std::vector<ViewElement>& out) {
    if (tag != "<xmlattr>" && tag != "<xmlcomment>" && !tag.empty()) {
        std::string id = resolve_id(attr(node, "android:id"));
        std::string text = attr(node, "android:text");
        if (!id.empty() || !text.empty()) {
            ViewElement v;
            v.kind = kind_of_tag(tag);
            v.tag = tag;
            v.resource_id = id;
            if (!text.empty()) {
                if (text.rfind("@string/", 0) == 0) {
                    auto it = strings.find(text.substr(8));
                    if (it != strings.end()) v.label_text = it->second;
                } else {
                    v.label_text = text;
                }
            }
            v.layout_file = layout_file;
            v.position = static_cast<int>(out.size());
            out.push_back(std::move(v));
        }
    }
    for (const auto& [child_tag, child] : node)
        if (child_tag != "<xmlattr>")
            walk_layout(child, child_tag, layout_file, strings, out);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

std::string java_name_to_descriptor(const std::string& name,
                                    const std::string& package) {
    std::string full;
    if (!name.empty() && name[0] == '.')
        full = package + name;
    else if (name.find('.') == std::string::npos)
        full = package + "." + name;
    else
        full = name;
    std::replace(full.begin(), full.end(), '.', '/');
    return "L" + full + ";";
}

std::map<std::string, std::string> parse_strings(const fs::path& root,
                                                 DiagnosticList& diags) {
    std::map<std::string, std::string> table;
    fs::path p = root / "res" / "values" / "strings.xml";
    if (!fs::exists(p)) return table;
    try {
        pt::ptree tree;
        std::istringstream in(read_file(p));
        pt::read_xml(in, tree);
        auto resources = tree.get_child_optional("resources");
        if (!resources) return table;
        for (const auto& [tag, node] : *resources) {
            if (tag != "string") continue;
            std::string name = attr(node, "name");
            if (!name.empty()) table[name] = node.get_value<std::string>();
        }
    } catch (const pt::xml_parser_error& e) {
        diags.push_back({p.string(), 0, std::string("strings.xml: ") + e.what()});
    }
    return table;
}

std::vector<ViewElement> parse_layout_xml(
    const std::string& xml_text, const std::string& layout_file,
    const std::map<std::string, std::string>& strings) {
    pt::ptree tree;
    std::istringstream in(xml_text);
    pt::read_xml(in, tree);
    std::vector<ViewElement> out;
    for (const auto& [tag, node] : tree)
        walk_layout(node, tag, layout_file, strings, out);
    return out;
}

std::map<std::string, std::vector<ViewElement>> parse_layouts(
    const fs::path& root, const std::map<std::string, std::string>& strings,
    DiagnosticList& diags) {
    std::map<std::string, std::vector<ViewElement>> out;
    fs::path dir = root / "res" / "layout";
    if (!fs::is_directory(dir)) return out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".xml")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::string rel = fs::relative(f, root).string();
        try {
            out[rel] = parse_layout_xml(read_file(f), rel, strings);
        } catch (const pt::xml_parser_error& e) {
            diags.push_back({rel, 0, std::string("malformed layout: ") + e.what()});
        }
    }
    return out;
}

std::vector<LabelPair> pair_labels(const std::vector<ViewElement>& views) {
    std::vector<LabelPair> pairs;
    std::optional<ViewElement> pending;
    for (const auto& v : views) {
        bool is_target = (v.kind == ViewKind::EditText ||
                          v.kind == ViewKind::TextView) &&
                         !v.resource_id.empty();
        if (pending && is_target) {
            LabelPair p;
            p.label_view = *pending;
            p.target_view = v;
            p.kind = v.kind == ViewKind::EditText
                         ? PairKind::TextViewEditText
                         : PairKind::TextViewTextView;
            pairs.push_back(std::move(p));
            pending.reset();
        }
        if (v.kind == ViewKind::TextView && v.label_text &&
            !v.label_text->empty())
            pending = v;
    }
    return pairs;
}

ManifestInfo parse_manifest(const fs::path& manifest_path) {
    if (!fs::exists(manifest_path))
        throw MissingInputError("missing manifest: " + manifest_path.string());
    pt::ptree tree;
    std::istringstream in(read_file(manifest_path));
    try {
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
        throw MissingInputError("unreadable manifest: " + std::string(e.what()));
    }
    auto manifest = tree.get_child_optional("manifest");
    if (!manifest)
        throw MissingInputError("manifest has no <manifest> root: " +
                                manifest_path.string());

    ManifestInfo info;
    info.package = attr(*manifest, "package");
    info.version_name = attr(*manifest, "android:versionName");
    std::string vc = attr(*manifest, "android:versionCode");
    if (!vc.empty()) info.version_code = std::strtoll(vc.c_str(), nullptr, 0);

    for (const auto& [tag, node] : *manifest) {
        if (tag == "uses-permission") {
            std::string name = attr(node, "android:name");
            if (!name.empty()) info.permissions.push_back(name);
        }
    }

    auto application = manifest->get_child_optional("application");
    if (!application) return info;

    auto component_kind = [](const std::string& tag)
        -> std::optional<smali::ComponentKind> {
        if (tag == "activity" || tag == "activity-alias")
            return smali::ComponentKind::Activity;
        if (tag == "service") return smali::ComponentKind::Service;
        if (tag == "receiver") return smali::ComponentKind::Receiver;
        if (tag == "provider") return smali::ComponentKind::Provider;
        return std::nullopt;
    };

    for (const auto& [tag, node] : *application) {
        auto kind = component_kind(tag);
        if (!kind) continue;
        ComponentInfo comp;
        comp.kind = *kind;
        comp.class_desc =
            java_name_to_descriptor(attr(node, "android:name"), info.package);
        for (const auto& [ctag, cnode] : node) {
            if (ctag != "intent-filter") continue;
            comp.has_intent_filter = true;
            for (const auto& [atag, anode] : cnode)
                if (atag == "action") {
                    std::string action = attr(anode, "android:name");
                    if (!action.empty()) comp.actions.push_back(action);
                }
        }
        // Explicit android:exported wins; otherwise a component with an
        // intent filter is exported (legacy platform default).
        std::string exported = attr(node, "android:exported");
        if (exported == "true")
            comp.exported = true;
        else if (exported == "false")
            comp.exported = false;
        else
            comp.exported = comp.has_intent_filter;
        info.components.push_back(std::move(comp));
    }
    return info;
}

std::map<std::string, uint32_t> parse_public_ids(const fs::path& root,
                                                 DiagnosticList& diags) {
    std::map<std::string, uint32_t> table;
    fs::path p = root / "res" / "values" / "public.xml";
    if (!fs::exists(p)) return table;
    try {
        pt::ptree tree;
        std::istringstream in(read_file(p));
        pt::read_xml(in, tree);
        auto resources = tree.get_child_optional("resources");
        if (!resources) return table;
        for (const auto& [tag, node] : *resources) {
            if (tag != "public") continue;
            if (attr(node, "type") != "id") continue;
            std::string name = attr(node, "name");
            std::string id = attr(node, "id");
            if (name.empty() || id.empty()) continue;
            table[name] = static_cast<uint32_t>(std::strtoul(id.c_str(), nullptr, 0));
        }
    } catch (const pt::xml_parser_error& e) {
        diags.push_back({p.string(), 0, std::string("public.xml: ") + e.what()});
    }
    return table;
}

ResourceBundle load_resources(const fs::path& root) {
    ResourceBundle bundle;
    bundle.manifest = parse_manifest(root / "AndroidManifest.xml");
    bundle.strings = parse_strings(root, bundle.diagnostics);
    bundle.layouts = parse_layouts(root, bundle.strings, bundle.diagnostics);
    bundle.id_table = parse_public_ids(root, bundle.diagnostics);
    bundle.certificates = extract_certificates(
        root, bundle.embedded_private_keys, bundle.diagnostics);
    return bundle;
}

} // namespace bankscan::res

#include "bankscan/graphs.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace bankscan::graph {

using smali::ClassDef;
using smali::ComponentKind;
using smali::Instruction;
using smali::InvokeKind;
using smali::MethodDef;
using smali::MethodRef;
using smali::Op;
using smali::SmaliProgram;

namespace {

const std::set<std::string>& ui_callback_names() {
    static const std::set<std::string> names = {
        "onClick",          "onLongClick",     "onTouch",
        "onKey",            "onFocusChange",   "onItemClick",
        "onItemLongClick",  "onItemSelected",  "onNothingSelected",
        "onCheckedChanged", "onEditorAction",  "onMenuItemClick",
        "beforeTextChanged","onTextChanged",   "afterTextChanged",
        "onRefresh",        "onPageSelected"};
    return names;
}

std::vector<std::string> lifecycle_names(ComponentKind kind) {
    switch (kind) {
    case ComponentKind::Activity:
        return {"onCreate", "onStart",  "onResume",       "onPause",
                "onStop",   "onDestroy", "onRestart",      "onNewIntent",
                "onActivityResult", "onBackPressed"};
    case ComponentKind::Service:
        return {"onCreate", "onStartCommand", "onStart", "onBind",
                "onHandleIntent", "onDestroy"};
    case ComponentKind::Receiver:
        return {"onReceive"};
    case ComponentKind::Provider:
        return {"onCreate", "query", "insert", "update", "delete", "getType"};
    case ComponentKind::None:
        return {};
    }
    return {};
}

bool is_dispatch_api(const std::string& name) {
    return name == "startActivity" || name == "startActivityForResult" ||
           name == "startService" || name == "startForegroundService" ||
           name == "bindService" || name == "sendBroadcast" ||
           name == "sendOrderedBroadcast" || name == "sendStickyBroadcast";
}

// register index of the first parameter of type Intent, if any
std::optional<int> intent_arg_reg(const Instruction& ins) {
    const MethodRef& callee = *ins.method;
    auto params = smali::parse_proto_params(callee.proto);
    size_t ri = ins.invoke_kind == InvokeKind::Static ? 0 : 1;
    for (const auto& p : params) {
        if (p == "Landroid/content/Intent;") {
            if (ri < ins.regs.size()) return ins.regs[ri];
            return std::nullopt;
        }
        ri += smali::type_is_wide(p) ? 2 : 1;
    }
    return std::nullopt;
}

} // namespace

Cfg build_cfg(const MethodDef& method, const std::string& class_desc) {
    Cfg cfg;
    cfg.method = method.ref(class_desc);
    const auto& code = method.instructions;
    int n = static_cast<int>(code.size());
    if (n == 0) {
        cfg.blocks.push_back(BasicBlock{0, -1, {}, {}});
        cfg.entry = 0;
        return cfg;
    }

    std::set<int> leaders{0};
    auto target_index = [&](const std::string& label) {
        return method.labels.at(label);
    };
    for (int i = 0; i < n; ++i) {
        const Instruction& ins = code[i];
        if (ins.is_branch()) {
            for (const auto& t : ins.targets) leaders.insert(target_index(t));
            if (i + 1 < n) leaders.insert(i + 1);
        } else if (ins.is_terminator() && i + 1 < n) {
            leaders.insert(i + 1);
        }
    }
    for (const auto& tb : method.try_blocks) {
        leaders.insert(tb.handler);
        if (tb.start < n) leaders.insert(tb.start);
        if (tb.end < n) leaders.insert(tb.end);
    }

    std::vector<int> sorted(leaders.begin(), leaders.end());
    cfg.block_of.assign(n, 0);
    for (size_t b = 0; b < sorted.size(); ++b) {
        BasicBlock blk;
        blk.first = sorted[b];
        blk.last = (b + 1 < sorted.size() ? sorted[b + 1] : n) - 1;
        for (int i = blk.first; i <= blk.last; ++i)
            cfg.block_of[i] = static_cast<int>(b);
        cfg.blocks.push_back(blk);
    }

    auto add_edge = [&](int from, int to) {
        auto& succs = cfg.blocks[from].succs;
        if (std::find(succs.begin(), succs.end(), to) == succs.end()) {
            succs.push_back(to);
            cfg.blocks[to].preds.push_back(from);
        }
    };

    for (size_t b = 0; b < cfg.blocks.size(); ++b) {
        const BasicBlock& blk = cfg.blocks[b];
        if (blk.size() == 0) continue;
        const Instruction& last = code[blk.last];
        if (last.is_branch()) {
            for (const auto& t : last.targets)
                add_edge(static_cast<int>(b), cfg.block_of[target_index(t)]);
            if (last.op != Op::Goto && blk.last + 1 < n)
                add_edge(static_cast<int>(b), cfg.block_of[blk.last + 1]);
        } else if (!last.is_terminator() && blk.last + 1 < n) {
            add_edge(static_cast<int>(b), cfg.block_of[blk.last + 1]);
        }
    }
    // exception edges: every covered block can transfer to its handler
    for (const auto& tb : method.try_blocks) {
        int handler_block = cfg.block_of[tb.handler];
        for (size_t b = 0; b < cfg.blocks.size(); ++b) {
            const BasicBlock& blk = cfg.blocks[b];
            if (blk.size() == 0) continue;
            if (blk.first < tb.end && blk.last >= tb.start)
                add_edge(static_cast<int>(b), handler_block);
        }
    }

    cfg.entry = cfg.block_of[0];
    if (!cfg.blocks[cfg.entry].preds.empty()) {
        // keep the entry predecessor-free with a synthetic empty block
        BasicBlock synthetic;
        synthetic.first = 0;
        synthetic.last = -1;
        synthetic.succs.push_back(cfg.entry);
        cfg.blocks[cfg.entry].preds.push_back(
            static_cast<int>(cfg.blocks.size()));
        cfg.blocks.push_back(synthetic);
        cfg.entry = static_cast<int>(cfg.blocks.size()) - 1;
    }
    return cfg;
}

void CallGraph::add_node(const MethodRef& ref, bool external) {
    auto [it, inserted] = nodes.emplace(ref.key(), CallGraphNode{});
    if (inserted) {
        it->second.ref = ref;
        it->second.external = external;
    } else if (!external) {
        it->second.external = false;
    }
}

void CallGraph::add_edge(const std::string& caller, const std::string& callee,
                         EdgeKind kind, int instruction_index) {
    auto& out = edges[caller];
    for (const auto& e : out)
        if (e.callee == callee && e.kind == kind &&
            e.instruction_index == instruction_index)
            return;
    out.push_back(CallEdge{callee, kind, instruction_index});
}

void annotate_components(SmaliProgram& program,
                         const res::ManifestInfo& manifest) {
    for (const auto& comp : manifest.components) {
        auto it = program.classes.find(comp.class_desc);
        if (it != program.classes.end()) it->second.component = comp.kind;
    }
}

namespace {

struct Hierarchy {
    std::map<std::string, std::vector<std::string>> children;

    std::vector<std::string> descendants(const std::string& type) const {
        std::vector<std::string> out;
        std::deque<std::string> work{type};
        std::set<std::string> seen{type};
        while (!work.empty()) {
            std::string cur = work.front();
            work.pop_front();
            auto it = children.find(cur);
            if (it == children.end()) continue;
            for (const auto& c : it->second)
                if (seen.insert(c).second) {
                    out.push_back(c);
                    work.push_back(c);
                }
        }
        return out;
    }
};

Hierarchy build_hierarchy(const SmaliProgram& program) {
    Hierarchy h;
    for (const auto& [name, cls] : program.classes) {
        if (!cls.superclass.empty()) h.children[cls.superclass].push_back(name);
        for (const auto& i : cls.interfaces) h.children[i].push_back(name);
    }
    return h;
}

// method lookup walking up the program-internal superclass chain
const MethodDef* resolve_in(const SmaliProgram& program,
                            const std::string& class_desc,
                            const std::string& name, const std::string& proto,
                            std::string* found_in) {
    std::string cur = class_desc;
    std::set<std::string> seen;
    while (!cur.empty() && seen.insert(cur).second) {
        const ClassDef* cls = program.find_class(cur);
        if (!cls) return nullptr;
        if (const MethodDef* m = cls->find_method(name, proto)) {
            if (found_in) *found_in = cur;
            return m;
        }
        cur = cls->superclass;
    }
    return nullptr;
}

} // namespace

CallGraph build_call_graph(const SmaliProgram& program,
                           const res::ManifestInfo& manifest) {
    CallGraph graph;
    Hierarchy hierarchy = build_hierarchy(program);

    std::set<std::string> component_classes;
    for (const auto& c : manifest.components)
        component_classes.insert(c.class_desc);

    for (const auto& [cls_name, cls] : program.classes) {
        for (const auto& m : cls.methods) {
            MethodRef ref = m.ref(cls_name);
            graph.add_node(ref, false);
            CallGraphNode& node = graph.nodes[ref.key()];
            node.is_static = m.is_static;
            node.is_constructor = m.is_constructor();
            node.component_class = component_classes.count(cls_name) > 0 ||
                                   cls.component != ComponentKind::None;
        }
    }

    facts::ConstFieldTable const_fields = build_const_field_table(program);

    for (const auto& [cls_name, cls] : program.classes) {
        for (const auto& m : cls.methods) {
            if (!m.has_body()) continue;
            MethodRef caller = m.ref(cls_name);
            std::string caller_key = caller.key();
            facts::LocalScan scan(m, cls_name, &const_fields);

            for (size_t i = 0; i < m.instructions.size(); ++i) {
                const Instruction& ins = m.instructions[i];
                int index = static_cast<int>(i);

                if (ins.op == Op::NewInstance &&
                    program.find_class(*ins.type_desc)) {
                    // instantiation wires up framework-invoked callbacks
                    const ClassDef* target = program.find_class(*ins.type_desc);
                    for (const auto& cm : target->methods) {
                        if (cm.is_static || cm.is_constructor()) continue;
                        graph.add_edge(caller_key,
                                       cm.ref(target->name).key(),
                                       EdgeKind::CallbackInstantiation, index);
                    }
                    continue;
                }
                if (ins.op != Op::Invoke) continue;
                const MethodRef& callee = *ins.method;

                auto link = [&](const std::string& owner,
                                const MethodDef* target) {
                    graph.add_edge(caller_key,
                                   target->ref(owner).key(), EdgeKind::Call,
                                   index);
                };

                switch (ins.invoke_kind) {
                case InvokeKind::Static:
                case InvokeKind::Direct: {
                    std::string owner;
                    if (const MethodDef* t = resolve_in(
                            program, callee.class_desc, callee.name,
                            callee.proto, &owner)) {
                        link(owner, t);
                    } else {
                        graph.add_node(callee, true);
                        graph.add_edge(caller_key, callee.key(), EdgeKind::Call,
                                       index);
                    }
                    break;
                }
                case InvokeKind::Super: {
                    std::string owner;
                    std::string start = callee.class_desc;
                    if (const MethodDef* t = resolve_in(program, start,
                                                        callee.name,
                                                        callee.proto, &owner)) {
                        link(owner, t);
                    } else {
                        graph.add_node(callee, true);
                        graph.add_edge(caller_key, callee.key(), EdgeKind::Call,
                                       index);
                    }
                    break;
                }
                case InvokeKind::Virtual:
                case InvokeKind::Interface: {
                    bool any = false;
                    std::string owner;
                    if (const MethodDef* t = resolve_in(
                            program, callee.class_desc, callee.name,
                            callee.proto, &owner)) {
                        link(owner, t);
                        any = true;
                    }
                    for (const auto& sub :
                         hierarchy.descendants(callee.class_desc)) {
                        const ClassDef* subcls = program.find_class(sub);
                        if (!subcls) continue;
                        if (const MethodDef* t =
                                subcls->find_method(callee.name, callee.proto)) {
                            link(sub, t);
                            any = true;
                        }
                    }
                    if (!any) {
                        graph.add_node(callee, true);
                        graph.add_edge(caller_key, callee.key(), EdgeKind::Call,
                                       index);
                    }
                    break;
                }
                }

                // explicit intents add component-transition edges
                if (is_dispatch_api(callee.name)) {
                    auto reg = intent_arg_reg(ins);
                    if (reg) {
                        const facts::Fact* f = scan.reg_fact(index, *reg);
                        if (f &&
                            f->intent.kind ==
                                facts::IntentAbstract::Kind::Explicit) {
                            const ClassDef* target =
                                program.find_class(f->intent.target_desc);
                            if (target) {
                                static const std::set<std::string> lifecycle{
                                    "onCreate",       "onStart",
                                    "onResume",       "onStartCommand",
                                    "onHandleIntent", "onBind",
                                    "onReceive",      "onNewIntent"};
                                for (const auto& tm : target->methods)
                                    if (lifecycle.count(tm.name))
                                        graph.add_edge(
                                            caller_key,
                                            tm.ref(target->name).key(),
                                            EdgeKind::ComponentTransition,
                                            index);
                            }
                        }
                    }
                }
            }
        }
    }
    return graph;
}

std::vector<EntryPoint> find_entry_points(const SmaliProgram& program,
                                          const res::ManifestInfo& manifest) {
    std::vector<EntryPoint> entries;
    auto add = [&](const MethodRef& ref, EntryKind kind,
                   const std::string& evidence) {
        for (const auto& e : entries)
            if (e.method == ref && e.kind == kind) return;
        entries.push_back(EntryPoint{ref, kind, evidence});
    };

    // system events: lifecycle methods of manifest components
    for (const auto& comp : manifest.components) {
        const ClassDef* cls = program.find_class(comp.class_desc);
        if (!cls) continue;
        auto names = lifecycle_names(comp.kind);
        for (const auto& m : cls->methods)
            if (std::find(names.begin(), names.end(), m.name) != names.end())
                add(m.ref(cls->name), EntryKind::SystemEvent,
                    "manifest component " + comp.class_desc);
    }

    facts::ConstFieldTable const_fields = build_const_field_table(program);

    for (const auto& [cls_name, cls] : program.classes) {
        for (const auto& m : cls.methods) {
            if (!m.has_body()) continue;
            facts::LocalScan scan(m, cls_name, &const_fields);
            for (size_t i = 0; i < m.instructions.size(); ++i) {
                const Instruction& ins = m.instructions[i];
                if (ins.op != Op::Invoke) continue;
                const MethodRef& callee = *ins.method;
                bool listener_reg =
                    (callee.name.rfind("set", 0) == 0 ||
                     callee.name.rfind("add", 0) == 0) &&
                    callee.name.size() > 8 &&
                    callee.name.rfind("Listener") ==
                        callee.name.size() - 8;
                if (callee.name == "addTextChangedListener")
                    listener_reg = true;
                if (listener_reg && ins.regs.size() >= 2) {
                    int arg = ins.regs.back();
                    const facts::Fact* f =
                        scan.reg_fact(static_cast<int>(i), arg);
                    if (f && f->type_desc) {
                        const ClassDef* listener =
                            program.find_class(*f->type_desc);
                        if (listener) {
                            for (const auto& lm : listener->methods)
                                if (ui_callback_names().count(lm.name))
                                    add(lm.ref(listener->name),
                                        EntryKind::UserInput,
                                        callee.name + " at " + ins.loc.file +
                                            ":" +
                                            std::to_string(ins.loc.line));
                        }
                    }
                }
                if (callee.name == "registerReceiver" &&
                    ins.regs.size() >= 2) {
                    size_t ri =
                        ins.invoke_kind == InvokeKind::Static ? 0 : 1;
                    if (ri < ins.regs.size()) {
                        const facts::Fact* f =
                            scan.reg_fact(static_cast<int>(i), ins.regs[ri]);
                        if (f && f->type_desc) {
                            const ClassDef* recv =
                                program.find_class(*f->type_desc);
                            if (recv) {
                                for (const auto& rm : recv->methods)
                                    if (rm.name == "onReceive")
                                        add(rm.ref(recv->name),
                                            EntryKind::SystemEvent,
                                            "registerReceiver at " +
                                                ins.loc.file + ":" +
                                                std::to_string(ins.loc.line));
                            }
                        }
                    }
                }
            }
        }
    }
    std::sort(entries.begin(), entries.end(),
              [](const EntryPoint& a, const EntryPoint& b) {
                  return a.method.key() < b.method.key();
              });
    return entries;
}

ProgramGraphs build_graphs(const SmaliProgram& program,
                           const res::ManifestInfo& manifest) {
    ProgramGraphs graphs;
    graphs.const_fields = build_const_field_table(program);
    Hierarchy hierarchy = build_hierarchy(program);
    graphs.subtype_children = hierarchy.children;

    for (const auto& [cls_name, cls] : program.classes)
        for (const auto& m : cls.methods)
            if (m.has_body())
                graphs.cfgs.emplace(m.ref(cls_name).key(),
                                    build_cfg(m, cls_name));

    graphs.call_graph = build_call_graph(program, manifest);
    graphs.entry_points = find_entry_points(program, manifest);

    for (const auto& [cls_name, cls] : program.classes) {
        for (const auto& m : cls.methods) {
            if (!m.has_body()) continue;
            facts::LocalScan scan(m, cls_name, &graphs.const_fields);
            for (size_t i = 0; i < m.instructions.size(); ++i) {
                const Instruction& ins = m.instructions[i];
                if (ins.op == Op::NewInstance) {
                    graphs.instantiations.sites[*ins.type_desc].push_back(
                        InstantiationSite{m.ref(cls_name),
                                          static_cast<int>(i)});
                    continue;
                }
                if (ins.op != Op::Invoke) continue;
                const MethodRef& callee = *ins.method;
                if (callee.name == "registerReceiver" && ins.regs.size() >= 2) {
                    size_t ri = ins.invoke_kind == InvokeKind::Static ? 0 : 1;
                    size_t fi = ri + 1;
                    const facts::Fact* rf =
                        ri < ins.regs.size()
                            ? scan.reg_fact(static_cast<int>(i), ins.regs[ri])
                            : nullptr;
                    const facts::Fact* ff =
                        fi < ins.regs.size()
                            ? scan.reg_fact(static_cast<int>(i), ins.regs[fi])
                            : nullptr;
                    if (rf && rf->type_desc &&
                        program.find_class(*rf->type_desc)) {
                        DynamicRegistration reg;
                        reg.receiver_class = *rf->type_desc;
                        reg.site_method = m.ref(cls_name);
                        reg.instruction_index = static_cast<int>(i);
                        if (ff && ff->filter_action) reg.action = *ff->filter_action;
                        graphs.dynamic_receivers.push_back(std::move(reg));
                    }
                }
                if (is_dispatch_api(callee.name)) {
                    auto reg = intent_arg_reg(ins);
                    if (reg) {
                        const facts::Fact* f =
                            scan.reg_fact(static_cast<int>(i), *reg);
                        if (f && f->intent.kind !=
                                     facts::IntentAbstract::Kind::None) {
                            graphs.dispatches.push_back(
                                IntentDispatch{m.ref(cls_name),
                                               static_cast<int>(i),
                                               callee.name, f->intent});
                        }
                    }
                }
            }
        }
    }
    return graphs;
}

Reachability::Reachability(const CallGraph& graph,
                           const std::vector<EntryPoint>& entries,
                           const InstantiationIndex& instantiations)
    : graph_(graph), instantiations_(instantiations) {
    std::deque<std::string> work;
    for (const auto& e : entries) {
        std::string key = e.method.key();
        entry_keys_.insert(key);
        if (reached_.insert(key).second) work.push_back(key);
    }
    while (!work.empty()) {
        std::string cur = work.front();
        work.pop_front();
        auto it = graph_.edges.find(cur);
        if (it == graph_.edges.end()) continue;
        for (const auto& edge : it->second) {
            if (reached_.insert(edge.callee).second) {
                parent_[edge.callee] = cur;
                work.push_back(edge.callee);
            }
        }
    }
}

bool Reachability::graph_reachable(const std::string& target_key) const {
    return reached_.count(target_key) > 0;
}

ReachabilityResult Reachability::query_key(const std::string& target_key) const {
    ReachabilityResult result;
    if (!graph_reachable(target_key)) return result;

    std::vector<std::string> witness{target_key};
    std::string cur = target_key;
    while (!entry_keys_.count(cur)) {
        auto it = parent_.find(cur);
        if (it == parent_.end()) break;
        cur = it->second;
        witness.push_back(cur);
    }
    std::reverse(witness.begin(), witness.end());

    const CallGraphNode* node = graph_.find(target_key);
    if (node && !node->external && !node->is_static &&
        !node->is_constructor && !node->component_class) {
        // instance dispatch on a plain class: require a reachable
        // instantiation of the class
        const std::string& cls = node->ref.class_desc;
        bool instantiated = false;
        auto it = instantiations_.sites.find(cls);
        if (it != instantiations_.sites.end()) {
            for (const auto& site : it->second) {
                if (reached_.count(site.method.key())) {
                    instantiated = true;
                    break;
                }
            }
        }
        if (!instantiated) {
            result.reachable = false;
            result.instantiated = false;
            result.witness = std::move(witness);
            return result;
        }
    }
    result.reachable = true;
    result.instantiated = true;
    result.witness = std::move(witness);
    return result;
}

ReachabilityResult Reachability::query(const MethodRef& target) const {
    return query_key(target.key());
}

ReachabilityResult backward_reachable(const CallGraph& graph,
                                      const std::vector<EntryPoint>& entries,
                                      const InstantiationIndex& instantiations,
                                      const MethodRef& site_method) {
    Reachability r(graph, entries, instantiations);
    return r.query(site_method);
}

std::string to_dot(const CallGraph& graph) {
    std::ostringstream os;
    os << "digraph callgraph {\n  node [shape=box,fontsize=9];\n";
    std::map<std::string, int> ids;
    int next = 0;
    auto id_of = [&](const std::string& key) {
        auto [it, inserted] = ids.emplace(key, next);
        if (inserted) ++next;
        return it->second;
    };
    for (const auto& [key, node] : graph.nodes) {
        os << "  n" << id_of(key) << " [label=\"" << key << "\"";
        if (node.external) os << ",style=dashed";
        os << "];\n";
    }
    for (const auto& [caller, edges] : graph.edges)
        for (const auto& e : edges) {
            os << "  n" << id_of(caller) << " -> n" << id_of(e.callee);
            if (e.kind == EdgeKind::ComponentTransition)
                os << " [color=blue,label=\"icc\"]";
            else if (e.kind == EdgeKind::CallbackInstantiation)
                os << " [color=gray,label=\"new\"]";
            os << ";\n";
        }
    os << "}\n";
    return os.str();
}

std::string to_dot(const Cfg& cfg) {
    std::ostringstream os;
    os << "digraph \"" << cfg.method.key() << "\" {\n  node [shape=box];\n";
    for (size_t b = 0; b < cfg.blocks.size(); ++b) {
        os << "  b" << b << " [label=\"B" << b << " [" << cfg.blocks[b].first
           << ".." << cfg.blocks[b].last << "]\"];\n";
        for (int s : cfg.blocks[b].succs)
            os << "  b" << b << " -> b" << s << ";\n";
    }
    os << "}\n";
    return os.str();
}

} // namespace bankscan::graph

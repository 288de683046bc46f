#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bankscan/local_facts.hpp"
#include "bankscan/resources.hpp"
#include "bankscan/smali.hpp"

namespace bankscan::graph {

struct BasicBlock {
    int first = 0; // instruction index range [first, last]
    int last = -1; // empty block when last < first
    std::vector<int> succs;
    std::vector<int> preds;

    int size() const { return last < first ? 0 : last - first + 1; }
};

struct Cfg {
    smali::MethodRef method;
    std::vector<BasicBlock> blocks;
    int entry = 0;
    std::vector<int> block_of; // instruction index → block id

    int edge_count() const {
        int n = 0;
        for (const auto& b : blocks) n += static_cast<int>(b.succs.size());
        return n;
    }
};

Cfg build_cfg(const smali::MethodDef& method, const std::string& class_desc);

enum class EdgeKind { Call, ComponentTransition, CallbackInstantiation };

struct CallEdge {
    std::string callee; // node key
    EdgeKind kind = EdgeKind::Call;
    int instruction_index = -1;
};

struct CallGraphNode {
    smali::MethodRef ref;
    bool external = false;
    bool is_static = false;
    bool is_constructor = false;
    bool component_class = false; // declared in the manifest
};

struct CallGraph {
    std::map<std::string, CallGraphNode> nodes;          // key → node
    std::map<std::string, std::vector<CallEdge>> edges;  // caller → edges

    void add_node(const smali::MethodRef& ref, bool external);
    void add_edge(const std::string& caller, const std::string& callee,
                  EdgeKind kind, int instruction_index);
    const CallGraphNode* find(const std::string& key) const {
        auto it = nodes.find(key);
        return it == nodes.end() ? nullptr : &it->second;
    }
};

enum class EntryKind { UserInput, SystemEvent };

struct EntryPoint {
    smali::MethodRef method;
    EntryKind kind = EntryKind::SystemEvent;
    std::string evidence;
};

struct DynamicRegistration {
    std::string receiver_class;
    smali::MethodRef site_method;
    int instruction_index = -1;
    std::optional<std::string> action;
};

struct InstantiationSite {
    smali::MethodRef method;
    int instruction_index = -1;
};

struct InstantiationIndex {
    std::map<std::string, std::vector<InstantiationSite>> sites; // class → sites

    bool instantiated(const std::string& class_desc) const {
        auto it = sites.find(class_desc);
        return it != sites.end() && !it->second.empty();
    }
};

struct IntentDispatch {
    smali::MethodRef method;
    int instruction_index = -1;
    std::string api; // startActivity, sendBroadcast, ...
    facts::IntentAbstract intent;
};

struct ProgramGraphs {
    std::map<std::string, Cfg> cfgs; // method key → CFG
    CallGraph call_graph;
    std::vector<EntryPoint> entry_points;
    InstantiationIndex instantiations;
    std::vector<DynamicRegistration> dynamic_receivers;
    std::vector<IntentDispatch> dispatches;
    facts::ConstFieldTable const_fields;
    std::map<std::string, std::vector<std::string>> subtype_children;
};

// Tags manifest components onto their ClassDefs.
void annotate_components(smali::SmaliProgram& program,
                         const res::ManifestInfo& manifest);

CallGraph build_call_graph(const smali::SmaliProgram& program,
                           const res::ManifestInfo& manifest);

std::vector<EntryPoint> find_entry_points(const smali::SmaliProgram& program,
                                          const res::ManifestInfo& manifest);

ProgramGraphs build_graphs(const smali::SmaliProgram& program,
                           const res::ManifestInfo& manifest);

struct ReachabilityResult {
    bool reachable = false;
    std::vector<std::string> witness; // node keys, entry first
    bool instantiated = true;         // false: suppressed as dead code
};

// Backward half of weakness detection: is a site reachable from an entry
// point, and (for instance methods of non-component classes) is the class
// instantiated in reachable code?
class Reachability {
public:
    Reachability(const CallGraph& graph, const std::vector<EntryPoint>& entries,
                 const InstantiationIndex& instantiations);

    ReachabilityResult query(const smali::MethodRef& target) const;
    ReachabilityResult query_key(const std::string& target_key) const;

    // Pure graph reachability, no instantiation filtering (oracle surface).
    bool graph_reachable(const std::string& target_key) const;

private:
    const CallGraph& graph_;
    const InstantiationIndex& instantiations_;
    std::map<std::string, std::string> parent_; // BFS tree (key → predecessor)
    std::set<std::string> reached_;
    std::set<std::string> entry_keys_;
};

ReachabilityResult backward_reachable(const CallGraph& graph,
                                      const std::vector<EntryPoint>& entries,
                                      const InstantiationIndex& instantiations,
                                      const smali::MethodRef& site_method);

// DOT renderings for --dump-graphs.
std::string to_dot(const CallGraph& graph);
std::string to_dot(const Cfg& cfg);

} // namespace bankscan::graph

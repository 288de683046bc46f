#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bankscan/graphs.hpp"
#include "bankscan/smali.hpp"
#include "bankscan/tagging.hpp"

namespace bankscan::taint {

struct SinkSpec {
    std::string class_desc;
    std::string method;
    std::string signature; // exact proto or "*"
    std::vector<int> tainted_args; // 0 = receiver, 1..n = parameters
    std::string weakness_type;     // taxonomy row id
    std::string category;          // "C2" | "C3"
};

struct SinkCatalog {
    std::vector<SinkSpec> entries;

    std::set<std::string> weakness_types() const {
        std::set<std::string> out;
        for (const auto& e : entries) out.insert(e.weakness_type);
        return out;
    }
};

SinkCatalog load_sink_catalog(); // builtin
SinkCatalog load_sink_catalog(const std::filesystem::path& path);
SinkCatalog parse_sink_catalog(const std::string& text, const std::string& what);

struct PathStep {
    std::string method_key;
    int index = -1;
    smali::SourceLoc loc;
    std::string text;
    bool channel_hop = false; // arrived via an intent-extra channel
};

struct FlowPath {
    tag::TaggedVariable source;
    SinkSpec sink;
    smali::MethodRef sink_method;
    int sink_index = -1;
    smali::SourceLoc sink_loc;
    std::vector<PathStep> steps; // first reads the source, last is the sink
    bool crosses_components = false;
    std::string weakness_type; // resolved (e.g. Text File vs SD Card)
};

struct TaintOptions {
    long budget = 2'000'000; // transfer applications per app
};

// Per-register origin sets, queryable per instruction (IN state).
using OriginSet = std::set<int>;

struct TaintResult {
    std::vector<FlowPath> flows;
    DiagnosticList diagnostics;
    bool budget_exceeded = false;

    std::vector<tag::TaggedVariable> sources; // origin id = index

    // method key → origins observed anywhere in the method
    std::map<std::string, OriginSet> labels_in_method;

    // method key → per-instruction IN state (register → origins)
    std::map<std::string, std::vector<std::map<int, OriginSet>>> in_states;

    // (component class, extra key) → origins sent through intent extras
    std::map<std::pair<std::string, std::string>, OriginSet> channels;

    bool arg_tainted(const std::string& method_key, int index, int reg) const {
        auto it = in_states.find(method_key);
        if (it == in_states.end()) return false;
        if (index < 0 || index >= static_cast<int>(it->second.size()))
            return false;
        auto rit = it->second[index].find(reg);
        return rit != it->second[index].end() && !rit->second.empty();
    }
    bool any_encryption_of_tainted_data = false; // Cipher doFinal/update hit
};

// Forward half of weakness detection: propagate labels from tagged sources
// through registers, fields, calls and intent extras; record a FlowPath for
// every sink invocation reached by a label.
TaintResult forward_taint(const smali::SmaliProgram& program,
                          const std::vector<tag::TaggedVariable>& sources,
                          const SinkCatalog& sinks,
                          const graph::ProgramGraphs& graphs,
                          const TaintOptions& options = {});

// Re-checks a reported flow by replaying its steps through the transfer
// rules; true when the sink argument is tainted at the final step.
bool replay_flow(const smali::SmaliProgram& program, const FlowPath& flow);

// Maps a tainted-argument position (0 = receiver) to the register at an
// invoke site; nullopt when the position does not exist.
std::optional<int> argument_register(const smali::Instruction& ins,
                                     int position);

} // namespace bankscan::taint

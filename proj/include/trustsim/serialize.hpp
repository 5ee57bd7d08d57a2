#pragma once

// File formats: counterexample reports, topologies, failure scripts, traces
// (JSON lines or CSV) and run summaries. Reals are written in their shortest
// round-trip form, so a value read back compares equal to the one written.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "trustsim/checker.hpp"
#include "trustsim/sim.hpp"

namespace trustsim::io {

using Json = nlohmann::ordered_json;

// Shortest decimal string that parses back to exactly `v`.
std::string format_real(double v);

Json params_to_json(const metrics::MetricParams& params);
metrics::MetricParams params_from_json(const Json& j);

// Simple states carry the alpha they were evaluated with.
Json state_to_json(const metrics::MetricState& state, const metrics::MetricParams& params);
metrics::MetricState state_from_json(metrics::MetricKind kind, const Json& j,
                                     metrics::MetricParams& params);

Json search_config_to_json(const checker::SearchConfig& config);
checker::SearchConfig search_config_from_json(const Json& j);

// {metric, params, requirement, config, trials_run, violations: [{state, ratings, reputations}]}
Json report_to_json(const checker::SearchReport& report);
checker::SearchReport report_from_json(const Json& j);

// {nodes: [ints], links: [{a, b, p}]}
Json topology_to_json(const sim::Topology& topology);
sim::Topology topology_from_json(const Json& j);

// [{tick, node, event: "fail" | "recover"}]
Json failures_to_json(const std::vector<sim::FailureEvent>& failures);
std::vector<sim::FailureEvent> failures_from_json(const Json& j);

Json sim_config_to_json(const sim::SimConfig& config);
sim::SimConfig sim_config_from_json(const Json& j);

enum class TraceFormat { jsonl, csv };

TraceFormat trace_format_from_string(const std::string& name);
std::string to_string(TraceFormat format);

Json trace_event_to_json(const sim::TraceEvent& event);
sim::TraceEvent trace_event_from_json(const Json& j);

// CSV columns: tick,kind,node,peer,seq,round,value_old,value_new
void write_trace(std::ostream& os, const std::vector<sim::TraceEvent>& trace, TraceFormat format);
std::vector<sim::TraceEvent> read_trace(std::istream& is, TraceFormat format);

// {final_parents, trust_tables, dio_count, rounds_completed}
Json summary_to_json(const sim::SimSummary& summary);

// Throws FormatError on I/O or parse failure.
Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace trustsim::io

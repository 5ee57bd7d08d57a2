#pragma once

// Deterministic discrete-event simulator of a DODAG-rooted sensor network in
// which every node rates its parent with the Simple Trust Metric.
//
// Time is a global integer tick. It advances by one for every packet hop and
// for every DIO; there is no wall clock. Trust rounds are counted by the root
// and advance each time it issues a DIO, either periodically (dio_period
// ticks after the previous one) or early, when the sequence numbers of the
// current round show that many packets are missing.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string_view>
#include <utility>
#include <vector>

#include "trustsim/metrics.hpp"

namespace trustsim::sim {

using NodeId = std::uint32_t;
inline constexpr NodeId kRoot = 0;

struct Link {
    NodeId a = 0;
    NodeId b = 0;
    double p = 1.0; // per-hop delivery probability
    friend bool operator==(const Link&, const Link&) = default;
};

struct Topology {
    std::vector<NodeId> nodes;
    std::vector<Link> links;

    // Structural checks only: root present, unique ids, known endpoints, no
    // self or duplicate links, probabilities in [0,1]. Throws TopologyError.
    void validate() const;
    std::vector<NodeId> neighbors(NodeId id) const;
    double delivery_probability(NodeId a, NodeId b) const;

    friend bool operator==(const Topology&, const Topology&) = default;
};

// Hop distance of every node from the root. Throws TopologyError naming the
// unreachable nodes when the topology is disconnected.
std::map<NodeId, std::uint32_t> hop_distances(const Topology& topology);

// Breadth-first layering: each non-root node gets the lowest-id neighbour one
// hop closer to the root.
std::map<NodeId, NodeId> build_initial_dodag(const Topology& topology);

enum class FailureKind { fail, recover };

// Scripted availability change, applied once the clock reaches `tick`.
struct FailureEvent {
    std::uint64_t tick = 0;
    NodeId node = 0;
    FailureKind kind = FailureKind::fail;
    friend bool operator==(const FailureEvent&, const FailureEvent&) = default;
};

struct SimConfig {
    double alpha = metrics::MetricParams::kDefaultAlpha;
    std::uint64_t rounds = 10;
    std::uint64_t packets_per_round = 10;
    std::uint64_t dio_period = 1000;       // ticks between periodic DIOs
    double loss_trigger_fraction = 0.0;    // 0 disables the loss trigger
    std::uint64_t seed = 1;
    double late_delivery_fraction = 0.0;
    std::vector<FailureEvent> failures;

    // Throws ConfigError.
    void validate() const;
    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct SimNode {
    NodeId id = 0;
    std::optional<NodeId> parent;     // empty while dormant
    std::vector<NodeId> candidates;   // neighbours closer to the root, ascending
    std::map<NodeId, metrics::SimpleState> trust_table;
    std::uint64_t seq_counter = 0;    // packets sent in the current round
    std::uint64_t current_round = 0;
};

using RoundKey = std::pair<NodeId, std::uint64_t>; // (source, stamped round)

struct RootState {
    std::uint64_t current_round = 0;
    std::uint64_t last_dio_tick = 0;
    std::map<RoundKey, std::uint64_t> received;
    std::map<RoundKey, std::uint64_t> highest_seq;
    // Packets credited to earlier rounds since the last DIO, per source.
    std::map<NodeId, std::uint64_t> late_since_dio;
};

enum class DioReason { periodic, loss };

std::string_view to_string(DioReason reason);

struct Dio {
    std::uint64_t round = 0;                     // the round being opened
    std::map<NodeId, std::uint64_t> delivered;   // on-time packets of round-1
    std::map<NodeId, std::uint64_t> late;        // late credits to round-2
    DioReason reason = DioReason::periodic;

    std::uint64_t delivered_for(NodeId id) const;
    std::uint64_t late_for(NodeId id) const;
};

enum class EventKind {
    packet_sent,
    packet_delivered,
    packet_lost,
    packet_late,
    dio_issued,
    trust_updated,
    parent_switched,
    dio_ignored,
    node_failed,
    node_recovered,
    node_dormant,
};

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view name);

// Payload fields used per kind:
//   packet-*         node=source, peer=next hop (sent) / failed hop (lost), seq, round
//   dio-issued       node=root, round=new round
//   trust-updated    node, peer=parent, round, value_old/new=trust
//   parent-switched  node, peer=new parent, value_old/new=parent ids
struct TraceEvent {
    std::uint64_t tick = 0;
    EventKind kind = EventKind::packet_sent;
    std::optional<NodeId> node;
    std::optional<NodeId> peer;
    std::optional<std::uint64_t> seq;
    std::optional<std::uint64_t> round;
    std::optional<double> value_old;
    std::optional<double> value_new;
    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

// Returns the DIO the root should issue at `now`, if any.
std::optional<Dio> maybe_trigger_dio(const RootState& root, const SimConfig& config,
                                     std::uint64_t now);

// Max-trust parent among available candidates; ties keep the current parent,
// then go to the lowest id. Empty when no candidate is available.
std::optional<NodeId> select_parent(const SimNode& node, const std::set<NodeId>& unavailable);

// Closes the node's round: rates the parent with the delivery rate, re-selects
// the parent and resets the sequence counter. Stale DIOs are ignored.
SimNode on_dio(const SimNode& node, const Dio& dio, const SimConfig& config,
               const std::set<NodeId>& unavailable, std::uint64_t tick,
               std::vector<TraceEvent>& trace);

// Immediate re-selection outside a round boundary. Leaves the node dormant
// when no candidate is available.
SimNode handle_parent_unavailable(const SimNode& node, const std::set<NodeId>& unavailable,
                                  std::uint64_t tick, std::vector<TraceEvent>& trace);

struct SimSummary {
    std::map<NodeId, std::optional<NodeId>> final_parents;
    std::map<NodeId, std::map<NodeId, metrics::SimpleState>> trust_tables;
    std::uint64_t dio_count = 0;
    std::uint64_t rounds_completed = 0;
};

class Simulation {
public:
    Simulation(Topology topology, SimConfig config);

    // Sends traffic until the root issues the next DIO, then delivers that
    // DIO to every node. No-op once config.rounds DIOs have been issued.
    void run_round();
    bool finished() const { return dio_count_ >= config_.rounds; }

    std::uint64_t tick() const { return tick_; }
    std::uint64_t dio_count() const { return dio_count_; }
    const RootState& root() const { return root_; }
    const std::map<NodeId, SimNode>& nodes() const { return nodes_; }
    const std::vector<TraceEvent>& trace() const { return trace_; }
    const std::vector<Dio>& dios() const { return dios_; }
    const std::set<NodeId>& unavailable() const { return unavailable_; }
    SimSummary summary() const;

private:
    struct HeldPacket {
        NodeId source;
        std::uint64_t seq;
        std::uint64_t round;
    };

    double draw();
    void send_packet(SimNode& node);
    void credit(NodeId source, std::uint64_t seq, std::uint64_t round);
    void issue_dio(Dio dio);
    void apply_failures_until(std::uint64_t tick);
    void apply_failure(const FailureEvent& event);
    void emit(TraceEvent event);

    Topology topology_;
    SimConfig config_;
    std::mt19937_64 rng_;
    std::uint64_t tick_ = 0;
    std::uint64_t dio_count_ = 0;
    RootState root_;
    std::map<NodeId, SimNode> nodes_;
    std::set<NodeId> unavailable_;
    std::vector<FailureEvent> pending_failures_; // sorted by tick, stable
    std::size_t next_failure_ = 0;
    std::vector<HeldPacket> held_;
    std::vector<TraceEvent> trace_;
    std::vector<Dio> dios_;
};

struct SimResult {
    std::vector<TraceEvent> trace;
    SimSummary summary;
    std::vector<Dio> dios;
};

SimResult run_simulation(const Topology& topology, const SimConfig& config);

} // namespace trustsim::sim

#include "trustsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "trustsim/errors.hpp"

namespace trustsim::sim {

namespace {

TraceEvent event_at(std::uint64_t tick, EventKind kind) {
    TraceEvent ev;
    ev.tick = tick;
    ev.kind = kind;
    return ev;
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

std::string join_ids(const std::vector<NodeId>& ids) {
    std::string out;
    for (auto id : ids) {
        if (!out.empty()) out += ", ";
        out += std::to_string(id);
    }
    return out;
}

} // namespace

// --- Topology --------------------------------------------------------------

void Topology::validate() const {
    std::set<NodeId> seen;
    for (auto id : nodes) {
        if (!seen.insert(id).second) {
            throw TopologyError("duplicate node id " + std::to_string(id));
        }
    }
    if (!seen.count(kRoot)) {
        throw TopologyError("topology has no root node 0");
    }
    std::set<std::pair<NodeId, NodeId>> edges;
    for (const auto& l : links) {
        if (l.a == l.b) {
            throw TopologyError("self-link on node " + std::to_string(l.a));
        }
        if (!seen.count(l.a) || !seen.count(l.b)) {
            throw TopologyError("link " + std::to_string(l.a) + "-" + std::to_string(l.b) +
                                " references an unknown node");
        }
        if (!is_probability(l.p)) {
            throw TopologyError("link " + std::to_string(l.a) + "-" + std::to_string(l.b) +
                                " has delivery probability outside [0,1]");
        }
        if (!edges.insert(std::minmax(l.a, l.b)).second) {
            throw TopologyError("duplicate link " + std::to_string(l.a) + "-" +
                                std::to_string(l.b));
        }
    }
}

std::vector<NodeId> Topology::neighbors(NodeId id) const {
    std::vector<NodeId> out;
    for (const auto& l : links) {
        if (l.a == id) out.push_back(l.b);
        if (l.b == id) out.push_back(l.a);
    }
    std::sort(out.begin(), out.end());
    return out;
}

double Topology::delivery_probability(NodeId a, NodeId b) const {
    for (const auto& l : links) {
        if ((l.a == a && l.b == b) || (l.a == b && l.b == a)) return l.p;
    }
    throw TopologyError("no link " + std::to_string(a) + "-" + std::to_string(b));
}

std::map<NodeId, std::uint32_t> hop_distances(const Topology& topology) {
    topology.validate();
    std::map<NodeId, std::uint32_t> dist{{kRoot, 0}};
    std::deque<NodeId> queue{kRoot};
    while (!queue.empty()) {
        const auto cur = queue.front();
        queue.pop_front();
        for (auto n : topology.neighbors(cur)) {
            if (!dist.count(n)) {
                dist[n] = dist[cur] + 1;
                queue.push_back(n);
            }
        }
    }
    std::vector<NodeId> unreachable;
    for (auto id : topology.nodes) {
        if (!dist.count(id)) unreachable.push_back(id);
    }
    if (!unreachable.empty()) {
        std::sort(unreachable.begin(), unreachable.end());
        throw TopologyError("topology is disconnected; unreachable nodes: " + join_ids(unreachable));
    }
    return dist;
}

std::map<NodeId, NodeId> build_initial_dodag(const Topology& topology) {
    const auto dist = hop_distances(topology);
    std::map<NodeId, NodeId> parents;
    for (const auto& [id, d] : dist) {
        if (id == kRoot) continue;
        for (auto n : topology.neighbors(id)) { // ascending, so the first hit is the lowest id
            if (dist.at(n) + 1 == d) {
                parents[id] = n;
                break;
            }
        }
    }
    return parents;
}

// --- Config ----------------------------------------------------------------

void SimConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    if (rounds < 1) throw ConfigError("rounds must be at least 1");
    if (packets_per_round < 1) throw ConfigError("packets per round must be at least 1");
    if (dio_period < 1) throw ConfigError("dio period must be at least 1 tick");
    if (!is_probability(loss_trigger_fraction)) {
        throw ConfigError("loss trigger fraction must lie in [0,1]");
    }
    if (!is_probability(late_delivery_fraction)) {
        throw ConfigError("late delivery fraction must lie in [0,1]");
    }
    for (const auto& f : failures) {
        if (f.node == kRoot) throw ConfigError("the root cannot be scripted to fail");
    }
}

std::string_view to_string(DioReason reason) {
    return reason == DioReason::periodic ? "periodic" : "loss";
}

std::uint64_t Dio::delivered_for(NodeId id) const {
    const auto it = delivered.find(id);
    return it == delivered.end() ? 0 : it->second;
}

std::uint64_t Dio::late_for(NodeId id) const {
    const auto it = late.find(id);
    return it == late.end() ? 0 : it->second;
}

namespace {

constexpr std::pair<EventKind, std::string_view> kEventNames[] = {
    {EventKind::packet_sent, "packet-sent"},
    {EventKind::packet_delivered, "packet-delivered"},
    {EventKind::packet_lost, "packet-lost"},
    {EventKind::packet_late, "packet-late"},
    {EventKind::dio_issued, "dio-issued"},
    {EventKind::trust_updated, "trust-updated"},
    {EventKind::parent_switched, "parent-switched"},
    {EventKind::dio_ignored, "dio-ignored"},
    {EventKind::node_failed, "node-failed"},
    {EventKind::node_recovered, "node-recovered"},
    {EventKind::node_dormant, "node-dormant"},
};

} // namespace

std::string_view to_string(EventKind kind) {
    for (const auto& [k, name] : kEventNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

EventKind event_kind_from_string(std::string_view name) {
    for (const auto& [k, n] : kEventNames) {
        if (n == name) return k;
    }
    throw FormatError("unknown trace event kind '" + std::string(name) + "'");
}

// --- Root ------------------------------------------------------------------

std::optional<Dio> maybe_trigger_dio(const RootState& root, const SimConfig& config,
                                     std::uint64_t now) {
    std::optional<DioReason> reason;
    if (now >= root.last_dio_tick + config.dio_period) {
        reason = DioReason::periodic;
    } else if (config.loss_trigger_fraction > 0.0) {
        for (const auto& [key, highest] : root.highest_seq) {
            if (key.second != root.current_round) continue;
            const auto it = root.received.find(key);
            const double got = it == root.received.end() ? 0.0 : static_cast<double>(it->second);
            const double expected = static_cast<double>(highest) + 1.0;
            if (got < config.loss_trigger_fraction * expected) {
                reason = DioReason::loss;
                break;
            }
        }
    }
    if (!reason) return std::nullopt;

    Dio dio;
    dio.round = root.current_round + 1;
    dio.reason = *reason;
    for (const auto& [key, count] : root.received) {
        if (key.second == root.current_round) dio.delivered[key.first] = count;
    }
    dio.late = root.late_since_dio;
    return dio;
}

// --- Nodes -----------------------------------------------------------------

std::optional<NodeId> select_parent(const SimNode& node, const std::set<NodeId>& unavailable) {
    std::optional<NodeId> best;
    double best_trust = -1.0;
    for (auto c : node.candidates) { // ascending, so strict > keeps the lowest id on ties
        if (unavailable.count(c)) continue;
        const double t = node.trust_table.at(c).trust;
        if (t > best_trust) {
            best = c;
            best_trust = t;
        }
    }
    if (best && node.parent && *node.parent != *best && !unavailable.count(*node.parent) &&
        node.trust_table.at(*node.parent).trust == best_trust) {
        return node.parent;
    }
    return best;
}

namespace {

void switch_parent(SimNode& node, std::optional<NodeId> next, std::uint64_t tick,
                   std::vector<TraceEvent>& trace) {
    if (next == node.parent) return;
    TraceEvent ev = event_at(tick, next ? EventKind::parent_switched : EventKind::node_dormant);
    ev.node = node.id;
    ev.peer = next;
    if (node.parent) ev.value_old = static_cast<double>(*node.parent);
    if (next) ev.value_new = static_cast<double>(*next);
    node.parent = next;
    trace.push_back(ev);
}

} // namespace

SimNode on_dio(const SimNode& node, const Dio& dio, const SimConfig& config,
               const std::set<NodeId>& unavailable, std::uint64_t tick,
               std::vector<TraceEvent>& trace) {
    if (dio.round <= node.current_round) {
        TraceEvent ev = event_at(tick, EventKind::dio_ignored);
        ev.node = node.id;
        ev.round = dio.round;
        trace.push_back(ev);
        return node;
    }
    SimNode next = node;
    const std::uint64_t sent = node.seq_counter;
    if (sent > 0 && node.parent) {
        // Late credits for the round before are counted here, once; they
        // can push the total above this round's sends, hence the cap.
        const std::uint64_t delivered =
            std::min(dio.delivered_for(node.id) + dio.late_for(node.id), sent);
        const auto xi = metrics::delivery_rate(delivered, sent);
        const metrics::MetricParams params{config.alpha, metrics::MetricParams::kDefaultCapacity};
        for (auto& [candidate, state] : next.trust_table) {
            const bool is_parent = candidate == *node.parent;
            const double before = state.trust;
            state = metrics::simple_update(state, xi, params, is_parent);
            if (is_parent) {
                TraceEvent ev = event_at(tick, EventKind::trust_updated);
                ev.node = node.id;
                ev.peer = candidate;
                ev.round = dio.round;
                ev.value_old = before;
                ev.value_new = state.trust;
                trace.push_back(ev);
            }
        }
    }
    switch_parent(next, select_parent(next, unavailable), tick, trace);
    next.seq_counter = 0;
    next.current_round = dio.round;
    return next;
}

SimNode handle_parent_unavailable(const SimNode& node, const std::set<NodeId>& unavailable,
                                  std::uint64_t tick, std::vector<TraceEvent>& trace) {
    SimNode next = node;
    switch_parent(next, select_parent(next, unavailable), tick, trace);
    return next;
}

// --- Simulation ------------------------------------------------------------

Simulation::Simulation(Topology topology, SimConfig config)
    : topology_(std::move(topology)), config_(std::move(config)), rng_(config_.seed) {
    config_.validate();
    const auto dist = hop_distances(topology_);
    const auto parents = build_initial_dodag(topology_);
    std::set<NodeId> known(topology_.nodes.begin(), topology_.nodes.end());
    for (const auto& f : config_.failures) {
        if (!known.count(f.node)) {
            throw ConfigError("failure event references unknown node " + std::to_string(f.node));
        }
    }
    for (const auto& [id, d] : dist) {
        if (id == kRoot) continue;
        SimNode n;
        n.id = id;
        n.parent = parents.at(id);
        for (auto nb : topology_.neighbors(id)) {
            if (dist.at(nb) < d) {
                n.candidates.push_back(nb);
                n.trust_table[nb] = metrics::simple_init();
            }
        }
        nodes_.emplace(id, std::move(n));
    }
    pending_failures_ = config_.failures;
    std::stable_sort(pending_failures_.begin(), pending_failures_.end(),
                     [](const FailureEvent& a, const FailureEvent& b) { return a.tick < b.tick; });
}

double Simulation::draw() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

void Simulation::emit(TraceEvent event) { trace_.push_back(event); }

void Simulation::send_packet(SimNode& node) {
    const std::uint64_t seq = node.seq_counter++;
    const std::uint64_t round = node.current_round;
    {
        TraceEvent ev = event_at(tick_, EventKind::packet_sent);
        ev.node = node.id;
        ev.peer = node.parent;
        ev.seq = seq;
        ev.round = round;
        emit(ev);
    }
    auto lost_at = [&](std::optional<NodeId> hop) {
        TraceEvent ev = event_at(tick_, EventKind::packet_lost);
        ev.node = node.id;
        ev.peer = hop;
        ev.seq = seq;
        ev.round = round;
        emit(ev);
    };

    NodeId hop = node.id;
    while (true) {
        const auto& sender = nodes_.at(hop);
        if (!sender.parent) { // dormant relay
            lost_at(hop);
            return;
        }
        const NodeId next = *sender.parent;
        ++tick_;
        const bool survived = draw() < topology_.delivery_probability(hop, next);
        if (!survived || unavailable_.count(next)) {
            lost_at(next);
            return;
        }
        if (next == kRoot) break;
        hop = next;
    }

    if (config_.late_delivery_fraction > 0.0 && draw() < config_.late_delivery_fraction) {
        held_.push_back(HeldPacket{node.id, seq, round});
        return;
    }
    credit(node.id, seq, round);
    TraceEvent ev = event_at(tick_, EventKind::packet_delivered);
    ev.node = node.id;
    ev.peer = kRoot;
    ev.seq = seq;
    ev.round = round;
    emit(ev);
}

void Simulation::credit(NodeId source, std::uint64_t seq, std::uint64_t round) {
    const RoundKey key{source, round};
    ++root_.received[key];
    auto [it, inserted] = root_.highest_seq.emplace(key, seq);
    if (!inserted) it->second = std::max(it->second, seq);
}

void Simulation::issue_dio(Dio dio) {
    ++tick_;
    {
        TraceEvent ev = event_at(tick_, EventKind::dio_issued);
        ev.node = kRoot;
        ev.round = dio.round;
        emit(ev);
    }
    root_.current_round = dio.round;
    root_.last_dio_tick = tick_;
    root_.late_since_dio.clear();
    ++dio_count_;

    for (auto& [id, node] : nodes_) {
        node = on_dio(node, dio, config_, unavailable_, tick_, trace_);
    }
    dios_.push_back(std::move(dio));

    // Held packets reach the root now and count towards their stamped round.
    for (const auto& p : held_) {
        credit(p.source, p.seq, p.round);
        ++root_.late_since_dio[p.source];
        TraceEvent ev = event_at(tick_, EventKind::packet_late);
        ev.node = p.source;
        ev.peer = kRoot;
        ev.seq = p.seq;
        ev.round = p.round;
        emit(ev);
    }
    held_.clear();

    const std::uint64_t keep_from = root_.current_round == 0 ? 0 : root_.current_round - 1;
    std::erase_if(root_.received, [&](const auto& kv) { return kv.first.second < keep_from; });
    std::erase_if(root_.highest_seq, [&](const auto& kv) { return kv.first.second < keep_from; });
}

void Simulation::apply_failure(const FailureEvent& event) {
    TraceEvent ev = event_at(tick_, event.kind == FailureKind::fail ? EventKind::node_failed
                                                          : EventKind::node_recovered);
    ev.node = event.node;
    emit(ev);
    if (event.kind == FailureKind::fail) {
        if (!unavailable_.insert(event.node).second) return;
        for (auto& [id, node] : nodes_) {
            if (node.parent == event.node) {
                node = handle_parent_unavailable(node, unavailable_, tick_, trace_);
            }
        }
    } else {
        if (!unavailable_.erase(event.node)) return;
        // Dormant nodes wake up as soon as a candidate is back; everyone else
        // waits for the next round boundary.
        for (auto& [id, node] : nodes_) {
            if (!node.parent) {
                node = handle_parent_unavailable(node, unavailable_, tick_, trace_);
            }
        }
    }
}

void Simulation::apply_failures_until(std::uint64_t tick) {
    while (next_failure_ < pending_failures_.size() &&
           pending_failures_[next_failure_].tick <= tick) {
        apply_failure(pending_failures_[next_failure_++]);
    }
}

void Simulation::run_round() {
    if (finished()) return;
    apply_failures_until(tick_);
    const std::uint64_t opened = dio_count_;
    while (dio_count_ == opened) {
        bool sent_any = false;
        for (auto& [id, node] : nodes_) {
            if (unavailable_.count(id) || !node.parent ||
                node.seq_counter >= config_.packets_per_round) {
                continue;
            }
            send_packet(node);
            sent_any = true;
            apply_failures_until(tick_);
            if (auto dio = maybe_trigger_dio(root_, config_, tick_)) {
                issue_dio(std::move(*dio));
                return;
            }
        }
        if (sent_any) continue;

        // Nothing left to send this round: jump to the next scripted failure
        // (it may wake a node up) or to the periodic DIO deadline.
        const std::uint64_t deadline = root_.last_dio_tick + config_.dio_period;
        if (next_failure_ < pending_failures_.size() &&
            pending_failures_[next_failure_].tick < deadline) {
            tick_ = std::max(tick_, pending_failures_[next_failure_].tick);
            apply_failures_until(tick_);
            continue;
        }
        tick_ = std::max(tick_, deadline);
        if (auto dio = maybe_trigger_dio(root_, config_, tick_)) {
            issue_dio(std::move(*dio));
        }
    }
}

SimSummary Simulation::summary() const {
    SimSummary s;
    for (const auto& [id, node] : nodes_) {
        s.final_parents[id] = node.parent;
        s.trust_tables[id] = node.trust_table;
    }
    s.dio_count = dio_count_;
    s.rounds_completed = dio_count_;
    return s;
}

SimResult run_simulation(const Topology& topology, const SimConfig& config) {
    Simulation sim(topology, config);
    while (!sim.finished()) {
        sim.run_round();
    }
    return SimResult{sim.trace(), sim.summary(), sim.dios()};
}

} // namespace trustsim::sim

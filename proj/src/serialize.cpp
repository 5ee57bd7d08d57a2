#include "trustsim/serialize.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "trustsim/errors.hpp"

namespace trustsim::io {

using metrics::MetricKind;

namespace {

template <typename T>
T get_field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) {
        throw FormatError(std::string("missing field '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("field '") + key + "': " + e.what());
    }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
    return get_field<T>(j, key);
}

std::vector<double> reals(const Json& j, const char* key) {
    return get_field<std::vector<double>>(j, key);
}

} // namespace

std::string format_real(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

Json params_to_json(const metrics::MetricParams& params) {
    return Json{{"alpha", params.alpha}, {"capacity", params.capacity}};
}

metrics::MetricParams params_from_json(const Json& j) {
    metrics::MetricParams p;
    p.alpha = get_or(j, "alpha", p.alpha);
    p.capacity = get_or(j, "capacity", p.capacity);
    return p;
}

Json state_to_json(const metrics::MetricState& state, const metrics::MetricParams& params) {
    return std::visit(
        [&](const auto& s) -> Json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, metrics::SimpleState>) {
                return Json{{"trust", s.trust}, {"round", s.round}, {"alpha", params.alpha}};
            } else if constexpr (std::is_same_v<T, metrics::WtmState>) {
                return Json{{"ratings", std::vector<double>(s.ratings.begin(), s.ratings.end())},
                            {"capacity", s.capacity}};
            } else {
                return Json{{"p1", s.positive}, {"p2", s.negative}};
            }
        },
        state);
}

metrics::MetricState state_from_json(MetricKind kind, const Json& j,
                                     metrics::MetricParams& params) {
    switch (kind) {
    case MetricKind::simple: {
        metrics::SimpleState s;
        s.trust = get_field<double>(j, "trust");
        s.round = get_or<std::uint64_t>(j, "round", 0);
        params.alpha = get_or(j, "alpha", params.alpha);
        return s;
    }
    case MetricKind::wtm: {
        metrics::WtmState s;
        const auto rs = reals(j, "ratings");
        s.ratings.assign(rs.begin(), rs.end());
        s.capacity = get_or(j, "capacity", params.capacity);
        return s;
    }
    case MetricKind::wses:
        return metrics::WsesState{get_field<double>(j, "p1"), get_field<double>(j, "p2")};
    }
    throw FormatError("unknown metric kind");
}

Json search_config_to_json(const checker::SearchConfig& c) {
    return Json{{"mode", checker::to_string(c.mode)},
                {"trials", c.trials},
                {"seed", c.seed},
                {"grid_step", c.grid_step},
                {"depth", c.depth},
                {"random_depth", c.random_depth},
                {"sample_alpha", c.sample_alpha}};
}

checker::SearchConfig search_config_from_json(const Json& j) {
    checker::SearchConfig c;
    c.mode = checker::search_mode_from_string(get_field<std::string>(j, "mode"));
    c.trials = get_or(j, "trials", c.trials);
    c.seed = get_or(j, "seed", c.seed);
    c.grid_step = get_or(j, "grid_step", c.grid_step);
    c.depth = get_or(j, "depth", c.depth);
    c.random_depth = get_or(j, "random_depth", c.random_depth);
    c.sample_alpha = get_or(j, "sample_alpha", c.sample_alpha);
    return c;
}

Json report_to_json(const checker::SearchReport& report) {
    Json violations = Json::array();
    for (const auto& cx : report.violations) {
        violations.push_back(Json{{"state", state_to_json(cx.state, cx.params)},
                                  {"ratings", cx.ratings},
                                  {"reputations", cx.reputations}});
    }
    return Json{{"metric", metrics::to_string(report.metric.kind)},
                {"params", params_to_json(report.metric.params)},
                {"requirement", checker::to_string(report.requirement)},
                {"config", search_config_to_json(report.config)},
                {"trials_run", report.trials_run},
                {"violations", std::move(violations)}};
}

checker::SearchReport report_from_json(const Json& j) {
    checker::SearchReport r;
    try {
        r.metric.kind = metrics::metric_kind_from_string(get_field<std::string>(j, "metric"));
        r.requirement = checker::requirement_from_string(get_field<std::string>(j, "requirement"));
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(e.what());
    }
    r.metric.params = params_from_json(get_field<Json>(j, "params"));
    r.config = search_config_from_json(get_field<Json>(j, "config"));
    r.trials_run = get_field<std::uint64_t>(j, "trials_run");
    for (const auto& v : get_field<Json>(j, "violations")) {
        checker::Counterexample cx;
        cx.requirement = r.requirement;
        cx.params = r.metric.params;
        cx.state = state_from_json(r.metric.kind, get_field<Json>(v, "state"), cx.params);
        cx.ratings = reals(v, "ratings");
        cx.reputations = reals(v, "reputations");
        r.violations.push_back(std::move(cx));
    }
    return r;
}

Json topology_to_json(const sim::Topology& topology) {
    Json links = Json::array();
    for (const auto& l : topology.links) {
        links.push_back(Json{{"a", l.a}, {"b", l.b}, {"p", l.p}});
    }
    return Json{{"nodes", topology.nodes}, {"links", std::move(links)}};
}

sim::Topology topology_from_json(const Json& j) {
    sim::Topology t;
    t.nodes = get_field<std::vector<sim::NodeId>>(j, "nodes");
    for (const auto& l : get_field<Json>(j, "links")) {
        t.links.push_back(sim::Link{get_field<sim::NodeId>(l, "a"), get_field<sim::NodeId>(l, "b"),
                                    get_field<double>(l, "p")});
    }
    return t;
}

Json failures_to_json(const std::vector<sim::FailureEvent>& failures) {
    Json out = Json::array();
    for (const auto& f : failures) {
        out.push_back(Json{{"tick", f.tick},
                           {"node", f.node},
                           {"event", f.kind == sim::FailureKind::fail ? "fail" : "recover"}});
    }
    return out;
}

std::vector<sim::FailureEvent> failures_from_json(const Json& j) {
    if (!j.is_array()) throw FormatError("failure script must be a JSON array");
    std::vector<sim::FailureEvent> out;
    for (const auto& f : j) {
        const auto event = get_field<std::string>(f, "event");
        if (event != "fail" && event != "recover") {
            throw FormatError("failure event must be 'fail' or 'recover', got '" + event + "'");
        }
        out.push_back(sim::FailureEvent{get_field<std::uint64_t>(f, "tick"),
                                        get_field<sim::NodeId>(f, "node"),
                                        event == "fail" ? sim::FailureKind::fail
                                                        : sim::FailureKind::recover});
    }
    return out;
}

Json sim_config_to_json(const sim::SimConfig& c) {
    return Json{{"alpha", c.alpha},
                {"rounds", c.rounds},
                {"packets_per_round", c.packets_per_round},
                {"dio_period", c.dio_period},
                {"loss_trigger_fraction", c.loss_trigger_fraction},
                {"seed", c.seed},
                {"late_delivery_fraction", c.late_delivery_fraction},
                {"failures", failures_to_json(c.failures)}};
}

sim::SimConfig sim_config_from_json(const Json& j) {
    sim::SimConfig c;
    c.alpha = get_or(j, "alpha", c.alpha);
    c.rounds = get_or(j, "rounds", c.rounds);
    c.packets_per_round = get_or(j, "packets_per_round", c.packets_per_round);
    c.dio_period = get_or(j, "dio_period", c.dio_period);
    c.loss_trigger_fraction = get_or(j, "loss_trigger_fraction", c.loss_trigger_fraction);
    c.seed = get_or(j, "seed", c.seed);
    c.late_delivery_fraction = get_or(j, "late_delivery_fraction", c.late_delivery_fraction);
    if (j.contains("failures")) c.failures = failures_from_json(j.at("failures"));
    return c;
}

TraceFormat trace_format_from_string(const std::string& name) {
    if (name == "jsonl") return TraceFormat::jsonl;
    if (name == "csv") return TraceFormat::csv;
    throw FormatError("unknown trace format '" + name + "'");
}

std::string to_string(TraceFormat format) {
    return format == TraceFormat::jsonl ? "jsonl" : "csv";
}

Json trace_event_to_json(const sim::TraceEvent& e) {
    Json j{{"tick", e.tick}, {"kind", sim::to_string(e.kind)}};
    if (e.node) j["node"] = *e.node;
    if (e.peer) j["peer"] = *e.peer;
    if (e.seq) j["seq"] = *e.seq;
    if (e.round) j["round"] = *e.round;
    if (e.value_old) j["value_old"] = *e.value_old;
    if (e.value_new) j["value_new"] = *e.value_new;
    return j;
}

sim::TraceEvent trace_event_from_json(const Json& j) {
    sim::TraceEvent e;
    e.tick = get_field<std::uint64_t>(j, "tick");
    e.kind = sim::event_kind_from_string(get_field<std::string>(j, "kind"));
    if (j.contains("node")) e.node = get_field<sim::NodeId>(j, "node");
    if (j.contains("peer")) e.peer = get_field<sim::NodeId>(j, "peer");
    if (j.contains("seq")) e.seq = get_field<std::uint64_t>(j, "seq");
    if (j.contains("round")) e.round = get_field<std::uint64_t>(j, "round");
    if (j.contains("value_old")) e.value_old = get_field<double>(j, "value_old");
    if (j.contains("value_new")) e.value_new = get_field<double>(j, "value_new");
    return e;
}

namespace {

template <typename T>
void csv_cell(std::ostream& os, const std::optional<T>& v) {
    os << ',';
    if (!v) return;
    if constexpr (std::is_floating_point_v<T>) {
        os << format_real(*v);
    } else {
        os << *v;
    }
}

template <typename T>
std::optional<T> parse_cell(const std::string& cell) {
    if (cell.empty()) return std::nullopt;
    T value{};
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
        throw FormatError("bad CSV cell '" + cell + "'");
    }
    return value;
}

constexpr const char* kCsvHeader = "tick,kind,node,peer,seq,round,value_old,value_new";

} // namespace

void write_trace(std::ostream& os, const std::vector<sim::TraceEvent>& trace, TraceFormat format) {
    if (format == TraceFormat::jsonl) {
        for (const auto& e : trace) {
            os << trace_event_to_json(e).dump() << '\n';
        }
        return;
    }
    os << kCsvHeader << '\n';
    for (const auto& e : trace) {
        os << e.tick << ',' << sim::to_string(e.kind);
        csv_cell(os, e.node);
        csv_cell(os, e.peer);
        csv_cell(os, e.seq);
        csv_cell(os, e.round);
        csv_cell(os, e.value_old);
        csv_cell(os, e.value_new);
        os << '\n';
    }
}

std::vector<sim::TraceEvent> read_trace(std::istream& is, TraceFormat format) {
    std::vector<sim::TraceEvent> out;
    std::string line;
    if (format == TraceFormat::jsonl) {
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            try {
                out.push_back(trace_event_from_json(Json::parse(line)));
            } catch (const nlohmann::json::exception& e) {
                throw FormatError(std::string("bad trace line: ") + e.what());
            }
        }
        return out;
    }
    if (!std::getline(is, line) || line != kCsvHeader) {
        throw FormatError("CSV trace is missing its header");
    }
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (cells.size() != 8) throw FormatError("CSV trace row needs 8 columns: " + line);
        sim::TraceEvent e;
        e.tick = parse_cell<std::uint64_t>(cells[0]).value_or(0);
        e.kind = sim::event_kind_from_string(cells[1]);
        e.node = parse_cell<sim::NodeId>(cells[2]);
        e.peer = parse_cell<sim::NodeId>(cells[3]);
        e.seq = parse_cell<std::uint64_t>(cells[4]);
        e.round = parse_cell<std::uint64_t>(cells[5]);
        e.value_old = parse_cell<double>(cells[6]);
        e.value_new = parse_cell<double>(cells[7]);
        out.push_back(e);
    }
    return out;
}

Json summary_to_json(const sim::SimSummary& summary) {
    Json parents = Json::object();
    for (const auto& [id, parent] : summary.final_parents) {
        parents[std::to_string(id)] = parent ? Json(*parent) : Json(nullptr);
    }
    Json tables = Json::object();
    for (const auto& [id, table] : summary.trust_tables) {
        Json row = Json::object();
        for (const auto& [candidate, state] : table) {
            row[std::to_string(candidate)] = state.trust;
        }
        tables[std::to_string(id)] = std::move(row);
    }
    return Json{{"final_parents", std::move(parents)},
                {"trust_tables", std::move(tables)},
                {"dio_count", summary.dio_count},
                {"rounds_completed", summary.rounds_completed}};
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << text;
    if (!out) throw FormatError("write failed for " + path.string());
}

} // namespace trustsim::io

#include "trustsim/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "trustsim/checker.hpp"
#include "trustsim/errors.hpp"
#include "trustsim/serialize.hpp"
#include "trustsim/sim.hpp"

#ifndef TRUSTSIM_VERSION
#define TRUSTSIM_VERSION "0.0.0"
#endif

namespace trustsim::cli {

namespace fs = std::filesystem;
using io::Json;

std::string tool_version() { return TRUSTSIM_VERSION; }

namespace {

Json manifest(const std::string& command, Json config, std::uint64_t seed) {
    return Json{{"command", command},
                {"config", std::move(config)},
                {"seed", seed},
                {"tool_version", tool_version()}};
}

// --- check -------------------------------------------------------------------

struct CheckOptions {
    std::string metric = "simple";
    std::string requirement = "r1";
    std::string mode = "random";
    metrics::MetricParams params;
    checker::SearchConfig search;
    std::string out;
};

Json to_json(const CheckOptions& o) {
    return Json{{"metric", o.metric},
                {"requirement", o.requirement},
                {"params", io::params_to_json(o.params)},
                {"search", io::search_config_to_json(o.search)},
                {"out", o.out}};
}

CheckOptions check_options_from_json(const Json& j) {
    CheckOptions o;
    o.metric = j.at("metric").get<std::string>();
    o.requirement = j.at("requirement").get<std::string>();
    o.params = io::params_from_json(j.at("params"));
    o.search = io::search_config_from_json(j.at("search"));
    o.mode = std::string(checker::to_string(o.search.mode));
    o.out = j.value("out", std::string{});
    return o;
}

void emit_document(const Json& doc, const std::string& path, std::ostream& out) {
    if (path.empty()) {
        out << doc.dump(2) << '\n';
    } else {
        io::write_text_file(path, doc.dump(2) + "\n");
    }
}

int execute_check(const CheckOptions& o, std::ostream& out, std::ostream& err) {
    const checker::MetricUnderTest metric{metrics::metric_kind_from_string(o.metric), o.params};
    const auto req = checker::requirement_from_string(o.requirement);
    metric.params.validate();
    o.search.validate();

    const auto m = manifest("check", to_json(o), o.search.seed);
    if (o.out.empty()) {
        err << m.dump() << '\n';
    } else {
        io::write_text_file(o.out + ".manifest.json", m.dump(2) + "\n");
    }

    const auto report = checker::search_counterexamples(metric, req, o.search);
    for (const auto& cx : report.violations) {
        if (checker::replay(cx, metric) != checker::Verdict::violated) {
            throw CorruptCounterexampleError("reported violation replays as holding");
        }
    }
    emit_document(io::report_to_json(report), o.out, out);

    const bool expected = checker::expected_to_hold(metric.kind, req);
    const bool held = report.violations.empty();
    err << o.metric << ' ' << o.requirement << ": " << report.trials_run << " trials, "
        << report.violations.size() << " violations; expected "
        << (expected ? "holds" : "violated") << ", observed " << (held ? "holds" : "violated")
        << '\n';
    if (held != expected) {
        err << "finding: result diverges from the expected requirement table\n";
        return kExitFinding;
    }
    return kExitOk;
}

// --- simulate ----------------------------------------------------------------

struct SimulateOptions {
    std::string topology_file;
    std::string failures_file;
    sim::SimConfig config;
    std::string trace_format = "jsonl";
    std::string out_dir = ".";
    Json topology; // resolved contents, recorded in the manifest
};

Json to_json(const SimulateOptions& o) {
    return Json{{"topology_file", o.topology_file},
                {"failures_file", o.failures_file},
                {"topology", o.topology},
                {"sim", io::sim_config_to_json(o.config)},
                {"trace_format", o.trace_format},
                {"out_dir", o.out_dir}};
}

SimulateOptions simulate_options_from_json(const Json& j) {
    SimulateOptions o;
    o.topology_file = j.value("topology_file", std::string{});
    o.failures_file = j.value("failures_file", std::string{});
    o.topology = j.at("topology");
    o.config = io::sim_config_from_json(j.at("sim"));
    o.trace_format = j.value("trace_format", std::string{"jsonl"});
    o.out_dir = j.value("out_dir", std::string{"."});
    return o;
}

int execute_simulate(SimulateOptions o, std::ostream& out, std::ostream& err) {
    if (o.topology.is_null()) {
        o.topology = io::read_json_file(o.topology_file);
    }
    if (!o.failures_file.empty() && o.config.failures.empty()) {
        o.config.failures = io::failures_from_json(io::read_json_file(o.failures_file));
    }
    const auto topology = io::topology_from_json(o.topology);
    const auto format = io::trace_format_from_string(o.trace_format);
    o.config.validate();
    hop_distances(topology); // surfaces topology errors before any output is written

    const fs::path dir(o.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw FormatError("cannot create " + dir.string() + ": " + ec.message());
    io::write_text_file(dir / "manifest.json",
                        manifest("simulate", to_json(o), o.config.seed).dump(2) + "\n");

    const auto result = sim::run_simulation(topology, o.config);

    std::ostringstream trace;
    io::write_trace(trace, result.trace, format);
    io::write_text_file(dir / ("trace." + o.trace_format), trace.str());
    const auto summary = io::summary_to_json(result.summary);
    io::write_text_file(dir / "summary.json", summary.dump(2) + "\n");

    out << summary.dump(2) << '\n';
    err << "wrote " << result.trace.size() << " trace events to " << dir.string() << '\n';
    return kExitOk;
}

// --- report ------------------------------------------------------------------

struct ReportOptions {
    std::uint64_t trials = 20000;
    std::uint64_t seed = 1;
    double alpha = metrics::MetricParams::kDefaultAlpha;
    std::string format = "text";
    std::string out;
};

Json to_json(const ReportOptions& o) {
    return Json{{"trials", o.trials},
                {"seed", o.seed},
                {"alpha", o.alpha},
                {"format", o.format},
                {"out", o.out}};
}

ReportOptions report_options_from_json(const Json& j) {
    ReportOptions o;
    o.trials = j.value("trials", o.trials);
    o.seed = j.value("seed", o.seed);
    o.alpha = j.value("alpha", o.alpha);
    o.format = j.value("format", o.format);
    o.out = j.value("out", std::string{});
    return o;
}

struct RowSpec {
    metrics::MetricKind kind;
    const char* rating_range;
    const char* representation;
    const char* threshold;
    const char* evaluation;
    const char* weighting;
};

constexpr RowSpec kRows[] = {
    {metrics::MetricKind::simple, "(0,1]", "single float (previous trust)",
     "previous trust value", "identity on stored trust", "weighted, 0 < alpha < 1"},
    {metrics::MetricKind::wtm, "[-1,1]", "FIFO queue of k ratings", "0",
     "sum(r) / sum(|r|)", "normalised by sum(|r|)"},
    {metrics::MetricKind::wses, "[-1,1]", "tuple of floats (p1, p2)", "0",
     "(p1 - p2) / (p1 + p2)", "weighted, 0 < alpha < 1"},
};

Json requirement_cell(const RowSpec& row, checker::Requirement req, const ReportOptions& o) {
    checker::MetricUnderTest metric{row.kind, {o.alpha, metrics::MetricParams::kDefaultCapacity}};
    checker::SearchConfig search;
    search.seed = o.seed;
    search.trials = o.trials;
    if (row.kind == metrics::MetricKind::wtm) {
        metric.params.capacity = 2;
        search.mode = checker::SearchMode::grid;
        search.grid_step = 0.1;
        search.depth = 2;
    } else {
        search.mode = checker::SearchMode::randomized;
        search.sample_alpha = row.kind == metrics::MetricKind::simple;
    }
    const auto report = checker::search_counterexamples(metric, req, search);
    const bool holds = report.violations.empty();
    return Json{{"holds", holds},
                {"expected", checker::expected_to_hold(row.kind, req)},
                {"mode", checker::to_string(search.mode)},
                {"trials_run", report.trials_run},
                {"violations", report.violations.size()}};
}

Json comparison_table(const ReportOptions& o) {
    Json rows = Json::array();
    bool matches = true;
    for (const auto& row : kRows) {
        auto r1 = requirement_cell(row, checker::Requirement::r1, o);
        auto r2 = requirement_cell(row, checker::Requirement::r2, o);
        matches = matches && r1["holds"] == r1["expected"] && r2["holds"] == r2["expected"];
        rows.push_back(Json{{"metric", metrics::to_string(row.kind)},
                            {"rating_range", row.rating_range},
                            {"state_representation", row.representation},
                            {"good_bad_threshold", row.threshold},
                            {"reputation", row.evaluation},
                            {"weighting", row.weighting},
                            {"r1", std::move(r1)},
                            {"r2", std::move(r2)}});
    }
    return Json{{"rows", std::move(rows)}, {"matches_expected", matches}};
}

std::string render_table(const Json& table) {
    auto mark = [](const Json& cell) {
        std::string s = cell["holds"].get<bool>() ? "fulfils" : "violates";
        if (cell["holds"] != cell["expected"]) s += " (!)";
        return s;
    };
    std::ostringstream os;
    os << std::left << std::setw(8) << "metric" << std::setw(9) << "ratings" << std::setw(31)
       << "storage" << std::setw(22) << "good/bad threshold" << std::setw(26) << "weighting"
       << std::setw(15) << "R1" << "R2" << '\n';
    for (const auto& row : table["rows"]) {
        os << std::left << std::setw(8) << row["metric"].get<std::string>() << std::setw(9)
           << row["rating_range"].get<std::string>() << std::setw(31)
           << row["state_representation"].get<std::string>() << std::setw(22)
           << row["good_bad_threshold"].get<std::string>() << std::setw(26)
           << row["weighting"].get<std::string>() << std::setw(15) << mark(row["r1"])
           << mark(row["r2"]) << '\n';
    }
    return os.str();
}

int execute_report(const ReportOptions& o, std::ostream& out, std::ostream& err) {
    if (o.format != "text" && o.format != "json") {
        throw ConfigError("format must be text or json");
    }
    const auto m = manifest("report", to_json(o), o.seed);
    if (o.out.empty()) {
        err << m.dump() << '\n';
    } else {
        io::write_text_file(o.out + ".manifest.json", m.dump(2) + "\n");
    }
    const auto table = comparison_table(o);
    if (!o.out.empty()) {
        io::write_text_file(o.out, table.dump(2) + "\n");
    }
    if (o.format == "json") {
        out << table.dump(2) << '\n';
    } else {
        out << render_table(table);
    }
    if (!table["matches_expected"].get<bool>()) {
        err << "finding: live checker results diverge from the expected comparison table\n";
        return kExitFinding;
    }
    return kExitOk;
}

// --- replay ------------------------------------------------------------------

int execute_replay(const std::string& path, std::ostream& out, std::ostream& err) {
    const auto report = io::report_from_json(io::read_json_file(path));
    std::size_t confirmed = 0;
    for (std::size_t i = 0; i < report.violations.size(); ++i) {
        const auto verdict = checker::replay(report.violations[i], report.metric);
        out << "violation " << i << ": " << checker::to_string(verdict) << '\n';
        if (verdict == checker::Verdict::violated) ++confirmed;
    }
    err << confirmed << " of " << report.violations.size() << " violations confirmed\n";
    return confirmed == report.violations.size() ? kExitOk : kExitFinding;
}

// --- rerun -------------------------------------------------------------------

int execute_rerun(const std::string& path, const std::string& out_override,
                  const std::string& out_dir_override, std::ostream& out, std::ostream& err) {
    const auto m = io::read_json_file(path);
    const auto command = m.value("command", std::string{});
    const auto& config = m.at("config");
    if (command == "check") {
        auto o = check_options_from_json(config);
        if (!out_override.empty()) o.out = out_override;
        return execute_check(o, out, err);
    }
    if (command == "simulate") {
        auto o = simulate_options_from_json(config);
        if (!out_dir_override.empty()) o.out_dir = out_dir_override;
        return execute_simulate(std::move(o), out, err);
    }
    if (command == "report") {
        auto o = report_options_from_json(config);
        if (!out_override.empty()) o.out = out_override;
        return execute_report(o, out, err);
    }
    throw ConfigError("manifest names unknown command '" + command + "'");
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Trust metric checker and sensor network simulator", "trustsim"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tool_version());

    CheckOptions check;
    auto* check_cmd = app.add_subcommand("check", "Search for R1/R2 counterexamples");
    check_cmd->add_option("--metric", check.metric, "simple | wtm | wses")
        ->required()
        ->check(CLI::IsMember({"simple", "wtm", "wses"}));
    check_cmd->add_option("--requirement", check.requirement, "r1 | r2")
        ->required()
        ->check(CLI::IsMember({"r1", "r2", "R1", "R2"}));
    check_cmd->add_option("--mode", check.mode, "grid | random")
        ->check(CLI::IsMember({"grid", "random"}))
        ->capture_default_str();
    check_cmd->add_option("--trials", check.search.trials, "randomized trials")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    check_cmd->add_option("--seed", check.search.seed)->capture_default_str();
    check_cmd->add_option("--step", check.search.grid_step, "grid spacing")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    check_cmd->add_option("--depth", check.search.depth, "grid: updates per state")
        ->capture_default_str();
    check_cmd->add_option("--random-depth", check.search.random_depth)->capture_default_str();
    check_cmd->add_flag("--vary-alpha", check.search.sample_alpha,
                        "simple: draw alpha per trial in [0.01,0.99]");
    check_cmd->add_option("--alpha", check.params.alpha)->capture_default_str();
    check_cmd->add_option("--k", check.params.capacity, "WTM queue length")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    check_cmd->add_option("--out", check.out, "report file (default stdout)");

    SimulateOptions simulate;
    auto* sim_cmd = app.add_subcommand("simulate", "Run the trust-round network simulation");
    sim_cmd->add_option("--topology", simulate.topology_file, "topology JSON")->required();
    sim_cmd->add_option("--failures", simulate.failures_file, "scripted failure JSON");
    sim_cmd->add_option("--alpha", simulate.config.alpha)->capture_default_str();
    sim_cmd->add_option("--rounds", simulate.config.rounds)
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sim_cmd->add_option("--packets", simulate.config.packets_per_round)
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sim_cmd->add_option("--dio-period", simulate.config.dio_period, "ticks")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sim_cmd->add_option("--loss-trigger", simulate.config.loss_trigger_fraction)
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    sim_cmd->add_option("--late-fraction", simulate.config.late_delivery_fraction)
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    sim_cmd->add_option("--seed", simulate.config.seed)->capture_default_str();
    sim_cmd->add_option("--trace-format", simulate.trace_format, "jsonl | csv")
        ->check(CLI::IsMember({"jsonl", "csv"}))
        ->capture_default_str();
    sim_cmd->add_option("--out-dir", simulate.out_dir)->capture_default_str();

    ReportOptions report;
    auto* report_cmd = app.add_subcommand("report", "Print the metric comparison table");
    report_cmd->add_option("--trials", report.trials)
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    report_cmd->add_option("--seed", report.seed)->capture_default_str();
    report_cmd->add_option("--alpha", report.alpha)->capture_default_str();
    report_cmd->add_option("--format", report.format, "text | json")
        ->check(CLI::IsMember({"text", "json"}))
        ->capture_default_str();
    report_cmd->add_option("--out", report.out, "also write the JSON table here");

    std::string replay_in;
    auto* replay_cmd = app.add_subcommand("replay", "Replay the violations of a check report");
    replay_cmd->add_option("--in", replay_in, "check report JSON")->required();

    std::string manifest_path, rerun_out, rerun_out_dir;
    auto* rerun_cmd = app.add_subcommand("rerun", "Repeat a run from its manifest");
    rerun_cmd->add_option("--manifest", manifest_path)->required();
    rerun_cmd->add_option("--out", rerun_out, "override the report path");
    rerun_cmd->add_option("--out-dir", rerun_out_dir, "override the output directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << tool_version() << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (check_cmd->parsed()) {
            check.search.mode = checker::search_mode_from_string(check.mode);
            return execute_check(check, out, err);
        }
        if (sim_cmd->parsed()) return execute_simulate(simulate, out, err);
        if (report_cmd->parsed()) return execute_report(report, out, err);
        if (replay_cmd->parsed()) return execute_replay(replay_in, out, err);
        if (rerun_cmd->parsed()) {
            return execute_rerun(manifest_path, rerun_out, rerun_out_dir, out, err);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

} // namespace trustsim::cli

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>

#include "trustsim/checker.hpp"
#include "trustsim/cli.hpp"
#include "trustsim/serialize.hpp"
#include "trustsim/sim.hpp"

using namespace trustsim;
using checker::Requirement;
using metrics::MetricKind;

namespace {

struct Criterion {
    int id;
    std::string name;
    std::function<bool(std::string&)> body; // fills `detail`
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) { return io::format_real(v); }

checker::SearchConfig randomized(std::uint64_t trials, std::uint64_t seed) {
    checker::SearchConfig c;
    c.mode = checker::SearchMode::randomized;
    c.trials = trials;
    c.seed = seed;
    return c;
}

bool simple_suite(std::string& detail) {
    const auto start = Clock::now();
    std::uint64_t violations = 0, trials = 0;
    for (double alpha : {0.1, 0.5, 0.9}) {
        for (auto req : {Requirement::r1, Requirement::r2}) {
            const auto r = checker::search_counterexamples({MetricKind::simple, {alpha, 10}}, req,
                                                           randomized(100000, 1));
            violations += r.violations.size();
            trials += r.trials_run;
        }
    }
    const double t = seconds_since(start);
    detail = std::to_string(trials) + " trials, " + std::to_string(violations) +
             " violations, " + fmt(std::round(t * 100) / 100) + " s";
    return violations == 0 && trials == 600000 && t < 10.0;
}

bool wtm_divergence(std::string& detail) {
    const auto start = Clock::now();
    checker::SearchConfig grid;
    grid.mode = checker::SearchMode::grid;
    grid.grid_step = 0.1;
    grid.depth = 2;
    const checker::MetricUnderTest wtm{MetricKind::wtm, {0.5, 2}};
    const auto r2 = checker::search_counterexamples(wtm, Requirement::r2, grid);
    const auto r1 = checker::search_counterexamples(wtm, Requirement::r1, grid);

    bool replayed = !r2.violations.empty();
    for (const auto& cx : r2.violations) {
        replayed = replayed && checker::replay(cx, wtm) == checker::Verdict::violated;
    }
    // Witness [0.9, -0.1] + 0.5: before (0.9 - 0.1) / (0.9 + 0.1), after
    // (-0.1 + 0.5) / (0.1 + 0.5).
    bool witness = false;
    for (const auto& cx : r2.violations) {
        const auto& q = std::get<metrics::WtmState>(cx.state).ratings;
        if (q == std::deque<double>{0.9, -0.1} && cx.ratings == std::vector<double>{0.5}) {
            witness = std::fabs(cx.reputations[0] - 0.8) < 1e-12 &&
                      std::fabs(cx.reputations[1] - 0.4 / 0.6) < 1e-12;
        }
    }
    const double t = seconds_since(start);
    detail = "R2 " + std::to_string(r2.violations.size()) + " violations (replayed: " +
             (replayed ? "yes" : "no") + ", witness 0.8 -> 0.4/0.6: " + (witness ? "yes" : "no") +
             "), R1 " + std::to_string(r1.violations.size()) + " violations, " +
             fmt(std::round(t * 100) / 100) + " s";
    return replayed && witness && r1.violations.empty() && t < 10.0;
}

bool wses_suite(std::string& detail) {
    std::uint64_t violations = 0;
    for (auto req : {Requirement::r1, Requirement::r2}) {
        violations += checker::search_counterexamples({MetricKind::wses, {0.5, 10}}, req,
                                                      randomized(100000, 1))
                          .violations.size();
    }
    // The CLI path must exit 0 when nothing diverges.
    std::ostringstream out, err;
    const int code = cli::run({"check", "--metric", "wses", "--requirement", "r2", "--trials",
                               "100000"},
                              out, err);
    detail = std::to_string(violations) + " violations over 2 x 100000 trials, cli exit " +
             std::to_string(code);
    return violations == 0 && code == cli::kExitOk;
}

bool metric_goldens(std::string& detail) {
    const auto s = metrics::simple_update({0.5, 0}, {1.0}, {0.5, 10}, true);
    const auto w = metrics::wses_update({0.0, 0.0}, {1.0}, {0.9, 10});
    metrics::WtmState q = metrics::wtm_init(2);
    q.ratings = {1.0, -1.0};
    const double tau = metrics::wtm_reputation(q).value;
    // 0.9 has no exact binary64 form, and 1 - double(0.9) is itself
    // representable: 0.09999999999999998, not the double nearest 0.1. Check
    // that p1 is exactly that value (p1 + 0.9 == 1 with no rounding), and that
    // it differs from 0.1 by no more than 0.9's own representation error.
    const double repr_error = (std::nextafter(0.9, 1.0) - 0.9) / 2;
    const bool wses_ok = w.positive == std::fma(-0.9, 1.0, 1.0) && w.positive + 0.9 == 1.0 &&
                         std::fabs(w.positive - 0.1) <= repr_error && w.negative == 0.0;
    detail = "simple " + fmt(s.trust) + ", wses (" + fmt(w.positive) + ", " + fmt(w.negative) +
             "), wtm " + fmt(tau);
    return s.trust == 0.75 && wses_ok && tau == 0.0;
}

bool lossless_line(std::string& detail) {
    const auto start = Clock::now();
    sim::SimConfig c;
    c.alpha = 0.5;
    c.rounds = 10;
    const sim::Topology line{{0, 1, 2}, {{0, 1, 1.0}, {1, 2, 1.0}}};
    const auto result = sim::run_simulation(line, c);
    double expected = 0.5;
    for (int i = 0; i < 10; ++i) expected = 0.5 * expected + 0.5 * 1.0;
    double worst = 0.0;
    for (const auto& [id, parent] : result.summary.final_parents) {
        worst = std::max(worst,
                         std::fabs(result.summary.trust_tables.at(id).at(*parent).trust - expected));
    }
    const double t = seconds_since(start);
    detail = "expected " + fmt(expected) + ", max error " + fmt(worst) + ", " +
             fmt(std::round(t * 1000) / 1000) + " s";
    return worst <= 1e-12 && expected == 1 - 0.5 * std::pow(0.5, 10) && t < 1.0;
}

bool parent_switching(std::string& detail) {
    const auto start = Clock::now();
    const sim::Topology diamond{{0, 1, 2, 3},
                                {{0, 1, 1.0}, {0, 2, 1.0}, {1, 3, 0.3}, {2, 3, 1.0}}};
    sim::SimConfig c;
    c.alpha = 0.5;
    c.rounds = 10;
    c.packets_per_round = 1000;
    c.dio_period = 5000; // long enough for every node to send its full round
    c.seed = 42;
    const auto result = sim::run_simulation(diamond, c);
    std::optional<std::uint64_t> switch_round;
    std::uint64_t round = 0;
    for (const auto& e : result.trace) {
        if (e.kind == sim::EventKind::dio_issued) round = *e.round;
        if (e.kind == sim::EventKind::parent_switched && e.node == sim::NodeId{3} &&
            !switch_round) {
            switch_round = round;
        }
    }
    const auto final_parent = result.summary.final_parents.at(3);
    const double t = seconds_since(start);
    constexpr std::uint64_t kGoldenSwitchRound = 1;
    detail = "switch round " + (switch_round ? std::to_string(*switch_round) : "none") +
             " (golden " + std::to_string(kGoldenSwitchRound) + "), final parent " +
             (final_parent ? std::to_string(*final_parent) : "none") + ", " +
             fmt(std::round(t * 1000) / 1000) + " s";
    return switch_round == kGoldenSwitchRound && final_parent == sim::NodeId{2} && t < 5.0;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool determinism(std::string& detail) {
    namespace fs = std::filesystem;
    const fs::path dir = "acceptance_scratch";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "topology.json")
        << R"({"nodes":[0,1,2,3,4],"links":[{"a":0,"b":1,"p":0.9},{"a":0,"b":2,"p":0.7},)"
           R"({"a":1,"b":3,"p":0.5},{"a":2,"b":3,"p":0.95},{"a":3,"b":4,"p":0.8}]})";
    std::ofstream(dir / "failures.json") << R"([{"tick":40,"node":1,"event":"fail"},)"
                                            R"({"tick":500,"node":1,"event":"recover"}])";
    bool ok = true;
    int compared = 0;
    for (const std::string format : {"jsonl", "csv"}) {
        std::ostringstream out, err;
        const auto first = dir / ("first_" + format);
        ok = ok && cli::run({"simulate", "--topology", (dir / "topology.json").string(),
                             "--failures", (dir / "failures.json").string(), "--rounds", "8",
                             "--packets", "40", "--dio-period", "300", "--loss-trigger", "0.4",
                             "--late-fraction", "0.1", "--seed", "9", "--trace-format", format,
                             "--out-dir", first.string()},
                            out, err) == 0;
        const auto reference = slurp(first / ("trace." + format));
        ok = ok && !reference.empty();
        for (int i = 0; i < 3; ++i) {
            const auto again = dir / ("again_" + format + std::to_string(i));
            ok = ok && cli::run({"rerun", "--manifest", (first / "manifest.json").string(),
                                 "--out-dir", again.string()},
                                out, err) == 0;
            ok = ok && slurp(again / ("trace." + format)) == reference;
            ++compared;
        }
    }
    detail = std::to_string(compared) + " reruns compared byte for byte";
    return ok;
}

bool late_attribution(std::string& detail) {
    sim::SimConfig c;
    c.rounds = 6;
    c.packets_per_round = 10;
    c.late_delivery_fraction = 1.0;
    const sim::Topology line{{0, 1, 2}, {{0, 1, 1.0}, {1, 2, 1.0}}};
    sim::Simulation simulation(line, c);
    while (!simulation.finished()) simulation.run_round();

    bool ok = true;
    std::set<std::tuple<sim::NodeId, std::uint64_t, std::uint64_t>> credited;
    std::size_t sent = 0, late = 0, on_time = 0;
    std::uint64_t root_round = 0;
    for (const auto& e : simulation.trace()) {
        switch (e.kind) {
        case sim::EventKind::dio_issued: root_round = *e.round; break;
        case sim::EventKind::packet_sent: ++sent; break;
        case sim::EventKind::packet_delivered: ++on_time; break;
        case sim::EventKind::packet_late:
            ++late;
            ok = ok && credited.insert({*e.node, *e.round, *e.seq}).second; // never twice
            ok = ok && *e.round + 1 == root_round; // stamped (previous) round
            break;
        default: break;
        }
    }
    ok = ok && on_time == 0 && late == sent;

    // Ξ for the parent after each DIO: nothing on time in the round the
    // packets were sent, the full count once they are credited.
    double expected = 0.5;
    std::vector<double> xis;
    for (std::size_t i = 0; i < simulation.dios().size(); ++i) {
        const auto& dio = simulation.dios()[i];
        const double xi = static_cast<double>(dio.delivered_for(2) + dio.late_for(2)) / 10.0;
        xis.push_back(xi);
        ok = ok && xi == (i == 0 ? 0.0 : 1.0);
        expected = 0.5 * expected + 0.5 * xi;
    }
    const double trust = simulation.nodes().at(2).trust_table.at(1).trust;
    ok = ok && trust == expected;
    detail = std::to_string(late) + "/" + std::to_string(sent) +
             " packets credited late, none twice; parent trust " + fmt(trust);
    return ok;
}

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "simple metric fulfils R1 and R2", simple_suite},
        {2, "WTM violates R2 on the grid and fulfils R1", wtm_divergence},
        {3, "WSES fulfils R1 and R2", wses_suite},
        {4, "metric arithmetic goldens", metric_goldens},
        {5, "lossless line converges to the closed form", lossless_line},
        {6, "diamond switches to the lossless parent", parent_switching},
        {7, "identical manifests give byte-identical traces", determinism},
        {8, "late packets credited to their stamped round", late_attribution},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        std::string detail;
        bool pass = false;
        try {
            pass = c.body(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("%s criterion %d: %s -- %s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                    detail.c_str());
        failed += !pass;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
                criteria.size());
    return failed == 0 ? 0 : 1;
}

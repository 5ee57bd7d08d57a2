#include "trustsim/checker.hpp"

#include <cmath>
#include <random>
#include <string>

#include "trustsim/errors.hpp"

namespace trustsim::checker {

using metrics::MetricKind;
using metrics::MetricState;
using metrics::Rating;

namespace {

void require_valid_state(const MetricUnderTest& metric, const MetricState& state) {
    if (metrics::kind_of(state) != metric.kind) {
        throw InvalidTrialError("state does not belong to metric " +
                                std::string(metrics::to_string(metric.kind)));
    }
    if (const auto* s = std::get_if<metrics::SimpleState>(&state)) {
        if (!(s->trust >= 0.0 && s->trust <= 1.0)) {
            throw InvalidTrialError("simple trust outside [0,1]");
        }
    } else if (const auto* w = std::get_if<metrics::WtmState>(&state)) {
        if (w->capacity < 1 || w->ratings.size() > w->capacity) {
            throw InvalidTrialError("wtm queue exceeds its capacity");
        }
        for (double r : w->ratings) {
            if (!metrics::kSignedRange.contains(r)) {
                throw InvalidTrialError("wtm queue holds a rating outside [-1,1]");
            }
        }
    } else if (const auto* p = std::get_if<metrics::WsesState>(&state)) {
        if (!(p->positive >= 0.0 && p->negative >= 0.0)) {
            throw InvalidTrialError("wses accumulators must be nonnegative");
        }
    }
}

void require_good(const MetricUnderTest& metric, metrics::Reputation before, Rating r) {
    if (!metrics::accepted_range(metric.kind).contains(r.value)) {
        throw InvalidTrialError("rating " + std::to_string(r.value) + " outside the metric's range");
    }
    if (metrics::classify_rating(metric.kind, r, before) != metrics::RatingClass::good) {
        throw InvalidTrialError("rating " + std::to_string(r.value) + " is not a good rating");
    }
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Portable draws: the standard distributions are implementation defined.
double unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double draw_rating(MetricKind kind, std::mt19937_64& rng) {
    return kind == MetricKind::simple ? unit(rng) : -1.0 + 2.0 * unit(rng);
}

struct Candidate {
    MetricState state;
    metrics::MetricParams params;
    std::vector<double> ratings;
};

Candidate draw_candidate(const MetricUnderTest& metric, Requirement req,
                         const SearchConfig& config, std::mt19937_64& rng) {
    Candidate c{metrics::initial_state(metric.kind, metric.params), metric.params, {}};
    if (metric.kind == MetricKind::simple) {
        metrics::SimpleState s;
        s.trust = unit(rng);
        if (config.sample_alpha) {
            c.params.alpha = 0.01 + 0.98 * unit(rng);
        }
        c.state = s;
    } else {
        const auto depth = rng() % (config.random_depth + 1);
        for (std::uint64_t i = 0; i < depth; ++i) {
            c.state = metrics::update(c.state, Rating{draw_rating(metric.kind, rng)}, c.params);
        }
    }
    c.ratings.push_back(draw_rating(metric.kind, rng));
    if (req == Requirement::r1) {
        c.ratings.push_back(draw_rating(metric.kind, rng));
        if (c.ratings[0] < c.ratings[1]) {
            std::swap(c.ratings[0], c.ratings[1]);
        }
    }
    return c;
}

bool passes_preconditions(const MetricUnderTest& metric, const Candidate& c) {
    const auto before = metrics::evaluate(c.state);
    for (double r : c.ratings) {
        if (!metrics::accepted_range(metric.kind).contains(r) ||
            metrics::classify_rating(metric.kind, Rating{r}, before) != metrics::RatingClass::good) {
            return false;
        }
    }
    return c.ratings.size() < 2 || c.ratings[0] > c.ratings[1];
}

CheckOutcome run_trial(const MetricUnderTest& metric, Requirement req, const Candidate& c) {
    const MetricUnderTest trial{metric.kind, c.params};
    return req == Requirement::r1
               ? check_r1_once(trial, c.state, Rating{c.ratings[0]}, Rating{c.ratings[1]})
               : check_r2_once(trial, c.state, Rating{c.ratings[0]});
}

void record(SearchReport& report, const Candidate& c, const CheckOutcome& outcome) {
    ++report.trials_run;
    if (outcome.verdict == Verdict::violated) {
        report.violations.push_back(
            Counterexample{report.requirement, c.state, c.params, c.ratings, outcome.reputations});
    }
}

void search_grid(SearchReport& report) {
    const auto& metric = report.metric;
    const auto range = metrics::accepted_range(metric.kind);
    const auto grid = grid_points(range.lower, range.upper, report.config.grid_step);

    std::vector<MetricState> states{metrics::initial_state(metric.kind, metric.params)};
    std::vector<MetricState> frontier = states;
    for (std::size_t d = 0; d < report.config.depth; ++d) {
        std::vector<MetricState> next;
        next.reserve(frontier.size() * grid.size());
        for (const auto& s : frontier) {
            for (double r : grid) {
                next.push_back(metrics::update(s, Rating{r}, metric.params));
            }
        }
        states.insert(states.end(), next.begin(), next.end());
        frontier = std::move(next);
    }

    for (const auto& s : states) {
        Candidate c{s, metric.params, {}};
        for (double r1 : grid) {
            if (report.requirement == Requirement::r2) {
                c.ratings = {r1};
                if (passes_preconditions(metric, c)) {
                    record(report, c, run_trial(metric, report.requirement, c));
                }
                continue;
            }
            for (double r2 : grid) {
                c.ratings = {r1, r2};
                if (passes_preconditions(metric, c)) {
                    record(report, c, run_trial(metric, report.requirement, c));
                }
            }
        }
    }
}

void search_randomized(SearchReport& report) {
    const auto& config = report.config;
    // Bound the number of draws so a metric/requirement pair whose
    // preconditions are rarely met cannot loop forever.
    const std::uint64_t max_attempts = config.trials * 64 + 1024;
    for (std::uint64_t attempt = 0; attempt < max_attempts && report.trials_run < config.trials;
         ++attempt) {
        std::mt19937_64 rng(splitmix64(config.seed ^ splitmix64(attempt)));
        const auto c = draw_candidate(report.metric, report.requirement, config, rng);
        if (!passes_preconditions(report.metric, c)) {
            continue;
        }
        record(report, c, run_trial(report.metric, report.requirement, c));
    }
}

} // namespace

std::string_view to_string(Requirement req) { return req == Requirement::r1 ? "r1" : "r2"; }

Requirement requirement_from_string(std::string_view name) {
    if (name == "r1" || name == "R1") return Requirement::r1;
    if (name == "r2" || name == "R2") return Requirement::r2;
    throw ConfigError("unknown requirement '" + std::string(name) + "'");
}

std::string_view to_string(Verdict v) { return v == Verdict::holds ? "holds" : "violated"; }

std::string_view to_string(SearchMode mode) {
    return mode == SearchMode::grid ? "grid" : "random";
}

SearchMode search_mode_from_string(std::string_view name) {
    if (name == "grid") return SearchMode::grid;
    if (name == "random" || name == "randomized") return SearchMode::randomized;
    throw ConfigError("unknown search mode '" + std::string(name) + "'");
}

void SearchConfig::validate() const {
    if (mode == SearchMode::randomized && trials < 1) {
        throw ConfigError("trials must be at least 1");
    }
    if (mode == SearchMode::grid) {
        if (!(grid_step > 0.0) || !std::isfinite(grid_step)) {
            throw ConfigError("grid step must be positive");
        }
        grid_points(0.0, 1.0, grid_step);
    }
}

std::vector<double> grid_points(double lower, double upper, double step) {
    if (!(step > 0.0) || !std::isfinite(step) || !(upper > lower)) {
        throw ConfigError("grid step must be positive");
    }
    const auto intervals =
        static_cast<std::int64_t>(std::floor((upper - lower) / step + 1e-9));
    if (intervals < 1) {
        throw ConfigError("grid step " + std::to_string(step) + " yields fewer than two points");
    }
    // With step = 1/m, compute k/m directly so grid values equal their
    // decimal literals (0.9 rather than -1 + 19 * 0.1).
    const double per_unit = std::round(1.0 / step);
    const bool reciprocal = per_unit >= 1.0 && std::fabs(per_unit * step - 1.0) < 1e-12;
    const double lower_index = std::round(lower * per_unit);
    const bool aligned = reciprocal && std::fabs(lower_index / per_unit - lower) < 1e-12;

    std::vector<double> points;
    points.reserve(static_cast<std::size_t>(intervals) + 1);
    for (std::int64_t i = 0; i <= intervals; ++i) {
        const double v = aligned ? (lower_index + static_cast<double>(i)) / per_unit
                                 : lower + static_cast<double>(i) * step;
        points.push_back(v > upper ? upper : v);
    }
    return points;
}

CheckOutcome check_r1_once(const MetricUnderTest& metric, const MetricState& state, Rating r1,
                           Rating r2) {
    require_valid_state(metric, state);
    if (!(r1.value > r2.value)) {
        throw InvalidTrialError("R1 needs r1 > r2");
    }
    const auto before = metrics::evaluate(state);
    require_good(metric, before, r1);
    require_good(metric, before, r2);

    const double after1 = metrics::evaluate(metrics::update(state, r1, metric.params)).value;
    const double after2 = metrics::evaluate(metrics::update(state, r2, metric.params)).value;
    const bool holds = after1 > after2 || after2 == 1.0;
    return CheckOutcome{holds ? Verdict::holds : Verdict::violated, {before.value, after1, after2}};
}

CheckOutcome check_r2_once(const MetricUnderTest& metric, const MetricState& state, Rating r) {
    require_valid_state(metric, state);
    const auto before = metrics::evaluate(state);
    require_good(metric, before, r);

    const double after = metrics::evaluate(metrics::update(state, r, metric.params)).value;
    const bool holds = after > before.value || before.value == 1.0;
    return CheckOutcome{holds ? Verdict::holds : Verdict::violated, {before.value, after}};
}

SearchReport search_counterexamples(const MetricUnderTest& metric, Requirement req,
                                    const SearchConfig& config) {
    metric.params.validate();
    config.validate();
    SearchReport report{metric, req, config, 0, {}};
    if (config.mode == SearchMode::grid) {
        search_grid(report);
    } else {
        search_randomized(report);
    }
    return report;
}

Verdict replay(const Counterexample& cx, const MetricUnderTest& metric) {
    if (metrics::kind_of(cx.state) != metric.kind) {
        throw CorruptCounterexampleError("counterexample state belongs to another metric");
    }
    const std::size_t want = cx.requirement == Requirement::r1 ? 2 : 1;
    if (cx.ratings.size() != want || cx.reputations.size() != want + 1) {
        throw CorruptCounterexampleError("counterexample has the wrong number of ratings");
    }
    CheckOutcome outcome;
    try {
        cx.params.validate();
        const MetricUnderTest trial{metric.kind, cx.params};
        outcome = cx.requirement == Requirement::r1
                      ? check_r1_once(trial, cx.state, Rating{cx.ratings[0]}, Rating{cx.ratings[1]})
                      : check_r2_once(trial, cx.state, Rating{cx.ratings[0]});
    } catch (const Error& e) {
        throw CorruptCounterexampleError(std::string("counterexample does not replay: ") + e.what());
    }
    if (outcome.reputations != cx.reputations) {
        throw CorruptCounterexampleError("recorded reputations differ from recomputed ones");
    }
    return outcome.verdict;
}

bool expected_to_hold(MetricKind kind, Requirement req) {
    return !(kind == MetricKind::wtm && req == Requirement::r2);
}

} // namespace trustsim::checker

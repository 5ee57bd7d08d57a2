#pragma once

// Executable forms of the two trust-metric requirements and a counterexample
// search over them.
//
//   R1: for good ratings r1 > r2, T(U(R, r1)) > T(U(R, r2)) or T(U(R, r2)) = 1
//   R2: for a good rating r,      T(U(R, r))  > T(R)         or T(R) = 1
//
// "Good" is metric specific (see metrics::classify_rating): the Simple metric
// compares against the stored trust, WTM and WSES against 0.

#include <cstdint>
#include <string_view>
#include <vector>

#include "trustsim/metrics.hpp"

namespace trustsim::checker {

enum class Requirement { r1, r2 };

std::string_view to_string(Requirement req);
Requirement requirement_from_string(std::string_view name);

enum class Verdict { holds, violated };

std::string_view to_string(Verdict v);

struct MetricUnderTest {
    metrics::MetricKind kind = metrics::MetricKind::simple;
    metrics::MetricParams params;
};

// One evaluated trial. Reputations are ordered
//   R2: {T(R), T(U(R, r))}
//   R1: {T(R), T(U(R, r1)), T(U(R, r2))}
struct CheckOutcome {
    Verdict verdict = Verdict::holds;
    std::vector<double> reputations;
};

// Throws InvalidTrialError when the ratings are not ordered, not good for this
// state, or outside the metric's range.
CheckOutcome check_r1_once(const MetricUnderTest& metric, const metrics::MetricState& state,
                           metrics::Rating r1, metrics::Rating r2);
CheckOutcome check_r2_once(const MetricUnderTest& metric, const metrics::MetricState& state,
                           metrics::Rating r);

struct Counterexample {
    Requirement requirement = Requirement::r2;
    metrics::MetricState state;      // before the update
    metrics::MetricParams params;    // parameters the trial ran with
    std::vector<double> ratings;     // {r} or {r1, r2}
    std::vector<double> reputations; // as in CheckOutcome
};

enum class SearchMode { grid, randomized };

std::string_view to_string(SearchMode mode);
SearchMode search_mode_from_string(std::string_view name);

struct SearchConfig {
    SearchMode mode = SearchMode::randomized;
    std::uint64_t trials = 10000;  // randomized: trials to run after filtering
    std::uint64_t seed = 1;
    double grid_step = 0.1;        // grid spacing over the rating range
    std::size_t depth = 3;         // grid: max updates applied to build a state
    std::size_t random_depth = 8;  // randomized WTM/WSES: max updates per state
    bool sample_alpha = false;     // randomized Simple: draw alpha in [0.01,0.99]

    // Throws ConfigError.
    void validate() const;
    friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

struct SearchReport {
    MetricUnderTest metric;
    Requirement requirement = Requirement::r1;
    SearchConfig config;
    std::uint64_t trials_run = 0;
    std::vector<Counterexample> violations;
};

// Grid points lower, lower+step, ... up to upper. Throws ConfigError when the
// step yields fewer than two points.
std::vector<double> grid_points(double lower, double upper, double step);

SearchReport search_counterexamples(const MetricUnderTest& metric, Requirement req,
                                    const SearchConfig& config);

// Recomputes every reputation of `cx` and returns the resulting verdict.
// Throws CorruptCounterexampleError when anything recorded does not match.
Verdict replay(const Counterexample& cx, const MetricUnderTest& metric);

// Whether the requirement is expected to hold for the metric:
// Simple R1/R2, WTM R1 and WSES R1/R2 hold; WTM R2 does not.
bool expected_to_hold(metrics::MetricKind kind, Requirement req);

} // namespace trustsim::checker

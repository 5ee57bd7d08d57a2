#pragma once

// Trust metrics: the Simple Trust Metric (exponentially smoothed delivery
// rate), the Weighted Trust Metric (normalised sum over a bounded FIFO of
// ratings) and WSES (separately smoothed positive/negative accumulators).
//
// Every function here is pure. States are plain values and may be copied
// freely between threads.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <string_view>
#include <variant>

namespace trustsim::metrics {

enum class MetricKind { simple, wtm, wses };

std::string_view to_string(MetricKind kind);
// Throws InvalidParamsError for an unknown name.
MetricKind metric_kind_from_string(std::string_view name);

struct Reputation {
    double value = 0.0;
    friend bool operator==(const Reputation&, const Reputation&) = default;
};

struct Rating {
    double value = 0.0;
    friend bool operator==(const Rating&, const Rating&) = default;
};

// Closed or half-open interval of legal rating values.
struct RatingRange {
    double lower = 0.0;
    double upper = 1.0;
    bool lower_open = false;

    bool contains(double v) const {
        return (lower_open ? v > lower : v >= lower) && v <= upper;
    }
};

// Values simple_update accepts: a delivery rate may legitimately be 0.
inline constexpr RatingRange kDeliveryRange{0.0, 1.0, false};
// Nominal rating range of the Simple metric, (0,1].
inline constexpr RatingRange kSimpleRatingRange{0.0, 1.0, true};
// WTM and WSES, [-1,1].
inline constexpr RatingRange kSignedRange{-1.0, 1.0, false};

// Range a metric's update function accepts.
RatingRange accepted_range(MetricKind kind);

struct MetricParams {
    static constexpr double kDefaultAlpha = 0.5;
    static constexpr std::size_t kDefaultCapacity = 10;

    double alpha = kDefaultAlpha;          // smoothing weight, 0 < alpha < 1
    std::size_t capacity = kDefaultCapacity; // WTM queue length k

    // Throws InvalidParamsError.
    void validate() const;
    friend bool operator==(const MetricParams&, const MetricParams&) = default;
};

struct SimpleState {
    double trust = 0.5;
    std::uint64_t round = 0;
    friend bool operator==(const SimpleState&, const SimpleState&) = default;
};

struct WtmState {
    std::deque<double> ratings; // oldest first
    std::size_t capacity = MetricParams::kDefaultCapacity;
    friend bool operator==(const WtmState&, const WtmState&) = default;
};

struct WsesState {
    double positive = 0.0; // p1
    double negative = 0.0; // p2
    friend bool operator==(const WsesState&, const WsesState&) = default;
};

using MetricState = std::variant<SimpleState, WtmState, WsesState>;

MetricKind kind_of(const MetricState& state);

// --- Simple Trust Metric ---------------------------------------------------

SimpleState simple_init();

// Xi = delivered / sent. Throws NoTrafficError when sent == 0 and
// InvalidCountError when delivered > sent.
Rating delivery_rate(std::uint64_t delivered, std::uint64_t sent);

// The current parent is smoothed towards xi; any other node keeps its value.
// The round advances in both cases. Throws OutOfRangeError for xi outside
// [0,1] and InvalidParamsError for a bad alpha.
SimpleState simple_update(const SimpleState& state, Rating xi,
                          const MetricParams& params, bool is_parent);

Reputation simple_reputation(const SimpleState& state);

// --- Weighted Trust Metric -------------------------------------------------

WtmState wtm_init(std::size_t capacity);

// Appends r, dropping the oldest rating once the queue holds `capacity`.
WtmState wtm_update(const WtmState& state, Rating r);

// sum(r) / sum(|r|); 0 for an empty or all-zero queue.
Reputation wtm_reputation(const WtmState& state);

// --- WSES ------------------------------------------------------------------

WsesState wses_init();
WsesState wses_update(const WsesState& state, Rating r, const MetricParams& params);
// (p1 - p2) / (p1 + p2); 0 when both accumulators are zero.
Reputation wses_reputation(const WsesState& state);

// --- Generic dispatch ------------------------------------------------------

MetricState initial_state(MetricKind kind, const MetricParams& params);
// The Simple metric is updated as the current parent.
MetricState update(const MetricState& state, Rating r, const MetricParams& params);
Reputation evaluate(const MetricState& state);

enum class RatingClass { good, bad, neutral };

std::string_view to_string(RatingClass c);

// Simple compares against the previous trust value, WTM/WSES against 0.
// Comparisons are exact.
RatingClass classify_rating(MetricKind kind, Rating r, Reputation previous);

} // namespace trustsim::metrics

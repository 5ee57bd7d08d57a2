#include "trustsim/metrics.hpp"

#include <cmath>
#include <string>
#include <type_traits>

#include "trustsim/errors.hpp"

namespace trustsim::metrics {

namespace {

void require_in(const RatingRange& range, Rating r, std::string_view what) {
    if (!std::isfinite(r.value) || !range.contains(r.value)) {
        throw OutOfRangeError(std::string(what) + " rating " + std::to_string(r.value) +
                              " outside [" + std::to_string(range.lower) + "," +
                              std::to_string(range.upper) + "]");
    }
}

void require_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InvalidParamsError("alpha must lie in (0,1), got " + std::to_string(alpha));
    }
}

} // namespace

std::string_view to_string(MetricKind kind) {
    switch (kind) {
    case MetricKind::simple: return "simple";
    case MetricKind::wtm: return "wtm";
    case MetricKind::wses: return "wses";
    }
    return "unknown";
}

MetricKind metric_kind_from_string(std::string_view name) {
    if (name == "simple") return MetricKind::simple;
    if (name == "wtm") return MetricKind::wtm;
    if (name == "wses") return MetricKind::wses;
    throw InvalidParamsError("unknown metric '" + std::string(name) + "'");
}

RatingRange accepted_range(MetricKind kind) {
    return kind == MetricKind::simple ? kDeliveryRange : kSignedRange;
}

void MetricParams::validate() const {
    require_alpha(alpha);
    if (capacity < 1) {
        throw InvalidParamsError("WTM capacity must be at least 1");
    }
}

MetricKind kind_of(const MetricState& state) {
    switch (state.index()) {
    case 0: return MetricKind::simple;
    case 1: return MetricKind::wtm;
    default: return MetricKind::wses;
    }
}

SimpleState simple_init() { return SimpleState{0.5, 0}; }

Rating delivery_rate(std::uint64_t delivered, std::uint64_t sent) {
    if (sent == 0) {
        throw NoTrafficError("no packets sent in this round");
    }
    if (delivered > sent) {
        throw InvalidCountError("delivered " + std::to_string(delivered) +
                                " exceeds sent " + std::to_string(sent));
    }
    return Rating{static_cast<double>(delivered) / static_cast<double>(sent)};
}

SimpleState simple_update(const SimpleState& state, Rating xi,
                          const MetricParams& params, bool is_parent) {
    require_in(kDeliveryRange, xi, "simple");
    require_alpha(params.alpha);
    SimpleState next = state;
    if (is_parent) {
        next.trust = params.alpha * state.trust + (1.0 - params.alpha) * xi.value;
    }
    next.round = state.round + 1;
    return next;
}

Reputation simple_reputation(const SimpleState& state) { return Reputation{state.trust}; }

WtmState wtm_init(std::size_t capacity) {
    if (capacity < 1) {
        throw InvalidParamsError("WTM capacity must be at least 1");
    }
    return WtmState{{}, capacity};
}

WtmState wtm_update(const WtmState& state, Rating r) {
    require_in(kSignedRange, r, "wtm");
    if (state.capacity < 1) {
        throw InvalidParamsError("WTM capacity must be at least 1");
    }
    WtmState next = state;
    while (next.ratings.size() >= next.capacity) {
        next.ratings.pop_front();
    }
    next.ratings.push_back(r.value);
    return next;
}

Reputation wtm_reputation(const WtmState& state) {
    double sum = 0.0;
    double strength = 0.0;
    for (double r : state.ratings) {
        sum += r;
        strength += std::fabs(r);
    }
    if (strength == 0.0) {
        return Reputation{0.0};
    }
    return Reputation{sum / strength};
}

WsesState wses_init() { return WsesState{0.0, 0.0}; }

WsesState wses_update(const WsesState& state, Rating r, const MetricParams& params) {
    require_in(kSignedRange, r, "wses");
    require_alpha(params.alpha);
    const double a = params.alpha;
    if (r.value > 0.0) {
        return WsesState{state.positive * a + (1.0 - a) * r.value, state.negative * a};
    }
    if (r.value < 0.0) {
        return WsesState{state.positive * a, state.negative * a - (1.0 - a) * r.value};
    }
    return state;
}

Reputation wses_reputation(const WsesState& state) {
    const double total = state.positive + state.negative;
    if (total == 0.0) {
        return Reputation{0.0};
    }
    return Reputation{(state.positive - state.negative) / total};
}

MetricState initial_state(MetricKind kind, const MetricParams& params) {
    switch (kind) {
    case MetricKind::simple: return simple_init();
    case MetricKind::wtm: return wtm_init(params.capacity);
    case MetricKind::wses: return wses_init();
    }
    throw InvalidParamsError("unknown metric kind");
}

MetricState update(const MetricState& state, Rating r, const MetricParams& params) {
    return std::visit(
        [&](const auto& s) -> MetricState {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SimpleState>) {
                return simple_update(s, r, params, true);
            } else if constexpr (std::is_same_v<T, WtmState>) {
                return wtm_update(s, r);
            } else {
                return wses_update(s, r, params);
            }
        },
        state);
}

Reputation evaluate(const MetricState& state) {
    return std::visit(
        [](const auto& s) -> Reputation {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SimpleState>) {
                return simple_reputation(s);
            } else if constexpr (std::is_same_v<T, WtmState>) {
                return wtm_reputation(s);
            } else {
                return wses_reputation(s);
            }
        },
        state);
}

std::string_view to_string(RatingClass c) {
    switch (c) {
    case RatingClass::good: return "good";
    case RatingClass::bad: return "bad";
    case RatingClass::neutral: return "neutral";
    }
    return "unknown";
}

RatingClass classify_rating(MetricKind kind, Rating r, Reputation previous) {
    const double threshold = kind == MetricKind::simple ? previous.value : 0.0;
    if (r.value > threshold) return RatingClass::good;
    if (r.value < threshold) return RatingClass::bad;
    return RatingClass::neutral;
}

} // namespace trustsim::metrics

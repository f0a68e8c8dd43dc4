#pragma once

#include "tempus/error.hpp"
#include "tempus/timescale.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string_view>
#include <vector>

namespace tempus {

/// Numerical knobs shared by every module. Defaults are the documented ones.
struct Tolerances {
    double cauchy_abs = 1e-8;
    double cauchy_rel = 1e-6;
    double singular = 1e-8;   ///< relative min singular value for a nonsingular limit
    double regress = 1e-10;   ///< |det(I + mu A)| threshold
    double h_max = 1e-2;
    /// RK4 steps per grid cell inside intervals (step = cell / substeps <= h_max).
    int rk_substeps = 2;
    /// Increments across doubling horizons that shrink by at least this factor
    /// over the ratio window count as a convergent (geometric) tail.
    double ratio_converge = 0.75;
    /// Increments that shrink by less than this factor count as growth.
    double ratio_diverge = 0.9;
    int ratio_window = 3;
    /// Tail integrals are truncated at tail_padding x (last horizon - start).
    double tail_padding = 4.0;
    /// Norm bound on the transform correction that defines the validity window.
    double validity_bound = 0.5;

    double cauchy_threshold(double magnitude) const { return cauchy_abs + cauchy_rel * magnitude; }
};

/// Horizons a + 2^k step for k = 0..k_max, snapped down onto the scale and deduplicated.
inline std::vector<double> doubling_schedule(const TimeScale& ts, double a, int k_max, double step = 1.0) {
    std::vector<double> out;
    for (int k = 0; k <= k_max; ++k) {
        const double h = ts.snap_down(a + std::ldexp(step, k));
        if (h > a && (out.empty() || h > out.back())) out.push_back(h);
    }
    return out;
}

/// Default schedule: K = 12 on discrete scales, K = 8 when intervals are present.
inline std::vector<double> default_schedule(const TimeScale& ts, double a) {
    return doubling_schedule(ts, a, ts.is_discrete() ? 12 : 8);
}

inline void require_increasing(std::span<const double> schedule, std::size_t min_size) {
    if (schedule.size() < min_size) {
        fail(ErrorKind::ScheduleTooShort, "schedule needs at least " + std::to_string(min_size) + " horizons");
    }
    for (std::size_t i = 1; i < schedule.size(); ++i) {
        if (!(schedule[i] > schedule[i - 1])) fail(ErrorKind::InvalidArgument, "schedule not increasing");
    }
}

enum class Trend { Settled, Geometric, Growing, Unclear };

constexpr std::string_view to_string(Trend t) noexcept {
    switch (t) {
        case Trend::Settled: return "Settled";
        case Trend::Geometric: return "Geometric";
        case Trend::Growing: return "Growing";
        case Trend::Unclear: return "Unclear";
    }
    return "Unknown";
}

struct TrendAnalysis {
    Trend trend = Trend::Unclear;
    double tail_estimate = kInfinity;

    bool cauchy() const noexcept { return trend == Trend::Settled || trend == Trend::Geometric; }
};

/// Classifies the increments |S(h_{k+1}) - S(h_k)| of a partial-value sequence taken
/// on a doubling schedule.
///
/// Settled: the last increment is below the Cauchy threshold.
/// Geometric: the last ratio_window increment ratios are all <= ratio_converge, so the
///   remaining tail is bounded by d_last r / (1 - r).
/// Growing: the ratios are all >= ratio_diverge (increments do not shrink).
inline TrendAnalysis analyze_increments(std::span<const double> increments, double magnitude,
                                        const Tolerances& tol) {
    TrendAnalysis out;
    if (increments.empty()) return out;
    const double last = increments.back();
    if (last <= tol.cauchy_threshold(magnitude)) {
        out.trend = Trend::Settled;
        out.tail_estimate = last;
        return out;
    }
    const std::size_t available = increments.size() - 1;
    const std::size_t window = std::min<std::size_t>(available, static_cast<std::size_t>(std::max(tol.ratio_window, 1)));
    if (window == 0) {
        out.tail_estimate = last;
        return out;
    }
    double r_max = 0.0;
    double r_min = kInfinity;
    for (std::size_t i = increments.size() - window; i < increments.size(); ++i) {
        const double prev = increments[i - 1];
        const double r = prev > 0.0 ? increments[i] / prev : kInfinity;
        r_max = std::max(r_max, r);
        r_min = std::min(r_min, r);
    }
    if (r_max <= tol.ratio_converge) {
        out.trend = Trend::Geometric;
        out.tail_estimate = last * r_max / (1.0 - r_max);
    } else if (r_min >= tol.ratio_diverge) {
        out.trend = Trend::Growing;
        out.tail_estimate = kInfinity;
    } else {
        out.tail_estimate = last;
    }
    return out;
}

enum class ConvergenceKind { AbsolutelyConvergent, ConditionallyConvergent, Divergent, Inconclusive };

constexpr std::string_view to_string(ConvergenceKind k) noexcept {
    switch (k) {
        case ConvergenceKind::AbsolutelyConvergent: return "AbsolutelyConvergent";
        case ConvergenceKind::ConditionallyConvergent: return "ConditionallyConvergent";
        case ConvergenceKind::Divergent: return "Divergent";
        case ConvergenceKind::Inconclusive: return "Inconclusive";
    }
    return "Unknown";
}

struct ConvergenceVerdict {
    ConvergenceKind kind = ConvergenceKind::Inconclusive;
    double tail_estimate = kInfinity;
    std::vector<double> horizons_tested;
    /// Frobenius norms of consecutive partial-value differences.
    std::vector<double> value_increments;
    /// Consecutive differences of the absolute partial sums.
    std::vector<double> abs_increments;
    Trend value_trend = Trend::Unclear;
    Trend abs_trend = Trend::Unclear;

    bool convergent() const noexcept {
        return kind == ConvergenceKind::AbsolutelyConvergent || kind == ConvergenceKind::ConditionallyConvergent;
    }
};

/// Verdict from partial values and absolute partial sums on a horizon schedule.
/// value_norm_increments[k] = |P(h_{k+1}) - P(h_k)|, abs_partials[k] = integral of |F| up to h_k.
inline ConvergenceVerdict classify(std::vector<double> horizons, std::vector<double> value_norm_increments,
                                   double value_magnitude, std::span<const double> abs_partials,
                                   const Tolerances& tol) {
    ConvergenceVerdict v;
    v.horizons_tested = std::move(horizons);
    v.value_increments = std::move(value_norm_increments);
    for (std::size_t i = 1; i < abs_partials.size(); ++i) {
        v.abs_increments.push_back(std::max(0.0, abs_partials[i] - abs_partials[i - 1]));
    }
    const double abs_magnitude = abs_partials.empty() ? 0.0 : abs_partials.back();
    const TrendAnalysis values = analyze_increments(v.value_increments, value_magnitude, tol);
    const TrendAnalysis sums = analyze_increments(v.abs_increments, abs_magnitude, tol);
    v.value_trend = values.trend;
    v.abs_trend = sums.trend;
    // |P(h') - P(h)| never exceeds the absolute increment, so a settling absolute sum
    // settles the values too, however noisy their own increments are.
    if (sums.cauchy()) {
        v.kind = ConvergenceKind::AbsolutelyConvergent;
        v.tail_estimate = sums.tail_estimate;
    } else if (values.cauchy() && sums.trend == Trend::Growing) {
        v.kind = ConvergenceKind::ConditionallyConvergent;
        v.tail_estimate = values.tail_estimate;
    } else if (values.trend == Trend::Growing) {
        v.kind = ConvergenceKind::Divergent;
        v.tail_estimate = kInfinity;
    } else {
        v.kind = ConvergenceKind::Inconclusive;
        v.tail_estimate = values.tail_estimate;
    }
    return v;
}

}  // namespace tempus

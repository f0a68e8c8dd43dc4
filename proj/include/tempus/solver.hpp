#pragma once

#include "tempus/calculus.hpp"
#include "tempus/convergence.hpp"
#include "tempus/error.hpp"
#include "tempus/linalg.hpp"
#include "tempus/timescale.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tempus {

enum class TrajectoryKind { Vector, Fundamental };

/// Sampled solution path on an enumerated grid. Vector trajectories store n x 1 columns.
struct Trajectory {
    Grid grid;
    std::vector<Matrix> values;
    TimeScale scale;
    TrajectoryKind kind = TrajectoryKind::Vector;

    std::size_t size() const noexcept { return grid.size(); }
    double t(std::size_t i) const { return grid[i].t; }
    /// Index of the grid point at t (within the scale's membership tolerance).
    std::size_t index_of(double t) const { return detail::grid_index(grid, t, scale.epsilon()); }
    const Matrix& at(double t) const { return values[index_of(t)]; }
};

/// x^Delta = A(t) x from x(a) = x0 up to spec.horizon.
inline Trajectory solve_linear(const TimeScale& ts, const MatrixSignal& a, const Vector& x0, double from,
                               const GridSpec& spec, const Tolerances& tol = {}) {
    if (x0.size() != a.dim) fail(ErrorKind::DimensionMismatch, "initial vector size differs from signal dim");
    Trajectory traj{ts.enumerate_grid(from, spec), {}, ts, TrajectoryKind::Vector};
    traj.values.reserve(traj.grid.size());
    march(
        traj.grid, Vector(x0),
        [&](double t, double mu, const Vector& x) -> Vector {
            return detail::regressive_step(a, t, mu, tol.regress) * x;
        },
        [&](double t, const Vector& x) -> Vector { return a(t) * x; }, tol.rk_substeps,
        [&](std::size_t, const Vector& x) { traj.values.emplace_back(x); });
    return traj;
}

/// Fundamental matrix path with X(a) = I.
inline Trajectory fundamental_matrix(const TimeScale& ts, const MatrixSignal& a, double from, const GridSpec& spec,
                                     const Tolerances& tol = {}) {
    Trajectory traj{ts.enumerate_grid(from, spec), {}, ts, TrajectoryKind::Fundamental};
    traj.values = exp_matrix_path(a, traj.grid, tol);
    return traj;
}

enum class ClassSKind { ClassS, NotClassS, Inconclusive };

constexpr std::string_view to_string(ClassSKind k) noexcept {
    switch (k) {
        case ClassSKind::ClassS: return "ClassS";
        case ClassSKind::NotClassS: return "NotClassS";
        case ClassSKind::Inconclusive: return "Inconclusive";
    }
    return "Unknown";
}

struct ClassSVerdict {
    Matrix limit;
    std::vector<double> horizons;
    /// |X(h_{k+1}) - X(h_k)| for consecutive schedule horizons.
    std::vector<double> cauchy_residuals;
    /// Smallest singular value of the limit; |x_inf| for vector trajectories.
    double min_singular_value = 0.0;
    /// min_singular_value normalized by the largest singular value (vector: by max |x(h)|).
    double relative_singular_value = 0.0;
    Trend residual_trend = Trend::Unclear;
    double tail_estimate = kInfinity;
    ClassSKind verdict = ClassSKind::Inconclusive;
};

/// Estimates X_inf as the value at the last horizon and decides class (S) from the
/// residual trend and the nonsingularity of the limit.
inline ClassSVerdict limit_estimate(const Trajectory& traj, std::span<const double> schedule,
                                    const Tolerances& tol = {}) {
    require_increasing(schedule, 3);
    if (schedule.back() > traj.grid.back().t + traj.scale.epsilon()) {
        fail(ErrorKind::HorizonExceeded, "trajectory ends before the last schedule horizon");
    }
    ClassSVerdict out;
    std::vector<const Matrix*> samples;
    for (double h : schedule) {
        const std::size_t i = traj.index_of(h);
        samples.push_back(&traj.values[i]);
        out.horizons.push_back(traj.grid[i].t);
    }
    for (std::size_t k = 1; k < samples.size(); ++k) {
        out.cauchy_residuals.push_back(norm(*samples[k] - *samples[k - 1]));
    }
    out.limit = *samples.back();
    const TrendAnalysis trend = analyze_increments(out.cauchy_residuals, norm(out.limit), tol);
    out.residual_trend = trend.trend;
    out.tail_estimate = trend.tail_estimate;

    bool nonsingular = false;
    if (traj.kind == TrajectoryKind::Fundamental) {
        const auto sv = singular_values(out.limit);
        out.min_singular_value = sv.min;
        out.relative_singular_value = sv.relative();
        nonsingular = out.relative_singular_value > tol.singular;
    } else {
        double scale = 0.0;
        for (const auto* s : samples) scale = std::max(scale, norm(*s));
        out.min_singular_value = norm(out.limit);
        out.relative_singular_value = scale > 0.0 ? out.min_singular_value / scale : 0.0;
        const bool trivial = std::all_of(traj.values.begin(), traj.values.end(),
                                         [](const Matrix& v) { return v.isZero(0.0); });
        nonsingular = trivial || out.relative_singular_value > tol.singular;
    }

    if (trend.cauchy()) {
        out.verdict = nonsingular ? ClassSKind::ClassS : ClassSKind::NotClassS;
    } else if (trend.trend == Trend::Growing) {
        out.verdict = ClassSKind::NotClassS;
    } else {
        out.verdict = ClassSKind::Inconclusive;
    }
    return out;
}

/// Upper Gronwall bound x0_norm * e_{|A|}(t, a).
inline double gronwall_envelope(const TimeScale& ts, const ScalarSignal& norm_a, double x0_norm, double from,
                                double to, const Tolerances& tol = {}) {
    return x0_norm * exp_scalar(ts, norm_a, from, to, tol);
}

inline std::vector<double> gronwall_envelope_path(const ScalarSignal& norm_a, double x0_norm, const Grid& grid,
                                                  const Tolerances& tol = {}) {
    auto path = exp_scalar_path(norm_a, grid, tol);
    for (auto& v : path) v *= x0_norm;
    return path;
}

/// Lower bound on |x| along the grid from |x(grid.front())| = xs_norm.
///
/// An isolated step can shrink a solution by at most the factor 1 - mu |A|
/// (|(I + mu A)^{-1}| <= 1 / (1 - mu |A|)), so the bound multiplies by that factor
/// and drops to zero once mu |A| >= 1. Inside intervals it decays as exp(-int |A|).
inline std::vector<double> gronwall_lower_path(const ScalarSignal& norm_a, double xs_norm, const Grid& grid,
                                               const Tolerances& tol = {}) {
    std::vector<double> path;
    path.reserve(grid.size());
    march(
        grid, xs_norm, [&](double t, double mu, double x) { return x * std::max(0.0, 1.0 - mu * norm_a(t)); },
        [&](double t, double x) { return -norm_a(t) * x; }, tol.rk_substeps,
        [&](std::size_t, double x) { path.push_back(x); });
    return path;
}

namespace detail {

/// Walks [from, to] in grid windows spanning at most `chunk` time units, so memory
/// stays bounded for very long horizons. Consecutive windows share their endpoint.
template <class Visit>
void for_each_window(const TimeScale& ts, double from, double to, const Tolerances& tol, double chunk, Visit&& visit) {
    double t = from;
    while (t < to) {
        double next = ts.snap_down(std::min(to, t + chunk));
        if (!(next > t)) next = ts.sigma(t);
        visit(ts.enumerate_grid(t, {next, tol.h_max}));
        t = next;
    }
}

}  // namespace detail

inline double gronwall_lower(const TimeScale& ts, const ScalarSignal& norm_a, double xs_norm, double s, double t,
                             const Tolerances& tol = {}) {
    const auto s_s = ts.snap(s);
    const auto t_s = ts.snap(t);
    if (!s_s || !t_s) fail(ErrorKind::NotInScale, "gronwall_lower arguments must be scale members");
    if (*t_s < *s_s) fail(ErrorKind::InvalidArgument, "gronwall_lower requires s <= t");
    double x = xs_norm;
    detail::for_each_window(ts, *s_s, *t_s, tol, 65536.0,
                            [&](const Grid& grid) { x = gronwall_lower_path(norm_a, x, grid, tol).back(); });
    return x;
}

/// The reciprocal-exponential form xs_norm / e_{|A|}(t, s). It coincides with
/// gronwall_lower where mu = 0 but is not a lower bound across isolated steps that contract.
inline double gronwall_lower_printed(const TimeScale& ts, const ScalarSignal& norm_a, double xs_norm, double s,
                                     double t, const Tolerances& tol = {}) {
    return xs_norm / exp_scalar(ts, norm_a, s, t, tol);
}

/// Right-hand side of x^Delta = f(t, x) with the growth bound |f(t, x)| <= K(t)|x| for |x| < delta.
struct NonlinearField {
    Eigen::Index dim = 1;
    std::function<Vector(double, const Vector&)> eval;
    ScalarSignal bound;
    double delta = kInfinity;

    Vector operator()(double t, const Vector& x) const {
        Vector v = eval(t, x);
        if (v.size() != dim) fail(ErrorKind::DimensionMismatch, "field returned wrong dimension");
        return v;
    }
};

/// Worst ratio |f(t,x)| / (K(t)|x|) over random samples with |x| < delta at grid points.
/// Values <= 1 are consistent with the declared bound.
inline double spot_check_field(const TimeScale& ts, const NonlinearField& f, double from, const GridSpec& spec,
                               int samples_per_point = 4, std::uint64_t seed = 7) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double radius = std::isfinite(f.delta) ? f.delta : 1.0;
    double worst = 0.0;
    for (const auto& g : ts.enumerate_grid(from, spec)) {
        for (int s = 0; s < samples_per_point; ++s) {
            Vector x(f.dim);
            for (Eigen::Index i = 0; i < f.dim; ++i) x(i) = unit(rng);
            const double scale = radius * 0.999 * std::abs(unit(rng)) / std::max(x.norm(), 1e-300);
            x *= scale;
            const double denom = f.bound(g.t) * x.norm();
            const double num = f(g.t, x).norm();
            if (num == 0.0) continue;
            worst = std::max(worst, denom > 0.0 ? num / denom : kInfinity);
        }
    }
    return worst;
}

namespace detail {

template <class Observer>
Vector march_nonlinear(const Grid& grid, const NonlinearField& f, Vector x, const Tolerances& tol, Observer&& observe) {
    return march(
        grid, std::move(x), [&](double t, double mu, const Vector& v) -> Vector { return v + mu * f(t, v); },
        [&](double t, const Vector& v) -> Vector { return f(t, v); }, tol.rk_substeps,
        [&](std::size_t i, const Vector& v) {
            if (!(v.norm() < f.delta)) {
                fail(ErrorKind::DomainEscape, "|x| = " + show(v.norm()) + " >= delta at t=" + show(grid[i].t));
            }
            observe(i, v);
        });
}

}  // namespace detail

/// x^Delta = f(t, x): exact step x + mu f(t, x) at isolated points, RK4 in intervals.
/// Leaving the ball |x| < delta raises DomainEscape.
inline Trajectory solve_nonlinear(const TimeScale& ts, const NonlinearField& f, const Vector& x0, double from,
                                  const GridSpec& spec, const Tolerances& tol = {}) {
    if (x0.size() != f.dim) fail(ErrorKind::DimensionMismatch, "initial vector size differs from field dim");
    Trajectory traj{ts.enumerate_grid(from, spec), {}, ts, TrajectoryKind::Vector};
    traj.values.reserve(traj.grid.size());
    detail::march_nonlinear(traj.grid, f, x0, tol, [&](std::size_t, const Vector& x) { traj.values.emplace_back(x); });
    return traj;
}

/// Same solution sampled only at the given horizons, marched window by window.
inline std::vector<Vector> solve_nonlinear_at(const TimeScale& ts, const NonlinearField& f, const Vector& x0,
                                              double from, std::span<const double> horizons,
                                              const Tolerances& tol = {}, double chunk = 65536.0) {
    if (x0.size() != f.dim) fail(ErrorKind::DimensionMismatch, "initial vector size differs from field dim");
    require_increasing(horizons, 1);
    const auto start = ts.snap(from);
    if (!start) fail(ErrorKind::NotInScale, "start is not a scale member");
    if (!(x0.norm() < f.delta)) fail(ErrorKind::DomainEscape, "initial value outside the domain");
    std::vector<Vector> out;
    Vector x = x0;
    double t = *start;
    for (double h : horizons) {
        const auto hs = ts.snap(h);
        if (!hs) fail(ErrorKind::NotInScale, "horizon " + show(h) + " is not a scale member");
        if (*hs < t) fail(ErrorKind::InvalidArgument, "horizons must not precede the start");
        detail::for_each_window(ts, t, *hs, tol, chunk, [&](const Grid& grid) {
            x = detail::march_nonlinear(grid, f, std::move(x), tol, [](std::size_t, const Vector&) {});
        });
        t = *hs;
        out.push_back(x);
    }
    return out;
}

struct GateResult {
    bool passed = false;
    /// max over the schedule of x0_norm * e_K(h, t0)
    double sup_envelope = 0.0;
    std::vector<double> envelope;
    Trend envelope_trend = Trend::Unclear;
    ConvergenceVerdict integral_verdict;
};

/// Smallness gate x0_norm e_K(h, t0) < delta at every schedule horizon, with e_K
/// required to be horizon-stable (Cauchy across the schedule).
inline GateResult theorem4_gate(const TimeScale& ts, const ScalarSignal& k, double x0_norm, double delta, double t0,
                                std::span<const double> schedule, const Tolerances& tol = {}) {
    require_increasing(schedule, 2);
    GateResult out;
    out.integral_verdict = improper_delta_integral(ts, scalar_signal(k), t0, schedule, tol).second;
    const Grid grid = ts.enumerate_grid(t0, {schedule.back(), tol.h_max});
    const auto path = exp_scalar_path(k, grid, tol);
    std::vector<double> increments;
    bool below = true;
    for (double h : schedule) {
        const double e = x0_norm * path[detail::grid_index(grid, h, ts.epsilon())];
        if (!out.envelope.empty()) increments.push_back(std::abs(e - out.envelope.back()));
        out.envelope.push_back(e);
        out.sup_envelope = std::max(out.sup_envelope, e);
        below = below && e < delta;
    }
    const TrendAnalysis trend = analyze_increments(increments, out.sup_envelope, tol);
    out.envelope_trend = trend.trend;
    out.passed = below && trend.cauchy();
    return out;
}

}  // namespace tempus

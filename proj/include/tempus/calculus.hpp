#pragma once

#include "tempus/convergence.hpp"
#include "tempus/error.hpp"
#include "tempus/linalg.hpp"
#include "tempus/timescale.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tempus {

using ScalarSignal = std::function<double(double)>;

/// Declared bound |A(t)| <= bound(t) for t >= t_env, bound nonincreasing there.
struct Envelope {
    ScalarSignal bound;
    double t_env = 0.0;
};

/// Pure coefficient map t -> n x n matrix.
struct MatrixSignal {
    Eigen::Index dim = 1;
    std::function<Matrix(double)> eval;
    std::optional<Envelope> envelope;

    Matrix operator()(double t) const {
        Matrix m = eval(t);
        if (m.rows() != dim || m.cols() != dim) {
            fail(ErrorKind::DimensionMismatch, "signal returned " + std::to_string(m.rows()) + "x" +
                                                   std::to_string(m.cols()) + ", expected dim " +
                                                   std::to_string(dim));
        }
        return m;
    }
};

inline MatrixSignal scalar_signal(ScalarSignal k, std::optional<Envelope> envelope = std::nullopt) {
    return {1, [k = std::move(k)](double t) { return Matrix::Constant(1, 1, k(t)); }, std::move(envelope)};
}

inline MatrixSignal constant_signal(Matrix m) {
    const auto n = m.rows();
    return {n, [m = std::move(m)](double) { return m; }, std::nullopt};
}

inline MatrixSignal zero_signal(Eigen::Index n) { return constant_signal(Matrix::Zero(n, n)); }

/// t -> |A(t)| (Frobenius) as a scalar signal.
inline ScalarSignal norm_of(MatrixSignal a) {
    return [a = std::move(a)](double t) { return norm(a(t)); };
}

struct IntegralResult {
    Matrix value;
    double abs_value = 0.0;
    double error_estimate = 0.0;
    GridSpec grid_used;
};

namespace detail {

inline std::vector<Matrix> sample(const MatrixSignal& f, const Grid& grid) {
    std::vector<Matrix> out;
    out.reserve(grid.size());
    for (const auto& g : grid) out.push_back(f(g.t));
    return out;
}

/// Index of the grid entry equal to t (within eps), or throws NotInScale.
inline std::size_t grid_index(const Grid& grid, double t, double eps) {
    auto it = std::lower_bound(grid.begin(), grid.end(), t - eps,
                               [](const GridPoint& g, double v) { return g.t < v; });
    if (it == grid.end() || std::abs(it->t - t) > eps) {
        fail(ErrorKind::NotInScale, "t=" + show(t) + " is not a grid point");
    }
    return static_cast<std::size_t>(std::distance(grid.begin(), it));
}

inline double cell_width(const Grid& grid, std::size_t i) { return grid[i + 1].t - grid[i].t; }

}  // namespace detail

/// Running Delta-integral from grid.front().t to every grid point.
/// Isolated points contribute mu F(t); interval cells use the trapezoid rule.
struct CumulativeIntegral {
    std::vector<Matrix> value;
    std::vector<double> abs;
    /// Richardson estimate |T_h - T_2h| / 3 summed over interval runs.
    double error_estimate = 0.0;
};

inline CumulativeIntegral cumulative_integral(const Grid& grid, std::span<const Matrix> samples) {
    CumulativeIntegral out;
    const std::size_t n = grid.size();
    if (n == 0) return out;
    const auto rows = samples[0].rows();
    const auto cols = samples[0].cols();
    out.value.reserve(n);
    out.abs.reserve(n);
    out.value.push_back(Matrix::Zero(rows, cols));
    out.abs.push_back(0.0);

    Matrix run_coarse = Matrix::Zero(rows, cols);
    Matrix run_fine = Matrix::Zero(rows, cols);
    std::size_t run_cells = 0;
    std::size_t run_start = 0;
    auto close_run = [&](std::size_t end) {
        if (run_cells >= 2) out.error_estimate += norm(run_fine - run_coarse) / 3.0;
        run_cells = 0;
        run_fine.setZero();
        run_coarse.setZero();
        run_start = end;
    };

    for (std::size_t i = 0; i + 1 < n; ++i) {
        Matrix step;
        double abs_step = 0.0;
        if (grid[i].mu > 0.0) {
            if (run_cells > 0) close_run(i);
            step = grid[i].mu * samples[i];
            abs_step = grid[i].mu * norm(samples[i]);
        } else {
            if (run_cells == 0) run_start = i;
            const double h = detail::cell_width(grid, i);
            step = 0.5 * h * (samples[i] + samples[i + 1]);
            abs_step = 0.5 * h * (norm(samples[i]) + norm(samples[i + 1]));
            run_fine += step;
            ++run_cells;
            if ((i - run_start) % 2 == 1) {
                const double wide = grid[i + 1].t - grid[i - 1].t;
                run_coarse += 0.5 * wide * (samples[i - 1] + samples[i + 1]);
            } else if (i + 2 >= n || grid[i + 1].mu > 0.0) {
                run_coarse += step;
            }
        }
        out.value.push_back(out.value.back() + step);
        out.abs.push_back(out.abs.back() + abs_step);
    }
    if (run_cells > 0) close_run(n - 1);
    return out;
}

/// Delta-integral of F over [a, b].
inline IntegralResult delta_integral(const TimeScale& ts, const MatrixSignal& f, double a, double b,
                                     double h_max = 1e-2) {
    const auto a_s = ts.snap(a);
    const auto b_s = ts.snap(b);
    if (!a_s || !b_s) fail(ErrorKind::NotInScale, "integration limits must be scale members");
    if (*b_s < *a_s) fail(ErrorKind::InvalidArgument, "delta_integral requires a <= b");
    const GridSpec spec{*b_s, h_max};
    if (*b_s == *a_s) return {Matrix::Zero(f.dim, f.dim), 0.0, 0.0, spec};
    const Grid grid = ts.enumerate_grid(*a_s, spec);
    const auto samples = detail::sample(f, grid);
    const auto cum = cumulative_integral(grid, samples);
    return {cum.value.back(), cum.abs.back(), cum.error_estimate, spec};
}

namespace detail {

/// Integral of the envelope beyond h, extrapolated geometrically from two doubling windows.
inline double envelope_tail(const TimeScale& ts, const Envelope& env, double a, double h, double h_max) {
    if (h < env.t_env) return kInfinity;
    const MatrixSignal e = scalar_signal(env.bound);
    const double h2 = ts.snap_down(h + (h - a));
    const double h3 = ts.snap_down(h + 3.0 * (h - a));
    if (!(h2 > h) || !(h3 > h2)) return kInfinity;
    const double w1 = delta_integral(ts, e, h, h2, h_max).value(0, 0);
    const double w2 = delta_integral(ts, e, h2, h3, h_max).value(0, 0);
    if (w1 <= 0.0) return w2 <= 0.0 ? 0.0 : kInfinity;
    const double r = w2 / w1;
    if (!(r < 1.0)) return kInfinity;
    return w1 + w2 / (1.0 - r);
}

}  // namespace detail

/// Partial Delta-integrals at each schedule horizon plus a convergence verdict.
/// The returned value is the partial integral at the last horizon.
inline std::pair<IntegralResult, ConvergenceVerdict> improper_delta_integral(const TimeScale& ts,
                                                                             const MatrixSignal& f, double a,
                                                                             std::span<const double> schedule,
                                                                             const Tolerances& tol = {}) {
    require_increasing(schedule, 2);
    const auto a_s = ts.snap(a);
    if (!a_s) fail(ErrorKind::NotInScale, "start is not a scale member");
    std::vector<double> horizons;
    for (double h : schedule) {
        const auto s = ts.snap(h);
        if (!s) fail(ErrorKind::NotInScale, "schedule horizon " + show(h) + " is not a scale member");
        if (!(*s > *a_s)) fail(ErrorKind::EmptyRange, "schedule horizon must exceed the start");
        horizons.push_back(*s);
    }
    const GridSpec spec{horizons.back(), tol.h_max};
    const Grid grid = ts.enumerate_grid(*a_s, spec);
    const auto samples = detail::sample(f, grid);
    const auto cum = cumulative_integral(grid, samples);

    std::vector<double> abs_partials;
    std::vector<double> increments;
    const Matrix* previous = nullptr;
    for (double h : horizons) {
        const std::size_t i = detail::grid_index(grid, h, ts.epsilon());
        if (previous) increments.push_back(norm(cum.value[i] - *previous));
        previous = &cum.value[i];
        abs_partials.push_back(cum.abs[i]);
    }
    ConvergenceVerdict verdict =
        classify(horizons, std::move(increments), norm(cum.value.back()), abs_partials, tol);
    if (f.envelope && verdict.convergent()) {
        const double env_tail = detail::envelope_tail(ts, *f.envelope, *a_s, horizons.back(), tol.h_max);
        if (std::isfinite(env_tail)) verdict.tail_estimate = env_tail;
    }
    return {IntegralResult{cum.value.back(), cum.abs.back(), cum.error_estimate, spec}, std::move(verdict)};
}

namespace detail {

template <class State, class Flow>
State rk4_step(Flow& flow, double t, const State& x, double h) {
    const State k1 = flow(t, x);
    const State k2 = flow(t + 0.5 * h, State(x + (0.5 * h) * k1));
    const State k3 = flow(t + 0.5 * h, State(x + (0.5 * h) * k2));
    const State k4 = flow(t + h, State(x + h * k3));
    return State(x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

}  // namespace detail

/// Advances a state along a scale grid: jump(t, mu, x) at isolated points, classical
/// RK4 on flow(t, x) with `substeps` equal steps across each interval cell.
/// observe(i, x) sees the state at every grid index.
template <class State, class Jump, class Flow, class Observer>
State march(const Grid& grid, State x, Jump&& jump, Flow&& flow, int substeps, Observer&& observe) {
    const int m = std::max(substeps, 1);
    observe(std::size_t{0}, x);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const GridPoint& g = grid[i];
        if (g.mu > 0.0) {
            x = jump(g.t, g.mu, x);
        } else {
            const double h = detail::cell_width(grid, i) / m;
            for (int s = 0; s < m; ++s) x = detail::rk4_step(flow, g.t + s * h, x, h);
        }
        observe(i + 1, x);
    }
    return x;
}

namespace detail {

inline Matrix regressive_step(const MatrixSignal& a, double t, double mu, double tol_regress) {
    Matrix step = identity(a.dim) + mu * a(t);
    const double det = step.determinant();
    if (!(std::abs(det) > tol_regress)) {
        fail(ErrorKind::NotRegressive, "|det(I + mu A)| = " + show(std::abs(det)) +
                                           " at t=" + show(t));
    }
    return step;
}

inline double regressive_scalar_step(const ScalarSignal& k, double t, double mu, double tol_regress) {
    const double step = 1.0 + mu * k(t);
    if (!(std::abs(step) > tol_regress)) {
        fail(ErrorKind::NotRegressive, "1 + mu k = " + show(step) + " at t=" + show(t));
    }
    return step;
}

}  // namespace detail

/// e_A(t, a) at every point of grid (grid.front() is a).
inline std::vector<Matrix> exp_matrix_path(const MatrixSignal& a, const Grid& grid, const Tolerances& tol = {}) {
    std::vector<Matrix> path;
    path.reserve(grid.size());
    march(
        grid, identity(a.dim),
        [&](double t, double mu, const Matrix& x) -> Matrix {
            return detail::regressive_step(a, t, mu, tol.regress) * x;
        },
        [&](double t, const Matrix& x) -> Matrix { return a(t) * x; }, tol.rk_substeps,
        [&](std::size_t, const Matrix& x) { path.push_back(x); });
    return path;
}

/// Matrix exponential e_A(t, a): the fundamental matrix with X(a) = I.
inline Matrix exp_matrix(const TimeScale& ts, const MatrixSignal& a, double from, double to,
                         const Tolerances& tol = {}) {
    const auto f = ts.snap(from);
    const auto t = ts.snap(to);
    if (!f || !t) fail(ErrorKind::NotInScale, "exp_matrix arguments must be scale members");
    if (*t < *f) fail(ErrorKind::InvalidArgument, "exp_matrix requires a <= t");
    if (*t == *f) return identity(a.dim);
    return exp_matrix_path(a, ts.enumerate_grid(*f, {*t, tol.h_max}), tol).back();
}

inline std::vector<double> exp_scalar_path(const ScalarSignal& k, const Grid& grid, const Tolerances& tol = {}) {
    std::vector<double> path;
    path.reserve(grid.size());
    march(
        grid, 1.0,
        [&](double t, double mu, double x) { return detail::regressive_scalar_step(k, t, mu, tol.regress) * x; },
        [&](double t, double x) { return k(t) * x; }, tol.rk_substeps,
        [&](std::size_t, double x) { path.push_back(x); });
    return path;
}

/// Scalar exponential e_k(t, a).
inline double exp_scalar(const TimeScale& ts, const ScalarSignal& k, double from, double to,
                         const Tolerances& tol = {}) {
    const auto f = ts.snap(from);
    const auto t = ts.snap(to);
    if (!f || !t) fail(ErrorKind::NotInScale, "exp_scalar arguments must be scale members");
    if (*t < *f) fail(ErrorKind::InvalidArgument, "exp_scalar requires a <= t");
    if (*t == *f) return 1.0;
    return exp_scalar_path(k, ts.enumerate_grid(*f, {*t, tol.h_max}), tol).back();
}

/// (circle-minus A)(t) = -A(t) (I + mu(t) A(t))^{-1}; exactly -A(t) where mu = 0.
inline MatrixSignal ominus(MatrixSignal a, TimeScale ts, double tol_regress = 1e-10) {
    const auto n = a.dim;
    return {n,
            [a = std::move(a), ts = std::move(ts), tol_regress](double t) -> Matrix {
                const double mu = ts.mu(t);
                const Matrix at = a(t);
                if (mu == 0.0) return -at;
                const Matrix step = detail::regressive_step(a, t, mu, tol_regress);
                return -at * step.inverse();
            },
            std::nullopt};
}

struct RegressivityReport {
    bool regressive = true;
    double min_abs_det = 1.0;
    double worst_t = 0.0;
};

/// Scans |det(I + mu A)| over the grid of [a, horizon]. Right-dense points contribute det(I) = 1.
inline RegressivityReport regressivity_check(const TimeScale& ts, const MatrixSignal& a, double from,
                                             double horizon, const Tolerances& tol = {}) {
    const Grid grid = ts.enumerate_grid(from, {horizon, tol.h_max});
    RegressivityReport r;
    r.worst_t = grid.front().t;
    for (const auto& g : grid) {
        if (g.mu == 0.0) continue;
        const double d = std::abs((identity(a.dim) + g.mu * a(g.t)).determinant());
        if (d < r.min_abs_det) {
            r.min_abs_det = d;
            r.worst_t = g.t;
        }
    }
    r.regressive = r.min_abs_det > tol.regress;
    return r;
}

}  // namespace tempus

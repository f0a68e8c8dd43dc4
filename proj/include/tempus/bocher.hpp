#pragma once

#include "tempus/calculus.hpp"
#include "tempus/convergence.hpp"
#include "tempus/error.hpp"
#include "tempus/linalg.hpp"
#include "tempus/timescale.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tempus {

/// Memoized iterated tails on one shared grid:
///   Y_0 = I,  Y_j(t) = -int_t^H A(s) Y_{j-1}(s) Delta s,
/// so that Y_j^Delta = A Y_{j-1} holds exactly for the truncated tails.
/// Built once per (A, start, H); read-only after construction.
struct TailTable {
    Grid grid;
    std::vector<Matrix> a_values;
    /// tails[j - 1] holds Y_j at every grid point.
    std::vector<std::vector<Matrix>> tails;
    double start = 0.0;
    double horizon = 0.0;
    double epsilon = 1e-9;

    Eigen::Index dim() const { return a_values.front().rows(); }
    int orders() const { return static_cast<int>(tails.size()); }

    /// Value of Y_j at grid index i (Y_0 = I).
    Matrix at(int order, std::size_t i) const {
        if (order == 0) return identity(dim());
        return tails[static_cast<std::size_t>(order - 1)][i];
    }

    /// Sum Y_1 + ... + Y_k at grid index i.
    Matrix correction(int k, std::size_t i) const {
        Matrix s = Matrix::Zero(dim(), dim());
        for (int j = 1; j <= k; ++j) s += tails[static_cast<std::size_t>(j - 1)][i];
        return s;
    }

    std::size_t sigma_index(std::size_t i) const { return grid[i].mu > 0.0 ? i + 1 : i; }

    /// Grid position of t: exact node, or the left node of the interval cell containing t
    /// together with the interpolation weight of the right node.
    std::pair<std::size_t, double> locate(double t) const {
        if (t > horizon + epsilon) fail(ErrorKind::HorizonExceeded, "t beyond the tail truncation horizon");
        if (t < start - epsilon) fail(ErrorKind::NotInScale, "t before the analysis start");
        auto it = std::lower_bound(grid.begin(), grid.end(), t - epsilon,
                                   [](const GridPoint& g, double v) { return g.t < v; });
        const auto i = static_cast<std::size_t>(std::distance(grid.begin(), it));
        if (it != grid.end() && std::abs(it->t - t) <= epsilon) return {i, 0.0};
        if (i == 0 || i == grid.size() || grid[i - 1].mu > 0.0) {
            fail(ErrorKind::NotInScale, "t=" + show(t) + " is not a scale member");
        }
        const double w = (t - grid[i - 1].t) / (grid[i].t - grid[i - 1].t);
        return {i - 1, w};
    }

    template <class F>
    Matrix interpolate(double t, F&& value_at) const {
        const auto [i, w] = locate(t);
        if (w == 0.0) return value_at(i);
        return (1.0 - w) * value_at(i) + w * value_at(i + 1);
    }

    /// Appends Y_{orders()+1} by backward accumulation from the horizon.
    void extend() {
        const int j = orders() + 1;
        const std::size_t n = grid.size();
        std::vector<Matrix> y(n);
        y[n - 1] = Matrix::Zero(dim(), dim());
        auto integrand = [&](std::size_t i) { return Matrix(a_values[i] * at(j - 1, i)); };
        Matrix right = integrand(n - 1);
        for (std::size_t i = n - 1; i-- > 0;) {
            Matrix here = integrand(i);
            if (grid[i].mu > 0.0) {
                y[i] = y[i + 1] - grid[i].mu * here;
            } else {
                y[i] = y[i + 1] - 0.5 * (grid[i + 1].t - grid[i].t) * (here + right);
            }
            right = std::move(here);
        }
        tails.push_back(std::move(y));
    }

    static TailTable build(const TimeScale& ts, const MatrixSignal& a, double from, double horizon, double h_max) {
        TailTable t;
        t.grid = ts.enumerate_grid(from, {horizon, h_max});
        t.a_values = detail::sample(a, t.grid);
        t.start = t.grid.front().t;
        t.horizon = t.grid.back().t;
        t.epsilon = ts.epsilon();
        return t;
    }
};

/// k-fold tail integral Y_k as a function of t, truncated at horizon_used.
struct TailMatrix {
    int order = 1;
    double horizon_used = 0.0;
    std::shared_ptr<const TailTable> table;

    Matrix operator()(double t) const {
        return table->interpolate(t, [&](std::size_t i) { return table->at(order, i); });
    }
};

enum class Implication { Yes, NotImplied };

constexpr std::string_view to_string(Implication i) noexcept { return i == Implication::Yes ? "Yes" : "NotImplied"; }

struct OrderVerdict {
    int order = 1;
    ConvergenceVerdict verdict;
};

struct ConditionReport {
    std::vector<OrderVerdict> orders_convergent;
    std::optional<int> first_absolute_order;
    std::optional<ConvergenceVerdict> ominus_variant;
    /// Informational: order 1 convergent and the circle-minus integral absolutely convergent.
    bool ominus_implies_class_s = false;
    Implication implied_class_s = Implication::NotImplied;
    std::vector<double> horizons;
    double tail_horizon = 0.0;
    /// Start of the validity window of the transform that settles the verdict, when one applies.
    std::optional<double> t_star;
};

/// Shared state for the condition hierarchy of one coefficient signal: the schedule,
/// the padded tail horizon and the memoized tails. Orders are materialized on demand.
class BocherAnalysis {
public:
    BocherAnalysis(const TimeScale& ts, MatrixSignal a, double from, std::vector<double> schedule,
                   Tolerances tol = {}, std::optional<double> tail_horizon = std::nullopt)
        : ts_(ts), a_(std::move(a)), tol_(tol) {
        require_increasing(schedule, 2);
        const auto s = ts.snap(from);
        if (!s) fail(ErrorKind::NotInScale, "analysis start is not a scale member");
        for (double& h : schedule) {
            const auto hs = ts.snap(h);
            if (!hs) fail(ErrorKind::NotInScale, "schedule horizon " + show(h) + " is not a scale member");
            if (!(*hs > *s)) fail(ErrorKind::EmptyRange, "schedule horizon must exceed the start");
            h = *hs;
        }
        schedule_ = std::move(schedule);
        const double padded = tail_horizon ? *tail_horizon
                                           : ts.snap_down(*s + tol.tail_padding * (schedule_.back() - *s));
        if (padded < schedule_.back() - ts.epsilon()) {
            fail(ErrorKind::InvalidArgument, "tail horizon precedes the last schedule horizon");
        }
        table_ = std::make_shared<TailTable>(TailTable::build(ts, a_, *s, std::max(padded, schedule_.back()), tol.h_max));
        for (double h : schedule_) horizon_index_.push_back(detail::grid_index(table_->grid, h, ts.epsilon()));
    }

    const TimeScale& scale() const noexcept { return ts_; }
    const MatrixSignal& signal() const noexcept { return a_; }
    const Tolerances& tolerances() const noexcept { return tol_; }
    const std::vector<double>& schedule() const noexcept { return schedule_; }
    double start() const noexcept { return table_->start; }
    double tail_horizon() const noexcept { return table_->horizon; }
    std::shared_ptr<const TailTable> table() const { return table_; }

    void ensure_orders(int k) {
        while (table_->orders() < k) table_->extend();
    }

    TailMatrix tail(int k) {
        if (k < 1) fail(ErrorKind::InvalidArgument, "tail order must be >= 1");
        ensure_orders(k);
        return {k, table_->horizon, table_};
    }

    /// Verdict on int_a^inf A(t) Y_{j-1}(t) Delta t, the order-j integral up to sign.
    ConvergenceVerdict order_verdict(int j) {
        if (j < 1) fail(ErrorKind::InvalidArgument, "order must be >= 1");
        ensure_orders(j - 1);
        const std::size_t last = horizon_index_.back() + 1;
        std::vector<Matrix> samples;
        samples.reserve(last);
        for (std::size_t i = 0; i < last; ++i) samples.push_back(table_->a_values[i] * table_->at(j - 1, i));
        const Grid head(table_->grid.begin(), table_->grid.begin() + static_cast<std::ptrdiff_t>(last));
        return classify_partials(head, samples);
    }

    /// Verdict on int_a^inf (int_t^inf (circle-minus A)(s) Delta s) A(t) Delta t.
    ConvergenceVerdict ominus_verdict() const {
        const Grid& grid = table_->grid;
        const std::size_t n = grid.size();
        const auto dim = a_.dim;
        std::vector<Matrix> om(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (grid[i].mu == 0.0) {
                om[i] = -table_->a_values[i];
            } else {
                Matrix step = identity(dim) + grid[i].mu * table_->a_values[i];
                if (!(std::abs(step.determinant()) > tol_.regress)) {
                    fail(ErrorKind::NotRegressive, "I + mu A singular at t=" + show(grid[i].t));
                }
                om[i] = -table_->a_values[i] * step.inverse();
            }
        }
        std::vector<Matrix> tail(n);
        tail[n - 1] = Matrix::Zero(dim, dim);
        for (std::size_t i = n - 1; i-- > 0;) {
            tail[i] = grid[i].mu > 0.0 ? Matrix(tail[i + 1] + grid[i].mu * om[i])
                                       : Matrix(tail[i + 1] + 0.5 * (grid[i + 1].t - grid[i].t) * (om[i] + om[i + 1]));
        }
        const std::size_t last = horizon_index_.back() + 1;
        std::vector<Matrix> samples;
        samples.reserve(last);
        for (std::size_t i = 0; i < last; ++i) samples.push_back(tail[i] * table_->a_values[i]);
        const Grid head(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(last));
        return classify_partials(head, samples);
    }

    /// First grid time t* such that |Y_1 + ... + Y_k| at sigma(t) stays within the
    /// validity bound for every grid t in [t*, last schedule horizon].
    std::optional<double> validity_start(int k) {
        ensure_orders(k);
        const std::size_t last = horizon_index_.back();
        std::optional<std::size_t> first;
        for (std::size_t i = last + 1; i-- > 0;) {
            const std::size_t si = std::min(table_->sigma_index(i), table_->grid.size() - 1);
            if (norm(table_->correction(k, si)) <= tol_.validity_bound) {
                first = i;
            } else {
                break;
            }
        }
        if (!first) return std::nullopt;
        return table_->grid[*first].t;
    }

private:
    ConvergenceVerdict classify_partials(const Grid& grid, const std::vector<Matrix>& samples) const {
        const auto cum = cumulative_integral(grid, samples);
        std::vector<double> increments;
        std::vector<double> abs_partials;
        for (std::size_t k = 0; k < horizon_index_.size(); ++k) {
            const std::size_t i = horizon_index_[k];
            if (k > 0) increments.push_back(norm(cum.value[i] - cum.value[horizon_index_[k - 1]]));
            abs_partials.push_back(cum.abs[i]);
        }
        return classify(schedule_, std::move(increments), norm(cum.value.back()), abs_partials, tol_);
    }

    TimeScale ts_;
    MatrixSignal a_;
    Tolerances tol_;
    std::vector<double> schedule_;
    std::vector<std::size_t> horizon_index_;
    std::shared_ptr<TailTable> table_;
};

/// Y_k truncated at `horizon`. Orders 1..k-1 must classify as convergent on the
/// doubling schedule of [a, horizon].
inline TailMatrix tail_matrix(const TimeScale& ts, const MatrixSignal& a, double from, int k, double horizon,
                              const Tolerances& tol = {}) {
    if (k < 1) fail(ErrorKind::InvalidArgument, "tail order must be >= 1");
    std::vector<double> schedule;
    for (int e = 0; e < 64; ++e) {
        const double h = from + std::ldexp(1.0, e);
        if (h > horizon) break;
        const double s = ts.snap_down(h);
        if (s > from && (schedule.empty() || s > schedule.back())) schedule.push_back(s);
    }
    const double h_end = ts.snap_down(horizon);
    if (schedule.empty() || schedule.back() < h_end) schedule.push_back(h_end);
    if (schedule.size() < 2) {
        const double mid = ts.snap_down(0.5 * (from + h_end));
        if (!(mid > from) || !(mid < h_end)) {
            fail(ErrorKind::InvalidArgument, "horizon too close to the start for a tail schedule");
        }
        schedule.insert(schedule.begin(), mid);
    }
    BocherAnalysis analysis(ts, a, from, schedule, tol, h_end);
    for (int j = 1; j < k; ++j) {
        if (!analysis.order_verdict(j).convergent()) {
            fail(ErrorKind::PrerequisiteNotConvergent, "order " + std::to_string(j) + " integral is not convergent");
        }
    }
    return analysis.tail(k);
}

/// Theorem-1 level check: absolute convergence of int_a^inf A.
inline ConditionReport check_theorem1(const TimeScale& ts, const MatrixSignal& a, double from,
                                      std::span<const double> schedule, const Tolerances& tol = {}) {
    ConditionReport r;
    auto [integral, verdict] = improper_delta_integral(ts, a, from, schedule, tol);
    r.horizons = verdict.horizons_tested;
    r.tail_horizon = r.horizons.back();
    const bool absolute = verdict.kind == ConvergenceKind::AbsolutelyConvergent;
    r.orders_convergent.push_back({1, std::move(verdict)});
    if (absolute) {
        r.first_absolute_order = 1;
        r.implied_class_s = Implication::Yes;
    }
    return r;
}

/// Scans orders 1..k_max: continues while orders are convergent, stops at the first
/// absolutely convergent order (class (S) implied) or at any divergent/inconclusive order.
inline ConditionReport check_order_k(BocherAnalysis& analysis, int k_max) {
    if (k_max < 1) fail(ErrorKind::InvalidArgument, "k_max must be >= 1");
    ConditionReport r;
    r.horizons = analysis.schedule();
    r.tail_horizon = analysis.tail_horizon();
    for (int j = 1; j <= k_max; ++j) {
        ConvergenceVerdict v = analysis.order_verdict(j);
        const ConvergenceKind kind = v.kind;
        r.orders_convergent.push_back({j, std::move(v)});
        if (kind == ConvergenceKind::AbsolutelyConvergent) {
            r.first_absolute_order = j;
            r.implied_class_s = Implication::Yes;
            if (j > 1) r.t_star = analysis.validity_start(j - 1);
            break;
        }
        if (kind != ConvergenceKind::ConditionallyConvergent) break;
    }
    return r;
}

inline ConditionReport check_order_k(const TimeScale& ts, const MatrixSignal& a, double from, int k_max,
                                     std::span<const double> schedule, const Tolerances& tol = {}) {
    BocherAnalysis analysis(ts, a, from, std::vector<double>(schedule.begin(), schedule.end()), tol);
    return check_order_k(analysis, k_max);
}

inline ConvergenceVerdict check_ominus_variant(const TimeScale& ts, const MatrixSignal& a, double from,
                                               std::span<const double> schedule, const Tolerances& tol = {}) {
    BocherAnalysis analysis(ts, a, from, std::vector<double>(schedule.begin(), schedule.end()), tol);
    return analysis.ominus_verdict();
}

/// Which argument the inverse factor of the transformed system is evaluated at.
/// Sigma follows from the product rule; Printed evaluates (I + Y(t))^{-1} for comparison.
enum class InverseArgument { Sigma, Printed };

/// Change of variables x = (I + Y_1 + ... + Y_k) y and the transformed coefficient
///   B(t) = (I + sum_j Y_j(sigma(t)))^{-1} A(t) Y_k(t),   t >= t_star.
struct Transform {
    int order = 1;
    double t_star = 0.0;
    InverseArgument inverse_argument = InverseArgument::Sigma;
    std::shared_ptr<const TailTable> table;
    MatrixSignal coefficient;

    /// I + Y_1(t) + ... + Y_k(t)
    Matrix backmap(double t) const {
        return table->interpolate(t, [&](std::size_t i) { return Matrix(identity(table->dim()) + table->correction(order, i)); });
    }
};

namespace detail {

inline MatrixSignal transformed_coefficient(std::shared_ptr<const TailTable> table, int k, double t_star,
                                            InverseArgument mode) {
    const auto dim = table->dim();
    return {dim,
            [table = std::move(table), k, t_star, mode](double t) -> Matrix {
                if (t < t_star - table->epsilon) {
                    fail(ErrorKind::NoValidityWindow, "transformed coefficient evaluated before t*");
                }
                const auto [i, w] = table->locate(t);
                auto node = [&](std::size_t idx) -> Matrix {
                    const std::size_t inv_idx =
                        mode == InverseArgument::Sigma ? std::min(table->sigma_index(idx), table->grid.size() - 1) : idx;
                    const Matrix factor = identity(table->dim()) + table->correction(k, inv_idx);
                    return factor.partialPivLu().solve(Matrix(table->a_values[idx] * table->at(k, idx)));
                };
                if (w == 0.0) return node(i);
                return (1.0 - w) * node(i) + w * node(i + 1);
            },
            std::nullopt};
}

}  // namespace detail

/// Order-k change of variables. Requires orders 1..k convergent and a validity window.
inline Transform higher_transform(BocherAnalysis& analysis, int k, InverseArgument mode = InverseArgument::Sigma) {
    if (k < 1) fail(ErrorKind::InvalidArgument, "transform order must be >= 1");
    for (int j = 1; j <= k; ++j) {
        if (!analysis.order_verdict(j).convergent()) {
            fail(ErrorKind::PrerequisiteNotConvergent, "order " + std::to_string(j) + " integral is not convergent");
        }
    }
    const auto t_star = analysis.validity_start(k);
    if (!t_star) fail(ErrorKind::NoValidityWindow, "correction never falls below the validity bound on the schedule");
    Transform out;
    out.order = k;
    out.t_star = *t_star;
    out.inverse_argument = mode;
    out.table = analysis.table();
    out.coefficient = detail::transformed_coefficient(out.table, k, *t_star, mode);
    return out;
}

inline Transform higher_transform(const TimeScale& ts, const MatrixSignal& a, double from, int k,
                                  std::span<const double> schedule, const Tolerances& tol = {},
                                  InverseArgument mode = InverseArgument::Sigma) {
    BocherAnalysis analysis(ts, a, from, std::vector<double>(schedule.begin(), schedule.end()), tol);
    return higher_transform(analysis, k, mode);
}

inline Transform wintner_transform(const TimeScale& ts, const MatrixSignal& a, double from,
                                   std::span<const double> schedule, const Tolerances& tol = {},
                                   InverseArgument mode = InverseArgument::Sigma) {
    return higher_transform(ts, a, from, 1, schedule, tol, mode);
}

}  // namespace tempus

#pragma once

#include "tempus/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace tempus {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// A closed piece of a time scale: a single isolated point or an interval [left, right].
/// right may be +inf for the terminal interval of a scale without a tail generator.
struct Segment {
    enum class Kind { Point, Interval };

    Kind kind = Kind::Point;
    double left = 0.0;
    double right = 0.0;

    static Segment point(double t) { return {Kind::Point, t, t}; }

    static Segment interval(double a, double b) {
        if (!(a < b)) {
            std::ostringstream os;
            os << "interval requires a < b, got [" << a << ", " << b << "]";
            fail(ErrorKind::InvalidScale, os.str());
        }
        return {Kind::Interval, a, b};
    }

    bool is_point() const noexcept { return kind == Kind::Point; }
    bool operator==(const Segment&) const = default;
};

/// Deterministic source of segments following the explicit head of a scale.
/// segment(k) must be strictly increasing in k and unbounded above.
struct TailGenerator {
    std::function<Segment(std::int64_t)> segment;
    /// Optional fast lookup: an index k whose segment starts at or before t.
    /// Any underestimate is correct; it only saves a linear walk.
    std::function<std::int64_t(double)> locate;
    /// True when every generated segment is an isolated point.
    bool discrete = false;
};

struct GridSpec {
    double horizon = 0.0;  ///< largest t materialized; must be a member of the scale
    double h_max = 1e-2;   ///< maximum spacing of samples inside intervals
};

/// One materialized scale point and its graininess.
struct GridPoint {
    double t = 0.0;
    double mu = 0.0;
};

using Grid = std::vector<GridPoint>;

struct TimeScaleOptions {
    double epsilon_member = 1e-9;
    /// Lower bound on the gap between consecutive segments; rejects accumulation points.
    double min_gap = 1e-6;
    std::size_t max_grid_points = 50'000'000;
    /// Number of generated segments validated eagerly at construction.
    std::int64_t validate_prefix = 64;
};

/// Closed subset of the reals, unbounded above, built from an ordered head of
/// segments and an optional periodic-or-otherwise generated tail.
///
/// Values are immutable after construction. All queries are const and thread safe
/// as long as the generator is pure.
class TimeScale {
public:
    TimeScale(std::vector<Segment> head, std::optional<TailGenerator> tail = std::nullopt,
              TimeScaleOptions options = {})
        : head_(std::move(head)), tail_(std::move(tail)), options_(options) {
        validate();
    }

    /// [a, inf)
    static TimeScale real_line(double a = 0.0) { return TimeScale({Segment::interval(a, kInfinity)}); }

    /// {start, start+1, ...}
    static TimeScale integers(std::int64_t start = 0) {
        TailGenerator gen;
        gen.segment = [start](std::int64_t k) { return Segment::point(static_cast<double>(start + k)); };
        gen.locate = [start](double t) {
            return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(t)) - start - 1);
        };
        gen.discrete = true;
        return TimeScale({}, std::move(gen));
    }

    /// {start + k h : k >= 0}
    static TimeScale h_integers(double h, double start = 0.0) {
        if (!(h > 0.0)) fail(ErrorKind::InvalidScale, "hZ requires h > 0");
        TailGenerator gen;
        gen.segment = [h, start](std::int64_t k) { return Segment::point(start + static_cast<double>(k) * h); };
        gen.locate = [h, start](double t) {
            return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((t - start) / h)) - 1);
        };
        gen.discrete = true;
        return TimeScale({}, std::move(gen));
    }

    /// {t0 q^k : k >= 0}
    static TimeScale q_naturals(double q, double t0 = 1.0) {
        if (!(q > 1.0) || !(t0 > 0.0)) fail(ErrorKind::InvalidScale, "q^N requires q > 1 and t0 > 0");
        TailGenerator gen;
        gen.segment = [q, t0](std::int64_t k) { return Segment::point(t0 * std::pow(q, static_cast<double>(k))); };
        gen.locate = [q, t0](double t) {
            if (t <= t0) return std::int64_t{0};
            return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(std::log(t / t0) / std::log(q))) - 1);
        };
        gen.discrete = true;
        return TimeScale({}, std::move(gen));
    }

    /// pattern, pattern + period, pattern + 2 period, ... preceded by an optional head.
    static TimeScale periodic(std::vector<Segment> pattern, double period, std::vector<Segment> head = {},
                              TimeScaleOptions options = {}) {
        if (pattern.empty()) fail(ErrorKind::InvalidScale, "periodic scale needs a nonempty pattern");
        if (!(period > 0.0)) fail(ErrorKind::InvalidScale, "period must be positive");
        for (const auto& s : pattern) {
            if (!std::isfinite(s.right)) fail(ErrorKind::InvalidScale, "periodic pattern segments must be bounded");
        }
        if (pattern.back().right + options.min_gap > pattern.front().left + period) {
            fail(ErrorKind::InvalidScale, "periodic pattern does not fit inside one period");
        }
        const bool discrete = std::all_of(pattern.begin(), pattern.end(), [](const Segment& s) { return s.is_point(); });
        const auto m = static_cast<std::int64_t>(pattern.size());
        const double origin = pattern.front().left;
        TailGenerator gen;
        gen.segment = [pattern, period, m](std::int64_t k) {
            Segment s = pattern[static_cast<std::size_t>(k % m)];
            const double shift = static_cast<double>(k / m) * period;
            s.left += shift;
            s.right += shift;
            return s;
        };
        gen.locate = [period, m, origin](double t) {
            const auto cycles = static_cast<std::int64_t>(std::floor((t - origin) / period)) - 1;
            return std::max<std::int64_t>(0, cycles * m);
        };
        gen.discrete = discrete;
        return TimeScale(std::move(head), std::move(gen), options);
    }

    const std::vector<Segment>& head() const noexcept { return head_; }
    const std::optional<TailGenerator>& tail() const noexcept { return tail_; }
    const TimeScaleOptions& options() const noexcept { return options_; }
    double epsilon() const noexcept { return options_.epsilon_member; }

    /// True when every point of the scale is isolated (no intervals anywhere).
    bool is_discrete() const {
        const bool head_discrete =
            std::all_of(head_.begin(), head_.end(), [](const Segment& s) { return s.is_point(); });
        return head_discrete && tail_ && tail_->discrete;
    }

    /// Smallest member of the scale.
    double start() const { return first_cursor().seg.left; }

    bool contains(double t) const { return snap(t).has_value(); }

    /// The member within epsilon_member of t, or nullopt.
    std::optional<double> snap(double t) const {
        auto c = find(t);
        if (!c) return std::nullopt;
        return snapped(*c, t);
    }

    /// Largest member not exceeding t (with tolerance).
    double snap_down(double t) const {
        auto c = floor_cursor(t);
        if (!c) fail(ErrorKind::NotInScale, "no scale member at or below " + show(t));
        if (c->seg.is_point()) return c->seg.left;
        return snapped(*c, std::min(t, c->seg.right));
    }

    /// Forward jump inf{s in T : s > t}; t itself at right-dense points.
    double sigma(double t) const {
        const Cursor c = require(t);
        const double s = snapped(c, t);
        if (!c.seg.is_point() && s < c.seg.right) return s;
        return next_or_throw(c).seg.left;
    }

    /// Graininess sigma(t) - t.
    double mu(double t) const {
        const Cursor c = require(t);
        const double s = snapped(c, t);
        if (!c.seg.is_point() && s < c.seg.right) return 0.0;
        return next_or_throw(c).seg.left - s;
    }

    /// Backward jump sup{s in T : s < t}; t itself at left-dense points and at the scale minimum.
    double rho(double t) const {
        const Cursor c = require(t);
        const double s = snapped(c, t);
        if (!c.seg.is_point() && s > c.seg.left) return s;
        auto p = prev(c);
        return p ? p->seg.right : s;
    }

    /// Every isolated point and interval endpoint of T in [a, horizon], with interval
    /// interiors sampled at spacing <= h_max. The list is strictly increasing and each
    /// entry carries its true graininess.
    Grid enumerate_grid(double a, const GridSpec& spec) const {
        if (!(spec.h_max > 0.0)) fail(ErrorKind::InvalidArgument, "h_max must be positive");
        const Cursor start_cursor = require(a);
        const double t0 = snapped(start_cursor, a);
        const auto h_snap = snap(spec.horizon);
        if (!h_snap) fail(ErrorKind::NotInScale, "horizon " + show(spec.horizon) + " is not a scale member");
        const double horizon = *h_snap;
        if (!(horizon > t0)) fail(ErrorKind::EmptyRange, "horizon " + show(horizon) + " <= start " + show(t0));

        Grid grid;
        Cursor c = start_cursor;
        double from = t0;
        for (;;) {
            if (grid.size() > options_.max_grid_points) {
                fail(ErrorKind::HorizonExceeded, "grid exceeds max_grid_points before reaching " + show(horizon));
            }
            if (c.seg.is_point()) {
                const double p = c.seg.left;
                const Cursor n = next_or_throw(c);
                grid.push_back({p, n.seg.left - p});
                if (p >= horizon) break;
                c = n;
                from = n.seg.left;
                continue;
            }
            const double lo = std::max(from, c.seg.left);
            const double hi = std::min(c.seg.right, horizon);
            if (hi > lo) {
                const auto steps = static_cast<std::size_t>(std::ceil((hi - lo) / spec.h_max));
                const double width = hi - lo;
                for (std::size_t i = 0; i < steps; ++i) {
                    grid.push_back({lo + width * static_cast<double>(i) / static_cast<double>(steps), 0.0});
                }
            }
            if (hi < c.seg.right) {
                grid.push_back({hi, 0.0});
                break;
            }
            const Cursor n = next_or_throw(c);
            grid.push_back({hi, n.seg.left - hi});
            if (hi >= horizon) break;
            c = n;
            from = n.seg.left;
        }
        return grid;
    }

private:
    struct Cursor {
        bool in_tail = false;
        std::int64_t index = 0;
        Segment seg;
    };

    Segment generated(std::int64_t k) const { return tail_->segment(k); }

    Cursor first_cursor() const {
        if (!head_.empty()) return {false, 0, head_.front()};
        return {true, 0, generated(0)};
    }

    void check_gap(const Segment& a, const Segment& b) const {
        if (!(b.left - a.right >= options_.min_gap)) {
            fail(ErrorKind::InvalidScale, "segments not separated by min_gap near t=" + show(a.right));
        }
    }

    void validate() const {
        if (head_.empty() && !tail_) fail(ErrorKind::InvalidScale, "empty time scale");
        if (tail_ && !tail_->segment) fail(ErrorKind::InvalidScale, "tail generator without segment function");
        for (std::size_t i = 0; i < head_.size(); ++i) {
            const Segment& s = head_[i];
            if (s.is_point() ? !std::isfinite(s.left) : !(s.left < s.right) || !std::isfinite(s.left)) {
                fail(ErrorKind::InvalidScale, "malformed head segment");
            }
            if (!std::isfinite(s.right) && (i + 1 != head_.size() || tail_)) {
                fail(ErrorKind::InvalidScale, "only the terminal segment of a tail-free scale may be unbounded");
            }
            if (i > 0) check_gap(head_[i - 1], s);
        }
        if (!tail_) {
            if (head_.back().is_point() || std::isfinite(head_.back().right)) {
                fail(ErrorKind::InvalidScale, "scale without tail must end in an unbounded interval");
            }
            return;
        }
        Segment prev = generated(0);
        if (!head_.empty()) check_gap(head_.back(), prev);
        for (std::int64_t k = 1; k < options_.validate_prefix; ++k) {
            const Segment s = generated(k);
            if (!(s == generated(k))) fail(ErrorKind::InvalidScale, "tail generator is not deterministic");
            if (!std::isfinite(s.right)) fail(ErrorKind::InvalidScale, "generated segments must be bounded");
            check_gap(prev, s);
            prev = s;
        }
    }

    std::optional<Cursor> next(const Cursor& c) const {
        if (c.in_tail) {
            Segment s = generated(c.index + 1);
            check_gap(c.seg, s);
            return Cursor{true, c.index + 1, s};
        }
        const auto i = static_cast<std::size_t>(c.index) + 1;
        if (i < head_.size()) return Cursor{false, c.index + 1, head_[i]};
        if (tail_) return Cursor{true, 0, generated(0)};
        return std::nullopt;
    }

    Cursor next_or_throw(const Cursor& c) const {
        auto n = next(c);
        if (!n) fail(ErrorKind::HorizonExceeded, "no successor after t=" + show(c.seg.right));
        return *n;
    }

    std::optional<Cursor> prev(const Cursor& c) const {
        if (c.in_tail) {
            if (c.index > 0) return Cursor{true, c.index - 1, generated(c.index - 1)};
            if (!head_.empty()) return Cursor{false, static_cast<std::int64_t>(head_.size()) - 1, head_.back()};
            return std::nullopt;
        }
        if (c.index > 0) return Cursor{false, c.index - 1, head_[static_cast<std::size_t>(c.index - 1)]};
        return std::nullopt;
    }

    /// Last segment whose left edge is <= t + eps.
    std::optional<Cursor> floor_cursor(double t) const {
        const double eps = options_.epsilon_member;
        if (tail_) {
            std::int64_t k = tail_->locate ? std::max<std::int64_t>(0, tail_->locate(t)) : 0;
            Segment s = generated(k);
            while (k > 0 && s.left > t + eps) s = generated(--k);
            if (s.left <= t + eps) {
                for (;;) {
                    Segment n = generated(k + 1);
                    if (n.left > t + eps) break;
                    s = n;
                    ++k;
                }
                return Cursor{true, k, s};
            }
        }
        auto it = std::upper_bound(head_.begin(), head_.end(), t + eps,
                                   [](double v, const Segment& s) { return v < s.left; });
        if (it == head_.begin()) return std::nullopt;
        const auto i = static_cast<std::int64_t>(std::distance(head_.begin(), it)) - 1;
        return Cursor{false, i, head_[static_cast<std::size_t>(i)]};
    }

    std::optional<Cursor> find(double t) const {
        if (!std::isfinite(t)) return std::nullopt;
        auto c = floor_cursor(t);
        if (!c || t > c->seg.right + options_.epsilon_member) return std::nullopt;
        return c;
    }

    Cursor require(double t) const {
        auto c = find(t);
        if (!c) fail(ErrorKind::NotInScale, show(t) + " is not a member of the time scale");
        return *c;
    }

    double snapped(const Cursor& c, double t) const {
        const double eps = options_.epsilon_member;
        if (c.seg.is_point()) return c.seg.left;
        if (std::abs(t - c.seg.left) <= eps || t < c.seg.left) return c.seg.left;
        if (std::abs(t - c.seg.right) <= eps || t > c.seg.right) return c.seg.right;
        return t;
    }

    std::vector<Segment> head_;
    std::optional<TailGenerator> tail_;
    TimeScaleOptions options_;
};

}  // namespace tempus

#pragma once

#include "tempus/bocher.hpp"
#include "tempus/convergence.hpp"
#include "tempus/linalg.hpp"
#include "tempus/solver.hpp"

#include <json.hpp>

#include <cmath>
#include <vector>

namespace tempus::io {

using json = nlohmann::ordered_json;

/// JSON has no infinities; non-finite values serialize as null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json numbers(const std::vector<double>& vs) {
    json out = json::array();
    for (double v : vs) out.push_back(number(v));
    return out;
}

inline json matrix(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
        out.push_back(std::move(row));
    }
    return out;
}

inline json to_json(const ConvergenceVerdict& v) {
    return {{"kind", to_string(v.kind)},
            {"tail_estimate", number(v.tail_estimate)},
            {"value_trend", to_string(v.value_trend)},
            {"abs_trend", to_string(v.abs_trend)},
            {"horizons_tested", numbers(v.horizons_tested)},
            {"value_increments", numbers(v.value_increments)},
            {"abs_increments", numbers(v.abs_increments)}};
}

inline json to_json(const ConditionReport& r) {
    json orders = json::array();
    for (const auto& o : r.orders_convergent) {
        json entry = to_json(o.verdict);
        entry["order"] = o.order;
        orders.push_back(std::move(entry));
    }
    json out = {{"orders", std::move(orders)},
                {"first_absolute_order", r.first_absolute_order ? json(*r.first_absolute_order) : json(nullptr)},
                {"implied_class_s", to_string(r.implied_class_s)},
                {"t_star", r.t_star ? number(*r.t_star) : json(nullptr)},
                {"horizons", numbers(r.horizons)},
                {"tail_horizon", number(r.tail_horizon)}};
    if (r.ominus_variant) {
        out["ominus_variant"] = to_json(*r.ominus_variant);
        out["ominus_implies_class_s"] = r.ominus_implies_class_s;
    }
    return out;
}

inline json to_json(const ClassSVerdict& v) {
    return {{"verdict", to_string(v.verdict)},
            {"limit", matrix(v.limit)},
            {"horizons", numbers(v.horizons)},
            {"cauchy_residuals", numbers(v.cauchy_residuals)},
            {"residual_trend", to_string(v.residual_trend)},
            {"tail_estimate", number(v.tail_estimate)},
            {"min_singular_value", number(v.min_singular_value)},
            {"relative_singular_value", number(v.relative_singular_value)}};
}

}  // namespace tempus::io

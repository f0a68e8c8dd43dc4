#pragma once

#include "tempus/calculus.hpp"
#include "tempus/cli/fields.hpp"
#include "tempus/oscillator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace tempus::cli {

/// A coefficient system chosen in a scenario config. The signal is built lazily so
/// that parameter errors surface during validation and numerical ones during the run.
struct System {
    Eigen::Index dim = 1;
    std::function<MatrixSignal()> make;
    std::optional<OscillatorSpec> oscillator;
    json normalized;
};

namespace detail {

/// Sign of cos(pi t); exact +-1 on the integers.
inline double alternating_sign(double t) { return std::cos(std::numbers::pi * t); }

inline const std::map<std::string, std::function<double(double)>, std::less<>>& perturbations() {
    static const std::map<std::string, std::function<double(double)>, std::less<>> table = {
        {"zero", [](double) { return 0.0; }},
        {"inverse-square", [](double n) { return 1.0 / ((n + 1.0) * (n + 1.0)); }},
        {"alternating-harmonic", [](double n) { return alternating_sign(n) / (n + 1.0); }},
    };
    return table;
}

struct TabulatedRows {
    std::vector<double> t;
    std::vector<Matrix> values;
};

/// `t,a_00,a_01,...` with n*n entries per row, t strictly increasing.
inline std::optional<TabulatedRows> read_table(const std::filesystem::path& file, std::string& problem) {
    std::ifstream in(file);
    if (!in) {
        problem = "cannot open " + file.string();
        return std::nullopt;
    }
    std::string line;
    if (!std::getline(in, line)) {
        problem = "empty table";
        return std::nullopt;
    }
    const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(columns - 1))));
    if (columns < 2 || static_cast<std::size_t>(n * n) != columns - 1) {
        problem = "header must be t followed by n*n entries";
        return std::nullopt;
    }
    TabulatedRows rows;
    for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        std::vector<double> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) {
            double v = 0.0;
            const auto first = cell.find_first_not_of(' ');
            const char* b = cell.data() + (first == std::string::npos ? cell.size() : first);
            const auto [ptr, ec] = std::from_chars(b, cell.data() + cell.size(), v);
            if (ec != std::errc() || !std::isfinite(v)) {
                problem = "line " + std::to_string(lineno) + ": bad number '" + cell + "'";
                return std::nullopt;
            }
            cells.push_back(v);
        }
        if (cells.size() != columns) {
            problem = "line " + std::to_string(lineno) + ": expected " + std::to_string(columns) + " columns";
            return std::nullopt;
        }
        if (!rows.t.empty() && !(cells[0] > rows.t.back())) {
            problem = "line " + std::to_string(lineno) + ": t not increasing";
            return std::nullopt;
        }
        rows.t.push_back(cells[0]);
        Matrix m(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) m(i, j) = cells[static_cast<std::size_t>(1 + i * n + j)];
        rows.values.push_back(std::move(m));
    }
    if (rows.t.empty()) {
        problem = "table has no rows";
        return std::nullopt;
    }
    return rows;
}

/// Right-continuous step interpolation of tabulated rows.
inline MatrixSignal tabulated_signal(std::shared_ptr<const TabulatedRows> rows) {
    const auto dim = rows->values.front().rows();
    return {dim,
            [rows = std::move(rows)](double t) -> Matrix {
                const auto it = std::upper_bound(rows->t.begin(), rows->t.end(), t + 1e-9);
                if (it == rows->t.begin()) fail(ErrorKind::InvalidArgument, "t precedes the first table row");
                return rows->values[static_cast<std::size_t>(std::distance(rows->t.begin(), it) - 1)];
            },
            std::nullopt};
}

}  // namespace detail

inline const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names = {"zero", "constant", "diagonal-decay", "alternating-harmonic",
                                                   "oscillator"};
    return names;
}

/// Parses `system`: {"builtin": name, ...parameters} or {"table": "file.csv"}.
/// Table paths are resolved against base_dir and echoed as given.
inline std::optional<System> parse_system(const json& node, const std::filesystem::path& base_dir,
                                          std::vector<std::string>& errors) {
    FieldReader f(node, "system", errors);
    if (!f.valid()) return std::nullopt;
    const std::size_t before = errors.size();
    System sys;

    if (const auto table = f.string("table")) {
        if (f.find("builtin")) f.error("builtin", "give either builtin or table, not both");
        std::string problem;
        const auto rows = detail::read_table(base_dir / *table, problem);
        if (!rows) {
            f.error("table", problem);
        } else {
            auto shared = std::make_shared<const detail::TabulatedRows>(*rows);
            sys.dim = shared->values.front().rows();
            sys.make = [shared] { return detail::tabulated_signal(shared); };
            sys.normalized = {{"table", *table}};
        }
        f.reject_unknown();
        return errors.size() == before ? std::optional(std::move(sys)) : std::nullopt;
    }

    const auto name = f.string("builtin", true);
    if (!name) {
        f.reject_unknown();
        return std::nullopt;
    }
    const auto dim_field = f.integer("dim");
    if (dim_field && (*dim_field < 1 || *dim_field > 64)) f.error("dim", "must lie in [1, 64]");
    Eigen::Index dim = dim_field.value_or(1);

    if (*name == "zero") {
        sys.make = [dim] { return zero_signal(dim); };
        sys.normalized = {{"builtin", "zero"}, {"dim", dim}};
    } else if (*name == "constant") {
        Matrix m;
        if (const auto given = f.matrix("matrix")) {
            m = *given;
            if (dim_field && *dim_field != m.rows()) f.error("dim", "disagrees with matrix size");
        } else {
            m = f.number("value", true).value_or(0.0) * identity(dim);
        }
        dim = m.rows();
        sys.make = [m] { return MatrixSignal{m.rows(), [m](double) { return m; }, std::nullopt}; };
        sys.normalized = {{"builtin", "constant"}, {"dim", dim}, {"matrix", matrix_json(m)}};
    } else if (*name == "diagonal-decay") {
        const double p = f.number("p", true).value_or(1.0);
        if (p <= 0.0) f.error("p", "must be positive");
        std::vector<double> c = f.numbers("coefficients").value_or(std::vector<double>(std::size_t(dim), 1.0));
        if (dim_field && c.size() != std::size_t(*dim_field)) f.error("coefficients", "expected dim entries");
        if (c.empty()) f.error("coefficients", "must not be empty");
        dim = static_cast<Eigen::Index>(c.size());
        Vector diag = Vector::Zero(dim);
        for (Eigen::Index i = 0; i < dim; ++i) diag(i) = c[std::size_t(i)];
        const double scale = diag.norm();
        sys.make = [diag, p, scale] {
            return MatrixSignal{diag.size(),
                                [diag, p](double t) { return Matrix(std::pow(t + 1.0, -p) * diag.asDiagonal()); },
                                Envelope{[scale, p](double t) { return scale * std::pow(t + 1.0, -p); }, 0.0}};
        };
        sys.normalized = {{"builtin", "diagonal-decay"}, {"dim", dim}, {"p", p}, {"coefficients", c}};
    } else if (*name == "alternating-harmonic") {
        Matrix m = identity(dim);
        if (const auto given = f.matrix("matrix")) {
            m = *given;
            if (dim_field && *dim_field != m.rows()) f.error("dim", "disagrees with matrix size");
        }
        dim = m.rows();
        sys.make = [m] {
            return MatrixSignal{m.rows(),
                                [m](double t) { return Matrix(detail::alternating_sign(t) / (t + 1.0) * m); },
                                std::nullopt};
        };
        sys.normalized = {{"builtin", "alternating-harmonic"}, {"dim", dim}, {"matrix", matrix_json(m)}};
    } else if (*name == "oscillator") {
        const double alpha = f.number("alpha", true).value_or(1.0);
        if (!(alpha > 0.0 && alpha < std::numbers::pi)) f.error("alpha", "must lie in (0, pi)");
        const std::string g_name = f.string("g", true).value_or("zero");
        const double amplitude = f.number("amplitude").value_or(1.0);
        const auto& table = detail::perturbations();
        const auto g = table.find(g_name);
        if (g == table.end()) f.error("g", "unknown perturbation '" + g_name + "'");
        if (dim_field && *dim_field != 2) f.error("dim", "oscillator systems have dim 2");
        dim = 2;
        if (g != table.end()) {
            OscillatorSpec spec{alpha, [base = g->second, amplitude](double n) { return amplitude * base(n); }};
            sys.oscillator = spec;
            sys.make = [spec] { return oscillator_reduce(spec); };
        }
        sys.normalized = {{"builtin", "oscillator"}, {"dim", 2}, {"alpha", alpha}, {"g", g_name},
                          {"amplitude", amplitude}};
    } else {
        std::string known;
        for (const auto& n : builtin_names()) known += (known.empty() ? "" : ", ") + n;
        f.error("builtin", "unknown system '" + *name + "' (known: " + known + ")");
    }
    sys.dim = dim;
    f.reject_unknown();
    if (errors.size() != before) return std::nullopt;
    return sys;
}

}  // namespace tempus::cli

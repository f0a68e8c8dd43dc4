#pragma once

#include "tempus/linalg.hpp"
#include "tempus/solver.hpp"

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace tempus::io {

/// Shortest-free fixed format: 17 significant digits, locale independent.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_row(std::ostream& os, const std::vector<double>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        os << format_double(row[i]);
    }
    os << '\n';
}

/// Column labels for a flattened value: component_i for vectors, X_ij for matrices.
inline std::vector<std::string> value_columns(TrajectoryKind kind, Eigen::Index rows, Eigen::Index cols,
                                              const std::string& prefix = "X") {
    std::vector<std::string> out;
    if (kind == TrajectoryKind::Vector) {
        for (Eigen::Index i = 0; i < rows; ++i) out.push_back("component_" + std::to_string(i));
    } else {
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) out.push_back(prefix + "_" + std::to_string(i) + std::to_string(j));
    }
    return out;
}

inline void write_header(std::ostream& os, const std::string& first, const std::vector<std::string>& rest) {
    os << first;
    for (const auto& c : rest) os << ',' << c;
    os << '\n';
}

/// Row-major flattening used by every matrix CSV column set.
inline void append_flat(std::vector<double>& row, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
}

/// `t,component_0,...` or `t,X_00,X_01,...`, one row per grid point.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    const Matrix& first = traj.values.front();
    write_header(os, "t", value_columns(traj.kind, first.rows(), first.cols()));
    std::vector<double> row;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        row.assign(1, traj.grid[i].t);
        append_flat(row, traj.values[i]);
        write_row(os, row);
    }
}

}  // namespace tempus::io

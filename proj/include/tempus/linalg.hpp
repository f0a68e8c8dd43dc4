#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace tempus {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Frobenius norm; the single matrix norm used for every bound and verdict.
inline double norm(const Matrix& m) { return m.norm(); }

inline Matrix identity(Eigen::Index n) { return Matrix::Identity(n, n); }

struct SingularValueSummary {
    double min = 0.0;
    double max = 0.0;
    /// min / max, or 0 for the zero matrix.
    double relative() const { return max > 0.0 ? min / max : 0.0; }
};

inline SingularValueSummary singular_values(const Matrix& m) {
    if (m.size() == 0) return {};
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    return {s.minCoeff(), s.maxCoeff()};
}

/// |a - b| scaled by max(1, |b|); the mixed error used by tolerance checks.
inline double mixed_error(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace tempus

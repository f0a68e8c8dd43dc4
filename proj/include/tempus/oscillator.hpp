#pragma once

#include "tempus/calculus.hpp"
#include "tempus/convergence.hpp"
#include "tempus/error.hpp"
#include "tempus/linalg.hpp"
#include "tempus/solver.hpp"
#include "tempus/timescale.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace tempus {

/// Discrete adiabatic oscillator x(n+2) - 2 cos(alpha) x(n+1) + (1 + g(n)) x(n) = 0 on Z.
struct OscillatorSpec {
    double alpha = std::numbers::pi / 2;
    ScalarSignal g;

    void validate() const {
        if (!(alpha > 0.0 && alpha < std::numbers::pi)) {
            fail(ErrorKind::InvalidArgument, "alpha must lie in (0, pi)");
        }
        if (std::abs(std::sin(alpha)) < 1e-12) fail(ErrorKind::AlphaDegenerate, "sin(alpha) vanishes");
        if (!g) fail(ErrorKind::InvalidArgument, "oscillator perturbation g is empty");
    }
};

/// Amplitude system for x(n) = C1(n) cos(n alpha) + C2(n) sin(n alpha) with
/// x(n+1) = C1(n) cos((n+1) alpha) + C2(n) sin((n+1) alpha):
///   Delta u(n) = g(n) B(n) u(n),  B(n) = (A0 + A1(n)) / (2 sin alpha),
///   A0    = [[sin a, cos a], [-cos a, sin a]],
///   A1(n) = [[sin (2n+1)a, -cos (2n+1)a], [-cos (2n+1)a, -sin (2n+1)a]].
inline MatrixSignal oscillator_reduce(const OscillatorSpec& spec) {
    spec.validate();
    const double alpha = spec.alpha;
    const double s = std::sin(alpha);
    const double c = std::cos(alpha);
    return {2,
            [alpha, s, c, g = spec.g](double t) -> Matrix {
                const double phase = (2.0 * t + 1.0) * alpha;
                const double sp = std::sin(phase);
                const double cp = std::cos(phase);
                Matrix b(2, 2);
                b << s + sp, c - cp, -c - cp, s - sp;
                return (g(t) / (2.0 * s)) * b;
            },
            std::nullopt};
}

/// (C1(0), C2(0)) from the first two samples x(0), x(1).
inline Vector oscillator_initial_amplitudes(double alpha, double x0, double x1) {
    Vector u(2);
    u << x0, (x1 - x0 * std::cos(alpha)) / std::sin(alpha);
    return u;
}

inline double oscillator_reconstruct(double alpha, double n, const Vector& u) {
    return u(0) * std::cos(n * alpha) + u(1) * std::sin(n * alpha);
}

/// x(0..n_max) by the second-order recursion itself.
inline std::vector<double> oscillator_direct(const OscillatorSpec& spec, double x0, double x1, int n_max) {
    spec.validate();
    std::vector<double> x{x0, x1};
    const double two_cos = 2.0 * std::cos(spec.alpha);
    for (int n = 0; n + 2 <= n_max; ++n) {
        const auto i = static_cast<std::size_t>(n);
        x.push_back(two_cos * x[i + 1] - (1.0 + spec.g(n)) * x[i]);
    }
    x.resize(static_cast<std::size_t>(n_max) + 1);
    return x;
}

struct OscillatorRun {
    Trajectory amplitudes;
    std::vector<double> reconstructed;
    std::vector<double> direct;
    /// max_n |reconstructed - direct| / max(1, max_n |direct|)
    double roundtrip_error = 0.0;
    /// max over the last tenth of the run of |u(n) - u(N)| / max(1, |u(N)|)
    double final_window_drift = 0.0;
};

/// Solves the amplitude system on {0, ..., n_max} and compares the reconstruction with
/// the direct recursion.
inline OscillatorRun run_oscillator(const OscillatorSpec& spec, double x0, double x1, int n_max,
                                    const Tolerances& tol = {}) {
    if (n_max < 2) fail(ErrorKind::InvalidArgument, "oscillator horizon must be >= 2");
    const TimeScale z = TimeScale::integers();
    OscillatorRun run{solve_linear(z, oscillator_reduce(spec), oscillator_initial_amplitudes(spec.alpha, x0, x1), 0.0,
                                   {static_cast<double>(n_max), tol.h_max}, tol),
                      {},
                      oscillator_direct(spec, x0, x1, n_max)};
    double scale = 1.0;
    for (double v : run.direct) scale = std::max(scale, std::abs(v));
    run.reconstructed.reserve(run.amplitudes.size());
    for (std::size_t n = 0; n < run.amplitudes.size(); ++n) {
        const double x = oscillator_reconstruct(spec.alpha, static_cast<double>(n), run.amplitudes.values[n]);
        run.reconstructed.push_back(x);
        run.roundtrip_error = std::max(run.roundtrip_error, std::abs(x - run.direct[n]) / scale);
    }
    const Matrix& last = run.amplitudes.values.back();
    const double denom = std::max(1.0, norm(last));
    const auto window_start = static_cast<std::size_t>(0.9 * static_cast<double>(n_max));
    for (std::size_t n = window_start; n < run.amplitudes.size(); ++n) {
        run.final_window_drift = std::max(run.final_window_drift, norm(run.amplitudes.values[n] - last) / denom);
    }
    return run;
}

}  // namespace tempus

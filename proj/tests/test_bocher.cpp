#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "tempus/bocher.hpp"
#include "tempus/solver.hpp"

#include <cmath>
#include <random>

using namespace tempus;
using Catch::Approx;

namespace {

const TimeScale kZ = TimeScale::integers();

template <class F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected a tempus::Error");
    return ErrorKind::InvalidArgument;
}

MatrixSignal scaled(std::function<double(double)> c, Matrix m) {
    const auto dim = m.rows();
    return {dim, [c = std::move(c), m = std::move(m)](double t) { return Matrix(c(t) * m); }, std::nullopt};
}

double alternating(double n) { return (std::fmod(n, 2.0) == 0.0 ? 1.0 : -1.0) / (n + 1.0); }

/// Random signal with hashed entries on Z, |A(n)| ~ (n+1)^-1.
MatrixSignal hashed_signal(std::uint64_t seed, int dim) {
    return {dim,
            [seed, dim](double t) {
                Matrix m(dim, dim);
                const auto n = static_cast<std::int64_t>(t);
                for (int i = 0; i < dim; ++i)
                    for (int j = 0; j < dim; ++j) m(i, j) = oracle::hashed_uniform(seed, n, i, j) / (t + 1.0);
                return m;
            },
            std::nullopt};
}

/// Max relative residual of the backmapped solution against x(n+1) = (I + A(n)) x(n) on Z.
double transform_residual(const Transform& tr, const MatrixSignal& a, double horizon) {
    const auto y = fundamental_matrix(kZ, tr.coefficient, tr.t_star, {horizon, 1.0});
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < y.size(); ++i) {
        const double t = y.t(i);
        const Matrix x = tr.backmap(t) * y.values[i];
        const Matrix x_next = tr.backmap(t + 1.0) * y.values[i + 1];
        const Matrix expected = (identity(a.dim) + a(t)) * x;
        worst = std::max(worst, (x_next - expected).norm() / std::max(1.0, expected.norm()));
    }
    return worst;
}

}  // namespace

TEST_CASE("tail_matrix examples", "[bocher]") {
    for (int k : {1, 2, 3}) {
        const auto y = tail_matrix(kZ, zero_signal(2), 0.0, k, 64.0);
        for (double t : {0.0, 5.0, 64.0}) CHECK(y(t).isZero(0.0));
    }

    const double big_h = 40.0;
    const auto a = scalar_signal([](double n) { return std::pow(2.0, -n - 1.0); });
    const auto y1 = tail_matrix(kZ, a, 0.0, 1, big_h);
    CHECK(y1.horizon_used == big_h);
    for (int m : {0, 1, 7, 20}) {
        const double truncated = -oracle::integer_sum([](std::int64_t s) { return std::ldexp(1.0, int(-s - 1)); }, m,
                                                      std::int64_t(big_h));
        CHECK(y1(m)(0, 0) == Approx(truncated).epsilon(1e-14));
        CHECK(std::abs(y1(m)(0, 0) + std::ldexp(1.0, -m)) <= std::ldexp(1.0, -int(big_h)));
    }

    // brute-force double sum: Y2(m) = sum_{s>=m} A(s) sum_{r>=s} A(r), truncated at H
    const auto y2 = tail_matrix(kZ, a, 0.0, 2, big_h);
    for (int m : {0, 3, 10}) {
        double direct = 0.0;
        for (int s = m; s < int(big_h); ++s) {
            double inner = 0.0;
            for (int r = s; r < int(big_h); ++r) inner += std::ldexp(1.0, -r - 1);
            direct += std::ldexp(1.0, -s - 1) * inner;
        }
        CHECK(y2(m)(0, 0) == Approx(direct).epsilon(1e-14));
    }
    CHECK(y2(0)(0, 0) == Approx(2.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("tail_matrix errors", "[bocher]") {
    const auto harmonic = scalar_signal([](double n) { return 1.0 / (n + 1.0); });
    CHECK(kind_of([&] { (void)tail_matrix(kZ, harmonic, 0.0, 2, 4096.0); }) == ErrorKind::PrerequisiteNotConvergent);
    CHECK(kind_of([&] { (void)tail_matrix(kZ, harmonic, 0.0, 0, 64.0); }) == ErrorKind::InvalidArgument);
    const auto y = tail_matrix(kZ, harmonic, 0.0, 1, 64.0);
    CHECK(kind_of([&] { (void)y(65.0); }) == ErrorKind::HorizonExceeded);
    CHECK(kind_of([&] { (void)y(2.5); }) == ErrorKind::NotInScale);
}

TEST_CASE("tail values inside interval cells are interpolated", "[bocher]") {
    const TimeScale r = TimeScale::real_line();
    Tolerances tol;
    tol.h_max = 1e-3;
    const auto y = tail_matrix(r, scalar_signal([](double t) { return std::pow(1.0 + t, -2.0); }), 0.0, 1, 16.0, tol);
    for (double t : {0.0, 0.12345, 3.0005, 15.9999}) {
        CHECK(y(t)(0, 0) == Approx(-(1.0 / (1.0 + t) - 1.0 / 17.0)).margin(1e-6));
    }
}

TEST_CASE("check_theorem1 examples", "[bocher]") {
    std::mt19937_64 rng(3);
    const Matrix m = oracle::unit_matrix(rng, 2);
    const auto sched = default_schedule(kZ, 0.0);

    const auto geo = check_theorem1(kZ, scaled([](double n) { return std::pow(2.0, -n); }, m), 0.0, sched);
    CHECK(geo.implied_class_s == Implication::Yes);
    CHECK(geo.first_absolute_order == 1);

    const auto alt = check_theorem1(kZ, scaled(alternating, m), 0.0, sched);
    CHECK(alt.implied_class_s == Implication::NotImplied);
    REQUIRE(alt.orders_convergent.size() == 1);
    CHECK(alt.orders_convergent[0].verdict.kind == ConvergenceKind::ConditionallyConvergent);

    const TimeScale r = TimeScale::real_line();
    const auto real = check_theorem1(r, scaled([](double t) { return std::pow(1.0 + t, -2.0); }, m), 0.0,
                                     default_schedule(r, 0.0));
    CHECK(real.implied_class_s == Implication::Yes);
}

TEST_CASE("check_order_k examples", "[bocher]") {
    const auto sched = default_schedule(kZ, 0.0);

    // rank-one projection: M^2 = M
    Vector v(2);
    v << 0.6, 0.8;
    const Matrix proj = v * v.transpose();
    REQUIRE((proj * proj - proj).norm() < 1e-15);
    const auto alt = check_order_k(kZ, scaled(alternating, proj), 0.0, 3, sched);
    CHECK(alt.implied_class_s == Implication::Yes);
    CHECK(alt.first_absolute_order == 2);
    REQUIRE(alt.orders_convergent.size() == 2);
    CHECK(alt.orders_convergent[0].verdict.kind == ConvergenceKind::ConditionallyConvergent);
    CHECK(alt.orders_convergent[1].verdict.kind == ConvergenceKind::AbsolutelyConvergent);
    REQUIRE(alt.t_star.has_value());
    CHECK(*alt.t_star >= 0.0);

    const auto summable = check_order_k(kZ, scaled([](double n) { return std::pow(n + 1.0, -2.0); }, proj), 0.0, 4, sched);
    CHECK(summable.first_absolute_order == 1);
    CHECK(summable.orders_convergent.size() == 1);

    const auto harmonic = check_order_k(kZ, scaled([](double n) { return 0.5 / (n + 1.0); }, identity(2)), 0.0, 3, sched);
    CHECK(harmonic.implied_class_s == Implication::NotImplied);
    REQUIRE(harmonic.orders_convergent.size() == 1);
    CHECK(harmonic.orders_convergent[0].verdict.kind == ConvergenceKind::Divergent);
}

TEST_CASE("order-2 verdict agrees with a brute-force double sum", "[bocher]") {
    const auto sched = default_schedule(kZ, 0.0);
    BocherAnalysis analysis(kZ, scalar_signal(alternating), 0.0, sched);
    const auto v = analysis.order_verdict(2);
    CHECK(v.kind == ConvergenceKind::AbsolutelyConvergent);

    // partial value of sum_n A(n) Y1(n) up to the first horizon, with Y1 truncated at the tail horizon
    const auto big_h = std::int64_t(analysis.tail_horizon());
    std::vector<double> y1(std::size_t(big_h) + 1, 0.0);
    for (std::int64_t n = big_h; n-- > 0;) y1[std::size_t(n)] = y1[std::size_t(n) + 1] - alternating(double(n));
    double partial = 0.0;
    double abs_partial = 0.0;
    const auto h0 = std::int64_t(sched.front());
    const auto h1 = std::int64_t(sched[1]);
    for (std::int64_t n = 0; n < h1; ++n) {
        const double term = alternating(double(n)) * y1[std::size_t(n)];
        if (n >= h0) partial += term;
        abs_partial += std::abs(term);
    }
    CHECK(v.value_increments.front() == Approx(std::abs(partial)).epsilon(1e-12));
    CHECK(v.abs_increments.front() ==
          Approx(abs_partial - [&] {
              double s = 0.0;
              for (std::int64_t n = 0; n < h0; ++n) s += std::abs(alternating(double(n)) * y1[std::size_t(n)]);
              return s;
          }())
              .epsilon(1e-12));
}

TEST_CASE("ominus variant examples", "[bocher]") {
    const auto sched = default_schedule(kZ, 0.0);
    CHECK(check_ominus_variant(kZ, zero_signal(2), 0.0, sched).kind == ConvergenceKind::AbsolutelyConvergent);

    const auto alt = scaled(alternating, identity(2));
    BocherAnalysis analysis(kZ, alt, 0.0, sched);
    CHECK(analysis.ominus_verdict().kind == analysis.order_verdict(2).kind);

    // mu = 0: the circle-minus tail is the order-1 tail, so scalar integrands coincide
    const TimeScale r = TimeScale::real_line();
    const auto rs = default_schedule(r, 0.0);
    const auto f = scalar_signal([](double t) { return std::cos(t) / (1.0 + t); });
    BocherAnalysis real(r, f, 0.0, rs);
    const auto om = real.ominus_verdict();
    const auto o2 = real.order_verdict(2);
    CHECK(om.kind == o2.kind);
    REQUIRE(om.value_increments.size() == o2.value_increments.size());
    for (std::size_t i = 0; i < om.value_increments.size(); ++i) {
        CHECK(om.value_increments[i] == Approx(o2.value_increments[i]).epsilon(1e-12));
    }

    CHECK(kind_of([&] {
              (void)check_ominus_variant(kZ, scalar_signal([](double) { return -1.0; }), 0.0, sched);
          }) == ErrorKind::NotRegressive);
}

TEST_CASE("transform examples", "[bocher]") {
    const auto sched = default_schedule(kZ, 0.0);
    const auto zero = wintner_transform(kZ, zero_signal(2), 0.0, sched);
    CHECK(zero.t_star == 0.0);
    for (double t : {0.0, 3.0, 100.0}) {
        CHECK(zero.coefficient(t).isZero(0.0));
        CHECK(zero.backmap(t) == identity(2));
    }
    for (int k : {2, 3}) {
        const auto tr = higher_transform(kZ, zero_signal(2), 0.0, k, sched);
        CHECK(tr.coefficient(17.0).isZero(0.0));
    }

    const auto a = scalar_signal([](double n) { return std::pow(2.0, -n - 1.0); });
    const auto w = wintner_transform(kZ, a, 0.0, sched);
    const double big_h = w.table->horizon;
    const auto y1 = [&](double m) { return -(std::pow(2.0, -m) - std::pow(2.0, -big_h)); };
    for (double n : {0.0, 1.0, 5.0, 30.0}) {
        const double direct = std::pow(2.0, -n - 1.0) * y1(n) / (1.0 + y1(n + 1.0));
        CHECK(w.coefficient(n)(0, 0) == Approx(direct).epsilon(1e-13));
        const double untruncated = std::pow(2.0, -n - 1.0) * -std::pow(2.0, -n) / (1.0 - std::pow(2.0, -n - 1.0));
        CHECK(w.coefficient(n)(0, 0) == Approx(untruncated).epsilon(1e-12));
    }

    const auto h1 = higher_transform(kZ, a, 0.0, 1, sched);
    for (double n : {0.0, 2.0, 50.0}) CHECK(h1.coefficient(n) == w.coefficient(n));
}

TEST_CASE("transform validity window", "[bocher]") {
    const auto sched = default_schedule(kZ, 0.0);
    const auto big = scalar_signal([](double n) { return 1e4 * alternating(n); });
    CHECK(kind_of([&] { (void)wintner_transform(kZ, big, 0.0, sched); }) == ErrorKind::NoValidityWindow);

    const auto moderate = scalar_signal([](double n) { return 3.0 * alternating(n); });
    const auto tr = wintner_transform(kZ, moderate, 0.0, sched);
    CHECK(tr.t_star > 0.0);
    CHECK(kind_of([&] { (void)tr.coefficient(tr.t_star - 1.0); }) == ErrorKind::NoValidityWindow);
    CHECK(std::abs(tr.table->at(1, std::size_t(tr.t_star) + 1)(0, 0)) <= 0.5);

    const auto harmonic = scalar_signal([](double n) { return 1.0 / (n + 1.0); });
    CHECK(kind_of([&] { (void)wintner_transform(kZ, harmonic, 0.0, sched); }) == ErrorKind::PrerequisiteNotConvergent);
}

TEST_CASE("backmapped transform solutions solve the original system", "[bocher][property]") {
    const auto sched = doubling_schedule(kZ, 0.0, 10);
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 4; ++trial) {
        const Matrix m = oracle::unit_matrix(rng, 2);
        const auto a = scaled(alternating, m);
        BocherAnalysis analysis(kZ, a, 0.0, sched);
        for (int k : {1, 2}) {
            const auto tr = higher_transform(analysis, k);
            CHECK(transform_residual(tr, a, sched.back()) < 1e-10);
        }
    }

    const auto diag = MatrixSignal{2,
                                   [](double n) {
                                       Matrix d = Matrix::Zero(2, 2);
                                       d(0, 0) = alternating(n);
                                       d(1, 1) = -0.5 * alternating(n);
                                       return d;
                                   },
                                   std::nullopt};
    const auto tr2 = higher_transform(kZ, diag, 0.0, 2, sched);
    CHECK(transform_residual(tr2, diag, sched.back()) < 1e-10);
}

TEST_CASE("inverse factor at t instead of sigma(t) breaks the residual on Z", "[bocher]") {
    const auto sched = doubling_schedule(kZ, 0.0, 10);
    const auto a = scalar_signal([](double n) { return 1.5 * alternating(n); });
    const auto printed = wintner_transform(kZ, a, 0.0, sched, {}, InverseArgument::Printed);
    const auto sigma = wintner_transform(kZ, a, 0.0, sched, {}, InverseArgument::Sigma);
    CHECK(transform_residual(sigma, a, sched.back()) < 1e-10);
    CHECK(transform_residual(printed, a, sched.back()) > 1e-6);
}

TEST_CASE("transformed coefficient of a summable system is summable", "[bocher]") {
    std::mt19937_64 rng(19);
    const Matrix m = oracle::unit_matrix(rng, 3);
    const auto a = scaled([](double n) { return 2.0 * std::pow(n + 1.0, -2.0); }, m);
    const auto sched = default_schedule(kZ, 0.0);
    const auto tr = wintner_transform(kZ, a, 0.0, sched);
    const auto from_star = doubling_schedule(kZ, tr.t_star, 12);
    CHECK(check_theorem1(kZ, tr.coefficient, tr.t_star, from_star).implied_class_s == Implication::Yes);
}

TEST_CASE("tails telescope to the integrands", "[bocher][property]") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto a = hashed_signal(seed, 1 + int(seed % 3));
        BocherAnalysis analysis(kZ, a, 0.0, doubling_schedule(kZ, 0.0, 10), {}, 1024.0);
        analysis.ensure_orders(2);
        const auto& table = *analysis.table();
        for (std::size_t i = 0; i + 1 < table.grid.size(); ++i) {
            const Matrix d1 = table.at(1, i + 1) - table.at(1, i);
            const Matrix d2 = table.at(2, i + 1) - table.at(2, i);
            REQUIRE((d1 - table.a_values[i]).norm() < 1e-10);
            REQUIRE((d2 - table.a_values[i] * table.at(1, i)).norm() < 1e-10);
        }
    }
}

TEST_CASE("tails decay across the schedule", "[bocher][property]") {
    const auto sched = default_schedule(kZ, 0.0);
    BocherAnalysis analysis(kZ, scaled(alternating, identity(2)), 0.0, sched);
    REQUIRE(analysis.order_verdict(1).convergent());
    REQUIRE(analysis.order_verdict(2).convergent());
    analysis.ensure_orders(2);
    const auto& table = *analysis.table();
    for (int j : {1, 2}) {
        double previous = kInfinity;
        for (std::size_t k = 0; k + 1 < sched.size(); ++k) {
            double window_max = 0.0;
            for (auto n = std::size_t(sched[k]); n <= std::size_t(sched[k + 1]); ++n) {
                window_max = std::max(window_max, table.at(j, n).norm());
            }
            CHECK(window_max < previous);
            previous = window_max;
        }
    }
}

TEST_CASE("implied class (S) is consistent with the empirical limit", "[bocher]") {
    Vector v(2);
    v << 0.6, 0.8;
    const auto a = scaled(alternating, Matrix(v * v.transpose()));
    const auto sched = default_schedule(kZ, 0.0);
    REQUIRE(check_order_k(kZ, a, 0.0, 2, sched).implied_class_s == Implication::Yes);

    const auto long_sched = doubling_schedule(kZ, 0.0, 16);
    const auto x = fundamental_matrix(kZ, a, 0.0, {long_sched.back(), 1.0});
    CHECK(limit_estimate(x, sched).verdict != ClassSKind::NotClassS);
    CHECK(limit_estimate(x, long_sched).verdict == ClassSKind::ClassS);
}

TEST_CASE("tails on R and on hZ agree to first order in h", "[bocher]") {
    const auto a = scalar_signal([](double t) { return std::pow(1.0 + t, -2.0); });
    const double big_h = 32.0;
    Tolerances fine;
    fine.h_max = 1e-3;
    const auto real = tail_matrix(TimeScale::real_line(), a, 0.0, 1, big_h, fine)(0.0)(0, 0);
    std::vector<double> errors;
    for (double h : {0.02, 0.01, 0.005}) {
        const double grid = tail_matrix(TimeScale::h_integers(h), a, 0.0, 1, big_h)(0.0)(0, 0);
        errors.push_back(std::abs(grid - real));
        CHECK(errors.back() <= 2.0 * h);
    }
    CHECK(errors[1] / errors[2] == Approx(2.0).epsilon(0.05));
    CHECK(errors[0] / errors[1] == Approx(2.0).epsilon(0.05));
}

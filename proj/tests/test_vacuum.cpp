#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cqb/field_dynamics.hpp"
#include "cqb/vacuum.hpp"

using namespace cqb;

TEST_CASE("vacuum path variance") {
    Philox4x32 rng(1);
    const auto p = generate_vacuum_path(200.0, 0.01, rng);
    REQUIRE(p.v.size() == 20000);
    double s = 0.0;
    for (cplx v : p.v) s += v.real() * v.real();
    CHECK(s / p.v.size() == doctest::Approx(1.0 / (4 * 0.01)).epsilon(0.04));
    CHECK_THROWS_AS(generate_vacuum_path(1.0, 0.0, rng), ConfigError);
}

TEST_CASE("noise-free fluctuation decays exactly") {
    SystemParams sp;
    sp.detuning = 0.4;
    VacuumPath path{0.1, std::vector<cplx>(30)};
    const cplx x0{0.7, -0.3};
    const auto f = field_fluctuation(path, sp, x0);
    const cplx lambda{0.5, 0.4};
    REQUIRE(f.value.size() == 31);
    for (std::size_t k = 0; k < 30; ++k) {
        const cplx start = x0 * std::exp(-lambda * (0.1 * k));
        CHECK(std::abs(f.value[k] - start) < 1e-14);
        CHECK(std::abs(f.integral[k] - start * (1.0 - std::exp(-lambda * 0.1)) / lambda) < 1e-14);
    }
}

TEST_CASE("constant input relaxes to u / lambda") {
    SystemParams sp;
    VacuumPath path{0.05, std::vector<cplx>(4000, cplx{0.2, 0.1})};
    const auto f = field_fluctuation(path, sp);
    CHECK(std::abs(f.value.back() - cplx{0.2, 0.1} / 0.5) < 1e-12);  // sqrt(kappa) = 1
}

TEST_CASE("stationary fluctuation has quadrature variance 1/4") {
    SystemParams sp;
    sp.detuning = 0.2;
    Philox4x32 rng(2);
    const auto path = generate_vacuum_path(4000.0, 0.01, rng);
    const auto f = field_fluctuation(path, sp);
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 1000; k < f.value.size(); ++k, ++n) s += std::norm(f.value[k]) / 2.0;
    CHECK(s / n == doctest::Approx(0.25).epsilon(0.08));
}

TEST_CASE("bare resonator") {
    SystemParams sp;
    sp.detuning = 0.3;
    sp.chi = 0.0;
    CHECK(bare_decay_constant(sp) == cplx{0.5, 0.3});
    CHECK(std::abs(bare_steady_state(sp, cplx{1.0}) - steady_state_field(sp, Branch::one, cplx{1.0})) < 1e-15);
}

TEST_CASE("least squares slope and decay fit on exact data") {
    const std::vector<double> x{0, 1, 2, 3, 4}, y{1, 3, 5, 7, 9};
    const auto e = ols_slope(x, y);
    CHECK(e.value == doctest::Approx(2.0));
    CHECK(e.se < 1e-12);

    std::vector<double> lags;
    std::vector<Estimate> c;
    for (int k = 0; k <= 12; ++k) {
        const double t = 0.5 * k;
        lags.push_back(t);
        c.push_back({2.0 * std::cos(0.3 * t) * std::exp(-0.5 * t), 1e-3});
    }
    CHECK(fit_decay_rate(lags, c, 0.3).value == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("bad-cavity limit agrees with the general formula") {
    SystemParams sp;
    sp.chi = 0.01;
    const auto b = bad_cavity_comparison(sp);
    CHECK(b.gamma_general == doctest::Approx(b.gamma_limit).epsilon(1e-3));
    CHECK(b.stark_general == doctest::Approx(b.stark_limit).epsilon(1e-3));
}

TEST_CASE("small correlator run") {
    SystemParams sp;
    sp.chi = 0.01;
    const cplx a = bare_steady_state(sp, cplx{1.0});
    const std::vector<double> lags{0.0, 1.0, 2.0};
    const auto r = photon_correlator(sp, a, 400, lags, 3);
    CHECK(r.correlator[0].value == doctest::Approx(std::norm(a)).epsilon(0.1));
    CHECK(r.predicted[1] == doctest::Approx(std::norm(a) * std::exp(-0.5)));
    CHECK(std::abs(r.correlator[1].value - r.predicted[1]) < 5 * r.correlator[1].se + 0.02);
}

TEST_CASE("back-action regression preconditions") {
    SystemParams sp;
    MeasurementSettings ms;
    ms.eta_amp = 0.5;
    CHECK_THROWS_AS(backaction_correlation(sp, cplx{1.0}, ms, 10, 1), ConfigError);
    ms.eta_amp = 1.0;
    BackactionOptions o;
    o.tau = 5.0;
    CHECK_THROWS_AS(backaction_correlation(sp, cplx{1.0}, ms, 10, 1, o), ConfigError);
}

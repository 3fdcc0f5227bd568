#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cqb/coherent.hpp"

using namespace cqb;

namespace {

// <n|alpha> by recurrence, independent of the library's log-domain evaluation.
std::vector<cplx> fock_direct(cplx alpha, int n_max) {
    std::vector<cplx> c(n_max + 1);
    c[0] = std::exp(-std::norm(alpha) / 2.0);
    for (int n = 1; n <= n_max; ++n) c[n] = c[n - 1] * alpha / std::sqrt(static_cast<double>(n));
    return c;
}

PureQubit qubit(double p1, double phase) {
    return {cplx{std::sqrt(1.0 - p1), 0.0}, std::polar(std::sqrt(p1), phase)};
}

}  // namespace

TEST_CASE("Fock amplitudes and photon statistics") {
    const cplx alpha{1.5, -0.8};
    const auto c = fock_amplitudes(alpha, 40);
    const auto ref = fock_direct(alpha, 40);
    double norm = 0.0;
    for (int n = 0; n <= 40; ++n) {
        CHECK(std::abs(c[n] - ref[n]) < 1e-14);
        CHECK(photon_pmf(alpha, n) == doctest::Approx(std::norm(ref[n])).epsilon(1e-12));
        norm += std::norm(c[n]);
    }
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(1.0 - [&] {
        double s = 0.0;
        for (const auto& x : fock_amplitudes(alpha, fock_cutoff(alpha))) s += std::norm(x);
        return s;
    }() < 1e-10);
    CHECK(std::exp(log_poisson_pmf(3.0, 2)) == doctest::Approx(std::exp(-3.0) * 4.5));
    CHECK(photon_pmf(cplx{}, 0) == 1.0);
}

TEST_CASE("inner product") {
    const cplx a{0.4, 1.1}, b{-0.7, 0.2};
    const auto ca = fock_direct(a, 60), cb = fock_direct(b, 60);
    cplx sum{};
    for (int n = 0; n <= 60; ++n) sum += std::conj(ca[n]) * cb[n];
    CHECK(std::abs(inner_product(a, b) - sum) < 1e-13);
    CHECK(std::norm(inner_product(a, b)) == doctest::Approx(std::exp(-std::norm(a - b))));
}

TEST_CASE("displacement composition, beam splitter, quadratures") {
    const cplx a{0.3, 0.9}, b{1.2, -0.5};
    const auto d = displace_compose(a, b);
    CHECK(d.amplitude == a + b);
    CHECK(d.phase == doctest::Approx((a * std::conj(b)).imag()));

    const cplx t1 = std::polar(std::sqrt(0.3), 0.2), r1 = std::polar(std::sqrt(0.7), -1.0);
    const auto [tr, rf] = beam_split(a, t1, r1);
    CHECK(tr == t1 * a);
    CHECK(rf == r1 * a);
    CHECK(std::norm(tr) + std::norm(rf) == doctest::Approx(std::norm(a)));
    CHECK_THROWS(beam_split(a, 1.0, 1.0));

    for (double phi : {0.0, 0.7, 2.0}) {
        const auto m = quadrature_moments(a, phi, 60);
        CHECK(m.mean == doctest::Approx((a * std::polar(1.0, -phi)).real()).epsilon(1e-10));
        CHECK(m.variance == doctest::Approx(0.25).epsilon(1e-9));
    }
}

TEST_CASE("collapse after photon counting of a displaced tail piece") {
    const auto piece = tail_piece(cplx{0.7, -0.2}, cplx{-0.3, 0.8}, 1.0, 0.01);
    CHECK(piece.alpha0 == cplx{0.7, -0.2} * 0.1);
    CHECK_THROWS(tail_piece(1.0, 1.0, 0.0, 0.01));

    const cplx pump = std::polar(20.0, 0.6);
    const PureQubit q = qubit(0.35, 1.2);
    const auto range = collapse_count_range(piece, pump);
    double total = 0.0;
    for (long n = range.lo; n <= range.hi; ++n) total += count_probability(q, piece, pump, n);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    // Direct oracle: c_j <n| D(pump) |alpha_j> = c_j e^{i Im(pump alpha_j*)} <n| pump + alpha_j>.
    const cplx b0 = pump + piece.alpha0, b1 = pump + piece.alpha1;
    for (long n : {range.lo + 5, 380L, 400L, 420L}) {
        const auto c = collapse_amplitudes(q, piece, pump, n);
        CHECK(std::norm(c.c0) + std::norm(c.c1) == doctest::Approx(1.0));
        CHECK(c.c0.imag() == 0.0);
        CHECK(c.c0.real() >= 0.0);
        const double dn = static_cast<double>(n);
        const double log_ratio_mod = std::log(std::abs(q.c1) / std::abs(q.c0)) - (std::norm(b1) - std::norm(b0)) / 2.0 +
                                     dn * (std::log(std::abs(b1)) - std::log(std::abs(b0)));
        const double ratio_phase = std::arg(q.c1) - std::arg(q.c0) + dn * (std::arg(b1) - std::arg(b0)) +
                                   (pump * std::conj(piece.alpha1)).imag() - (pump * std::conj(piece.alpha0)).imag();
        CHECK(std::log(std::abs(c.c1) / std::abs(c.c0)) == doctest::Approx(log_ratio_mod).epsilon(1e-9));
        CHECK(std::remainder(std::arg(c.c1) - ratio_phase, 2 * kPi) == doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("sampled collapse is unbiased on average") {
    const auto piece = tail_piece(cplx{0.5, 0.0}, cplx{-0.5, 0.3}, 1.0, 0.01);
    const cplx pump = std::polar(30.0, 0.0);
    const PureQubit q = qubit(0.6, 0.3);
    Philox4x32 rng(3);
    double mean11 = 0.0;
    const int n = 20000;
    for (int k = 0; k < n; ++k) mean11 += std::norm(exact_homodyne_collapse(q, piece, pump, rng).state.c1);
    mean11 /= n;
    // martingale: E[rho11'] = rho11
    CHECK(std::abs(mean11 - 0.6) < 5e-3);
    CHECK_THROWS_AS(exact_homodyne_collapse(q, piece, pump, rng, 10L), std::invalid_argument);
    CHECK(exact_homodyne_collapse(q, piece, cplx{0.01}, rng).weak_pump);
}

TEST_CASE("Gaussian reference approaches the exact collapse at strong pump") {
    const auto piece = tail_piece(cplx{0.9, -0.2}, cplx{-0.4, 0.6}, 1.0, 0.01);
    const PureQubit q = qubit(0.45, -0.8);
    const double sigma = 50.0;
    for (double phi_a : {0.0, 1.0}) {
        const cplx pump = std::polar(sigma, phi_a);
        const double m = std::norm(pump + piece.alpha1);
        for (double offset : {-50.0, 0.0, 50.0}) {
            const long n = std::lround(m + offset);
            const auto exact = collapse_amplitudes(q, piece, pump, n);
            const auto approx = gaussian_collapse_reference(q, piece, phi_a, static_cast<double>(n), sigma);
            CHECK(std::abs(approx.c1) == doctest::Approx(std::abs(exact.c1)).epsilon(2e-2));
            CHECK(std::abs(std::remainder(std::arg(approx.c1 / approx.c0) - std::arg(exact.c1 / exact.c0), 2 * kPi)) <
                  2e-2);
        }
    }
}

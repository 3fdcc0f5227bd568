#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cqb/field_dynamics.hpp"
#include "cqb/rng.hpp"

using namespace cqb;

namespace {

constexpr cplx I{0.0, 1.0};

// RK4 of d alpha/dt = -(kappa/2 + i(detuning +- chi)) alpha - i eps together with the
// phase rate Re(eps* alpha), written out from the model.
struct Rk4Branch {
    cplx alpha;
    double phase;
};

Rk4Branch rk4(double kappa, double detuning, double shift, cplx eps, cplx alpha, double t, int steps) {
    const cplx lambda{kappa / 2.0, detuning + shift};
    auto f = [&](cplx a) { return -lambda * a - I * eps; };
    auto g = [&](cplx a) { return (std::conj(eps) * a).real(); };
    const double h = t / steps;
    double phase = 0.0;
    for (int k = 0; k < steps; ++k) {
        const cplx k1 = f(alpha), k2 = f(alpha + h / 2 * k1), k3 = f(alpha + h / 2 * k2), k4 = f(alpha + h * k3);
        const double p1 = g(alpha), p2 = g(alpha + h / 2 * k1), p3 = g(alpha + h / 2 * k2), p4 = g(alpha + h * k3);
        alpha += h / 6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        phase += h / 6 * (p1 + 2 * p2 + 2 * p3 + p4);
    }
    return {alpha, phase};
}

SystemParams params(double detuning, double chi, double kappa, cplx eps) {
    SystemParams p;
    p.detuning = detuning;
    p.chi = chi;
    p.kappa = kappa;
    p.kappa_out = kappa;
    p.kappa_col = kappa;
    p.drive = Schedule<cplx>(eps);
    return p;
}

cplx cnormal(Philox4x32& g) { return {g.normal(), g.normal()}; }

}  // namespace

TEST_CASE("steady state is a fixed point of the field equation") {
    const auto p = params(0.3, 0.7, 1.3, cplx{0.8, -0.4});
    for (Branch j : {Branch::zero, Branch::one}) {
        const cplx ss = steady_state_field(p, j, p.drive.at(0.0));
        CHECK(std::abs(field_derivative(p, j, ss, p.drive.at(0.0))) < 1e-14);
    }
    // resonant symmetric case: alpha_1 = conj(alpha_0) up to sign conventions
    const auto q = params(0.0, 0.5, 1.0, 1.0);
    CHECK(std::abs(steady_state_field(q, Branch::zero, cplx{1.0}) - (-I / cplx{0.5, -0.5})) < 1e-15);
}

TEST_CASE("exact field step matches RK4 of the field and phase equations") {
    Philox4x32 g(11);
    for (int trial = 0; trial < 20; ++trial) {
        const double detuning = g.normal(), chi = g.uniform(), kappa = 0.2 + 2.0 * g.uniform();
        const cplx eps = cnormal(g);
        const auto p = params(detuning, chi, kappa, eps);
        const HybridState s(0.5, 0.5, cplx{}, cnormal(g), cnormal(g), 0.1, -0.2);
        const double dt = 0.1 + g.uniform();
        const auto next = advance_fields(s, p, 0.0, dt);
        const auto r0 = rk4(kappa, detuning, -chi, eps, s.alpha0(), dt, 2000);
        const auto r1 = rk4(kappa, detuning, +chi, eps, s.alpha1(), dt, 2000);
        CHECK(std::abs(next.alpha0() - r0.alpha) < 1e-10);
        CHECK(std::abs(next.alpha1() - r1.alpha) < 1e-10);
        CHECK(next.phase0() - 0.1 == doctest::Approx(r0.phase).epsilon(1e-9));
        CHECK(next.phase1() + 0.2 == doctest::Approx(r1.phase).epsilon(1e-9));
    }
}

TEST_CASE("tiny steps use the series branch without loss") {
    const auto p = params(0.1, 0.2, 1.0, cplx{1.0, 0.5});
    const HybridState s(0.5, 0.5, cplx{}, cplx{0.3, 0.1}, cplx{-0.2, 0.4});
    const double dt = 1e-5;
    const auto next = advance_fields(s, p, 0.0, dt);
    const auto r0 = rk4(1.0, 0.1, -0.2, cplx{1.0, 0.5}, s.alpha0(), dt, 4);
    CHECK(std::abs(next.alpha0() - r0.alpha) < 1e-15);
    CHECK(next.phase0() == doctest::Approx(r0.phase).epsilon(1e-10));
    CHECK_THROWS(advance_fields(s, p, 0.0, 0.0));
}

TEST_CASE("segmented step splits at drive boundaries") {
    auto p = params(0.0, 0.5, 1.0, 1.0);
    p.drive = Schedule<cplx>({{0.0, cplx{1.0}}, {0.3, cplx{0.0, 2.0}}});
    const HybridState s(0.5, 0.5, cplx{}, cplx{}, cplx{});
    const auto whole = advance_fields_segmented(s, p, 0.0, 1.0);
    const auto manual = advance_fields(advance_fields(s, p, 0.0, 0.3), p, 0.3, 0.7);
    CHECK(std::abs(whole.alpha1() - manual.alpha1()) < 1e-15);
    CHECK(whole.phase0() == doctest::Approx(manual.phase0()));
    const auto plain = advance_fields(s, p, 0.0, 1.0);
    CHECK(std::abs(plain.alpha1() - manual.alpha1()) > 1e-3);
}

TEST_CASE("derived quantities against their defining expressions") {
    Philox4x32 g(5);
    for (int trial = 0; trial < 50; ++trial) {
        const double kappa = 0.3 + g.uniform() * 2.0, chi = g.uniform(), detuning = g.normal();
        const cplx eps = cnormal(g);
        const auto p = params(detuning, chi, kappa, eps);
        const cplx a0 = cnormal(g), a1 = cnormal(g);
        const HybridState s(0.5, 0.5, cplx{}, a0, a1);
        MeasurementSettings m;
        m.amplified_phase = Schedule<double>(g.uniform() * 6.0);
        m.spectral_density = 0.5 + g.uniform();
        m.eta_amp = g.uniform();
        const auto d = derived_quantities(s, p, m, 0.0);
        const cplx diff = a1 - a0;
        CHECK(d.gamma_d == doctest::Approx(kappa / 2.0 * std::norm(diff)));
        CHECK(d.stark_1 == doctest::Approx(kappa * (std::conj(a1) * a0).imag()));
        CHECK(d.stark_2 == doctest::Approx((std::conj(eps) * diff).real()));
        CHECK(d.stark_s == doctest::Approx(d.stark_1 + d.stark_2));
        CHECK(d.gamma == doctest::Approx((1.0 - m.eta_amp) * d.gamma_d));

        // time derivatives by central differences of the exact flow
        const double h = 1e-5;
        const auto plus = advance_fields(s, p, 0.0, h);
        const auto m0 = rk4(kappa, detuning, -chi, eps, a0, -h, 4).alpha;
        const auto m1 = rk4(kappa, detuning, +chi, eps, a1, -h, 4).alpha;
        const double dgamma = (std::norm(plus.alpha1() - plus.alpha0()) / 2.0 - std::norm(m1 - m0) / 2.0) / (2 * h);
        const double dstark = ((std::conj(plus.alpha1()) * plus.alpha0()).imag() - (std::conj(m1) * m0).imag()) / (2 * h);
        CHECK(d.delta_gamma == doctest::Approx(dgamma).epsilon(1e-6));
        CHECK(d.stark_3 == doctest::Approx(dstark).epsilon(1e-6));

        // sum rules
        CHECK(d.gamma_d + d.delta_gamma == doctest::Approx(2 * chi * (std::conj(a1) * a0).imag()).epsilon(1e-12));
        CHECK(d.stark_s + d.stark_3 == doctest::Approx(2 * chi * (std::conj(a1) * a0).real()).epsilon(1e-12));

        // response and back-action
        const double eta = total_efficiency(p, m);
        const double dmax = std::sqrt(2 * eta * kappa * m.spectral_density) * std::abs(diff);
        const double phi_d = m.amplified_phase.at(0.0) - std::arg(diff);
        CHECK(d.delta_i_max == doctest::Approx(dmax));
        CHECK(d.delta_i == doctest::Approx(dmax * std::cos(phi_d)).epsilon(1e-10));
        CHECK(d.back_action_k == doctest::Approx(dmax * std::sin(phi_d) / m.spectral_density).epsilon(1e-10));
        const double lhs = d.delta_i * d.delta_i / (4 * m.spectral_density) +
                           d.back_action_k * d.back_action_k * m.spectral_density / 4;
        CHECK(lhs == doctest::Approx(dmax * dmax / (4 * m.spectral_density)).epsilon(1e-13));

        m.mode = Mode::phase_preserving;
        const auto q = derived_quantities(s, p, m, 0.0);
        CHECK(q.delta_i == doctest::Approx(std::sqrt(eta * kappa * m.spectral_density) * std::abs(diff)));
        CHECK(q.back_action_k == doctest::Approx(q.delta_i / m.spectral_density));
    }
}

TEST_CASE("optimal phase gives the full response") {
    const auto p = params(0.2, 0.5, 1.0, 1.0);
    const cplx a0 = steady_state_field(p, Branch::zero, cplx{1.0});
    const cplx a1 = steady_state_field(p, Branch::one, cplx{1.0});
    MeasurementSettings m;
    m.amplified_phase = Schedule<double>(std::arg(a1 - a0));
    const auto d = derived_quantities(HybridState(0.5, 0.5, {}, a0, a1), p, m, 0.0);
    CHECK(d.phi_d == doctest::Approx(0.0));
    CHECK(d.delta_i == doctest::Approx(d.delta_i_max));
    CHECK(std::abs(d.back_action_k) < 1e-14);
}

TEST_CASE("outgoing field") {
    auto p = params(0.0, 0.5, 2.0, 1.0);
    p.kappa_out = 0.5;
    CHECK(std::abs(outgoing_field(p, cplx{1.0, 1.0}, 1.0) - std::sqrt(0.5) * cplx{1.0, 1.0}) < 1e-15);
    p.configuration = Configuration::reflection;
    CHECK(std::abs(outgoing_field(p, cplx{}, cplx{2.0}) - I * 2.0 / std::sqrt(0.5)) < 1e-14);
    p.kappa_out = 0.0;
    p.kappa_col = 0.0;
    CHECK_THROWS_AS(outgoing_field(p, cplx{}, 1.0), ConfigError);
}

TEST_CASE("dispersive shift estimate") {
    // omega_r/omega_q g^2 a / (D (D - a))
    CHECK(chi_estimate(0.1, -0.3, 1.0, 7.0, 8.0) == doctest::Approx(7.0 / 8.0 * 0.01 * -0.3 / (1.0 * 1.3)));
    CHECK_THROWS(chi_estimate(0.1, -0.3, 0.0, 7.0, 8.0));
    CHECK_THROWS(chi_estimate(0.1, -0.3, -0.3, 7.0, 8.0));
}

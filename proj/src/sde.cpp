#include "cqb/sde.hpp"

#include <algorithm>
#include <cmath>

namespace cqb {

namespace {

constexpr cplx kI{0.0, 1.0};

struct Qubit {
    double rho11;
    cplx rho10;
};

enum class Calculus { stratonovich, ito };

struct Drive {
    double noise_i;
    double noise_q;  // unused in phase-sensitive mode
};

// Time derivative of (rho11, rho10) for a fixed realization of the noises.
Qubit rate(const Qubit& q, const Drive& xi, const DerivedQuantities& d, Calculus calc) {
    const double rho00 = 1.0 - q.rho11;
    const double s = d.spectral_density;
    // Signal entering the brackets: I - (I0 + I1)/2 or the innovation I - I_av.
    const double signal =
        calc == Calculus::stratonovich ? d.delta_i / 2.0 * (q.rho11 - rho00) + xi.noise_i
                                       : xi.noise_i;
    const double gain = d.delta_i / s;
    const double damping = calc == Calculus::stratonovich ? d.gamma : d.gamma_d;
    const double phase_drive =
        d.mode == Mode::phase_sensitive ? d.back_action_k * signal : d.back_action_k * xi.noise_q;

    Qubit out;
    out.rho11 = 2.0 * gain * q.rho11 * rho00 * signal;
    out.rho10 = (-(q.rho11 - rho00) * gain * signal - kI * phase_drive - damping - d.gamma_int -
                 kI * d.stark_s) *
                q.rho10;
    return out;
}

Qubit axpy(const Qubit& y, const Qubit& f, double h) {
    return {y.rho11 + h * f.rho11, y.rho10 + h * f.rho10};
}

HybridState finish(const HybridState& state, Qubit q) {
    const double rho11 = std::clamp(q.rho11, 0.0, 1.0);
    const double rho00 = 1.0 - rho11;
    const double bound = rho00 * rho11;
    if (std::norm(q.rho10) > bound) {
        q.rho10 = bound > 0.0 ? q.rho10 * std::sqrt(bound / std::norm(q.rho10)) : cplx{};
    }
    return state.with_qubit(rho00, rho11, q.rho10);
}

void check(double noise_i, double noise_q, double dt) {
    if (!std::isfinite(noise_i) || !std::isfinite(noise_q)) {
        throw std::invalid_argument("sde step: non-finite noise");
    }
    if (!(dt > 0.0)) {
        throw std::invalid_argument("sde step: dt must be positive");
    }
}

HybridState heun(const HybridState& state, const Drive& xi, const DerivedQuantities& d,
                 double dt) {
    check(xi.noise_i, xi.noise_q, dt);
    const Qubit y{state.rho11(), state.rho10()};
    const Qubit f0 = rate(y, xi, d, Calculus::stratonovich);
    const Qubit f1 = rate(axpy(y, f0, dt), xi, d, Calculus::stratonovich);
    return finish(state, {y.rho11 + dt / 2.0 * (f0.rho11 + f1.rho11),
                          y.rho10 + dt / 2.0 * (f0.rho10 + f1.rho10)});
}

HybridState euler(const HybridState& state, const Drive& xi, const DerivedQuantities& d,
                  double dt) {
    check(xi.noise_i, xi.noise_q, dt);
    const Qubit y{state.rho11(), state.rho10()};
    return finish(state, axpy(y, rate(y, xi, d, Calculus::ito), dt));
}

const DerivedQuantities& as_mode(const DerivedQuantities& d, Mode mode) {
    if (d.mode != mode) {
        throw std::invalid_argument("sde step: derived quantities computed for the other mode");
    }
    return d;
}

}  // namespace

HybridState strat_step_ps(const HybridState& state, double noise_i,
                          const DerivedQuantities& derived, double dt) {
    return heun(state, {noise_i, 0.0}, as_mode(derived, Mode::phase_sensitive), dt);
}

HybridState strat_step_pp(const HybridState& state, double noise_i, double noise_q,
                          const DerivedQuantities& derived, double dt) {
    return heun(state, {noise_i, noise_q}, as_mode(derived, Mode::phase_preserving), dt);
}

HybridState ito_step_ps(const HybridState& state, double noise_i,
                        const DerivedQuantities& derived, double dt) {
    return euler(state, {noise_i, 0.0}, as_mode(derived, Mode::phase_sensitive), dt);
}

HybridState ito_step_pp(const HybridState& state, double noise_i, double noise_q,
                        const DerivedQuantities& derived, double dt) {
    return euler(state, {noise_i, noise_q}, as_mode(derived, Mode::phase_preserving), dt);
}

}  // namespace cqb

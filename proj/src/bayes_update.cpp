#include "cqb/bayes_update.hpp"

#include <algorithm>
#include <cmath>

#include "cqb/coherent.hpp"

namespace cqb {

namespace {

double logistic(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log_sum_exp(double a, double b) {
    const double m = std::max(a, b);
    if (!std::isfinite(m)) {
        return m;
    }
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void require_finite(const MeasurementSample& s, bool need_q) {
    if (!std::isfinite(s.i_bar) || !(s.dt > 0.0) || !std::isfinite(s.dt)) {
        throw std::invalid_argument("update: non-finite sample or non-positive dt");
    }
    if (need_q && (!s.q_bar || !std::isfinite(*s.q_bar))) {
        throw std::invalid_argument("update: phase-preserving sample needs a finite Q value");
    }
}

HybridState apply(const HybridState& state, const DiagonalUpdate& diag, double log_decay,
                  double phase) {
    cplx rho10 = state.rho10() * std::exp(diag.log_purity_factor + log_decay) *
                 std::polar(1.0, -phase);
    const double bound = diag.rho00 * diag.rho11;
    if (std::norm(rho10) > bound) {
        rho10 *= std::sqrt(bound / std::norm(rho10));
    }
    return state.with_qubit(diag.rho00, diag.rho11, rho10);
}

}  // namespace

DiagonalUpdate bayes_diagonals(double rho00, double rho11, double log_ratio) {
    if (rho00 == 0.0 || rho11 == 0.0) {
        return {rho00, rho11, 0.0};
    }
    const double l0 = std::log(rho00);
    const double l1 = std::log(rho11);
    const double x = l1 - l0 + log_ratio;
    const double norm = log_sum_exp(l0 - log_ratio / 2.0, l1 + log_ratio / 2.0);
    return {logistic(-x), logistic(x), -norm};
}

MeasurementSample sample_record(const HybridState& state, const DerivedQuantities& derived,
                                double t_end, double dt, Philox4x32& rng) {
    const double variance = record_variance(derived.spectral_density, dt);
    const double sd = std::sqrt(variance);
    const double sign = rng.uniform() < state.rho11() ? 1.0 : -1.0;
    MeasurementSample s;
    s.t_end = t_end;
    s.dt = dt;
    s.i_bar = sign * derived.delta_i / 2.0 + sd * rng.normal();
    if (derived.mode == Mode::phase_preserving) {
        s.q_bar = sd * rng.normal();
    }
    return s;
}

HybridState update_phase_sensitive(const HybridState& state, const MeasurementSample& sample,
                                   const DerivedQuantities& derived) {
    require_finite(sample, false);
    const double dt = sample.dt;
    const double variance = record_variance(derived.spectral_density, dt);
    const auto diag =
        bayes_diagonals(state.rho00(), state.rho11(), sample.i_bar * derived.delta_i / variance);
    const double phase = derived.back_action_k * sample.i_bar * dt + derived.stark_s * dt;
    return apply(state, diag, -(derived.gamma + derived.gamma_int) * dt, phase);
}

HybridState update_phase_preserving(const HybridState& state, const MeasurementSample& sample,
                                    const DerivedQuantities& derived) {
    require_finite(sample, true);
    const double dt = sample.dt;
    const double variance = record_variance(derived.spectral_density, dt);
    const auto diag =
        bayes_diagonals(state.rho00(), state.rho11(), sample.i_bar * derived.delta_i / variance);
    const double phase = *sample.q_bar * derived.delta_i / (2.0 * variance) + derived.stark_s * dt;
    return apply(state, diag, -(derived.gamma + derived.gamma_int) * dt, phase);
}

HybridState update(const HybridState& state, const MeasurementSample& sample,
                   const DerivedQuantities& derived) {
    return derived.mode == Mode::phase_sensitive ? update_phase_sensitive(state, sample, derived)
                                                 : update_phase_preserving(state, sample, derived);
}

HybridState ensemble_step(const HybridState& state, const DerivedQuantities& derived, double dt) {
    const cplx rho10 = state.rho10() * std::exp(-(derived.gamma_d + derived.gamma_int) * dt) *
                       std::polar(1.0, -derived.stark_s * dt);
    return state.with_qubit(state.rho00(), state.rho11(), rho10);
}

QubitDensity qubit_only_reduce(const HybridState& state) {
    return {state.rho00(), state.rho11(),
            state.rho10() * inner_product(state.alpha0(), state.alpha1())};
}

}  // namespace cqb

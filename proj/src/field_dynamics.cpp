#include "cqb/field_dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace cqb {

namespace {

// (1 - e^{-z}) / z, accurate near z = 0.
cplx relaxation_factor(cplx z) {
    if (std::abs(z) < 1e-3) {
        return 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0 + z * z * z * z / 120.0;
    }
    return (1.0 - std::exp(-z)) / z;
}

struct BranchStep {
    cplx alpha;
    double phase_increment;
};

BranchStep step_branch(const SystemParams& params, Branch j, cplx alpha, cplx drive,
                       double dt) {
    const cplx lambda = field_decay_constant(params, j);
    const cplx ss = -cplx{0.0, 1.0} * drive / lambda;
    const cplx offset = alpha - ss;
    const cplx factor = relaxation_factor(lambda * dt);
    const cplx next = ss + offset * std::exp(-lambda * dt);
    const double dphase =
        (std::conj(drive) * ss).real() * dt + (std::conj(drive) * offset * factor).real() * dt;
    return {next, dphase};
}

}  // namespace

cplx field_decay_constant(const SystemParams& params, Branch j) {
    return {params.kappa / 2.0, params.detuning + branch_sign(j) * params.chi};
}

cplx steady_state_field(const SystemParams& params, Branch j, cplx drive) {
    return -cplx{0.0, 1.0} * drive / field_decay_constant(params, j);
}

cplx steady_state_field(const SystemParams& params, Branch j, double t) {
    return steady_state_field(params, j, params.drive.at(t));
}

cplx field_derivative(const SystemParams& params, Branch j, cplx alpha, cplx drive) {
    return -field_decay_constant(params, j) * alpha - cplx{0.0, 1.0} * drive;
}

HybridState advance_fields(const HybridState& state, const SystemParams& params, double t,
                           double dt) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("advance_fields: dt must be positive");
    }
    const cplx drive = params.drive.at(t);
    const auto b0 = step_branch(params, Branch::zero, state.alpha0(), drive, dt);
    const auto b1 = step_branch(params, Branch::one, state.alpha1(), drive, dt);
    return state.with_fields(b0.alpha, b1.alpha, state.phase0() + b0.phase_increment,
                             state.phase1() + b1.phase_increment);
}

HybridState advance_fields_segmented(const HybridState& state, const SystemParams& params,
                                     double t, double dt) {
    const double t_end = t + dt;
    HybridState s = state;
    double now = t;
    for (double cut : params.drive.breakpoints(t, t_end)) {
        s = advance_fields(s, params, now, cut - now);
        now = cut;
    }
    return advance_fields(s, params, now, now == t ? dt : t_end - now);
}

cplx outgoing_field(const SystemParams& params, cplx alpha, cplx drive) {
    if (!(params.kappa_out > 0.0)) {
        throw ConfigError("kappa_out: no output coupling");
    }
    const double root = std::sqrt(params.kappa_out);
    cplx f = root * alpha;
    if (params.configuration == Configuration::reflection) {
        f += cplx{0.0, 1.0} * drive / root;
    }
    return f;
}

DerivedQuantities derived_quantities(const HybridState& state, const SystemParams& params,
                                     const MeasurementSettings& settings, double t) {
    const cplx drive = params.drive.at(t);
    const cplx a0 = state.alpha0();
    const cplx a1 = state.alpha1();
    const cplx da0 = field_derivative(params, Branch::zero, a0, drive);
    const cplx da1 = field_derivative(params, Branch::one, a1, drive);
    const cplx diff = a1 - a0;
    const cplx overlap = std::conj(a1) * a0;
    const cplx overlap_rate = std::conj(da1) * a0 + std::conj(a1) * da0;

    DerivedQuantities d;
    d.mode = settings.mode;
    d.spectral_density = settings.spectral_density;
    d.gamma_int = settings.gamma_int;
    d.efficiency = total_efficiency(params, settings);
    d.gamma_d = params.kappa / 2.0 * std::norm(diff);
    d.delta_gamma = (std::conj(diff) * (da1 - da0)).real();
    d.stark_1 = params.kappa * overlap.imag();
    d.stark_2 = (std::conj(drive) * diff).real();
    d.stark_3 = overlap_rate.imag();
    d.stark_s = d.stark_1 + d.stark_2;
    d.phi_opt = diff == cplx{} ? 0.0 : std::arg(diff);
    d.gamma = (1.0 - d.efficiency) * d.gamma_d;

    const double s = settings.spectral_density;
    if (settings.mode == Mode::phase_sensitive) {
        d.phi_d = settings.amplified_phase.at(t) - d.phi_opt;
        d.delta_i_max = std::sqrt(2.0 * d.efficiency * params.kappa * s) * std::abs(diff);
        d.delta_i = d.delta_i_max * std::cos(d.phi_d);
        d.back_action_k = d.delta_i_max * std::sin(d.phi_d) / s;
    } else {
        d.phi_d = 0.0;
        d.delta_i = std::sqrt(d.efficiency * params.kappa * s) * std::abs(diff);
        d.delta_i_max = d.delta_i;
        d.back_action_k = d.delta_i / s;
    }
    return d;
}

double chi_estimate(double g, double anharmonicity, double qubit_detuning, double omega_r,
                    double omega_q) {
    const double scale = std::max({1.0, std::abs(anharmonicity), std::abs(qubit_detuning)});
    if (std::abs(qubit_detuning) <= 1e-12 * scale ||
        std::abs(qubit_detuning - anharmonicity) <= 1e-12 * scale) {
        throw std::invalid_argument("chi_estimate: straddling/resonant regime");
    }
    if (omega_q == 0.0) {
        throw std::invalid_argument("chi_estimate: omega_q must be non-zero");
    }
    return omega_r / omega_q * g * g * anharmonicity /
           (qubit_detuning * (qubit_detuning - anharmonicity));
}

}  // namespace cqb

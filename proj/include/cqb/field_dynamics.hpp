#pragma once

#include "cqb/core.hpp"

namespace cqb {

// Quantities derived from the branch fields at one instant.
struct DerivedQuantities {
    double gamma_d = 0.0;      // ensemble dephasing (kappa/2)|alpha1 - alpha0|^2
    double delta_gamma = 0.0;  // d/dt of |alpha1 - alpha0|^2 / 2
    double stark_1 = 0.0;      // kappa Im(alpha1* alpha0)
    double stark_2 = 0.0;      // Re(eps* (alpha1 - alpha0))
    double stark_3 = 0.0;      // d/dt Im(alpha1* alpha0)
    double stark_s = 0.0;      // stark_1 + stark_2
    double phi_opt = 0.0;
    double phi_d = 0.0;
    double delta_i_max = 0.0;
    double delta_i = 0.0;
    double back_action_k = 0.0;  // phase-sensitive: K; phase-preserving: coefficient of Q
    double gamma = 0.0;          // dephasing not accounted for by the record, (1 - eta) Gamma_d
    double efficiency = 1.0;
    double spectral_density = 1.0;
    double gamma_int = 0.0;
    Mode mode = Mode::phase_sensitive;
};

// Decay constant lambda_j = i(detuning +- chi) + kappa/2 of branch j.
cplx field_decay_constant(const SystemParams& params, Branch j);

// -i eps / lambda_j.
cplx steady_state_field(const SystemParams& params, Branch j, cplx drive);
cplx steady_state_field(const SystemParams& params, Branch j, double t);

// Right-hand side of the branch-j field equation.
cplx field_derivative(const SystemParams& params, Branch j, cplx alpha, cplx drive);

// Exact step of both branch fields and their overall phases over [t, t + dt].
// The drive is taken constant at its value at t.
HybridState advance_fields(const HybridState& state, const SystemParams& params, double t,
                           double dt);

// Same, but splits the interval at drive-schedule boundaries.
HybridState advance_fields_segmented(const HybridState& state, const SystemParams& params,
                                     double t, double dt);

cplx outgoing_field(const SystemParams& params, cplx alpha, cplx drive);

DerivedQuantities derived_quantities(const HybridState& state, const SystemParams& params,
                                     const MeasurementSettings& settings, double t);

// Dispersive shift from transmon parameters: qubit_detuning = omega_q - omega_r,
// anharmonicity = omega_q - omega_q12.
double chi_estimate(double g, double anharmonicity, double qubit_detuning, double omega_r,
                    double omega_q);

}  // namespace cqb

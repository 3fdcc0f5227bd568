#pragma once

#include "cqb/core.hpp"
#include "cqb/field_dynamics.hpp"
#include "cqb/rng.hpp"

namespace cqb {

// Draws the centered record of one interval: branch j with probability rho_jj, then
// I ~ N(+-delta_i/2, D); in phase-preserving mode also Q ~ N(0, D).
MeasurementSample sample_record(const HybridState& state, const DerivedQuantities& derived,
                                double t_end, double dt, Philox4x32& rng);

// Finite-step updates of the qubit part. Fields are left untouched; the caller
// advances them first.
HybridState update_phase_sensitive(const HybridState& state, const MeasurementSample& sample,
                                   const DerivedQuantities& derived);
HybridState update_phase_preserving(const HybridState& state, const MeasurementSample& sample,
                                    const DerivedQuantities& derived);

// Dispatches on derived.mode.
HybridState update(const HybridState& state, const MeasurementSample& sample,
                   const DerivedQuantities& derived);

// Record-averaged step: diagonals fixed, rho10 decays with Gamma_d and rotates with the
// Stark shift.
HybridState ensemble_step(const HybridState& state, const DerivedQuantities& derived, double dt);

struct QubitDensity {
    double rho00;
    double rho11;
    cplx rho10;
};

// Qubit state after tracing out the resonator: rho10 <alpha0|alpha1>.
QubitDensity qubit_only_reduce(const HybridState& state);

// Log-domain Bayes update of the diagonals by a log-likelihood ratio
// log(P1/P0). Returns (rho00', rho11') and the log of
// sqrt(rho00' rho11' / (rho00 rho11)).
struct DiagonalUpdate {
    double rho00;
    double rho11;
    double log_purity_factor;
};
DiagonalUpdate bayes_diagonals(double rho00, double rho11, double log_ratio);

}  // namespace cqb

#pragma once

#include "cqb/core.hpp"
#include "cqb/field_dynamics.hpp"

namespace cqb {

// Differential-form steppers for the qubit part. The noise arguments are the
// interval averages of the white noises xi_I, xi_Q (variance S_I / 2dt each), so
// they can share a path with the finite-step updates. Fields are not touched.
//
// Stratonovich forms use a Heun predictor-corrector, Ito forms Euler-Maruyama.
// Every step ends by renormalizing the diagonals and clipping |rho10| to the
// Cauchy-Schwarz bound.

HybridState strat_step_ps(const HybridState& state, double noise_i,
                          const DerivedQuantities& derived, double dt);
HybridState strat_step_pp(const HybridState& state, double noise_i, double noise_q,
                          const DerivedQuantities& derived, double dt);

HybridState ito_step_ps(const HybridState& state, double noise_i,
                        const DerivedQuantities& derived, double dt);
HybridState ito_step_pp(const HybridState& state, double noise_i, double noise_q,
                        const DerivedQuantities& derived, double dt);

}  // namespace cqb

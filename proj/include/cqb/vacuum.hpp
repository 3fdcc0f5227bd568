#pragma once

#include <span>
#include <vector>

#include "cqb/core.hpp"
#include "cqb/rng.hpp"

namespace cqb {

// Classical vacuum noise held constant over each step h; each quadrature of v_k is
// Normal(0, 1/(4h)).
struct VacuumPath {
    double h = 0.0;
    std::vector<cplx> v;
};

VacuumPath generate_vacuum_path(double duration, double h, Philox4x32& rng);

// Resonator fluctuation driven by sqrt(kappa) v with decay kappa/2 + i detuning.
// value[k] is delta_alpha at t = k h (value[0] = initial); integral[k] is its exact
// integral over step k.
struct FieldFluctuation {
    std::vector<cplx> value;
    std::vector<cplx> integral;
};

FieldFluctuation field_fluctuation(const VacuumPath& path, const SystemParams& params,
                                   cplx initial = cplx{});

// Decay constant of the bare resonator, kappa/2 + i detuning.
cplx bare_decay_constant(const SystemParams& params);

// Steady state of the bare resonator at the given drive.
cplx bare_steady_state(const SystemParams& params, cplx drive);

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

struct CorrelatorOptions {
    double h = 0.01;
    double burn_in = 10.0;  // in units of 1/kappa
    double window = 20.0;   // averaging window per path, 1/kappa
    unsigned threads = 1;
};

struct CorrelatorResult {
    std::vector<double> lags;
    std::vector<Estimate> correlator;  // <dn(t) dn(t + lag)>
    std::vector<double> predicted;     // n cos(detuning lag) e^{-kappa lag / 2}
    Estimate decay_rate;               // fitted
};

// Photon-number correlator with dn = 2 Re(alpha_st* delta_alpha). Paths use seeds
// seed + index.
CorrelatorResult photon_correlator(const SystemParams& params, cplx alpha_st,
                                   std::size_t n_paths, std::span<const double> lags,
                                   std::uint64_t seed, const CorrelatorOptions& options = {});

// Weighted least-squares rate of log(C(lag) / cos(detuning lag)) over lags with
// |cos| > 0.3 and C > 3 se.
Estimate fit_decay_rate(std::span<const double> lags, std::span<const Estimate> correlator,
                        double detuning);

struct BackactionOptions {
    double h = 0.01;
    double tau = 100.0;  // window, 1/kappa; at least 10
    unsigned threads = 1;
};

struct BackactionResult {
    Estimate slope;            // integrated Stark fluctuation on the record I~
    Estimate informational;    // same against the informational quadrature
    double predicted = 0.0;    // delta_i_max / 2D
    double efficiency = 1.0;   // kappa_col / kappa
};

// Regression of the integrated Stark-shift fluctuation on the record measured in the
// quadrature orthogonal to the informational one. Vacuum noise enters through
// kappa_out, the remainder kappa - kappa_out, and the collection loss kappa_col /
// kappa_out.
BackactionResult backaction_correlation(const SystemParams& params, cplx alpha_st,
                                        const MeasurementSettings& settings,
                                        std::size_t n_paths, std::uint64_t seed,
                                        const BackactionOptions& options = {});

struct BadCavityComparison {
    double photons;        // mean of |alpha_j,st|^2 over the two branches
    double gamma_general;  // 2 chi Im(alpha1* alpha0) in the steady state
    double gamma_limit;    // 8 chi^2 n / kappa / (1 + (2 detuning / kappa)^2)
    double stark_general;  // 2 chi Re(alpha1* alpha0)
    double stark_limit;    // 2 chi n
};

BadCavityComparison bad_cavity_comparison(const SystemParams& params, double t = 0.0);

// Ordinary least squares slope of y on x with its standard error.
Estimate ols_slope(std::span<const double> x, std::span<const double> y);

}  // namespace cqb

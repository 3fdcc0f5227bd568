#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "cqb/core.hpp"
#include "cqb/rng.hpp"

namespace cqb {

// Fock-basis coefficients <n|alpha> for n = 0..n_max.
std::vector<cplx> fock_amplitudes(cplx alpha, int n_max);

// Smallest cutoff with norm deficit below 1e-10.
int fock_cutoff(cplx alpha);

// Poisson probability of n photons in |alpha>.
double photon_pmf(cplx alpha, long n);
double log_poisson_pmf(double mean, long n);

// <alpha|beta>.
cplx inner_product(cplx alpha, cplx beta);

// D(alpha) D(beta) = D(alpha + beta) e^{i phase}.
struct ComposedDisplacement {
    cplx amplitude;
    double phase;
};
ComposedDisplacement displace_compose(cplx alpha, cplx beta);

// Splits |alpha> into |t1 alpha> (transmitted) and |r1 alpha> (reflected).
std::pair<cplx, cplx> beam_split(cplx alpha, cplx t1, cplx r1);

struct QuadratureMoments {
    double mean;
    double variance;
};
// Moments of x(phi) = (a e^{-i phi} + a^dag e^{i phi}) / 2 from truncated Fock sums.
QuadratureMoments quadrature_moments(cplx alpha, double phi, int n_max);

struct PureQubit {
    cplx c0;
    cplx c1;
};

// Field piece leaking out of the resonator during [t, t + dt]: alpha_j sqrt(kappa dt).
struct TailPiece {
    cplx alpha0;
    cplx alpha1;
    double t = 0.0;
};
TailPiece tail_piece(cplx alpha0, cplx alpha1, double kappa, double dt, double t = 0.0);

struct CountRange {
    long lo;
    long hi;
};
// Photon-count window that holds both branches' Poisson mass to ~1e-30.
CountRange collapse_count_range(const TailPiece& piece, cplx pump);

// Probability of counting n photons after the pump displacement.
double count_probability(const PureQubit& state, const TailPiece& piece, cplx pump, long n);

// Qubit amplitudes after counting n photons, normalized, c0 real and non-negative.
PureQubit collapse_amplitudes(const PureQubit& state, const TailPiece& piece, cplx pump, long n);

struct CollapseOutcome {
    long n;
    PureQubit state;
    bool weak_pump;  // |pump| < 10 max|alpha_jt|
};

// Draws n from the two-Poisson mixture and returns the collapsed amplitudes.
// Throws if n_max is given and does not cover collapse_count_range.
CollapseOutcome exact_homodyne_collapse(const PureQubit& state, const TailPiece& piece,
                                        cplx pump, Philox4x32& rng,
                                        std::optional<long> n_max = std::nullopt);

// Gaussian approximation of the same collapse for pump sigma e^{i phi_a}.
PureQubit gaussian_collapse_reference(const PureQubit& state, const TailPiece& piece,
                                      double phi_a, double n, double sigma);

}  // namespace cqb

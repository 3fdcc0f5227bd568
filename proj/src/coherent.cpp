#include "cqb/coherent.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace cqb {

namespace {

constexpr cplx kI{0.0, 1.0};

// Normalizes and rotates so that c0 is real and non-negative.
PureQubit fix_gauge(cplx c0, cplx c1) {
    const double norm = std::sqrt(std::norm(c0) + std::norm(c1));
    if (!(norm > 0.0)) {
        throw std::runtime_error("collapse: both branch amplitudes vanished");
    }
    c0 /= norm;
    c1 /= norm;
    if (c0 != cplx{}) {
        const cplx rot = std::conj(c0) / std::abs(c0);
        c0 = std::abs(c0);
        c1 *= rot;
    }
    return {c0, c1};
}

struct BranchTerm {
    double log_mod;  // -inf for a vanishing amplitude
    double phase;
};

BranchTerm collapse_term(cplx c, cplx tail, cplx pump, long n) {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    const cplx beta = pump + tail;
    if (c == cplx{}) {
        return {kNegInf, 0.0};
    }
    double log_mod = std::log(std::abs(c)) - std::norm(beta) / 2.0;
    if (n > 0) {
        if (beta == cplx{}) {
            return {kNegInf, 0.0};
        }
        log_mod += static_cast<double>(n) * std::log(std::abs(beta));
    }
    // n arg(pump) is common to both branches and dropped.
    const double phase = std::arg(c) - (std::conj(pump) * tail).imag() +
                         static_cast<double>(n) * std::arg(beta / pump);
    return {log_mod, phase};
}

}  // namespace

std::vector<cplx> fock_amplitudes(cplx alpha, int n_max) {
    if (n_max < 0) {
        throw std::invalid_argument("fock_amplitudes: n_max must be non-negative");
    }
    std::vector<cplx> c(static_cast<std::size_t>(n_max) + 1, cplx{});
    if (alpha == cplx{}) {
        c[0] = 1.0;
        return c;
    }
    const double log_r = std::log(std::abs(alpha));
    const double theta = std::arg(alpha);
    const double half_mean = std::norm(alpha) / 2.0;
    for (int n = 0; n <= n_max; ++n) {
        const double log_mod = -half_mean + n * log_r - 0.5 * std::lgamma(n + 1.0);
        c[static_cast<std::size_t>(n)] = std::polar(std::exp(log_mod), n * theta);
    }
    return c;
}

int fock_cutoff(cplx alpha) {
    const double mean = std::norm(alpha);
    return static_cast<int>(std::ceil(mean + 10.0 * std::sqrt(mean + 1.0) + 20.0));
}

double log_poisson_pmf(double mean, long n) {
    if (n < 0) {
        throw std::invalid_argument("photon count must be non-negative");
    }
    if (mean == 0.0) {
        return n == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    }
    const double dn = static_cast<double>(n);
    return dn * std::log(mean) - mean - std::lgamma(dn + 1.0);
}

double photon_pmf(cplx alpha, long n) { return std::exp(log_poisson_pmf(std::norm(alpha), n)); }

cplx inner_product(cplx alpha, cplx beta) {
    return std::exp(-std::norm(alpha - beta) / 2.0) *
           std::exp(-kI * (alpha * std::conj(beta)).imag());
}

ComposedDisplacement displace_compose(cplx alpha, cplx beta) {
    return {alpha + beta, -(std::conj(alpha) * beta).imag()};
}

std::pair<cplx, cplx> beam_split(cplx alpha, cplx t1, cplx r1) {
    if (std::abs(std::norm(t1) + std::norm(r1) - 1.0) > 1e-12) {
        throw std::invalid_argument("beam_split: |t1|^2 + |r1|^2 must equal 1");
    }
    return {t1 * alpha, r1 * alpha};
}

QuadratureMoments quadrature_moments(cplx alpha, double phi, int n_max) {
    const auto c = fock_amplitudes(alpha, n_max);
    cplx a{}, a2{};
    double number = 0.0;
    for (std::size_t n = 0; n < c.size(); ++n) {
        const double dn = static_cast<double>(n);
        number += dn * std::norm(c[n]);
        if (n + 1 < c.size()) {
            a += std::conj(c[n]) * c[n + 1] * std::sqrt(dn + 1.0);
        }
        if (n + 2 < c.size()) {
            a2 += std::conj(c[n]) * c[n + 2] * std::sqrt((dn + 1.0) * (dn + 2.0));
        }
    }
    const cplx rot = std::polar(1.0, -phi);
    const double mean = (a * rot).real();
    const double second = (2.0 * (a2 * rot * rot).real() + 2.0 * number + 1.0) / 4.0;
    return {mean, second - mean * mean};
}

TailPiece tail_piece(cplx alpha0, cplx alpha1, double kappa, double dt, double t) {
    if (!(kappa > 0.0) || !(dt > 0.0)) {
        throw std::invalid_argument("tail_piece: kappa and dt must be positive");
    }
    const double amp = std::sqrt(kappa * dt);
    return {alpha0 * amp, alpha1 * amp, t};
}

CountRange collapse_count_range(const TailPiece& piece, cplx pump) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (cplx tail : {piece.alpha0, piece.alpha1}) {
        const double mean = std::norm(pump + tail);
        const double width = 12.0 * std::max(std::sqrt(mean), 1.0) + 10.0;
        lo = std::min(lo, mean - width);
        hi = std::max(hi, mean + width);
    }
    return {std::max(0L, static_cast<long>(std::floor(lo))), static_cast<long>(std::ceil(hi))};
}

double count_probability(const PureQubit& state, const TailPiece& piece, cplx pump, long n) {
    return std::norm(state.c0) * std::exp(log_poisson_pmf(std::norm(pump + piece.alpha0), n)) +
           std::norm(state.c1) * std::exp(log_poisson_pmf(std::norm(pump + piece.alpha1), n));
}

PureQubit collapse_amplitudes(const PureQubit& state, const TailPiece& piece, cplx pump,
                              long n) {
    if (pump == cplx{}) {
        throw std::invalid_argument("collapse: pump amplitude must be non-zero");
    }
    const BranchTerm t0 = collapse_term(state.c0, piece.alpha0, pump, n);
    const BranchTerm t1 = collapse_term(state.c1, piece.alpha1, pump, n);
    const double ref = std::max(t0.log_mod, t1.log_mod);
    if (!std::isfinite(ref)) {
        throw std::runtime_error("collapse: count impossible for both branches");
    }
    return fix_gauge(std::polar(std::exp(t0.log_mod - ref), t0.phase),
                     std::polar(std::exp(t1.log_mod - ref), t1.phase));
}

CollapseOutcome exact_homodyne_collapse(const PureQubit& state, const TailPiece& piece,
                                        cplx pump, Philox4x32& rng, std::optional<long> n_max) {
    const CountRange range = collapse_count_range(piece, pump);
    if (n_max && *n_max < range.hi) {
        throw std::invalid_argument("exact_homodyne_collapse: truncation overflow, N_max = " +
                                    std::to_string(*n_max) + " too small; use at least " +
                                    std::to_string(range.hi));
    }
    const double p0 = std::norm(state.c0) / (std::norm(state.c0) + std::norm(state.c1));
    const cplx tail = rng.uniform() < p0 ? piece.alpha0 : piece.alpha1;
    const double mean = std::norm(pump + tail);

    // Inversion over the truncated window.
    std::vector<double> pmf;
    pmf.reserve(static_cast<std::size_t>(range.hi - range.lo + 1));
    double total = 0.0;
    for (long n = range.lo; n <= range.hi; ++n) {
        pmf.push_back(std::exp(log_poisson_pmf(mean, n)));
        total += pmf.back();
    }
    const double target = rng.uniform() * total;
    double cum = 0.0;
    long n = range.hi;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
        cum += pmf[k];
        if (cum >= target) {
            n = range.lo + static_cast<long>(k);
            break;
        }
    }
    const double largest_tail = std::max(std::abs(piece.alpha0), std::abs(piece.alpha1));
    return {n, collapse_amplitudes(state, piece, pump, n), std::abs(pump) < 10.0 * largest_tail};
}

PureQubit gaussian_collapse_reference(const PureQubit& state, const TailPiece& piece,
                                      double phi_a, double n, double sigma) {
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("gaussian_collapse_reference: sigma must be positive");
    }
    const cplx pump = std::polar(sigma, phi_a);
    const double mean0 = sigma * sigma + 2.0 * (std::conj(pump) * piece.alpha0).real();
    const double mean1 = sigma * sigma + 2.0 * (std::conj(pump) * piece.alpha1).real();
    const double center = (mean0 + mean1) / 2.0;
    const double width = 4.0 * sigma * sigma;
    const double dphi = -((n - center) / sigma) *
                            ((piece.alpha1 - piece.alpha0) * std::polar(1.0, -phi_a)).imag() +
                        (std::conj(piece.alpha1) * piece.alpha0).imag();
    const cplx c0 = state.c0 * std::exp(-(n - mean0) * (n - mean0) / width);
    const cplx c1 =
        state.c1 * std::exp(-(n - mean1) * (n - mean1) / width) * std::polar(1.0, -dphi);
    return fix_gauge(c0, c1);
}

}  // namespace cqb

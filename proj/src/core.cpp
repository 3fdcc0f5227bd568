#include "cqb/core.hpp"

#include <cmath>
#include <sstream>

namespace cqb {

namespace {

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

void check_rate(std::vector<Violation>& out, const char* field, double value) {
    if (!std::isfinite(value)) {
        out.push_back({field, "must be finite"});
    }
}

}  // namespace

std::vector<Violation> validate(const SystemParams& p) {
    std::vector<Violation> out;
    check_rate(out, "detuning", p.detuning);
    check_rate(out, "chi", p.chi);
    if (!(p.kappa > 0.0) || !std::isfinite(p.kappa)) {
        out.push_back({"kappa", "must be positive and finite"});
    }
    if (!(p.kappa_out >= 0.0)) {
        out.push_back({"kappa_out", "must be non-negative"});
    } else if (p.kappa_out > p.kappa) {
        out.push_back({"kappa_out", "kappa_out exceeds kappa"});
    }
    if (!(p.kappa_col >= 0.0)) {
        out.push_back({"kappa_col", "must be non-negative"});
    } else if (p.kappa_col > p.kappa_out) {
        out.push_back({"kappa_col", "kappa_col exceeds kappa_out"});
    }
    for (const auto& piece : p.drive.pieces()) {
        if (!finite(piece.value) || !std::isfinite(piece.start)) {
            out.push_back({"drive", "drive envelope must be finite on every segment"});
            break;
        }
    }
    return out;
}

std::vector<Violation> validate(const MeasurementSettings& s) {
    std::vector<Violation> out;
    if (!(s.spectral_density > 0.0) || !std::isfinite(s.spectral_density)) {
        out.push_back({"spectral_density", "must be positive and finite"});
    }
    if (!(s.eta_amp >= 0.0 && s.eta_amp <= 1.0)) {
        out.push_back({"eta_amp", "must lie in [0, 1]"});
    }
    if (!(s.gamma_int >= 0.0) || !std::isfinite(s.gamma_int)) {
        out.push_back({"gamma_int", "must be non-negative and finite"});
    }
    if (!std::isfinite(s.signal_offset)) {
        out.push_back({"signal_offset", "must be finite"});
    }
    for (const auto& piece : s.amplified_phase.pieces()) {
        if (!std::isfinite(piece.value) || !std::isfinite(piece.start)) {
            out.push_back({"amplified_phase", "must be finite on every segment"});
            break;
        }
    }
    return out;
}

void require_valid(const SystemParams& params, const MeasurementSettings& settings) {
    auto violations = validate(params);
    auto more = validate(settings);
    violations.insert(violations.end(), more.begin(), more.end());
    if (violations.empty()) {
        return;
    }
    std::ostringstream msg;
    for (std::size_t k = 0; k < violations.size(); ++k) {
        if (k) msg << "; ";
        msg << violations[k].field << ": " << violations[k].message;
    }
    throw ConfigError(msg.str());
}

double total_efficiency(const SystemParams& params, const MeasurementSettings& settings) {
    return params.kappa_col / params.kappa * settings.eta_amp;
}

HybridState::HybridState(double rho00, double rho11, cplx rho10, cplx alpha0, cplx alpha1,
                         double phase0, double phase1)
    : rho00_(rho00),
      rho11_(rho11),
      rho10_(rho10),
      alpha0_(alpha0),
      alpha1_(alpha1),
      phase0_(phase0),
      phase1_(phase1) {
    if (!std::isfinite(rho00) || !std::isfinite(rho11) || !finite(rho10) || !finite(alpha0) ||
        !finite(alpha1) || !std::isfinite(phase0) || !std::isfinite(phase1)) {
        throw std::invalid_argument("HybridState: non-finite component");
    }
    if (rho00 < 0.0 || rho00 > 1.0 || rho11 < 0.0 || rho11 > 1.0) {
        throw std::invalid_argument("HybridState: diagonal element outside [0, 1]");
    }
    if (std::abs(rho00 + rho11 - 1.0) > kTolerance) {
        throw std::invalid_argument("HybridState: rho00 + rho11 differs from 1");
    }
    if (std::norm(rho10) > rho00 * rho11 + kTolerance) {
        throw std::invalid_argument("HybridState: |rho10|^2 exceeds rho00*rho11");
    }
}

HybridState HybridState::pure(cplx c0, cplx c1, cplx alpha0, cplx alpha1) {
    const double norm = std::norm(c0) + std::norm(c1);
    if (std::abs(norm - 1.0) > kTolerance) {
        throw std::invalid_argument("HybridState::pure: |c0|^2 + |c1|^2 differs from 1");
    }
    return HybridState(std::norm(c0), std::norm(c1), c1 * std::conj(c0), alpha0, alpha1);
}

double HybridState::purity() const {
    return rho00_ * rho00_ + rho11_ * rho11_ + 2.0 * std::norm(rho10_);
}

HybridState HybridState::with_qubit(double rho00, double rho11, cplx rho10) const {
    return HybridState(rho00, rho11, rho10, alpha0_, alpha1_, phase0_, phase1_);
}

HybridState HybridState::with_fields(cplx alpha0, cplx alpha1, double phase0,
                                     double phase1) const {
    return HybridState(rho00_, rho11_, rho10_, alpha0, alpha1, phase0, phase1);
}

double record_variance(double spectral_density, double dt) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("record_variance: dt must be positive");
    }
    return spectral_density / (2.0 * dt);
}

}  // namespace cqb

#include "cqb/vacuum.hpp"

#include <algorithm>
#include <cmath>

#include "cqb/engine.hpp"
#include "cqb/field_dynamics.hpp"

namespace cqb {

namespace {

// (1 - e^{-z}) / z.
cplx relaxation_factor(cplx z) {
    if (std::abs(z) < 1e-3) {
        return 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0;
    }
    return (1.0 - std::exp(-z)) / z;
}

// Exact step of d(delta_alpha)/dt = -lambda delta_alpha + u with u constant over h.
class FluctuationStepper {
   public:
    FluctuationStepper(cplx lambda, double h)
        : lambda_(lambda),
          h_(h),
          decay_(std::exp(-lambda * h)),
          relax_(relaxation_factor(lambda * h)) {}

    // Advances x and returns its integral over the step.
    cplx step(cplx& x, cplx u) const {
        const cplx integral = x * h_ * relax_ + u / lambda_ * h_ * (1.0 - relax_);
        x = x * decay_ + u * h_ * relax_;
        return integral;
    }

   private:
    cplx lambda_;
    double h_;
    cplx decay_;
    cplx relax_;
};

cplx vacuum_sample(Philox4x32& rng, double sd) {
    const double re = rng.normal();
    const double im = rng.normal();
    return {sd * re, sd * im};
}

void require_step(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw ConfigError("h: step must be positive");
    }
}

}  // namespace

VacuumPath generate_vacuum_path(double duration, double h, Philox4x32& rng) {
    require_step(h);
    if (!(duration >= 0.0)) {
        throw ConfigError("duration: must be non-negative");
    }
    const auto n = static_cast<std::size_t>(std::llround(duration / h));
    const double sd = std::sqrt(1.0 / (4.0 * h));
    VacuumPath path{h, {}};
    path.v.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        path.v.push_back(vacuum_sample(rng, sd));
    }
    return path;
}

cplx bare_decay_constant(const SystemParams& params) {
    return {params.kappa / 2.0, params.detuning};
}

cplx bare_steady_state(const SystemParams& params, cplx drive) {
    return -cplx{0.0, 1.0} * drive / bare_decay_constant(params);
}

FieldFluctuation field_fluctuation(const VacuumPath& path, const SystemParams& params,
                                   cplx initial) {
    require_step(path.h);
    const FluctuationStepper stepper(bare_decay_constant(params), path.h);
    const double coupling = std::sqrt(params.kappa);
    FieldFluctuation out;
    out.value.reserve(path.v.size() + 1);
    out.integral.reserve(path.v.size());
    cplx x = initial;
    out.value.push_back(x);
    for (cplx v : path.v) {
        out.integral.push_back(stepper.step(x, coupling * v));
        out.value.push_back(x);
    }
    return out;
}

CorrelatorResult photon_correlator(const SystemParams& params, cplx alpha_st,
                                   std::size_t n_paths, std::span<const double> lags,
                                   std::uint64_t seed, const CorrelatorOptions& options) {
    require_step(options.h);
    if (n_paths < 2) {
        throw ConfigError("n_paths: at least two paths are required");
    }
    const double h = options.h;
    const double kappa = params.kappa;
    std::vector<std::size_t> lag_steps;
    for (double lag : lags) {
        if (!(lag >= 0.0)) {
            throw ConfigError("lags: must be non-negative");
        }
        lag_steps.push_back(static_cast<std::size_t>(std::llround(lag / h)));
    }
    const std::size_t max_lag = lag_steps.empty() ? 0 : *std::max_element(lag_steps.begin(), lag_steps.end());
    const auto burn = static_cast<std::size_t>(std::llround(options.burn_in / kappa / h));
    const auto window = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(options.window / kappa / h)));
    const FluctuationStepper stepper(bare_decay_constant(params), h);
    const double coupling = std::sqrt(kappa);
    const double sd = std::sqrt(1.0 / (4.0 * h));

    std::vector<std::vector<double>> per_path(n_paths, std::vector<double>(lag_steps.size()));
    parallel_for(n_paths, options.threads, [&](std::size_t p) {
        Philox4x32 rng(seed + p);
        cplx x{};
        for (std::size_t k = 0; k < burn; ++k) {
            stepper.step(x, coupling * vacuum_sample(rng, sd));
        }
        std::vector<double> dn(window + max_lag);
        for (double& value : dn) {
            value = 2.0 * (std::conj(alpha_st) * x).real();
            stepper.step(x, coupling * vacuum_sample(rng, sd));
        }
        for (std::size_t l = 0; l < lag_steps.size(); ++l) {
            double sum = 0.0;
            for (std::size_t k = 0; k < window; ++k) sum += dn[k] * dn[k + lag_steps[l]];
            per_path[p][l] = sum / static_cast<double>(window);
        }
    });

    CorrelatorResult out;
    out.lags.assign(lags.begin(), lags.end());
    const double n = static_cast<double>(n_paths);
    for (std::size_t l = 0; l < lag_steps.size(); ++l) {
        double s1 = 0.0, s2 = 0.0;
        for (const auto& row : per_path) {
            s1 += row[l];
            s2 += row[l] * row[l];
        }
        const double mean = s1 / n;
        const double var = std::max(0.0, (s2 - n * mean * mean) / (n - 1.0));
        out.correlator.push_back({mean, std::sqrt(var / n)});
        const double lag = out.lags[l];
        out.predicted.push_back(std::norm(alpha_st) * std::cos(params.detuning * lag) *
                                std::exp(-kappa * lag / 2.0));
    }
    out.decay_rate = fit_decay_rate(out.lags, out.correlator, params.detuning);
    return out;
}

Estimate fit_decay_rate(std::span<const double> lags, std::span<const Estimate> correlator,
                        double detuning) {
    double sw = 0.0, sx = 0.0, sy = 0.0;
    std::vector<double> xs, ys, ws;
    for (std::size_t l = 0; l < lags.size(); ++l) {
        const double c = std::cos(detuning * lags[l]);
        const double ratio = correlator[l].value / c;
        const double se = correlator[l].se / std::abs(c);
        if (std::abs(c) <= 0.3 || !(ratio > 3.0 * se) || !(se > 0.0)) {
            continue;
        }
        const double w = (ratio / se) * (ratio / se);
        xs.push_back(lags[l]);
        ys.push_back(std::log(ratio));
        ws.push_back(w);
        sw += w;
        sx += w * lags[l];
        sy += w * std::log(ratio);
    }
    if (xs.size() < 2) {
        throw std::runtime_error("fit_decay_rate: fewer than two usable lags");
    }
    const double xm = sx / sw;
    const double ym = sy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        sxx += ws[k] * (xs[k] - xm) * (xs[k] - xm);
        sxy += ws[k] * (xs[k] - xm) * (ys[k] - ym);
    }
    return {-sxy / sxx, std::sqrt(1.0 / sxx)};
}

BackactionResult backaction_correlation(const SystemParams& params, cplx alpha_st,
                                        const MeasurementSettings& settings,
                                        std::size_t n_paths, std::uint64_t seed,
                                        const BackactionOptions& options) {
    require_valid(params, settings);
    require_step(options.h);
    const double kappa = params.kappa;
    if (!(options.tau * kappa >= 10.0)) {
        throw ConfigError("tau: window must be at least 10/kappa");
    }
    if (!(params.kappa_out > 0.0)) {
        throw ConfigError("kappa_out: no output coupling");
    }
    if (settings.eta_amp != 1.0) {
        throw ConfigError("eta_amp: vacuum-noise model assumes an ideal amplifier");
    }
    if (n_paths < 3) {
        throw ConfigError("n_paths: at least three paths are required");
    }
    const double h = options.h;
    const auto steps = static_cast<std::size_t>(std::llround(options.tau / h));
    const double tau = static_cast<double>(steps) * h;
    const double s = settings.spectral_density;

    const cplx drive = params.drive.at(0.0);
    const HybridState steady = HybridState::pure(cplx{1.0, 0.0}, cplx{}, steady_state_field(params, Branch::zero, drive),
                                                 steady_state_field(params, Branch::one, drive));
    MeasurementSettings probe = settings;
    probe.mode = Mode::phase_sensitive;
    const DerivedQuantities d = derived_quantities(steady, params, probe, 0.0);
    const double phi_opt = d.phi_opt;
    const cplx orthogonal = std::polar(1.0, -(phi_opt + kPi / 2.0));
    const cplx informational = std::polar(1.0, -phi_opt);

    const FluctuationStepper stepper(bare_decay_constant(params), h);
    const double out_coupling = std::sqrt(params.kappa_out);
    const double other_coupling = std::sqrt(kappa - params.kappa_out);
    const double kept = std::sqrt(params.kappa_col / params.kappa_out);
    const double lost = std::sqrt(1.0 - params.kappa_col / params.kappa_out);
    const double sd = std::sqrt(1.0 / (4.0 * h));
    const double to_record = std::sqrt(2.0 * s) / tau;

    std::vector<double> stark(n_paths), record(n_paths), record_info(n_paths);
    parallel_for(n_paths, options.threads, [&](std::size_t p) {
        Philox4x32 rng(seed + p);
        cplx x = vacuum_sample(rng, 0.5);  // stationary: variance 1/4 per quadrature
        cplx field_integral{}, v_integral{}, added_integral{};
        for (std::size_t k = 0; k < steps; ++k) {
            const cplx v = vacuum_sample(rng, sd);
            cplx u = out_coupling * v;
            if (other_coupling > 0.0) {
                u += other_coupling * vacuum_sample(rng, sd);
            }
            if (lost > 0.0) {
                added_integral += vacuum_sample(rng, sd) * h;
            }
            field_integral += stepper.step(x, u);
            v_integral += v * h;
        }
        const cplx out = kept * (out_coupling * field_integral - v_integral) + lost * added_integral;
        stark[p] = 4.0 * params.chi * (std::conj(alpha_st) * field_integral).real();
        record[p] = (out * orthogonal).real() * to_record;
        record_info[p] = (out * informational).real() * to_record;
    });

    BackactionResult res;
    res.slope = ols_slope(record, stark);
    res.informational = ols_slope(record_info, stark);
    res.predicted = d.delta_i_max / (2.0 * record_variance(s, tau));
    res.efficiency = params.kappa_col / kappa;
    return res;
}

BadCavityComparison bad_cavity_comparison(const SystemParams& params, double t) {
    const cplx drive = params.drive.at(t);
    const cplx a0 = steady_state_field(params, Branch::zero, drive);
    const cplx a1 = steady_state_field(params, Branch::one, drive);
    const cplx overlap = std::conj(a1) * a0;
    const double n = (std::norm(a0) + std::norm(a1)) / 2.0;
    const double chi = params.chi;
    const double kappa = params.kappa;
    const double detuning_ratio = 2.0 * params.detuning / kappa;
    return {n, 2.0 * chi * overlap.imag(),
            8.0 * chi * chi * n / kappa / (1.0 + detuning_ratio * detuning_ratio),
            2.0 * chi * overlap.real(), 2.0 * chi * n};
}

Estimate ols_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 3) {
        throw std::invalid_argument("ols_slope: need at least three paired values");
    }
    const double n = static_cast<double>(x.size());
    double xm = 0.0, ym = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        xm += x[k];
        ym += y[k];
    }
    xm /= n;
    ym /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - xm) * (x[k] - xm);
        sxy += (x[k] - xm) * (y[k] - ym);
    }
    const double slope = sxy / sxx;
    double rss = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double r = y[k] - ym - slope * (x[k] - xm);
        rss += r * r;
    }
    return {slope, std::sqrt(rss / (n - 2.0) / sxx)};
}

}  // namespace cqb

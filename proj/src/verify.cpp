#include "cqb/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cqb/bayes_update.hpp"
#include "cqb/coherent.hpp"
#include "cqb/field_dynamics.hpp"
#include "cqb/io.hpp"
#include "cqb/sde.hpp"

namespace cqb {

namespace {

cplx complex_normal(Philox4x32& rng, double scale = 1.0) {
    const double re = rng.normal();
    const double im = rng.normal();
    return {scale * re, scale * im};
}

double uniform(Philox4x32& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

double wrap(double angle) { return std::remainder(angle, 2.0 * kPi); }

PureQubit random_qubit(Philox4x32& rng) {
    const cplx a = complex_normal(rng);
    const cplx b = complex_normal(rng);
    const double n = std::sqrt(std::norm(a) + std::norm(b));
    return {a / n, b / n};
}

HybridState random_mixed(Philox4x32& rng, cplx alpha0, cplx alpha1) {
    const double rho11 = uniform(rng, 0.05, 0.95);
    const double bound = std::sqrt(rho11 * (1.0 - rho11));
    const cplx rho10 = std::polar(bound * rng.uniform(), uniform(rng, -kPi, kPi));
    return {1.0 - rho11, rho11, rho10, alpha0, alpha1};
}

double state_distance(const HybridState& a, const HybridState& b) {
    return std::max({std::abs(a.rho00() - b.rho00()), std::abs(a.rho11() - b.rho11()),
                     std::abs(a.rho10() - b.rho10()), std::abs(a.alpha0() - b.alpha0()),
                     std::abs(a.alpha1() - b.alpha1())});
}

double fitted_order(const std::vector<double>& dts, const std::vector<double>& errors) {
    const double n = static_cast<double>(dts.size());
    double xm = 0.0, ym = 0.0;
    for (std::size_t k = 0; k < dts.size(); ++k) {
        xm += std::log(dts[k]);
        ym += std::log(errors[k]);
    }
    xm /= n;
    ym /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < dts.size(); ++k) {
        const double x = std::log(dts[k]) - xm;
        sxx += x * x;
        sxy += x * (std::log(errors[k]) - ym);
    }
    return sxy / sxx;
}

std::size_t scaled(double base, double scale, std::size_t floor) {
    return std::max(floor, static_cast<std::size_t>(std::llround(base * scale)));
}

}  // namespace

double purity_violation(const RunConfig& config, std::uint64_t seed) {
    const TrajectoryRecord rec = run_trajectory(config, seed);
    double worst = 0.0;
    for (const auto& s : rec.states) {
        worst = std::max(worst, std::abs(std::norm(s.rho10()) - s.rho00() * s.rho11()));
    }
    return worst;
}

EnsembleConsistency ensemble_consistency(const RunConfig& config, std::size_t n_traj,
                                         std::uint64_t seed, unsigned threads,
                                         std::size_t checkpoints) {
    const EnsembleSummary summary = run_ensemble(config, n_traj, seed, threads);
    const auto chain = ensemble_chain(config);
    EnsembleConsistency out{};
    out.checkpoints = checkpoints;
    out.rho11_drift = std::abs(summary.rho11_mean.back() - config.initial.rho11());
    out.drift_limit = 5.0 * 0.5 / std::sqrt(static_cast<double>(n_traj));
    const std::size_t last = summary.times.size() - 1;
    for (std::size_t j = 1; j <= checkpoints; ++j) {
        const std::size_t k = (j * last) / checkpoints;
        const cplx expected = chain[k].rho10();
        const double dre = std::abs(summary.rho10_re_mean[k] - expected.real());
        const double dim = std::abs(summary.rho10_im_mean[k] - expected.imag());
        const double zre = summary.rho10_re_se[k] > 0.0 ? dre / summary.rho10_re_se[k] : (dre > 1e-12 ? 1e300 : 0.0);
        const double zim = summary.rho10_im_se[k] > 0.0 ? dim / summary.rho10_im_se[k] : (dim > 1e-12 ? 1e300 : 0.0);
        out.max_z = std::max({out.max_z, zre, zim});
    }
    return out;
}

CollapseAgreement gaussian_vs_exact(std::size_t samples, double pump, double kappa_dt,
                                    std::uint64_t seed) {
    Philox4x32 rng(seed);
    CollapseAgreement out{};
    out.samples = samples;
    SystemParams params;
    params.kappa = 1.0;
    params.drive = Schedule<cplx>(cplx{});
    for (std::size_t k = 0; k < samples; ++k) {
        const PureQubit q = random_qubit(rng);
        const cplx a0 = complex_normal(rng, 1.5);
        const cplx a1 = complex_normal(rng, 1.5);
        const double phi_a = uniform(rng, 0.0, 2.0 * kPi);
        const TailPiece piece = tail_piece(a0, a1, params.kappa, kappa_dt);
        const cplx p = std::polar(pump, phi_a);
        const CollapseOutcome exact = exact_homodyne_collapse(q, piece, p, rng);
        const PureQubit approx =
            gaussian_collapse_reference(q, piece, phi_a, static_cast<double>(exact.n), pump);

        const double m0 = std::abs(exact.state.c0), m1 = std::abs(exact.state.c1);
        out.modulus_rel_error = std::max({out.modulus_rel_error, std::abs(std::abs(approx.c0) - m0) / m0,
                                          std::abs(std::abs(approx.c1) - m1) / m1});
        const double exact_phase = std::arg(exact.state.c1 * std::conj(exact.state.c0));
        const double approx_phase = std::arg(approx.c1 * std::conj(approx.c0));
        out.phase_error = std::max(out.phase_error, std::abs(wrap(approx_phase - exact_phase)));

        // Same collapse through the finite-step update, with the count mapped to I~.
        MeasurementSettings settings;
        settings.amplified_phase = Schedule<double>(phi_a);
        const HybridState before = HybridState::pure(q.c0, q.c1, a0, a1);
        const DerivedQuantities d = derived_quantities(before, params, settings, 0.0);
        const double center =
            (std::norm(p + piece.alpha0) + std::norm(p + piece.alpha1)) / 2.0;
        MeasurementSample sample;
        sample.dt = kappa_dt / params.kappa;
        sample.t_end = sample.dt;
        sample.i_bar = (static_cast<double>(exact.n) - center) / (2.0 * pump) *
                       std::sqrt(2.0 * settings.spectral_density / sample.dt);
        const HybridState after = update_phase_sensitive(before, sample, d);
        const cplx rho10 = exact.state.c1 * std::conj(exact.state.c0);
        out.bayes_rho10_error =
            std::max(out.bayes_rho10_error, std::abs(after.rho10() - rho10) / std::abs(rho10));
        out.bayes_rho11_error = std::max(
            out.bayes_rho11_error, std::abs(after.rho11() - m1 * m1) / (m1 * m1));
    }
    return out;
}

double causality_identity_error(std::size_t samples, std::uint64_t seed) {
    Philox4x32 rng(seed);
    double worst = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        SystemParams params;
        params.kappa = uniform(rng, 0.5, 2.0);
        params.kappa_out = params.kappa;
        params.kappa_col = params.kappa * uniform(rng, 0.2, 1.0);
        MeasurementSettings settings;
        settings.spectral_density = uniform(rng, 0.5, 2.0);
        settings.eta_amp = uniform(rng, 0.2, 1.0);
        settings.amplified_phase = Schedule<double>(uniform(rng, -kPi, kPi));
        const HybridState s = HybridState::pure(cplx{1.0, 0.0}, cplx{}, complex_normal(rng),
                                                complex_normal(rng));
        const DerivedQuantities d = derived_quantities(s, params, settings, 0.0);
        const double sd = settings.spectral_density;
        const double lhs = d.delta_i * d.delta_i / (4.0 * sd) +
                           d.back_action_k * d.back_action_k * sd / 4.0;
        const double rhs = d.delta_i_max * d.delta_i_max / (4.0 * sd);
        worst = std::max(worst, std::abs(lhs - rhs) / rhs);
    }
    return worst;
}

SumRuleErrors sum_rule_errors(std::size_t samples, std::uint64_t seed) {
    Philox4x32 rng(seed);
    SumRuleErrors out{};
    for (std::size_t k = 0; k < samples; ++k) {
        SystemParams params;
        params.chi = uniform(rng, -1.0, 1.0);
        params.kappa = uniform(rng, 0.5, 2.0);
        params.kappa_out = params.kappa_col = params.kappa;
        params.detuning = uniform(rng, -1.0, 1.0);
        params.drive = Schedule<cplx>(complex_normal(rng));
        const HybridState start =
            HybridState::pure(cplx{std::sqrt(0.5), 0.0}, cplx{std::sqrt(0.5), 0.0},
                              complex_normal(rng, 0.5), complex_normal(rng, 0.5));
        const HybridState s = advance_fields(start, params, 0.0, uniform(rng, 0.01, 3.0) / params.kappa);
        const DerivedQuantities d = derived_quantities(s, params, MeasurementSettings{}, 0.0);
        const cplx overlap = std::conj(s.alpha1()) * s.alpha0();
        out.dephasing = std::max(out.dephasing,
                                 std::abs(d.gamma_d + d.delta_gamma - 2.0 * params.chi * overlap.imag()));
        out.stark = std::max(out.stark,
                             std::abs(d.stark_s + d.stark_3 - 2.0 * params.chi * overlap.real()));
    }
    return out;
}

double large_step_error(std::size_t n_sub, std::size_t cases, std::uint64_t seed) {
    Philox4x32 rng(seed);
    double worst = 0.0;
    for (std::size_t c = 0; c < cases; ++c) {
        for (Mode mode : {Mode::phase_sensitive, Mode::phase_preserving}) {
            SystemParams params;
            params.kappa_col = uniform(rng, 0.3, 1.0);
            MeasurementSettings settings;
            settings.mode = mode;
            settings.eta_amp = uniform(rng, 0.5, 1.0);
            settings.gamma_int = uniform(rng, 0.0, 0.3);
            settings.amplified_phase = Schedule<double>(uniform(rng, -kPi, kPi));
            const cplx a0 = complex_normal(rng, 0.7), a1 = complex_normal(rng, 0.7);
            const HybridState start = random_mixed(rng, a0, a1);
            const DerivedQuantities d = derived_quantities(start, params, settings, 0.0);
            const double tau = uniform(rng, 0.05, 0.5);
            const double h = tau / static_cast<double>(n_sub);
            const double sd = std::sqrt(record_variance(settings.spectral_density, h));

            HybridState composed = start;
            double i_sum = 0.0, q_sum = 0.0;
            for (std::size_t k = 0; k < n_sub; ++k) {
                MeasurementSample s;
                s.dt = h;
                s.t_end = h * static_cast<double>(k + 1);
                s.i_bar = d.delta_i * uniform(rng, -0.5, 0.5) + sd * rng.normal();
                if (mode == Mode::phase_preserving) s.q_bar = sd * rng.normal();
                i_sum += s.i_bar * h;
                q_sum += s.q_bar.value_or(0.0) * h;
                composed = update(composed, s, d);
            }
            MeasurementSample aggregate;
            aggregate.dt = tau;
            aggregate.t_end = tau;
            aggregate.i_bar = i_sum / tau;
            if (mode == Mode::phase_preserving) aggregate.q_bar = q_sum / tau;
            worst = std::max(worst, state_distance(update(start, aggregate, d), composed));
        }
    }
    return worst;
}

SdeConvergence sde_convergence(Mode mode, std::size_t paths, std::uint64_t seed,
                               unsigned threads) {
    SystemParams params;
    MeasurementSettings settings;
    settings.mode = mode;
    settings.eta_amp = 0.8;
    const cplx drive = params.drive.at(0.0);
    const cplx a0 = steady_state_field(params, Branch::zero, drive);
    const cplx a1 = steady_state_field(params, Branch::one, drive);
    const HybridState start =
        HybridState::pure(cplx{std::sqrt(0.5), 0.0}, cplx{std::sqrt(0.5), 0.0}, a0, a1);
    settings.amplified_phase = Schedule<double>(std::arg(a1 - a0) + kPi / 4.0);
    const DerivedQuantities d = derived_quantities(start, params, settings, 0.0);

    const double t_end = 1.0;
    const std::vector<std::size_t> ratios{32, 16, 8};  // coarse dt / fine dt
    const double fine = 2.5e-3 / 8.0;
    const auto fine_steps = static_cast<std::size_t>(std::llround(t_end / fine));
    const bool preserving = mode == Mode::phase_preserving;
    const double fine_sd = std::sqrt(record_variance(d.spectral_density, fine));

    // per path, per dt: squared errors of the two calculi
    std::vector<std::vector<double>> err_s(paths, std::vector<double>(ratios.size()));
    std::vector<std::vector<double>> err_i(paths, std::vector<double>(ratios.size()));
    parallel_for(paths, threads, [&](std::size_t p) {
        Philox4x32 rng(seed + p);
        std::vector<double> xi(fine_steps), xq(fine_steps, 0.0);
        for (std::size_t k = 0; k < fine_steps; ++k) {
            xi[k] = fine_sd * rng.normal();
            if (preserving) xq[k] = fine_sd * rng.normal();
        }
        HybridState ref = start;
        for (std::size_t k = 0; k < fine_steps; ++k) {
            MeasurementSample s;
            s.dt = fine;
            s.t_end = fine * static_cast<double>(k + 1);
            s.i_bar = d.delta_i / 2.0 * (ref.rho11() - ref.rho00()) + xi[k];
            if (preserving) s.q_bar = xq[k];
            ref = update(ref, s, d);
        }
        for (std::size_t r = 0; r < ratios.size(); ++r) {
            const std::size_t m = ratios[r];
            const double dt = fine * static_cast<double>(m);
            HybridState strat = start, ito = start;
            for (std::size_t k = 0; k + m <= fine_steps; k += m) {
                double ni = 0.0, nq = 0.0;
                for (std::size_t j = k; j < k + m; ++j) {
                    ni += xi[j];
                    nq += xq[j];
                }
                ni /= static_cast<double>(m);
                nq /= static_cast<double>(m);
                if (preserving) {
                    strat = strat_step_pp(strat, ni, nq, d, dt);
                    ito = ito_step_pp(ito, ni, nq, d, dt);
                } else {
                    strat = strat_step_ps(strat, ni, d, dt);
                    ito = ito_step_ps(ito, ni, d, dt);
                }
            }
            auto sq = [&](const HybridState& s) {
                return std::pow(s.rho11() - ref.rho11(), 2) + std::norm(s.rho10() - ref.rho10());
            };
            err_s[p][r] = sq(strat);
            err_i[p][r] = sq(ito);
        }
    });

    SdeConvergence out;
    for (std::size_t r = 0; r < ratios.size(); ++r) {
        double ss = 0.0, si = 0.0;
        for (std::size_t p = 0; p < paths; ++p) {
            ss += err_s[p][r];
            si += err_i[p][r];
        }
        const double dt = fine * static_cast<double>(ratios[r]);
        out.stratonovich.dts.push_back(dt);
        out.ito.dts.push_back(dt);
        out.stratonovich.errors.push_back(std::sqrt(ss / static_cast<double>(paths)));
        out.ito.errors.push_back(std::sqrt(si / static_cast<double>(paths)));
    }
    out.stratonovich.order = fitted_order(out.stratonovich.dts, out.stratonovich.errors);
    out.ito.order = fitted_order(out.ito.dts, out.ito.errors);
    return out;
}

TwoGaussianStats two_gaussian_stats(std::size_t draws, std::size_t records,
                                    std::size_t collapse_runs, std::uint64_t seed,
                                    unsigned threads) {
    RunConfig cfg;
    cfg.initial = HybridState::pure(cplx{std::sqrt(0.3), 0.0}, cplx{std::sqrt(0.7), 0.0}, cplx{}, cplx{});
    cfg.t_end = 5.0;
    const double rho11 = cfg.initial.rho11();
    const double response = response_integral(cfg);
    TwoGaussianStats out{};
    out.response = response;

    struct Split {
        double plus_rel, minus_rel, weight_z, variance_rel;
    };
    auto split = [&](const std::vector<double>& r) {
        double sp = 0.0, sn = 0.0, sp2 = 0.0, sn2 = 0.0;
        std::size_t np = 0;
        for (double x : r) {
            if (x > 0.0) {
                sp += x;
                sp2 += x * x;
                ++np;
            } else {
                sn += x;
                sn2 += x * x;
            }
        }
        const double n = static_cast<double>(r.size());
        const double npd = static_cast<double>(np), nnd = n - npd;
        const double mp = sp / npd, mn = sn / nnd;
        const double vp = sp2 / npd - mp * mp, vn = sn2 / nnd - mn * mn;
        return Split{std::abs(mp / response - 1.0), std::abs(mn / -response - 1.0),
                     std::abs(npd / n - rho11) / std::sqrt(rho11 * (1.0 - rho11) / n),
                     std::max(std::abs(vp / (2.0 * response) - 1.0),
                              std::abs(vn / (2.0 * response) - 1.0))};
    };

    Philox4x32 rng(seed);
    std::vector<double> direct(draws);
    for (double& x : direct) x = sample_r_parallel(cfg.initial, response, rng);
    const Split d = split(direct);
    out.mean_plus_rel = d.plus_rel;
    out.mean_minus_rel = d.minus_rel;
    out.weight_z = d.weight_z;
    out.variance_rel = d.variance_rel;

    std::vector<double> from_records(records);
    parallel_for(records, threads, [&](std::size_t k) {
        const TrajectoryRecord rec = run_trajectory(cfg, seed + 1 + k);
        from_records[k] = integrate_long(cfg.initial, cfg, rec.samples).r_parallel;
    });
    const Split rs = split(from_records);
    out.record_mean_rel = std::max(rs.plus_rel, rs.minus_rel);
    out.record_weight_z = rs.weight_z;

    RunConfig pp = cfg;
    pp.measurement.mode = Mode::phase_preserving;
    const double response_pp = response_integral(pp);
    double q2 = 0.0;
    for (std::size_t k = 0; k < draws; ++k) {
        const double x = sample_r_q(response_pp, rng);
        q2 += x * x;
    }
    out.q_variance_rel = std::abs(q2 / static_cast<double>(draws) / (response_pp / 2.0) - 1.0);

    RunConfig long_run = cfg;
    long_run.t_end = 10.0;
    const EnsembleSummary summary = run_ensemble(long_run, collapse_runs, seed + records + 1, threads);
    const std::size_t bins = summary.histogram_counts.size();
    double upper = 0.0, middle = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        const double lo = summary.histogram_edges[b];
        const double hi = summary.histogram_edges[b + 1];
        const auto count = static_cast<double>(summary.histogram_counts[b]);
        if (lo >= 0.5) upper += count;
        if (lo >= 0.05 - 1e-12 && hi <= 0.95 + 1e-12) middle += count;
    }
    const double n = static_cast<double>(collapse_runs);
    out.collapse_weight_z = std::abs(upper / n - rho11) / std::sqrt(rho11 * (1.0 - rho11) / n);
    out.collapse_unresolved = middle / n;
    return out;
}

double filter_round_trip_error(std::uint64_t seed) {
    double worst = 0.0;
    for (Mode mode : {Mode::phase_sensitive, Mode::phase_preserving}) {
        RunConfig cfg;
        cfg.measurement.mode = mode;
        cfg.measurement.signal_offset = 0.7;
        cfg.measurement.eta_amp = 0.9;
        cfg.system.drive = Schedule<cplx>({{0.0, cplx{1.0, 0.0}}, {2.5, cplx{0.5, 0.5}}});
        if (mode == Mode::phase_sensitive) {
            cfg.measurement.amplified_phase = Schedule<double>({{0.0, 0.3}, {1.7, 1.0}});
        }
        const TrajectoryRecord rec = run_trajectory(cfg, seed);
        std::stringstream csv;
        write_record_csv(csv, rec.samples, cfg.measurement.signal_offset);
        const auto raw = read_record_csv(csv, cfg.t_start);
        const FilterOutput out = filter_record(cfg, raw, calibration_for(cfg));
        if (out.states.size() != rec.states.size()) {
            return 1e300;
        }
        for (std::size_t k = 0; k < rec.states.size(); ++k) {
            worst = std::max({worst, state_distance(out.states[k], rec.states[k]),
                              std::abs(out.times[k] - rec.times[k])});
        }
    }
    return worst;
}

VacuumStats vacuum_stats(std::size_t paths, std::uint64_t seed, unsigned threads) {
    SystemParams params;
    params.chi = 0.01;
    const cplx alpha_st = bare_steady_state(params, params.drive.at(0.0));
    std::vector<double> lags;
    for (int k = 0; k <= 12; ++k) lags.push_back(0.5 * k / params.kappa);
    CorrelatorOptions copt;
    copt.threads = threads;
    BackactionOptions bopt;
    bopt.threads = threads;

    VacuumStats out;
    out.n_bar = std::norm(alpha_st);
    out.correlator = photon_correlator(params, alpha_st, paths, lags, seed, copt);
    out.ideal = backaction_correlation(params, alpha_st, MeasurementSettings{}, paths, seed + paths, bopt);
    SystemParams lossy = params;
    lossy.kappa_col = params.kappa / 2.0;
    out.half_collected =
        backaction_correlation(lossy, alpha_st, MeasurementSettings{}, paths, seed + 2 * paths, bopt);
    return out;
}

std::vector<Check> run_suite(std::string_view suite, const VerifyOptions& o) {
    const bool all = suite == "all";
    if (!all && suite != "coherent" && suite != "bayes" && suite != "sde" && suite != "vacuum") {
        throw ConfigError("suite: unknown suite '" + std::string(suite) +
                          "' (expected coherent, bayes, sde, vacuum or all)");
    }
    std::vector<Check> checks;
    auto add = [&](const char* s, std::string name, double measured, double tol, bool ok,
                   std::string detail = {}) {
        checks.push_back({s, std::move(name), measured, tol, ok, std::move(detail)});
    };
    auto at_most = [&](const char* s, std::string name, double measured, double tol,
                       std::string detail = {}) {
        add(s, std::move(name), measured, tol, std::isfinite(measured) && measured <= tol, std::move(detail));
    };

    if (all || suite == "coherent") {
        const cplx a{1.0, 0.5}, b{0.3, -0.2};
        const auto ca = fock_amplitudes(a, 60), cb = fock_amplitudes(b, 60);
        cplx sum{};
        for (std::size_t n = 0; n < ca.size(); ++n) sum += std::conj(ca[n]) * cb[n];
        at_most("coherent", "inner_product_vs_fock_sum", std::abs(sum - inner_product(a, b)), 1e-10);

        Philox4x32 rng(o.seed);
        double conservation = 0.0;
        for (int k = 0; k < 5; ++k) {
            const PureQubit q = random_qubit(rng);
            const TailPiece piece = tail_piece(complex_normal(rng), complex_normal(rng), 1.0, 0.01);
            const cplx p = std::polar(50.0, uniform(rng, 0.0, 2.0 * kPi));
            const CountRange range = collapse_count_range(piece, p);
            double w0 = 0.0, w1 = 0.0;
            for (long n = range.lo; n <= range.hi; ++n) {
                const double pn = count_probability(q, piece, p, n);
                const PureQubit c = collapse_amplitudes(q, piece, p, n);
                w0 += pn * std::norm(c.c0);
                w1 += pn * std::norm(c.c1);
            }
            conservation = std::max({conservation, std::abs(w0 - std::norm(q.c0)), std::abs(w1 - std::norm(q.c1))});
        }
        at_most("coherent", "probability_conservation", conservation, 1e-10);

        {
            const PureQubit q = random_qubit(rng);
            const TailPiece piece = tail_piece(cplx{0.8, -0.3}, cplx{-0.4, 0.9}, 1.0, 0.01);
            const double sigma = 50.0;
            std::vector<cplx> averaged;
            std::vector<double> averaged11;
            for (double phi_a : {0.0, kPi / 4.0, kPi / 2.0}) {
                const cplx p = std::polar(sigma, phi_a);
                const double m0 = sigma * sigma + 2.0 * (std::conj(p) * piece.alpha0).real();
                const double m1 = sigma * sigma + 2.0 * (std::conj(p) * piece.alpha1).real();
                cplx r10{};
                double r11 = 0.0;
                const long lo = static_cast<long>(std::min(m0, m1) - 15.0 * sigma);
                const long hi = static_cast<long>(std::max(m0, m1) + 15.0 * sigma);
                for (long n = lo; n <= hi; ++n) {
                    const double dn = static_cast<double>(n);
                    const double pn = (std::norm(q.c0) * std::exp(-(dn - m0) * (dn - m0) / (2.0 * sigma * sigma)) +
                                       std::norm(q.c1) * std::exp(-(dn - m1) * (dn - m1) / (2.0 * sigma * sigma))) /
                                      std::sqrt(2.0 * kPi * sigma * sigma);
                    const PureQubit c = gaussian_collapse_reference(q, piece, phi_a, dn, sigma);
                    r10 += pn * c.c1 * std::conj(c.c0);
                    r11 += pn * std::norm(c.c1);
                }
                averaged.push_back(r10);
                averaged11.push_back(r11);
            }
            double spread = 0.0;
            for (std::size_t k = 1; k < averaged.size(); ++k) {
                spread = std::max({spread, std::abs(averaged[k] - averaged[0]),
                                   std::abs(averaged11[k] - averaged11[0])});
            }
            at_most("coherent", "averaged_update_independent_of_phi_a", spread, 1e-6);
        }

        const cplx alpha{1.2, -0.7};
        const auto qm = quadrature_moments(alpha, 0.4, 80);
        at_most("coherent", "quadrature_mean", std::abs(qm.mean - (alpha * std::polar(1.0, -0.4)).real()), 1e-8);
        at_most("coherent", "quadrature_variance", std::abs(qm.variance - 0.25), 1e-8);

        const auto g = gaussian_vs_exact(200, 50.0, 0.01, o.seed + 1);
        at_most("coherent", "gaussian_vs_exact_modulus", g.modulus_rel_error, 2e-2, "relative, 200 samples");
        at_most("coherent", "gaussian_vs_exact_phase", g.phase_error, 2e-2, "radians");
        at_most("coherent", "finite_step_vs_exact_rho11", g.bayes_rho11_error, 1e-2, "relative");
        at_most("coherent", "finite_step_vs_exact_rho10", g.bayes_rho10_error, 1e-2, "relative");
    }

    if (all || suite == "bayes") {
        RunConfig ideal;
        ideal.t_end = 10.0;
        at_most("bayes", "purity_preservation", purity_violation(ideal, o.seed), 1e-10, "1000 steps, eta = 1");

        const std::size_t n_traj = scaled(1e4, o.scale, 100);
        for (Mode mode : {Mode::phase_sensitive, Mode::phase_preserving}) {
            RunConfig cfg;
            cfg.measurement.mode = mode;
            cfg.measurement.eta_amp = 0.8;
            cfg.initial = HybridState::pure(cplx{std::sqrt(0.4), 0.0}, cplx{0.0, std::sqrt(0.6)}, cplx{}, cplx{});
            cfg.t_end = 2.0;
            const auto e = ensemble_consistency(cfg, n_traj, o.seed + 10, o.threads);
            const char* tag = mode == Mode::phase_sensitive ? "ps" : "pp";
            at_most("bayes", std::string("martingale_rho11_") + tag, e.rho11_drift, e.drift_limit);
            at_most("bayes", std::string("ensemble_rho10_max_z_") + tag, e.max_z, 3.0, "10 checkpoints");
        }

        at_most("bayes", "causality_identity", causality_identity_error(1000, o.seed + 2), 1e-14, "relative");
        const auto sr = sum_rule_errors(1000, o.seed + 3);
        at_most("bayes", "sum_rule_dephasing", sr.dephasing, 1e-10);
        at_most("bayes", "sum_rule_stark", sr.stark, 1e-10);

        SystemParams bc;
        bc.chi = 0.01;
        const auto cmp = bad_cavity_comparison(bc);
        at_most("bayes", "bad_cavity_gamma", std::abs(cmp.gamma_general / cmp.gamma_limit - 1.0), 1e-3, "relative");
        at_most("bayes", "bad_cavity_stark", std::abs(cmp.stark_general / cmp.stark_limit - 1.0), 1e-3, "relative");

        for (std::size_t n : {2, 10, 100}) {
            at_most("bayes", "large_step_N" + std::to_string(n), large_step_error(n, 20, o.seed + 4 + n), 1e-9);
        }

        const auto tg = two_gaussian_stats(scaled(1e5, o.scale, 2000), scaled(1e4, o.scale, 500),
                                           scaled(2000, o.scale, 200), o.seed + 20, o.threads);
        at_most("bayes", "r_parallel_mean_plus", tg.mean_plus_rel, 1e-2, "relative");
        at_most("bayes", "r_parallel_mean_minus", tg.mean_minus_rel, 1e-2, "relative");
        at_most("bayes", "r_parallel_weight_z", tg.weight_z, 3.0);
        at_most("bayes", "r_parallel_variance", tg.variance_rel, 5e-2, "relative");
        at_most("bayes", "r_parallel_records_mean", tg.record_mean_rel, 1e-2, "relative");
        at_most("bayes", "r_parallel_records_weight_z", tg.record_weight_z, 3.0);
        at_most("bayes", "r_q_variance", tg.q_variance_rel, 2e-2, "relative");
        at_most("bayes", "collapse_weight_z", tg.collapse_weight_z, 3.0);

        at_most("bayes", "filter_round_trip", filter_round_trip_error(o.seed + 30), 1e-9);
    }

    if (all || suite == "sde") {
        const std::size_t paths = scaled(1000, o.scale, 50);
        for (Mode mode : {Mode::phase_sensitive, Mode::phase_preserving}) {
            const auto c = sde_convergence(mode, paths, o.seed + 40, o.threads);
            const std::string tag = mode == Mode::phase_sensitive ? "ps" : "pp";
            auto detail = [](const ConvergenceStudy& s) {
                std::string d = "errors";
                for (double e : s.errors) d += " " + format_double(e);
                return d;
            };
            add("sde", "stratonovich_order_" + tag, c.stratonovich.order, 0.9,
                c.stratonovich.order >= 0.9, detail(c.stratonovich));
            add("sde", "ito_order_" + tag, c.ito.order, 0.9, c.ito.order >= 0.9, detail(c.ito));
        }
    }

    if (all || suite == "vacuum") {
        const auto v = vacuum_stats(scaled(1e4, o.scale, 200), o.seed + 50, o.threads);
        const double c0 = v.correlator.correlator.front().value;
        at_most("vacuum", "correlator_zero_lag", std::abs(c0 / v.n_bar - 1.0), 5e-2, "relative to n");
        at_most("vacuum", "correlator_decay_rate", std::abs(v.correlator.decay_rate.value / 0.5 - 1.0), 5e-2,
                "relative to kappa/2");
        at_most("vacuum", "backaction_slope", std::abs(v.ideal.slope.value / v.ideal.predicted - 1.0), 5e-2,
                "relative to dI/2D");
        at_most("vacuum", "informational_slope_z", std::abs(v.ideal.informational.value) / v.ideal.informational.se,
                3.0);
        at_most("vacuum", "backaction_slope_half_collected",
                std::abs(v.half_collected.slope.value / v.half_collected.predicted - 1.0), 5e-2);
        at_most("vacuum", "collection_scaling",
                std::abs(v.half_collected.slope.value / v.ideal.slope.value / std::sqrt(0.5) - 1.0), 5e-2,
                "ratio vs sqrt(kappa_col/kappa)");
    }
    return checks;
}

nlohmann::json report_json(const std::vector<Check>& checks) {
    nlohmann::json arr = nlohmann::json::array();
    bool ok = true;
    for (const auto& c : checks) {
        arr.push_back({{"suite", c.suite},
                       {"name", c.name},
                       {"measured", c.measured},
                       {"tolerance", c.tolerance},
                       {"verdict", c.passed ? "pass" : "fail"},
                       {"detail", c.detail}});
        ok = ok && c.passed;
    }
    return {{"passed", ok}, {"checks", arr}};
}

}  // namespace cqb

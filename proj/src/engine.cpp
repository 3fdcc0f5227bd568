#include "cqb/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace cqb {

namespace {

constexpr std::size_t kBlock = 64;

bool same_time(double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

double log_sum_exp(double a, double b) {
    const double m = std::max(a, b);
    if (!std::isfinite(m)) {
        return m;
    }
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

HybridState clipped(const HybridState& base, const DiagonalUpdate& diag, cplx rho10) {
    const double bound = diag.rho00 * diag.rho11;
    if (std::norm(rho10) > bound) {
        rho10 = bound > 0.0 ? rho10 * std::sqrt(bound / std::norm(rho10)) : cplx{};
    }
    return base.with_qubit(diag.rho00, diag.rho11, rho10);
}

}  // namespace

void require_valid(const RunConfig& c) {
    require_valid(c.system, c.measurement);
    if (!std::isfinite(c.t_start) || !std::isfinite(c.t_end) || !(c.t_end > c.t_start)) {
        throw ConfigError("grid.t_end: must exceed grid.t_start");
    }
    if (!(c.dt > 0.0) || !std::isfinite(c.dt)) {
        throw ConfigError("grid.dt: must be positive");
    }
}

std::vector<double> time_grid(const RunConfig& c) {
    require_valid(c);
    std::vector<double> cuts{c.t_start, c.t_end};
    for (double b : c.system.drive.breakpoints(c.t_start, c.t_end)) cuts.push_back(b);
    for (double b : c.measurement.amplified_phase.breakpoints(c.t_start, c.t_end)) cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    std::vector<double> grid;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double a = cuts[k];
        const double b = cuts[k + 1];
        const auto n = std::max<long>(1, static_cast<long>(std::ceil((b - a) / c.dt - 1e-9)));
        for (long j = 0; j < n; ++j) {
            grid.push_back(a + static_cast<double>(j) * c.dt);
        }
    }
    grid.push_back(c.t_end);
    return grid;
}

StepContext prepare_step(const HybridState& state, const RunConfig& c, double t, double dt) {
    return {derived_quantities(state, c.system, c.measurement, t),
            advance_fields_segmented(state, c.system, t, dt)};
}

TrajectoryRecord run_trajectory(const RunConfig& c, std::uint64_t seed) {
    const auto times = time_grid(c);
    Philox4x32 rng(seed);
    TrajectoryRecord rec;
    rec.seed = seed;
    rec.settings = c.measurement;
    rec.times = times;
    rec.states.reserve(times.size());
    rec.samples.reserve(times.size() - 1);
    rec.states.push_back(c.initial);
    HybridState s = c.initial;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const double dt = times[k + 1] - times[k];
        const StepContext ctx = prepare_step(s, c, times[k], dt);
        const MeasurementSample sample = sample_record(s, ctx.derived, times[k + 1], dt, rng);
        s = update(ctx.advanced, sample, ctx.derived);
        rec.samples.push_back(sample);
        rec.states.push_back(s);
    }
    return rec;
}

std::vector<HybridState> ensemble_chain(const RunConfig& c) {
    const auto times = time_grid(c);
    std::vector<HybridState> out{c.initial};
    out.reserve(times.size());
    HybridState s = c.initial;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const double dt = times[k + 1] - times[k];
        const StepContext ctx = prepare_step(s, c, times[k], dt);
        s = ensemble_step(ctx.advanced, ctx.derived, dt);
        out.push_back(s);
    }
    return out;
}

Calibration Calibration::constant(double spectral_density, CalibrationPoint point) {
    if (!(spectral_density > 0.0)) {
        throw ConfigError("calibration.spectral_density: must be positive");
    }
    Calibration c;
    c.spectral_density_ = spectral_density;
    c.points_ = {point};
    return c;
}

Calibration Calibration::trace(double spectral_density, std::vector<double> times,
                               std::vector<CalibrationPoint> points) {
    if (!(spectral_density > 0.0)) {
        throw ConfigError("calibration.spectral_density: must be positive");
    }
    if (times.empty() || times.size() != points.size()) {
        throw ConfigError("calibration trace: times and values must be non-empty and equal length");
    }
    Calibration c;
    c.spectral_density_ = spectral_density;
    c.times_ = std::move(times);
    c.points_ = std::move(points);
    return c;
}

CalibrationPoint Calibration::at(std::size_t index, double t_end) const {
    if (!is_trace()) {
        return points_.front();
    }
    if (index >= times_.size() || !same_time(times_[index], t_end)) {
        throw ConfigError("calibration trace does not match record times at row " +
                          std::to_string(index + 1));
    }
    return points_[index];
}

Calibration calibration_for(const RunConfig& c) {
    const auto times = time_grid(c);
    std::vector<double> ends;
    std::vector<CalibrationPoint> points;
    HybridState s = c.initial;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const StepContext ctx = prepare_step(s, c, times[k], times[k + 1] - times[k]);
        const double half = ctx.derived.delta_i / 2.0;
        const double mid = c.measurement.signal_offset;
        points.push_back({mid - half, mid + half, mid});
        ends.push_back(times[k + 1]);
        s = ctx.advanced;
    }
    return Calibration::trace(c.measurement.spectral_density, std::move(ends), std::move(points));
}

FilterOutput filter_record(const RunConfig& c, std::span<const MeasurementSample> raw,
                           const Calibration& calibration, bool fixed_frame) {
    require_valid(c);
    const bool preserving = c.measurement.mode == Mode::phase_preserving;
    const double scale = std::sqrt(c.measurement.spectral_density / calibration.spectral_density());
    FilterOutput out;
    out.times.push_back(c.t_start);
    out.states.push_back(c.initial);
    HybridState s = c.initial;
    double t = c.t_start;
    for (std::size_t m = 0; m < raw.size(); ++m) {
        const MeasurementSample& r = raw[m];
        if (!(r.t_end > t)) {
            throw ConfigError("record: time column must be strictly increasing (row " +
                              std::to_string(m + 1) + ")");
        }
        if ((preserving || fixed_frame) && !r.q_bar) {
            throw ConfigError("record: Q column required");
        }
        const double dt = r.t_end - t;
        const StepContext ctx = prepare_step(s, c, t, dt);
        double i_raw = r.i_bar;
        double q_raw = r.q_bar.value_or(0.0);
        if (fixed_frame) {
            std::tie(i_raw, q_raw) = rotate_quadratures(i_raw, q_raw, ctx.derived.phi_opt);
        }
        const CalibrationPoint cal = calibration.at(m, r.t_end);
        MeasurementSample centered;
        centered.t_end = r.t_end;
        centered.dt = dt;
        centered.i_bar = (i_raw - (cal.i0 + cal.i1) / 2.0) * scale;
        if (preserving) {
            centered.q_bar = (q_raw - cal.q0) * scale;
        }
        s = update(ctx.advanced, centered, ctx.derived);
        out.times.push_back(r.t_end);
        out.states.push_back(s);
        out.derived.push_back(ctx.derived);
        out.centered.push_back(centered);
        t = r.t_end;
    }
    return out;
}

LongRunResult integrate_long(const HybridState& initial, const RunConfig& c,
                             std::span<const MeasurementSample> samples) {
    LongRunResult res;
    res.final_state = initial;
    if (samples.empty()) {
        return res;
    }
    const auto grid = time_grid(c);
    const double t0 = samples.front().t_end - samples.front().dt;
    const auto it = std::find_if(grid.begin(), grid.end(), [&](double g) { return same_time(g, t0); });
    if (it == grid.end()) {
        throw ConfigError("integrate_long: grid mismatch, record start is not a grid point");
    }
    std::size_t k = static_cast<std::size_t>(it - grid.begin());
    if (k + samples.size() >= grid.size()) {
        throw ConfigError("integrate_long: grid mismatch, record runs past the grid");
    }

    const bool preserving = c.measurement.mode == Mode::phase_preserving;
    HybridState s = initial;
    double t = grid[k];
    double intrinsic = 0.0;
    for (const MeasurementSample& m : samples) {
        ++k;
        if (!same_time(grid[k], m.t_end) || !same_time(m.t_end - m.dt, t)) {
            throw ConfigError("integrate_long: grid mismatch at t = " + std::to_string(m.t_end));
        }
        const StepContext ctx = prepare_step(s, c, t, m.dt);
        const DerivedQuantities& d = ctx.derived;
        const double variance = record_variance(d.spectral_density, m.dt);
        res.r_parallel += m.i_bar * d.delta_i / variance;
        if (preserving) {
            if (!m.q_bar) {
                throw ConfigError("integrate_long: phase-preserving record needs Q values");
            }
            res.r_perp += *m.q_bar * d.delta_i / (2.0 * variance);
        } else {
            res.r_perp += d.back_action_k * m.i_bar * m.dt;
        }
        res.gamma_integral += d.gamma * m.dt;
        res.stark_integral += d.stark_s * m.dt;
        intrinsic += d.gamma_int * m.dt;
        s = ctx.advanced;
        t = m.t_end;
    }
    const DiagonalUpdate diag = bayes_diagonals(initial.rho00(), initial.rho11(), res.r_parallel);
    const cplx rho10 = initial.rho10() *
                       std::exp(diag.log_purity_factor - res.gamma_integral - intrinsic) *
                       std::polar(1.0, -(res.r_perp + res.stark_integral));
    res.final_state = clipped(s, diag, rho10);
    return res;
}

double response_integral(const RunConfig& c) {
    const auto times = time_grid(c);
    HybridState s = c.initial;
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const double dt = times[k + 1] - times[k];
        const StepContext ctx = prepare_step(s, c, times[k], dt);
        total += ctx.derived.delta_i * ctx.derived.delta_i / ctx.derived.spectral_density * dt;
        s = ctx.advanced;
    }
    return total;
}

double sample_r_parallel(const HybridState& state, double response, Philox4x32& rng) {
    const double sign = rng.uniform() < state.rho11() ? 1.0 : -1.0;
    return sign * response + std::sqrt(2.0 * response) * rng.normal();
}

double sample_r_q(double response, Philox4x32& rng) {
    return std::sqrt(response / 2.0) * rng.normal();
}

LikelihoodResult record_log_likelihood(std::span<const MeasurementSample> raw,
                                       const Calibration& calibration, double rho00,
                                       double rho11) {
    const double s = calibration.spectral_density();
    LikelihoodResult res;
    double e0 = 0.0, e1 = 0.0, eq = 0.0;
    double p00 = rho00, p11 = rho11;
    double t_prev = raw.empty() ? 0.0 : raw.front().t_end - raw.front().dt;
    for (std::size_t m = 0; m < raw.size(); ++m) {
        const MeasurementSample& r = raw[m];
        const double dt = m == 0 ? r.dt : r.t_end - t_prev;
        t_prev = r.t_end;
        const CalibrationPoint cal = calibration.at(m, r.t_end);
        const double d0 = (r.i_bar - cal.i0) * (r.i_bar - cal.i0) * dt / s;
        const double d1 = (r.i_bar - cal.i1) * (r.i_bar - cal.i1) * dt / s;
        const double dq = r.q_bar ? (*r.q_bar - cal.q0) * (*r.q_bar - cal.q0) * dt / s : 0.0;
        e0 += d0;
        e1 += d1;
        eq += dq;
        const double i_av = p00 * cal.i0 + p11 * cal.i1;
        res.local_quadratic -= (r.i_bar - i_av) * (r.i_bar - i_av) * dt / s + dq;
        res.local += log_sum_exp(std::log(p00) - d0, std::log(p11) - d1) - dq;
        const DiagonalUpdate next = bayes_diagonals(p00, p11, d0 - d1);
        p00 = next.rho00;
        p11 = next.rho11;
    }
    res.log_weight0 = std::log(rho00) - e0 - eq;
    res.log_weight1 = std::log(rho11) - e1 - eq;
    res.global = log_sum_exp(res.log_weight0, res.log_weight1);
    return res;
}

std::pair<double, double> rotate_quadratures(double i_fixed, double q_fixed, double phi) {
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    return {i_fixed * c + q_fixed * s, q_fixed * c - i_fixed * s};
}

std::pair<double, double> unrotate_quadratures(double i, double q, double phi) {
    return rotate_quadratures(i, q, -phi);
}

EnsembleAccumulator::EnsembleAccumulator(std::vector<double> times, std::size_t bins)
    : times_(std::move(times)), sums_(8 * times_.size(), 0.0), histogram_(bins, 0) {
    if (bins == 0) {
        throw std::invalid_argument("EnsembleAccumulator: bins must be positive");
    }
}

void EnsembleAccumulator::add(const TrajectoryRecord& rec) {
    if (rec.states.size() != times_.size()) {
        throw std::invalid_argument("EnsembleAccumulator: record length differs from the grid");
    }
    for (std::size_t k = 0; k < times_.size(); ++k) {
        const HybridState& s = rec.states[k];
        const double v[4] = {s.rho11(), s.rho10().real(), s.rho10().imag(), s.purity()};
        double* row = &sums_[8 * k];
        for (int j = 0; j < 4; ++j) {
            row[2 * j] += v[j];
            row[2 * j + 1] += v[j] * v[j];
        }
    }
    const double last = rec.states.back().rho11();
    const auto bins = histogram_.size();
    const auto bin = std::min(bins - 1, static_cast<std::size_t>(last * static_cast<double>(bins)));
    ++histogram_[bin];
    ++count_;
}

void EnsembleAccumulator::merge(const EnsembleAccumulator& other) {
    if (other.times_.size() != times_.size() || other.histogram_.size() != histogram_.size()) {
        throw std::invalid_argument("EnsembleAccumulator: incompatible accumulators");
    }
    for (std::size_t k = 0; k < sums_.size(); ++k) sums_[k] += other.sums_[k];
    for (std::size_t k = 0; k < histogram_.size(); ++k) histogram_[k] += other.histogram_[k];
    count_ += other.count_;
}

EnsembleSummary EnsembleAccumulator::summary() const {
    EnsembleSummary out;
    out.trajectories = count_;
    out.times = times_;
    const double n = static_cast<double>(count_);
    auto moments = [&](std::size_t k, int j, std::vector<double>& mean, std::vector<double>& se) {
        const double m = count_ ? sums_[8 * k + 2 * j] / n : 0.0;
        double e = 0.0;
        if (count_ > 1) {
            const double var = std::max(0.0, (sums_[8 * k + 2 * j + 1] - n * m * m) / (n - 1.0));
            e = std::sqrt(var / n);
        }
        mean.push_back(m);
        se.push_back(e);
    };
    for (std::size_t k = 0; k < times_.size(); ++k) {
        moments(k, 0, out.rho11_mean, out.rho11_se);
        moments(k, 1, out.rho10_re_mean, out.rho10_re_se);
        moments(k, 2, out.rho10_im_mean, out.rho10_im_se);
        moments(k, 3, out.purity_mean, out.purity_se);
    }
    const auto bins = histogram_.size();
    for (std::size_t b = 0; b <= bins; ++b) {
        out.histogram_edges.push_back(static_cast<double>(b) / static_cast<double>(bins));
    }
    out.histogram_counts = histogram_;
    return out;
}

EnsembleSummary ensemble_stats(std::span<const TrajectoryRecord> records, std::size_t bins) {
    if (records.empty()) {
        throw std::invalid_argument("ensemble_stats: at least one trajectory is required");
    }
    EnsembleAccumulator acc(records.front().times, bins);
    for (const auto& r : records) acc.add(r);
    return acc.summary();
}

EnsembleSummary run_ensemble(const RunConfig& c, std::size_t n, std::uint64_t base_seed,
                             unsigned threads,
                             const std::function<void(std::size_t, const TrajectoryRecord&)>& on_record,
                             std::size_t bins) {
    if (n == 0) {
        throw std::invalid_argument("run_ensemble: at least one trajectory is required");
    }
    const auto times = time_grid(c);
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    std::vector<std::optional<EnsembleAccumulator>> partial(blocks);
    parallel_for(blocks, threads, [&](std::size_t b) {
        EnsembleAccumulator acc(times, bins);
        for (std::size_t i = b * kBlock; i < std::min(n, (b + 1) * kBlock); ++i) {
            const TrajectoryRecord rec = run_trajectory(c, base_seed + i);
            if (on_record) on_record(i, rec);
            acc.add(rec);
        }
        partial[b] = std::move(acc);
    });
    EnsembleAccumulator total(times, bins);
    for (const auto& p : partial) total.merge(*p);
    return total.summary();
}

unsigned thread_count_from_env() {
    if (const char* v = std::getenv("CQB_THREADS"); v && *v) {
        char* end = nullptr;
        const long n = std::strtol(v, &end, 10);
        if (*end != '\0' || n < 1) {
            throw ConfigError("CQB_THREADS: must be a positive integer");
        }
        return static_cast<unsigned>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                        next = n;
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace cqb

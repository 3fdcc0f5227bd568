#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "cqb/bayes_update.hpp"
#include "cqb/core.hpp"
#include "cqb/field_dynamics.hpp"
#include "cqb/rng.hpp"

namespace cqb {

struct RunConfig {
    SystemParams system;
    MeasurementSettings measurement;
    HybridState initial = HybridState::pure(cplx{std::sqrt(0.5), 0.0}, cplx{std::sqrt(0.5), 0.0},
                                            cplx{}, cplx{});
    double t_start = 0.0;
    double t_end = 5.0;
    double dt = 0.01;
    std::uint64_t seed = 1;
};

// Throws ConfigError for invalid parameters or grid.
void require_valid(const RunConfig& config);

// Uniform dt inside each segment of the drive and amplified-phase schedules; segment
// boundaries are grid points.
std::vector<double> time_grid(const RunConfig& config);

// Derived quantities at t and the state with fields advanced over [t, t + dt].
struct StepContext {
    DerivedQuantities derived;
    HybridState advanced;
};
StepContext prepare_step(const HybridState& state, const RunConfig& config, double t, double dt);

TrajectoryRecord run_trajectory(const RunConfig& config, std::uint64_t seed);

// Deterministic chain of ensemble_step on the config grid.
std::vector<HybridState> ensemble_chain(const RunConfig& config);

// Calibration of an experimental record: branch means I0, I1 (and Q0) per interval
// and the spectral density in the same units.
struct CalibrationPoint {
    double i0 = 0.0;
    double i1 = 0.0;
    double q0 = 0.0;
};

class Calibration {
   public:
    static Calibration constant(double spectral_density, CalibrationPoint point);
    static Calibration trace(double spectral_density, std::vector<double> times,
                             std::vector<CalibrationPoint> points);

    double spectral_density() const { return spectral_density_; }
    bool is_trace() const { return !times_.empty(); }
    std::span<const double> times() const { return times_; }
    std::span<const CalibrationPoint> points() const { return points_; }

    // Point for record interval `index` ending at t_end.
    CalibrationPoint at(std::size_t index, double t_end) const;

   private:
    double spectral_density_ = 1.0;
    std::vector<double> times_;
    std::vector<CalibrationPoint> points_;
};

// Calibration matching simulated records: I0,1 = offset -+ delta_i/2 and Q0 = offset on
// each interval of the config grid.
Calibration calibration_for(const RunConfig& config);

struct FilterOutput {
    std::vector<double> times;
    std::vector<HybridState> states;
    std::vector<DerivedQuantities> derived;     // per interval, at its start
    std::vector<MeasurementSample> centered;  // record mapped to simulation units
};

// Runs the finite-step filter on a raw record. With fixed_frame the (I, Q) columns are
// first rotated into the informational frame using phi_opt of each interval.
FilterOutput filter_record(const RunConfig& config, std::span<const MeasurementSample> raw,
                           const Calibration& calibration, bool fixed_frame = false);

struct LongRunResult {
    double r_parallel = 0.0;  // R_I in phase-preserving mode
    double r_perp = 0.0;      // R_Q in phase-preserving mode
    double gamma_integral = 0.0;
    double stark_integral = 0.0;
    HybridState final_state{1.0, 0.0, cplx{}, cplx{}, cplx{}};
};

// Closed-form update over a contiguous run of samples lying on the config grid,
// starting from `initial` at the start of the first sample.
LongRunResult integrate_long(const HybridState& initial, const RunConfig& config,
                             std::span<const MeasurementSample> samples);

// Integral of delta_i^2 / S_I over the config grid, with the fields evolved from
// config.initial.
double response_integral(const RunConfig& config);

// Direct draws of R_parallel (two-Gaussian mixture) and R_Q (zero-mean Gaussian).
double sample_r_parallel(const HybridState& state, double response, Philox4x32& rng);
double sample_r_q(double response, Philox4x32& rng);

struct LikelihoodResult {
    double global = 0.0;
    double local = 0.0;            // sequential mixture form
    double local_quadratic = 0.0;  // -sum (I - I_av)^2 dt / S, its small-dt limit
    double log_weight0 = 0.0;  // log rho_00 + log P(record | 0)
    double log_weight1 = 0.0;
};

// Log-probability of a raw record (up to a record-independent constant).
LikelihoodResult record_log_likelihood(std::span<const MeasurementSample> raw,
                                       const Calibration& calibration, double rho00,
                                       double rho11);

// (I, Q) in the frame rotated by phi from the fixed (I_fix, Q_fix) frame.
std::pair<double, double> rotate_quadratures(double i_fixed, double q_fixed, double phi);
std::pair<double, double> unrotate_quadratures(double i, double q, double phi);

struct EnsembleSummary {
    std::size_t trajectories = 0;
    std::vector<double> times;
    std::vector<double> rho11_mean, rho11_se;
    std::vector<double> rho10_re_mean, rho10_re_se;
    std::vector<double> rho10_im_mean, rho10_im_se;
    std::vector<double> purity_mean, purity_se;
    std::vector<double> histogram_edges;        // final rho11
    std::vector<std::size_t> histogram_counts;  // len(edges) - 1
};

class EnsembleAccumulator {
   public:
    EnsembleAccumulator(std::vector<double> times, std::size_t bins);
    void add(const TrajectoryRecord& record);
    void merge(const EnsembleAccumulator& other);
    EnsembleSummary summary() const;

   private:
    std::vector<double> times_;
    std::size_t count_ = 0;
    std::vector<double> sums_;  // 8 per grid point
    std::vector<std::size_t> histogram_;
};

EnsembleSummary ensemble_stats(std::span<const TrajectoryRecord> records, std::size_t bins = 20);

// Runs n trajectories with seeds base_seed + index. Results do not depend on the
// thread count. The callback (if any) sees every record and may be called
// concurrently from worker threads.
EnsembleSummary run_ensemble(const RunConfig& config, std::size_t n, std::uint64_t base_seed,
                             unsigned threads,
                             const std::function<void(std::size_t, const TrajectoryRecord&)>&
                                 on_record = nullptr,
                             std::size_t bins = 20);

// Value of CQB_THREADS, else the hardware concurrency (at least 1).
unsigned thread_count_from_env();

// Runs body(index) for index in [0, n) on `threads` workers.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace cqb

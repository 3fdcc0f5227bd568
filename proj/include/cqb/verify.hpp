#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cqb/engine.hpp"
#include "cqb/vacuum.hpp"

namespace cqb {

// Measurements behind the verification suites. Each function returns raw numbers;
// run_suite turns them into pass/fail checks.

// Max | |rho10|^2 - rho00 rho11 | along an ideal trajectory from a pure state,
// starting with empty resonator (full transient).
double purity_violation(const RunConfig& config, std::uint64_t seed);

struct EnsembleConsistency {
    double rho11_drift;  // |mean rho11(t_f) - rho11(0)|
    double drift_limit;  // 5 * 0.5 / sqrt(n)
    double max_z;        // max |mean rho10 - chain| / se over checkpoints and components
    std::size_t checkpoints;
};
EnsembleConsistency ensemble_consistency(const RunConfig& config, std::size_t n_traj,
                                         std::uint64_t seed, unsigned threads,
                                         std::size_t checkpoints = 10);

struct CollapseAgreement {
    double modulus_rel_error;  // max over samples and branches
    double phase_error;        // max |arg(c1/c0)| difference, radians
    double bayes_rho10_error;  // finite-step update vs exact, max |d rho10| / |rho10|
    double bayes_rho11_error;  // max |d rho11| / rho11
    std::size_t samples;
};
CollapseAgreement gaussian_vs_exact(std::size_t samples, double pump, double kappa_dt,
                                    std::uint64_t seed);

// Max relative deviation of (dI)^2/4S + K^2 S/4 from (dI_max)^2/4S over random phi_d.
double causality_identity_error(std::size_t samples, std::uint64_t seed);

struct SumRuleErrors {
    double dephasing;  // max |Gamma_d + dGamma - 2 chi Im(a1* a0)|
    double stark;      // max |stark_s + stark_3 - 2 chi Re(a1* a0)|
};
SumRuleErrors sum_rule_errors(std::size_t samples, std::uint64_t seed);

// Max state difference between one finite-step update with aggregate record and
// n_sub updates whose records average to it, both modes, random frozen parameters.
double large_step_error(std::size_t n_sub, std::size_t cases, std::uint64_t seed);

struct ConvergenceStudy {
    std::vector<double> dts;
    std::vector<double> errors;  // RMS endpoint error vs fine-grid finite-step reference
    double order;                // least-squares slope of log error on log dt
};
struct SdeConvergence {
    ConvergenceStudy stratonovich;
    ConvergenceStudy ito;
};
SdeConvergence sde_convergence(Mode mode, std::size_t paths, std::uint64_t seed,
                               unsigned threads);

struct TwoGaussianStats {
    double response;            // mean R of the 1-component, R_bar
    double mean_plus_rel;       // |mean of positive draws / R_bar - 1|
    double mean_minus_rel;      // |mean of negative draws / (-R_bar) - 1|
    double weight_z;            // |fraction positive - rho11| / sigma
    double variance_rel;        // max relative deviation of component variances from 2 R_bar
    double record_mean_rel;     // same component-mean check on R from simulated records
    double record_weight_z;
    double q_variance_rel;      // R_Q draws vs R_bar / 2
    double collapse_weight_z;   // long-run fraction with rho11 > 1/2 vs rho11(0)
    double collapse_unresolved; // fraction of final rho11 inside (0.05, 0.95)
};
TwoGaussianStats two_gaussian_stats(std::size_t draws, std::size_t records,
                                    std::size_t collapse_runs, std::uint64_t seed,
                                    unsigned threads);

// Max |state difference| between simulated trajectories and the filter run on their
// written-and-reparsed records, both modes.
double filter_round_trip_error(std::uint64_t seed);

struct VacuumStats {
    CorrelatorResult correlator;
    double n_bar;
    BackactionResult ideal;
    BackactionResult half_collected;  // kappa_col = kappa / 2
};
VacuumStats vacuum_stats(std::size_t paths, std::uint64_t seed, unsigned threads);

struct Check {
    std::string suite;
    std::string name;
    double measured;
    double tolerance;
    bool passed;
    std::string detail;
};

struct VerifyOptions {
    std::uint64_t seed = 20240611;
    unsigned threads = 1;
    double scale = 1.0;  // multiplies Monte Carlo sample counts
};

// suite in {coherent, bayes, sde, vacuum, all}; throws ConfigError otherwise.
std::vector<Check> run_suite(std::string_view suite, const VerifyOptions& options);

nlohmann::json report_json(const std::vector<Check>& checks);

}  // namespace cqb

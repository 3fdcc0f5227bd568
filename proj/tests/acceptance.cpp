// Acceptance criteria 1-11. Prints one line per criterion; exits 1 if any selected
// criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "cqb/io.hpp"
#include "cqb/verify.hpp"

using namespace cqb;

namespace {

constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
    bool passed;
    std::string detail;
};

struct Criterion {
    int number;
    const char* title;
    double time_limit;  // seconds; 0 means none
    std::function<Outcome(unsigned)> run;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

Outcome purity(unsigned) {
    RunConfig cfg;
    cfg.t_end = 10.0;  // 1000 steps of 0.01 from an empty resonator
    const double v = purity_violation(cfg, kSeed);
    return {v <= 1e-10, "max | |rho10|^2 - rho00 rho11 | = " + fmt(v) + " (tol 1e-10)"};
}

Outcome martingale(unsigned threads) {
    bool ok = true;
    std::string detail;
    for (Mode mode : {Mode::phase_sensitive, Mode::phase_preserving}) {
        RunConfig cfg;
        cfg.measurement.mode = mode;
        cfg.measurement.eta_amp = 0.8;
        cfg.initial = HybridState::pure(cplx{std::sqrt(0.4), 0.0}, cplx{0.0, std::sqrt(0.6)}, cplx{}, cplx{});
        cfg.t_end = 2.0;
        const auto e = ensemble_consistency(cfg, 10000, kSeed + 10, threads, 10);
        ok = ok && e.rho11_drift < e.drift_limit && e.max_z <= 3.0;
        detail += std::string(mode == Mode::phase_sensitive ? "ps" : "pp") + ": drift " + fmt(e.rho11_drift) +
                  " (< " + fmt(e.drift_limit) + "), rho10 max z " + fmt(e.max_z) + " (<= 3); ";
    }
    return {ok, detail};
}

Outcome gaussian(unsigned) {
    const auto g = gaussian_vs_exact(200, 50.0, 0.01, kSeed + 1);
    const bool ok = g.modulus_rel_error <= 2e-2 && g.phase_error <= 2e-2;
    return {ok, "modulus rel " + fmt(g.modulus_rel_error) + ", phase " + fmt(g.phase_error) + " rad (tol 2e-2)"};
}

Outcome causality(unsigned) {
    const double e = causality_identity_error(1000, kSeed + 2);
    return {e <= 1e-14, "max rel " + fmt(e) + " (tol 1e-14)"};
}

Outcome sum_rules(unsigned) {
    const auto s = sum_rule_errors(1000, kSeed + 3);
    return {s.dephasing <= 1e-10 && s.stark <= 1e-10,
            "dephasing " + fmt(s.dephasing) + ", stark " + fmt(s.stark) + " (tol 1e-10)"};
}

Outcome bad_cavity(unsigned) {
    SystemParams p;
    p.chi = 0.01;
    const auto c = bad_cavity_comparison(p);
    const double eg = std::abs(c.gamma_general / c.gamma_limit - 1.0);
    const double es = std::abs(c.stark_general / c.stark_limit - 1.0);
    return {eg <= 1e-3 && es <= 1e-3, "Gamma rel " + fmt(eg) + ", Stark rel " + fmt(es) + " (tol 1e-3)"};
}

Outcome large_step(unsigned) {
    bool ok = true;
    std::string detail;
    for (std::size_t n : {2, 10, 100}) {
        const double e = large_step_error(n, 20, kSeed + 4 + n);
        ok = ok && e <= 1e-9;
        detail += "N=" + std::to_string(n) + " " + fmt(e) + "; ";
    }
    return {ok, detail + "(tol 1e-9)"};
}

Outcome sde(unsigned threads) {
    bool ok = true;
    std::string detail;
    for (Mode mode : {Mode::phase_sensitive, Mode::phase_preserving}) {
        const auto c = sde_convergence(mode, 1000, kSeed + 40, threads);
        ok = ok && c.stratonovich.order >= 0.9 && c.ito.order >= 0.9;
        detail += std::string(mode == Mode::phase_sensitive ? "ps" : "pp") + ": stratonovich " +
                  fmt(c.stratonovich.order) + ", ito " + fmt(c.ito.order) + "; ";
    }
    return {ok, detail + "(order >= 0.9)"};
}

Outcome vacuum(unsigned threads) {
    const auto v = vacuum_stats(10000, kSeed + 50, threads);
    const double zero = std::abs(v.correlator.correlator.front().value / v.n_bar - 1.0);
    const double rate = std::abs(v.correlator.decay_rate.value / 0.5 - 1.0);
    const double slope = std::abs(v.ideal.slope.value / v.ideal.predicted - 1.0);
    const bool ok = zero <= 5e-2 && rate <= 5e-2 && slope <= 5e-2;
    return {ok, "zero lag rel " + fmt(zero) + ", decay rate rel " + fmt(rate) + ", back-action slope rel " +
                    fmt(slope) + " (tol 5e-2)"};
}

Outcome two_gaussian(unsigned threads) {
    const auto t = two_gaussian_stats(100000, 10000, 2000, kSeed + 20, threads);
    const bool ok = t.mean_plus_rel <= 1e-2 && t.mean_minus_rel <= 1e-2 && t.weight_z <= 3.0 &&
                    t.collapse_weight_z <= 3.0;
    return {ok, "means rel " + fmt(t.mean_plus_rel) + "/" + fmt(t.mean_minus_rel) + " (tol 1e-2), weight z " +
                    fmt(t.weight_z) + ", collapse weight z " + fmt(t.collapse_weight_z) + " (<= 3)"};
}

Outcome round_trip(unsigned) {
    const double e = filter_round_trip_error(kSeed + 30);
    return {e <= 1e-9, "max state difference " + fmt(e) + " (tol 1e-9)"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> selected;
    app.add_option("-c,--criterion", selected, "Criteria to run (default all)")->check(CLI::Range(1, 11));
    CLI11_PARSE(app, argc, argv);

    unsigned threads = 1;
    try {
        threads = thread_count_from_env();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }

    const std::vector<Criterion> criteria{
        {1, "purity preservation", 1.0, purity},
        {2, "martingale / ensemble consistency", 30.0, martingale},
        {3, "Gaussian vs exact collapse", 10.0, gaussian},
        {4, "causality identity", 0.0, causality},
        {5, "sum rules", 0.0, sum_rules},
        {6, "bad-cavity limit", 0.0, bad_cavity},
        {7, "large-step exactness", 0.0, large_step},
        {8, "SDE strong order", 0.0, sde},
        {9, "vacuum-noise physics", 60.0, vacuum},
        {10, "two-Gaussian statistics", 0.0, two_gaussian},
        {11, "filter round trip", 0.0, round_trip},
    };

    bool all_ok = true;
    for (const auto& c : criteria) {
        if (!selected.empty() && std::find(selected.begin(), selected.end(), c.number) == selected.end()) {
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        const Outcome out = c.run(threads);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = c.time_limit == 0.0 || seconds < c.time_limit;
        const bool ok = out.passed && in_time;
        all_ok = all_ok && ok;
        std::printf("criterion %2d %-36s %s  %s | %.2f s%s\n", c.number, c.title, ok ? "PASS" : "FAIL",
                    out.detail.c_str(), seconds,
                    c.time_limit > 0.0 ? (in_time ? " (limit ok)" : " (over time limit)") : "");
        std::fflush(stdout);
    }
    return all_ok ? 0 : 1;
}

// cqbayes: simulate, filter and verify continuous qubit measurement records.
//
// Exit codes: 0 ok, 1 a verification check failed, 2 usage or configuration error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "cqb/engine.hpp"
#include "cqb/field_dynamics.hpp"
#include "cqb/io.hpp"
#include "cqb/verify.hpp"

namespace fs = std::filesystem;
using namespace cqb;

namespace {

std::string numbered(const char* prefix, std::size_t index, const char* suffix) {
    std::ostringstream name;
    name << prefix << std::setw(6) << std::setfill('0') << index << suffix;
    return name.str();
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw ConfigError("--out: cannot create directory " + dir.string());
    }
}

Json derived_json(const DerivedQuantities& d) {
    return {{"gamma_d", d.gamma_d},         {"delta_gamma", d.delta_gamma},
            {"stark_1", d.stark_1},         {"stark_2", d.stark_2},
            {"stark_3", d.stark_3},         {"stark_s", d.stark_s},
            {"phi_opt", d.phi_opt},         {"phi_d", d.phi_d},
            {"delta_i_max", d.delta_i_max}, {"delta_i", d.delta_i},
            {"back_action_k", d.back_action_k}, {"gamma", d.gamma},
            {"efficiency", d.efficiency}};
}

Json complex_json(cplx z) { return Json::array({z.real(), z.imag()}); }

struct SimulateArgs {
    std::string config;
    std::size_t trajectories = 1;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
    const RunConfig cfg = load_config(a.config);
    if (a.trajectories == 0) {
        throw ConfigError("--trajectories: must be at least 1");
    }
    const std::uint64_t seed = a.seed.value_or(cfg.seed);
    const fs::path dir = a.out;
    ensure_dir(dir);

    Json manifest;
    manifest["config"] = config_to_json(cfg);
    manifest["base_seed"] = seed;
    manifest["trajectories"] = Json::array();
    for (std::size_t i = 0; i < a.trajectories; ++i) {
        manifest["trajectories"].push_back({{"index", i},
                                            {"seed", seed + i},
                                            {"record", numbered("traj_", i, "_record.csv")},
                                            {"states", numbered("traj_", i, "_states.csv")}});
    }

    const EnsembleSummary summary = run_ensemble(
        cfg, a.trajectories, seed, thread_count_from_env(),
        [&](std::size_t i, const TrajectoryRecord& rec) {
            std::ostringstream record, states;
            write_record_csv(record, rec.samples, cfg.measurement.signal_offset);
            write_states_csv(states, rec.times, rec.states);
            write_text(dir / numbered("traj_", i, "_record.csv"), record.str());
            write_text(dir / numbered("traj_", i, "_states.csv"), states.str());
        });

    Json sum = summary_to_json(summary);
    const auto chain = ensemble_chain(cfg);
    std::vector<double> re, im;
    for (const auto& s : chain) {
        re.push_back(s.rho10().real());
        im.push_back(s.rho10().imag());
    }
    sum["ensemble_chain"] = {{"rho10_re", re}, {"rho10_im", im}};
    write_text(dir / "summary.json", sum.dump(2) + "\n");
    write_calibration(dir / "calibration.json", dir / "calibration_trace.csv", calibration_for(cfg));
    manifest["summary"] = "summary.json";
    manifest["calibration"] = "calibration.json";
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    std::cout << "wrote " << a.trajectories << " trajectories to " << dir.string() << "\n";
    return 0;
}

struct FilterArgs {
    std::string record;
    std::string calibration;
    std::string config;
    std::string out;
    bool fixed_frame = false;
};

int cmd_filter(const FilterArgs& a) {
    const RunConfig cfg = load_config(a.config);
    const Calibration cal = load_calibration(a.calibration);
    std::istringstream in(read_text(a.record));
    const auto raw = read_record_csv(in, cfg.t_start);
    if (raw.empty()) {
        throw ConfigError("record: no data rows");
    }
    const FilterOutput out = filter_record(cfg, raw, cal, a.fixed_frame);

    std::vector<DerivedQuantities> derived;
    for (std::size_t k = 0; k < out.states.size(); ++k) {
        derived.push_back(derived_quantities(out.states[k], cfg.system, cfg.measurement, out.times[k]));
    }
    const fs::path dir = a.out;
    ensure_dir(dir);
    std::ostringstream states;
    write_states_csv(states, out.times, out.states, derived);
    write_text(dir / "states.csv", states.str());

    const LikelihoodResult lk = record_log_likelihood(raw, cal, cfg.initial.rho00(), cfg.initial.rho11());
    const Json report{{"rows", raw.size()},
                      {"log_likelihood_global", lk.global},
                      {"log_likelihood_local", lk.local},
                      {"log_likelihood_local_quadratic", lk.local_quadratic},
                      {"log_weight0", lk.log_weight0},
                      {"log_weight1", lk.log_weight1},
                      {"final_rho11", out.states.back().rho11()}};
    write_text(dir / "likelihood.json", report.dump(2) + "\n");
    std::cout << report.dump(2) << "\n";
    return 0;
}

struct VerifyArgs {
    std::string suite = "all";
    std::string report;
    double scale = 1.0;
    std::uint64_t seed = VerifyOptions{}.seed;
};

int cmd_verify(const VerifyArgs& a) {
    VerifyOptions o;
    o.seed = a.seed;
    o.scale = a.scale;
    o.threads = thread_count_from_env();
    if (!(a.scale > 0.0)) {
        throw ConfigError("--scale: must be positive");
    }
    const auto checks = run_suite(a.suite, o);
    const Json report = report_json(checks);
    if (!a.report.empty()) {
        write_text(a.report, report.dump(2) + "\n");
    }
    std::cout << report.dump(2) << "\n";
    return report["passed"].get<bool>() ? 0 : 1;
}

int cmd_steady_state(const std::string& config) {
    const RunConfig cfg = load_config(config);
    const cplx drive = cfg.system.drive.at(cfg.t_start);
    const cplx a0 = steady_state_field(cfg.system, Branch::zero, drive);
    const cplx a1 = steady_state_field(cfg.system, Branch::one, drive);
    const HybridState s = cfg.initial.with_fields(a0, a1, 0.0, 0.0);
    const Json out{{"t", cfg.t_start},
                   {"alpha0", complex_json(a0)},
                   {"alpha1", complex_json(a1)},
                   {"n0", std::norm(a0)},
                   {"n1", std::norm(a1)},
                   {"derived", derived_json(derived_quantities(s, cfg.system, cfg.measurement, cfg.t_start))}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

struct SweepArgs {
    std::string config;
    std::string param;
    std::vector<double> values;
    std::string range;
    std::string out;
};

std::vector<double> parse_range(const std::string& text) {
    double start = 0.0, stop = 0.0;
    long count = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(text);
    if (!(in >> start >> c1 >> stop >> c2 >> count) || c1 != ':' || c2 != ':' || count < 1 ||
        !(in >> std::ws).eof()) {
        throw ConfigError("--range: expected start:stop:count");
    }
    std::vector<double> v;
    for (long k = 0; k < count; ++k) {
        v.push_back(count == 1 ? start : start + (stop - start) * static_cast<double>(k) / static_cast<double>(count - 1));
    }
    return v;
}

// Each value is written into the config tree and re-parsed, so it is read in the
// config's units and validated like any other config.
int cmd_sweep(const SweepArgs& a) {
    const Json tree = Json::parse(read_text(a.config), nullptr, false);
    if (tree.is_discarded()) {
        throw ConfigError(a.config + ": not valid JSON");
    }
    const RunConfig base = parse_config(tree);
    std::vector<double> values = a.values;
    if (!a.range.empty()) {
        if (!values.empty()) throw ConfigError("--values and --range are exclusive");
        values = parse_range(a.range);
    }
    if (values.empty()) {
        throw ConfigError("--values or --range is required");
    }
    std::ostringstream csv;
    csv << "value,alpha0_re,alpha0_im,alpha1_re,alpha1_im,gamma_d,stark_s,delta_i_max,delta_i,"
           "back_action_k,gamma\n";
    for (double v : values) {
        Json t = tree;
        if (a.param == "chi") {
            t["system"]["chi"] = v;
        } else if (a.param == "kappa") {
            // keep the coupling ratios
            t["system"]["kappa"] = v;
            t["system"]["kappa_out"] = v * base.system.kappa_out / base.system.kappa;
            t["system"]["kappa_col"] = v * base.system.kappa_col / base.system.kappa;
        } else if (a.param == "epsilon") {
            t["system"]["drive"] = v;
        } else if (a.param == "eta") {
            t["measurement"]["eta_amp"] = v;
        } else if (a.param == "phi_a") {
            t["measurement"]["amplified_phase"] = v;
        } else {
            throw ConfigError("--param: expected chi, kappa, epsilon, eta or phi_a");
        }
        const RunConfig cfg = parse_config(t);
        const cplx drive = cfg.system.drive.at(cfg.t_start);
        const cplx a0 = steady_state_field(cfg.system, Branch::zero, drive);
        const cplx a1 = steady_state_field(cfg.system, Branch::one, drive);
        const DerivedQuantities d = derived_quantities(cfg.initial.with_fields(a0, a1, 0.0, 0.0),
                                                       cfg.system, cfg.measurement, cfg.t_start);
        const double row[] = {v,         a0.real(),  a0.imag(),     a1.real(),     a1.imag(),
                              d.gamma_d, d.stark_s,  d.delta_i_max, d.delta_i,     d.back_action_k,
                              d.gamma};
        for (std::size_t k = 0; k < std::size(row); ++k) {
            csv << (k ? "," : "") << format_double(row[k]);
        }
        csv << '\n';
    }
    if (a.out.empty()) {
        std::cout << csv.str();
    } else {
        write_text(a.out, csv.str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum Bayesian simulation and filtering of continuous qubit measurement"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate measurement trajectories");
    simulate->add_option("config", sim.config, "Config JSON")->required();
    simulate->add_option("-n,--trajectories", sim.trajectories, "Number of trajectories");
    simulate->add_option("-s,--seed", sim.seed, "Base seed (default: config seed)");
    simulate->add_option("-o,--out", sim.out, "Output directory")->required();

    FilterArgs flt;
    auto* filter = app.add_subcommand("filter", "Filter a measured record");
    filter->add_option("record", flt.record, "Record CSV (t,I[,Q])")->required();
    filter->add_option("-c,--calibration", flt.calibration, "Calibration JSON")->required();
    filter->add_option("--config", flt.config, "Config JSON")->required();
    filter->add_option("-o,--out", flt.out, "Output directory")->required();
    filter->add_flag("--fixed-frame", flt.fixed_frame, "Record is in fixed (I, Q) axes");

    VerifyArgs ver;
    auto* verify = app.add_subcommand("verify", "Run verification suites");
    verify->add_option("--suite", ver.suite, "coherent, bayes, sde, vacuum or all");
    verify->add_option("--report", ver.report, "Also write the JSON report here");
    verify->add_option("--scale", ver.scale, "Multiplier for Monte Carlo sample counts");
    verify->add_option("--seed", ver.seed, "Seed");

    std::string steady_config;
    auto* steady = app.add_subcommand("steady-state", "Print steady-state fields and rates");
    steady->add_option("config", steady_config, "Config JSON")->required();

    SweepArgs swp;
    auto* sweep = app.add_subcommand("sweep", "Steady-state quantities over a parameter grid");
    sweep->add_option("config", swp.config, "Config JSON")->required();
    sweep->add_option("-p,--param", swp.param, "chi, kappa, epsilon, eta or phi_a")->required();
    sweep->add_option("--values", swp.values, "Comma-separated values")->delimiter(',');
    sweep->add_option("--range", swp.range, "start:stop:count");
    sweep->add_option("-o,--out", swp.out, "Output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*simulate) return cmd_simulate(sim);
        if (*filter) return cmd_filter(flt);
        if (*verify) return cmd_verify(ver);
        if (*steady) return cmd_steady_state(steady_config);
        if (*sweep) return cmd_sweep(swp);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

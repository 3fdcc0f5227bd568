#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "cqb/io.hpp"

using namespace cqb;
namespace fs = std::filesystem;

namespace {

const fs::path& work() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / ("cqb_cli_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args, const char* tag = "last") {
    const std::string cmd = std::string(CQBAYES_PATH) + " " + args + " >" + (work() / (std::string(tag) + ".out")).string() +
                            " 2>" + (work() / (std::string(tag) + ".err")).string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string out(const char* tag = "last") { return read_text(work() / (std::string(tag) + ".out")); }
std::string err(const char* tag = "last") { return read_text(work() / (std::string(tag) + ".err")); }

fs::path config(const std::string& name, const Json& tree) {
    const fs::path p = work() / name;
    write_text(p, tree.dump(2));
    return p;
}

Json small(const char* mode) {
    return Json::parse(std::string(R"({"system": {"chi": 0.4, "drive": [{"start": 0, "value": 1}, {"start": 0.5, "value": [0.5, 0.5]}]},
        "measurement": {"mode": ")") + mode + R"(", "amplified_phase": 0.3, "eta_amp": 0.9, "signal_offset": 0.7},
        "initial": {"c0": 0.6, "c1": 0.8},
        "grid": {"t_end": 1.0, "dt": 0.01}, "seed": 5})");
}

StatesTable states(const fs::path& p) {
    std::istringstream in(read_text(p));
    return read_states_csv(in);
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("simulate") == 2);
    CHECK(run("--help") == 0);
}

TEST_CASE("config errors exit with 2 and name the field") {
    const auto bad = config("bad.json", Json::parse(R"({"system": {"kappa": -1}})"));
    CHECK(run("simulate " + bad.string() + " --out " + (work() / "x").string()) == 2);
    CHECK(err().find("kappa") != std::string::npos);
    const auto typo = config("typo.json", Json::parse(R"({"measurment": {}})"));
    CHECK(run("steady-state " + typo.string()) == 2);
    CHECK(err().find("measurment") != std::string::npos);
    CHECK(run("steady-state " + (work() / "nope.json").string()) == 2);
}

TEST_CASE("simulate is deterministic per seed") {
    const auto cfg = config("ps.json", small("phase_sensitive"));
    REQUIRE(run("simulate " + cfg.string() + " -n 1 --seed 42 --out " + (work() / "a").string()) == 0);
    REQUIRE(run("simulate " + cfg.string() + " -n 1 --seed 42 --out " + (work() / "b").string()) == 0);
    for (const char* f : {"traj_000000_record.csv", "traj_000000_states.csv", "summary.json", "manifest.json"}) {
        CHECK(read_text(work() / "a" / f) == read_text(work() / "b" / f));
    }
    REQUIRE(run("simulate " + cfg.string() + " -n 1 --seed 43 --out " + (work() / "c").string()) == 0);
    CHECK(read_text(work() / "a" / "traj_000000_record.csv") != read_text(work() / "c" / "traj_000000_record.csv"));
}

TEST_CASE("manifest lists per-trajectory seeds") {
    auto tree = small("phase_preserving");
    tree["grid"]["t_end"] = 0.1;
    const auto cfg = config("short.json", tree);
    REQUIRE(run("simulate " + cfg.string() + " -n 100 --seed 1000 --out " + (work() / "many").string()) == 0);
    const Json m = Json::parse(read_text(work() / "many" / "manifest.json"));
    REQUIRE(m["trajectories"].size() == 100);
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(m["trajectories"][i]["seed"].get<std::uint64_t>() == 1000 + i);
        CHECK(fs::exists(work() / "many" / m["trajectories"][i]["record"].get<std::string>()));
    }
}

TEST_CASE("ensemble summary follows the ensemble chain") {
    const auto cfg = config("ens.json", small("phase_sensitive"));
    REQUIRE(run("simulate " + cfg.string() + " -n 2000 --out " + (work() / "ens").string()) == 0);
    const auto s = summary_from_json(Json::parse(read_text(work() / "ens" / "summary.json")));
    const Json chain = Json::parse(read_text(work() / "ens" / "summary.json"))["ensemble_chain"];
    REQUIRE(chain["rho10_re"].size() == s.times.size());
    for (std::size_t k = 10; k < s.times.size(); k += 20) {
        CHECK(std::abs(s.rho10_re_mean[k] - chain["rho10_re"][k].get<double>()) <= 3 * s.rho10_re_se[k]);
        CHECK(std::abs(s.rho10_im_mean[k] - chain["rho10_im"][k].get<double>()) <= 3 * s.rho10_im_se[k]);
    }
}

TEST_CASE("simulate then filter reproduces the trajectory") {
    for (const char* mode : {"phase_sensitive", "phase_preserving"}) {
        const auto cfg = config(std::string(mode) + ".json", small(mode));
        const fs::path sim = work() / (std::string("sim_") + mode);
        const fs::path flt = work() / (std::string("flt_") + mode);
        REQUIRE(run("simulate " + cfg.string() + " -n 2 --out " + sim.string()) == 0);
        REQUIRE(run("filter " + (sim / "traj_000001_record.csv").string() + " --calibration " +
                    (sim / "calibration.json").string() + " --config " + cfg.string() + " --out " + flt.string()) == 0);
        const auto a = states(sim / "traj_000001_states.csv");
        const auto b = states(flt / "states.csv");
        REQUIRE(a.states.size() == b.states.size());
        double worst = 0.0;
        for (std::size_t k = 0; k < a.states.size(); ++k) {
            CHECK(a.times[k] == b.times[k]);
            worst = std::max({worst, std::abs(a.states[k].rho11() - b.states[k].rho11()),
                              std::abs(a.states[k].rho10() - b.states[k].rho10()),
                              std::abs(a.states[k].alpha1() - b.states[k].alpha1())});
        }
        CHECK(worst < 1e-9);
        const Json lk = Json::parse(read_text(flt / "likelihood.json"));
        CHECK(lk.contains("log_likelihood_global"));
        CHECK(lk.contains("log_likelihood_local"));
        CHECK(read_text(flt / "states.csv").find("gamma_d,stark_s") != std::string::npos);
    }
}

TEST_CASE("filter rejects malformed records") {
    const auto pp = config("pp_only.json", small("phase_preserving"));
    const auto cal = config("cal.json", Json::parse(R"({"spectral_density": 1, "i0": -1, "i1": 1, "q0": 0})"));
    write_text(work() / "noq.csv", "t,I\n0.01,0.5\n0.02,0.1\n");
    CHECK(run("filter " + (work() / "noq.csv").string() + " -c " + cal.string() + " --config " + pp.string() +
              " --out " + (work() / "f1").string()) == 2);
    CHECK(err().find("Q") != std::string::npos);
    write_text(work() / "back.csv", "t,I,Q\n0.02,0.5,0\n0.01,0.1,0\n");
    CHECK(run("filter " + (work() / "back.csv").string() + " -c " + cal.string() + " --config " + pp.string() +
              " --out " + (work() / "f2").string()) == 2);
    CHECK(err().find("increasing") != std::string::npos);
}

TEST_CASE("verify reports and exit codes") {
    CHECK(run("verify --suite nonsense") == 2);
    CHECK(run("verify --suite coherent --report " + (work() / "coh.json").string()) == 0);
    const Json r = Json::parse(read_text(work() / "coh.json"));
    CHECK(r["passed"].get<bool>());
    bool found = false;
    for (const auto& c : r["checks"]) {
        found = found || c["name"] == "inner_product_vs_fock_sum";
        CHECK(c.contains("measured"));
        CHECK(c.contains("tolerance"));
        CHECK(c.contains("verdict"));
    }
    CHECK(found);

    // The Ito stepper converges at strong order 1/2, so this suite reports a failure.
    CHECK(run("verify --suite sde --scale 0.1") == 1);
    const Json s = Json::parse(out());
    CHECK_FALSE(s["passed"].get<bool>());
}

TEST_CASE("vacuum suite includes the decay-rate fit") {
    const int code = run("verify --suite vacuum --scale 0.02");
    CHECK((code == 0 || code == 1));
    CHECK(out().find("correlator_decay_rate") != std::string::npos);
}

TEST_CASE("steady-state and sweep") {
    const auto cfg = config("ss.json", Json::parse(R"({"system": {"detuning": 0.2, "chi": 0.5, "drive": 1.5}})"));
    REQUIRE(run("steady-state " + cfg.string()) == 0);
    const Json s = Json::parse(out());
    const cplx a1{s["alpha1"][0].get<double>(), s["alpha1"][1].get<double>()};
    CHECK(std::abs(a1 - cplx{0.0, -1.5} / cplx{0.5, 0.7}) < 1e-14);
    CHECK(s["derived"]["gamma_d"].get<double>() > 0.0);

    REQUIRE(run("sweep " + cfg.string() + " --param chi --values 0.1,0.2,0.3") == 0);
    std::istringstream rows(out());
    std::string line;
    int n = 0;
    while (std::getline(rows, line)) ++n;
    CHECK(n == 4);
    REQUIRE(run("sweep " + cfg.string() + " --param kappa --range 0.5:2:4 --out " + (work() / "sw.csv").string()) == 0);
    CHECK(read_text(work() / "sw.csv").rfind("value,") == 0);
    CHECK(run("sweep " + cfg.string() + " --param bogus --values 1") == 2);
    CHECK(run("sweep " + cfg.string() + " --param eta --values 1.5") == 2);
}

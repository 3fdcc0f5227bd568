#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cqb/engine.hpp"

namespace cqb {

using Json = nlohmann::json;

// Config tree <-> RunConfig. Unknown keys and wrong types raise ConfigError naming the
// field ("system.kappa: ..."). With "units": "mhz" every rate and frequency is read in
// MHz and multiplied by 2 pi; times are then in microseconds. Serialization always
// writes "units": "kappa".
RunConfig parse_config(const Json& tree);
Json config_to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

// Measurement record CSV with header t,I or t,I,Q. Rows hold the interval end time
// and the raw (uncentered) signal.
void write_record_csv(std::ostream& out, std::span<const MeasurementSample> samples,
                      double signal_offset);
// Reads a record; dt of each row is measured from the previous row, the first from
// t_start. Throws ConfigError on malformed rows or non-increasing time.
std::vector<MeasurementSample> read_record_csv(std::istream& in, double t_start);

// One row per grid point. With derived values the gamma_d and stark_s columns are added.
void write_states_csv(std::ostream& out, std::span<const double> times,
                      std::span<const HybridState> states,
                      std::span<const DerivedQuantities> derived = {});
struct StatesTable {
    std::vector<double> times;
    std::vector<HybridState> states;
};
StatesTable read_states_csv(std::istream& in);

// Calibration JSON: {"spectral_density": S, "i0": .., "i1": .., "q0": ..} or
// {"spectral_density": S, "trace": "file.csv"} with trace columns t,I0,I1[,Q0];
// relative trace paths are resolved against the JSON file's directory.
Calibration load_calibration(const std::filesystem::path& path);
void write_calibration(const std::filesystem::path& json_path,
                       const std::filesystem::path& trace_path, const Calibration& calibration);

Json summary_to_json(const EnsembleSummary& summary);
EnsembleSummary summary_from_json(const Json& tree);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cqb

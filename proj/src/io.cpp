#include "cqb/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "cqb/field_dynamics.hpp"

namespace cqb {

namespace {

constexpr double kTwoPi = 2.0 * kPi;

[[noreturn]] void fail(const std::string& field, const std::string& message) {
    throw ConfigError(field + ": " + message);
}

void reject_unknown(const Json& obj, const std::string& where, std::set<std::string> allowed) {
    if (!obj.is_object()) {
        fail(where.empty() ? "config" : where, "expected an object");
    }
    for (const auto& item : obj.items()) {
        if (!allowed.contains(item.key())) {
            fail(where.empty() ? item.key() : where + "." + item.key(), "unknown key");
        }
    }
}

double number(const Json& v, const std::string& field) {
    if (!v.is_number()) {
        fail(field, "expected a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        fail(field, "must be finite");
    }
    return x;
}

cplx complex_value(const Json& v, const std::string& field) {
    if (v.is_number()) {
        return {number(v, field), 0.0};
    }
    if (v.is_array() && v.size() == 2) {
        return {number(v[0], field + "[0]"), number(v[1], field + "[1]")};
    }
    fail(field, "expected a number or [re, im]");
}

Json complex_json(cplx z) { return Json::array({z.real(), z.imag()}); }

template <class T, class Read>
Schedule<T> schedule(const Json& v, const std::string& field, Read read) {
    if (!v.is_array() || (v.size() == 2 && v[0].is_number())) {
        return Schedule<T>(read(v, field));
    }
    std::vector<typename Schedule<T>::Piece> pieces;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const std::string f = field + "[" + std::to_string(k) + "]";
        reject_unknown(v[k], f, {"start", "value"});
        if (!v[k].contains("start") || !v[k].contains("value")) {
            fail(f, "pieces need start and value");
        }
        pieces.push_back({number(v[k]["start"], f + ".start"), read(v[k]["value"], f + ".value")});
    }
    try {
        return Schedule<T>(std::move(pieces));
    } catch (const ConfigError& e) {
        fail(field, e.what());
    }
}

template <class T, class Write>
Json schedule_json(const Schedule<T>& s, Write write) {
    if (s.pieces().size() == 1 && s.pieces()[0].start == 0.0) {
        return write(s.pieces()[0].value);
    }
    Json arr = Json::array();
    for (const auto& p : s.pieces()) {
        arr.push_back({{"start", p.start}, {"value", write(p.value)}});
    }
    return arr;
}

template <class T>
void maybe(const Json& obj, const char* key, const std::string& where, T& target, double scale = 1.0) {
    if (obj.contains(key)) {
        target = number(obj[key], where + "." + key) * scale;
    }
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        const auto a = cell.find_first_not_of(" \t\r");
        const auto b = cell.find_last_not_of(" \t\r");
        cells.push_back(a == std::string::npos ? std::string{} : cell.substr(a, b - a + 1));
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

double parse_cell(const std::string& cell, const std::string& where) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (cell.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value)) {
        throw ConfigError(where + ": cannot parse '" + cell + "' as a number");
    }
    return value;
}

// Header name -> column index; rows read as numbers.
struct CsvTable {
    std::map<std::string, std::size_t> columns;
    std::vector<std::vector<double>> rows;
};

CsvTable read_csv(std::istream& in, const std::string& what) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto cells = split_row(line);
        if (!header) {
            for (std::size_t k = 0; k < cells.size(); ++k) {
                if (!table.columns.emplace(cells[k], k).second) {
                    throw ConfigError(what + ": duplicate column '" + cells[k] + "'");
                }
            }
            width = cells.size();
            header = true;
            continue;
        }
        if (cells.size() != width) {
            throw ConfigError(what + " line " + std::to_string(line_no) + ": expected " +
                              std::to_string(width) + " columns");
        }
        std::vector<double> row;
        row.reserve(width);
        for (const auto& c : cells) {
            row.push_back(parse_cell(c, what + " line " + std::to_string(line_no)));
        }
        table.rows.push_back(std::move(row));
    }
    if (!header) {
        throw ConfigError(what + ": missing header");
    }
    return table;
}

std::size_t column(const CsvTable& t, const std::string& name, const std::string& what) {
    const auto it = t.columns.find(name);
    if (it == t.columns.end()) {
        throw ConfigError(what + ": missing column '" + name + "'");
    }
    return it->second;
}

void check_increasing(std::span<const double> times, double start, const std::string& what) {
    double prev = start;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(times[k] > prev)) {
            throw ConfigError(what + ": time must be strictly increasing (data row " +
                              std::to_string(k + 1) + ")");
        }
        prev = times[k];
    }
}

}  // namespace

std::string format_double(double value) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

RunConfig parse_config(const Json& tree) {
    reject_unknown(tree, "", {"units", "system", "measurement", "initial", "grid", "seed"});
    double rate = 1.0;
    if (tree.contains("units")) {
        if (!tree["units"].is_string()) fail("units", "expected \"kappa\" or \"mhz\"");
        const auto u = tree["units"].get<std::string>();
        if (u == "mhz") {
            rate = kTwoPi;
        } else if (u != "kappa") {
            fail("units", "expected \"kappa\" or \"mhz\"");
        }
    }

    RunConfig c;
    if (tree.contains("system")) {
        const Json& s = tree["system"];
        reject_unknown(s, "system",
                       {"detuning", "chi", "kappa", "kappa_out", "kappa_col", "drive", "configuration"});
        maybe(s, "detuning", "system", c.system.detuning, rate);
        maybe(s, "chi", "system", c.system.chi, rate);
        maybe(s, "kappa", "system", c.system.kappa, rate);
        maybe(s, "kappa_out", "system", c.system.kappa_out, rate);
        maybe(s, "kappa_col", "system", c.system.kappa_col, rate);
        if (s.contains("drive")) {
            c.system.drive = schedule<cplx>(s["drive"], "system.drive", [&](const Json& v, const std::string& f) {
                return complex_value(v, f) * rate;
            });
        }
        if (s.contains("configuration")) {
            const Json& v = s["configuration"];
            if (v == "transmission") {
                c.system.configuration = Configuration::transmission;
            } else if (v == "reflection") {
                c.system.configuration = Configuration::reflection;
            } else {
                fail("system.configuration", "expected \"transmission\" or \"reflection\"");
            }
        }
    }
    if (tree.contains("measurement")) {
        const Json& m = tree["measurement"];
        reject_unknown(m, "measurement",
                       {"mode", "amplified_phase", "spectral_density", "eta_amp", "gamma_int",
                        "signal_offset"});
        if (m.contains("mode")) {
            const Json& v = m["mode"];
            if (v == "phase_sensitive") {
                c.measurement.mode = Mode::phase_sensitive;
            } else if (v == "phase_preserving") {
                c.measurement.mode = Mode::phase_preserving;
            } else {
                fail("measurement.mode", "expected \"phase_sensitive\" or \"phase_preserving\"");
            }
        }
        if (m.contains("amplified_phase")) {
            c.measurement.amplified_phase = schedule<double>(
                m["amplified_phase"], "measurement.amplified_phase", number);
        }
        maybe(m, "spectral_density", "measurement", c.measurement.spectral_density);
        maybe(m, "eta_amp", "measurement", c.measurement.eta_amp);
        maybe(m, "gamma_int", "measurement", c.measurement.gamma_int, rate);
        maybe(m, "signal_offset", "measurement", c.measurement.signal_offset);
    }
    if (tree.contains("grid")) {
        const Json& g = tree["grid"];
        reject_unknown(g, "grid", {"t_start", "t_end", "dt"});
        maybe(g, "t_start", "grid", c.t_start);
        maybe(g, "t_end", "grid", c.t_end);
        maybe(g, "dt", "grid", c.dt);
    }
    if (tree.contains("seed")) {
        if (!tree["seed"].is_number_unsigned()) fail("seed", "expected a non-negative integer");
        c.seed = tree["seed"].get<std::uint64_t>();
    }
    require_valid(c);

    if (tree.contains("initial")) {
        const Json& i = tree["initial"];
        reject_unknown(i, "initial",
                       {"c0", "c1", "rho00", "rho11", "rho10", "alpha0", "alpha1", "phase0", "phase1"});
        auto field = [&](const char* key, Branch j) -> cplx {
            if (!i.contains(key)) return {};
            if (i[key] == "steady") {
                return steady_state_field(c.system, j, c.t_start);
            }
            return complex_value(i[key], std::string("initial.") + key);
        };
        const cplx a0 = field("alpha0", Branch::zero);
        const cplx a1 = field("alpha1", Branch::one);
        double p0 = 0.0, p1 = 0.0;
        maybe(i, "phase0", "initial", p0);
        maybe(i, "phase1", "initial", p1);
        try {
            if (i.contains("c0") || i.contains("c1")) {
                if (i.contains("rho00") || i.contains("rho11") || i.contains("rho10")) {
                    fail("initial", "give either amplitudes c0, c1 or matrix elements rho");
                }
                const cplx c0 = i.contains("c0") ? complex_value(i["c0"], "initial.c0") : cplx{};
                const cplx c1 = i.contains("c1") ? complex_value(i["c1"], "initial.c1") : cplx{};
                const double norm = std::norm(c0) + std::norm(c1);
                if (std::abs(norm - 1.0) > 1e-12) fail("initial", "|c0|^2 + |c1|^2 must equal 1");
                c.initial = HybridState::pure(c0, c1, a0, a1).with_fields(a0, a1, p0, p1);
            } else {
                double rho00 = 1.0, rho11 = 0.0;
                maybe(i, "rho00", "initial", rho00);
                maybe(i, "rho11", "initial", rho11);
                if (i.contains("rho00") != i.contains("rho11")) {
                    fail("initial", "rho00 and rho11 must be given together");
                }
                const cplx rho10 = i.contains("rho10") ? complex_value(i["rho10"], "initial.rho10") : cplx{};
                c.initial = HybridState(rho00, rho11, rho10, a0, a1, p0, p1);
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            fail("initial", e.what());
        }
    }
    return c;
}

Json config_to_json(const RunConfig& c) {
    Json t;
    t["units"] = "kappa";
    t["system"] = {
        {"detuning", c.system.detuning},
        {"chi", c.system.chi},
        {"kappa", c.system.kappa},
        {"kappa_out", c.system.kappa_out},
        {"kappa_col", c.system.kappa_col},
        {"drive", schedule_json(c.system.drive, complex_json)},
        {"configuration",
         c.system.configuration == Configuration::transmission ? "transmission" : "reflection"},
    };
    t["measurement"] = {
        {"mode", c.measurement.mode == Mode::phase_sensitive ? "phase_sensitive" : "phase_preserving"},
        {"amplified_phase", schedule_json(c.measurement.amplified_phase, [](double x) { return Json(x); })},
        {"spectral_density", c.measurement.spectral_density},
        {"eta_amp", c.measurement.eta_amp},
        {"gamma_int", c.measurement.gamma_int},
        {"signal_offset", c.measurement.signal_offset},
    };
    t["initial"] = {
        {"rho00", c.initial.rho00()},
        {"rho11", c.initial.rho11()},
        {"rho10", complex_json(c.initial.rho10())},
        {"alpha0", complex_json(c.initial.alpha0())},
        {"alpha1", complex_json(c.initial.alpha1())},
        {"phase0", c.initial.phase0()},
        {"phase1", c.initial.phase1()},
    };
    t["grid"] = {{"t_start", c.t_start}, {"t_end", c.t_end}, {"dt", c.dt}};
    t["seed"] = c.seed;
    return t;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError(path.string() + ": cannot open");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text) || !out.flush()) {
        throw std::runtime_error(path.string() + ": cannot write");
    }
}

RunConfig load_config(const std::filesystem::path& path) {
    Json tree;
    try {
        tree = Json::parse(read_text(path));
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(tree);
}

void write_record_csv(std::ostream& out, std::span<const MeasurementSample> samples,
                      double signal_offset) {
    const bool with_q = !samples.empty() && samples.front().q_bar.has_value();
    out << (with_q ? "t,I,Q\n" : "t,I\n");
    for (const auto& s : samples) {
        out << format_double(s.t_end) << ',' << format_double(s.i_bar + signal_offset);
        if (with_q) {
            out << ',' << format_double(s.q_bar.value_or(0.0) + signal_offset);
        }
        out << '\n';
    }
}

std::vector<MeasurementSample> read_record_csv(std::istream& in, double t_start) {
    const CsvTable table = read_csv(in, "record");
    const std::size_t ct = column(table, "t", "record");
    const std::size_t ci = column(table, "I", "record");
    const auto q = table.columns.find("Q");
    std::vector<double> times;
    for (const auto& r : table.rows) times.push_back(r[ct]);
    check_increasing(times, t_start, "record");
    std::vector<MeasurementSample> out;
    double prev = t_start;
    for (const auto& r : table.rows) {
        MeasurementSample s;
        s.t_end = r[ct];
        s.dt = r[ct] - prev;
        s.i_bar = r[ci];
        if (q != table.columns.end()) s.q_bar = r[q->second];
        prev = r[ct];
        out.push_back(s);
    }
    return out;
}

void write_states_csv(std::ostream& out, std::span<const double> times,
                      std::span<const HybridState> states,
                      std::span<const DerivedQuantities> derived) {
    if (times.size() != states.size() || (!derived.empty() && derived.size() != states.size())) {
        throw std::invalid_argument("write_states_csv: column lengths differ");
    }
    out << "t,rho00,rho11,rho10_re,rho10_im,alpha0_re,alpha0_im,alpha1_re,alpha1_im,phase0,phase1";
    out << (derived.empty() ? "\n" : ",gamma_d,stark_s\n");
    for (std::size_t k = 0; k < states.size(); ++k) {
        const HybridState& s = states[k];
        const double v[] = {times[k],           s.rho00(),          s.rho11(),
                            s.rho10().real(),   s.rho10().imag(),   s.alpha0().real(),
                            s.alpha0().imag(),  s.alpha1().real(),  s.alpha1().imag(),
                            s.phase0(),         s.phase1()};
        for (std::size_t j = 0; j < std::size(v); ++j) {
            out << (j ? "," : "") << format_double(v[j]);
        }
        if (!derived.empty()) {
            out << ',' << format_double(derived[k].gamma_d) << ',' << format_double(derived[k].stark_s);
        }
        out << '\n';
    }
}

StatesTable read_states_csv(std::istream& in) {
    const CsvTable table = read_csv(in, "states");
    const char* names[] = {"t",         "rho00",     "rho11",     "rho10_re", "rho10_im", "alpha0_re",
                           "alpha0_im", "alpha1_re", "alpha1_im", "phase0",   "phase1"};
    std::size_t idx[std::size(names)];
    for (std::size_t j = 0; j < std::size(names); ++j) idx[j] = column(table, names[j], "states");
    StatesTable out;
    for (const auto& r : table.rows) {
        out.times.push_back(r[idx[0]]);
        out.states.emplace_back(r[idx[1]], r[idx[2]], cplx{r[idx[3]], r[idx[4]]},
                                cplx{r[idx[5]], r[idx[6]]}, cplx{r[idx[7]], r[idx[8]]}, r[idx[9]],
                                r[idx[10]]);
    }
    return out;
}

Calibration load_calibration(const std::filesystem::path& path) {
    Json tree;
    try {
        tree = Json::parse(read_text(path));
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    reject_unknown(tree, "calibration", {"spectral_density", "i0", "i1", "q0", "trace"});
    if (!tree.contains("spectral_density")) {
        fail("calibration.spectral_density", "required");
    }
    const double s = number(tree["spectral_density"], "calibration.spectral_density");
    if (tree.contains("trace")) {
        if (tree.contains("i0") || tree.contains("i1") || tree.contains("q0")) {
            fail("calibration", "give either a trace or constants i0, i1, q0");
        }
        if (!tree["trace"].is_string()) fail("calibration.trace", "expected a file path");
        std::filesystem::path trace = tree["trace"].get<std::string>();
        if (trace.is_relative()) trace = path.parent_path() / trace;
        std::istringstream in(read_text(trace));
        const CsvTable table = read_csv(in, "calibration trace");
        const std::size_t ct = column(table, "t", "calibration trace");
        const std::size_t c0 = column(table, "I0", "calibration trace");
        const std::size_t c1 = column(table, "I1", "calibration trace");
        const auto cq = table.columns.find("Q0");
        std::vector<double> times;
        std::vector<CalibrationPoint> points;
        for (const auto& r : table.rows) {
            times.push_back(r[ct]);
            points.push_back({r[c0], r[c1], cq == table.columns.end() ? 0.0 : r[cq->second]});
        }
        check_increasing(times, -std::numeric_limits<double>::infinity(), "calibration trace");
        return Calibration::trace(s, std::move(times), std::move(points));
    }
    if (!tree.contains("i0") || !tree.contains("i1")) {
        fail("calibration", "constants i0 and i1 are required without a trace");
    }
    CalibrationPoint p{number(tree["i0"], "calibration.i0"), number(tree["i1"], "calibration.i1"), 0.0};
    if (tree.contains("q0")) p.q0 = number(tree["q0"], "calibration.q0");
    return Calibration::constant(s, p);
}

void write_calibration(const std::filesystem::path& json_path,
                       const std::filesystem::path& trace_path, const Calibration& calibration) {
    Json tree{{"spectral_density", calibration.spectral_density()}};
    if (!calibration.is_trace()) {
        const CalibrationPoint p = calibration.points().front();
        tree["i0"] = p.i0;
        tree["i1"] = p.i1;
        tree["q0"] = p.q0;
    } else {
        std::ostringstream csv;
        csv << "t,I0,I1,Q0\n";
        for (std::size_t k = 0; k < calibration.times().size(); ++k) {
            const CalibrationPoint p = calibration.points()[k];
            csv << format_double(calibration.times()[k]) << ',' << format_double(p.i0) << ','
                << format_double(p.i1) << ',' << format_double(p.q0) << '\n';
        }
        write_text(trace_path, csv.str());
        const auto dir = json_path.parent_path().empty() ? std::filesystem::path(".") : json_path.parent_path();
        tree["trace"] = std::filesystem::proximate(trace_path, dir).generic_string();
    }
    write_text(json_path, tree.dump(2) + "\n");
}

Json summary_to_json(const EnsembleSummary& s) {
    return {
        {"trajectories", s.trajectories},
        {"times", s.times},
        {"rho11_mean", s.rho11_mean},
        {"rho11_se", s.rho11_se},
        {"rho10_re_mean", s.rho10_re_mean},
        {"rho10_re_se", s.rho10_re_se},
        {"rho10_im_mean", s.rho10_im_mean},
        {"rho10_im_se", s.rho10_im_se},
        {"purity_mean", s.purity_mean},
        {"purity_se", s.purity_se},
        {"histogram_edges", s.histogram_edges},
        {"histogram_counts", s.histogram_counts},
    };
}

EnsembleSummary summary_from_json(const Json& t) {
    EnsembleSummary s;
    try {
        t.at("trajectories").get_to(s.trajectories);
        t.at("times").get_to(s.times);
        t.at("rho11_mean").get_to(s.rho11_mean);
        t.at("rho11_se").get_to(s.rho11_se);
        t.at("rho10_re_mean").get_to(s.rho10_re_mean);
        t.at("rho10_re_se").get_to(s.rho10_re_se);
        t.at("rho10_im_mean").get_to(s.rho10_im_mean);
        t.at("rho10_im_se").get_to(s.rho10_im_se);
        t.at("purity_mean").get_to(s.purity_mean);
        t.at("purity_se").get_to(s.purity_se);
        t.at("histogram_edges").get_to(s.histogram_edges);
        t.at("histogram_counts").get_to(s.histogram_counts);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("summary: ") + e.what());
    }
    return s;
}

}  // namespace cqb

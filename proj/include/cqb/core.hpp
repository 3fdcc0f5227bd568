#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cqb {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// Thrown for invalid configuration or arguments. Messages name the offending field.
class ConfigError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

enum class Branch { zero = 0, one = 1 };
enum class Configuration { transmission, reflection };
enum class Mode { phase_sensitive, phase_preserving };

// +1 for the qubit-1 branch, -1 for qubit-0.
constexpr double branch_sign(Branch j) { return j == Branch::one ? 1.0 : -1.0; }

// Piecewise-constant function of time. Piece k holds on [start_k, start_{k+1});
// the first piece also covers every time before its start.
template <class T>
class Schedule {
   public:
    struct Piece {
        double start;
        T value;

        bool operator==(const Piece&) const = default;
    };

    Schedule() : pieces_{{0.0, T{}}} {}
    explicit Schedule(T constant) : pieces_{{0.0, constant}} {}
    explicit Schedule(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {
        if (pieces_.empty()) {
            throw ConfigError("schedule: at least one piece is required");
        }
        for (std::size_t k = 1; k < pieces_.size(); ++k) {
            if (!(pieces_[k].start > pieces_[k - 1].start)) {
                throw ConfigError("schedule: piece start times must be strictly increasing");
            }
        }
    }

    const T& at(double t) const {
        std::size_t k = 0;
        while (k + 1 < pieces_.size() && pieces_[k + 1].start <= t) {
            ++k;
        }
        return pieces_[k].value;
    }

    // Piece boundaries strictly inside (t0, t1).
    std::vector<double> breakpoints(double t0, double t1) const {
        std::vector<double> out;
        for (std::size_t k = 1; k < pieces_.size(); ++k) {
            if (pieces_[k].start > t0 && pieces_[k].start < t1) {
                out.push_back(pieces_[k].start);
            }
        }
        return out;
    }

    std::span<const Piece> pieces() const { return pieces_; }

    bool operator==(const Schedule&) const = default;

   private:
    std::vector<Piece> pieces_;
};

struct SystemParams {
    double detuning = 0.0;  // omega_r - omega_d
    double chi = 0.5;
    double kappa = 1.0;
    double kappa_out = 1.0;
    double kappa_col = 1.0;
    Schedule<cplx> drive{cplx{1.0, 0.0}};
    Configuration configuration = Configuration::transmission;

    bool operator==(const SystemParams&) const = default;
};

struct MeasurementSettings {
    Mode mode = Mode::phase_sensitive;
    Schedule<double> amplified_phase{0.0};
    double spectral_density = 1.0;
    double eta_amp = 1.0;
    double gamma_int = 0.0;
    double signal_offset = 0.0;

    bool operator==(const MeasurementSettings&) const = default;
};

struct Violation {
    std::string field;
    std::string message;
};

std::vector<Violation> validate(const SystemParams& params);
std::vector<Violation> validate(const MeasurementSettings& settings);

// Throws ConfigError listing every violation.
void require_valid(const SystemParams& params, const MeasurementSettings& settings);

// eta = (kappa_col / kappa) * eta_amp.
double total_efficiency(const SystemParams& params, const MeasurementSettings& settings);

// Qubit-resonator state: qubit density matrix in the {|0>,|1>} basis with branch
// fields alpha_j attached to each basis state.
class HybridState {
   public:
    static constexpr double kTolerance = 1e-12;

    HybridState(double rho00, double rho11, cplx rho10, cplx alpha0, cplx alpha1,
                double phase0 = 0.0, double phase1 = 0.0);

    // c0|0>|alpha0> + c1|1>|alpha1>.
    static HybridState pure(cplx c0, cplx c1, cplx alpha0, cplx alpha1);

    double rho00() const { return rho00_; }
    double rho11() const { return rho11_; }
    cplx rho10() const { return rho10_; }
    cplx rho01() const { return std::conj(rho10_); }
    cplx alpha0() const { return alpha0_; }
    cplx alpha1() const { return alpha1_; }
    cplx alpha(Branch j) const { return j == Branch::one ? alpha1_ : alpha0_; }
    double phase0() const { return phase0_; }
    double phase1() const { return phase1_; }

    // Tr(rho^2) of the 2x2 matrix built from rho_jj'.
    double purity() const;

    HybridState with_qubit(double rho00, double rho11, cplx rho10) const;
    HybridState with_fields(cplx alpha0, cplx alpha1, double phase0, double phase1) const;

    bool operator==(const HybridState&) const = default;

   private:
    double rho00_;
    double rho11_;
    cplx rho10_;
    cplx alpha0_;
    cplx alpha1_;
    double phase0_;
    double phase1_;
};

// One time-averaged record interval [t_end - dt, t_end].
struct MeasurementSample {
    double t_end = 0.0;
    double dt = 0.0;
    double i_bar = 0.0;
    std::optional<double> q_bar;

    bool operator==(const MeasurementSample&) const = default;
};

// D = S_I / (2 dt).
double record_variance(double spectral_density, double dt);

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    MeasurementSettings settings;
    std::vector<double> times;
    std::vector<HybridState> states;
    std::vector<MeasurementSample> samples;
};

}  // namespace cqb

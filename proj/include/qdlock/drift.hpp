// Emitter frequency perturbations: deterministic piezo creep, actuator
// response to commanded voltage steps, stochastic 1/f + white frequency
// noise, and creep-parameter fitting.
#ifndef QDLOCK_DRIFT_HPP
#define QDLOCK_DRIFT_HPP

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "qdlock/common.hpp"

namespace qdlock {

/// Logarithmic creep law: dnu(t) = dnu0 * (1 + alpha*log10(t - t0)) with
/// (t - t0) in minutes. dnu0 is the detuning one minute after the step.
struct CreepModel {
    double dnu0_ghz = 0.0;
    double alpha = 0.0;
    double t0_s = 0.0;
};

/// Validity floor of the log law; below it the value at the floor is held.
inline constexpr double creep_floor_s = 1.0;

/// Detuning at time t. Throws PhysicsError for t <= t0.
double creep_detuning(const CreepModel& model, double t_s);

/// Piezo actuator: static tuning gain plus one scaled creep term per
/// commanded voltage step. Cumulative voltage is clamped to the limits.
struct ActuatorModel {
    double gain_ghz_per_v = 10.0;
    double v_min = -10.0;
    double v_max = 10.0;
    /// Creep detuning 1 minute after a 1 V step; 0 disables actuator creep.
    double creep_dnu0_per_volt = 0.0;
    double creep_alpha = 0.0;
};

struct VoltageStep {
    double t_s = 0.0;
    double delta_v = 0.0;
};

struct ActuatorOffset {
    double dnu_ghz = 0.0;
    bool saturated = false;
};

/// Superposition of all steps with t_step <= t. Steps must be time-ordered.
ActuatorOffset actuator_offset(const ActuatorModel& model,
                               std::span<const VoltageStep> history, double t_s);

/// 1/f + white frequency noise. The flicker part is synthesized as a sum of
/// stationary AR(1) processes with corner frequencies log-spaced 3 per
/// decade across (and one ratio beyond) [f_low, f_high].
struct NoiseModel {
    double h_flicker_ghz2 = 0.0;      // one-sided PSD = h/f at f (GHz^2/Hz * Hz)
    double h_white_ghz2_per_hz = 0.0; // flat one-sided PSD floor
    double f_low_hz = 1e-4;
    double f_high_hz = 4.0;
    std::uint64_t seed = 0;
};

/// Frequency-offset trace in GHz, one sample per dt. Requires
/// dt < 1/(2*f_high). Bit-identical for identical model + duration + dt.
std::vector<double> sample_noise(const NoiseModel& model, double duration_s, double dt_s);

struct CreepFit {
    CreepModel model;
    double dnu0_err_ghz = 0.0;
    double alpha_err = 0.0;
    double residual_rms_ghz = 0.0;
    bool t0_fitted = false;
    int evaluations = 0;
};

/// Least-squares creep fit on (t_s, dnu_ghz) samples. With t0 known the
/// model is linear in (dnu0, dnu0*alpha); otherwise t0 is profiled out by a
/// bounded golden-section search over the linear subproblem. Requires >= 10
/// samples spanning at least one decade in (t - t0).
CreepFit fit_creep(std::span<const double> t_s, std::span<const double> dnu_ghz,
                   std::optional<double> t0_known_s = std::nullopt);

/// Two-column (t_s, dnu_GHz) trace file helpers.
void write_trace(const std::string& path, std::span<const double> t_s,
                 std::span<const double> value, const std::string& header);
std::pair<std::vector<double>, std::vector<double>> read_trace(const std::string& path);

}  // namespace qdlock

#endif

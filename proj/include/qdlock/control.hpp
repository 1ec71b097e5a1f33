// Rate-deviation -> frequency-error conversion, discrete PI control, and the
// closed lock loop: filter transmission -> photon events -> rate estimation
// -> PI -> strain actuator, with creep and 1/f noise injected as disturbance.
#ifndef QDLOCK_CONTROL_HPP
#define QDLOCK_CONTROL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "qdlock/common.hpp"
#include "qdlock/detection.hpp"
#include "qdlock/drift.hpp"
#include "qdlock/estimator.hpp"
#include "qdlock/spectra.hpp"

namespace qdlock {

struct LockConfig {
    double r_set_cps = 0.0;            // reference rate at the set point
    double nu_set_ghz = 0.0;
    double slope_cps_per_ghz = 0.0;    // dR/dnu at nu_set
    double update_period_s = 0.1;
    double target_bandwidth_hz = 0.03;
};

/// dnu = dR / (dR/dnu at the set point).
double rate_to_frequency_error(double delta_r_cps, double slope_cps_per_ghz);

/// Positional discrete PI with clamping anti-windup. Gains carry the loop
/// sign (negative for a positive actuator gain).
class PiController {
public:
    PiController(double kp_v_per_ghz, double ki_v_per_ghz_s, double v_min, double v_max);

    /// output = kp*error + integrator, integrator += ki*error*dt; both clamped.
    double update(double error_ghz, double dt_s);

    double integrator() const { return integrator_; }
    bool saturated() const { return saturated_; }
    double kp() const { return kp_; }
    double ki() const { return ki_; }

private:
    double kp_, ki_;
    double v_min_, v_max_;
    double integrator_ = 0.0;
    bool saturated_ = false;
};

/// Bandwidth -> gains: the PI zero cancels the estimator pole, giving an
/// exactly first-order closed loop at f_bw:
///   kp = -2*pi*f_bw*tau_filter/gain,  ki = kp/tau_filter.
struct PiGains {
    double kp = 0.0;
    double ki = 0.0;
};
PiGains gains_for_bandwidth(double f_bw_hz, double tau_filter_s,
                            double actuator_gain_ghz_per_v);

/// Everything one lock arm needs.
struct LockScenario {
    DetectionChannel channel;          // convolved curve + rates
    LockConfig lock;
    double tau_cycle_s = 2e-6;
    double tau_filter_s = 2.0;
    ActuatorModel actuator;
    bool lock_enabled = true;

    bool creep_enabled = false;
    CreepModel creep;
    bool noise_enabled = false;
    NoiseModel noise;
    double initial_detuning_ghz = 0.0;

    double duration_s = 0.0;
    /// Lock engages this long before t = 0; recording starts at t = 0.
    double settle_s = 0.0;

    /// Feed the estimator the per-cycle arrival probability instead of
    /// sampled Booleans (noise-free diagnostic mode).
    bool deterministic_rate = false;

    /// Divergence threshold on |residual|; simulation stops once exceeded.
    double watchdog_ghz = 1e30;

    // Out-of-loop monitor: an independent transmission channel with no
    // feedback tap, binned for the excess-deviation estimate.
    bool ool_enabled = false;
    FilterCurve ool_curve;
    double ool_nu_op_ghz = 0.0;        // operating point on the monitor curve
    double ool_r_cps = 0.0;            // rate at unit transmission
    double ool_dark_cps = 0.0;
    double ool_slope_cps_per_ghz = 0.0;
    double ool_bin_s = 0.5;
};

/// Closed-loop result, one record per control update from t = 0 on.
struct LockTrace {
    std::vector<double> t_s;
    std::vector<double> dnu_drift_ghz;   // disturbance before correction
    std::vector<double> rate_est_cps;
    std::vector<double> v_ctrl;
    std::vector<double> residual_ghz;    // deviation from the set point
    std::vector<double> ool_counts;      // per ool_bin_s
    double ool_bin_s = 0.0;
    double ool_slope_cps_per_ghz = 0.0;
    bool saturated = false;
    bool diverged = false;

    /// (t_s, dnu_true_GHz, rate_est_cps, v_ctrl_V, dnu_residual_GHz)
    void write(const std::string& path, std::size_t decimate = 1) const;
};

/// Runs the loop. Deterministic per (scenario, seed); throws ConfigError on
/// inconsistent configuration before simulating anything.
LockTrace run_lock(const LockScenario& scenario, std::uint64_t seed);

/// Open-loop drift (creep + noise + initial detuning) over [0, duration],
/// sampled at the control update period.
struct DriftTrace {
    std::vector<double> t_s;
    std::vector<double> dnu_ghz;
};
DriftTrace free_drift_trace(const LockScenario& scenario, std::uint64_t seed);

}  // namespace qdlock

#endif

#include "qdlock/control.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace qdlock {

double rate_to_frequency_error(double delta_r_cps, double slope_cps_per_ghz) {
    if (slope_cps_per_ghz == 0.0)
        throw ConfigError("rate_to_frequency_error: zero discriminator slope");
    return delta_r_cps / slope_cps_per_ghz;
}

PiController::PiController(double kp, double ki, double v_min, double v_max)
    : kp_(kp), ki_(ki), v_min_(v_min), v_max_(v_max) {
    if (!(v_min < v_max)) throw ConfigError("PiController: invalid output limits");
}

double PiController::update(double error_ghz, double dt_s) {
    if (!(dt_s > 0.0)) throw ConfigError("PiController: dt must be positive");
    integrator_ += ki_ * error_ghz * dt_s;
    if (integrator_ < v_min_ || integrator_ > v_max_) {
        integrator_ = clamp(integrator_, v_min_, v_max_);
        saturated_ = true;
    }
    double out = kp_ * error_ghz + integrator_;
    if (out < v_min_ || out > v_max_) {
        out = clamp(out, v_min_, v_max_);
        saturated_ = true;
    }
    return out;
}

PiGains gains_for_bandwidth(double f_bw_hz, double tau_filter_s,
                            double actuator_gain_ghz_per_v) {
    if (!(f_bw_hz > 0.0)) throw ConfigError("gains_for_bandwidth: bandwidth must be positive");
    if (actuator_gain_ghz_per_v == 0.0)
        throw ConfigError("gains_for_bandwidth: actuator gain must be non-zero");
    PiGains g;
    g.kp = -2.0 * pi * f_bw_hz * tau_filter_s / actuator_gain_ghz_per_v;
    g.ki = g.kp / tau_filter_s;
    return g;
}

void LockTrace::write(const std::string& path, std::size_t decimate) const {
    if (decimate == 0) decimate = 1;
    std::ofstream out(path);
    if (!out) throw ConfigError("LockTrace: cannot write " + path);
    out << "# t_s dnu_true_GHz rate_est_cps v_ctrl_V dnu_residual_GHz\n";
    char buf[160];
    for (std::size_t i = 0; i < t_s.size(); i += decimate) {
        std::snprintf(buf, sizeof buf, "%.10g %.10g %.10g %.10g %.10g\n", t_s[i],
                      dnu_drift_ghz[i], rate_est_cps[i], v_ctrl[i], residual_ghz[i]);
        out << buf;
    }
}

namespace {

struct BlockPlan {
    std::size_t n_blocks_total = 0;   // including settle
    std::size_t n_blocks_settle = 0;
    std::uint64_t cycles_per_block = 0;
};

BlockPlan validate(const LockScenario& s) {
    if (!(s.duration_s > 0.0)) throw ConfigError("run_lock: duration must be positive");
    if (s.settle_s < 0.0) throw ConfigError("run_lock: settle time must be non-negative");
    const double tu = s.lock.update_period_s;
    if (!(tu > 0.0)) throw ConfigError("run_lock: update period must be positive");
    if (tu < s.tau_cycle_s)
        throw ConfigError("run_lock: update period must be at least one cycle");
    const double ratio = tu / s.tau_cycle_s;
    if (std::abs(ratio - std::round(ratio)) > 1e-6)
        throw ConfigError("run_lock: update period must be an integer number of cycles");
    if (s.lock.slope_cps_per_ghz == 0.0)
        throw ConfigError("run_lock: zero discriminator slope");
    if (s.channel.r_qd_cps < 0.0 || s.channel.dark_cps < 0.0)
        throw ConfigError("run_lock: negative rates");
    // The estimator consumes one Boolean per cycle; demand << 1 photon/cycle.
    const double worst_rate = s.channel.r_qd_cps + s.channel.dark_cps;
    if (worst_rate * s.tau_cycle_s > 0.1)
        throw ConfigError("run_lock: more than 0.1 photons per cycle saturates the "
                          "Boolean estimator input; reduce tau_cycle");
    if (s.lock.target_bandwidth_hz > 0.0) {
        const double est_corner = 1.0 / (2.0 * pi * s.tau_filter_s);
        if (s.lock_enabled && s.lock.target_bandwidth_hz > est_corner)
            throw ConfigError("run_lock: target bandwidth above the estimator corner");
    }
    if (s.ool_enabled) {
        const double br = s.ool_bin_s / tu;
        if (std::abs(br - std::round(br)) > 1e-9 || s.ool_bin_s <= 0.0)
            throw ConfigError("run_lock: ool bin must be a multiple of the update period");
    }
    if (s.noise_enabled && s.noise.f_high_hz > 0.5 / tu)
        throw ConfigError("run_lock: noise band exceeds the control Nyquist rate");

    BlockPlan p;
    p.cycles_per_block = static_cast<std::uint64_t>(std::llround(ratio));
    const double settle_blocks = s.settle_s / tu;
    if (std::abs(settle_blocks - std::round(settle_blocks)) > 1e-9)
        throw ConfigError("run_lock: settle time must be a multiple of the update period");
    p.n_blocks_settle = static_cast<std::size_t>(std::llround(settle_blocks));
    p.n_blocks_total =
        p.n_blocks_settle + static_cast<std::size_t>(std::llround(s.duration_s / tu));
    return p;
}

// Disturbance (creep + noise + initial offset) at block k; noise indexed on
// the shared [-settle, duration] layout.
double disturbance(const LockScenario& s, const std::vector<double>& noise,
                   std::size_t k, double t_k) {
    double d = s.initial_detuning_ghz;
    if (s.creep_enabled && t_k > s.creep.t0_s) d += creep_detuning(s.creep, t_k);
    if (!noise.empty() && k < noise.size()) d += noise[k];
    return d;
}

std::vector<double> make_noise(const LockScenario& s, std::uint64_t seed) {
    if (!s.noise_enabled) return {};
    NoiseModel m = s.noise;
    m.seed = seed;
    return sample_noise(m, s.settle_s + s.duration_s, s.lock.update_period_s);
}

}  // namespace

LockTrace run_lock(const LockScenario& s, std::uint64_t seed) {
    const BlockPlan plan = validate(s);
    const double tu = s.lock.update_period_s;

    const std::vector<double> noise = make_noise(s, derive_seed(seed, 1, stream::drift_noise));
    Rng rng_events(derive_seed(seed, 1, stream::signal_events));
    Rng rng_ool(derive_seed(seed, 1, stream::ool_counts));

    RateEstimator est(s.tau_cycle_s, s.tau_filter_s, s.lock.r_set_cps);
    const PiGains g = gains_for_bandwidth(s.lock.target_bandwidth_hz, s.tau_filter_s,
                                          s.actuator.gain_ghz_per_v);
    PiController pi(g.kp, g.ki, s.actuator.v_min, s.actuator.v_max);

    LockTrace trace;
    const std::size_t n_rec = plan.n_blocks_total - plan.n_blocks_settle;
    trace.t_s.reserve(n_rec);
    trace.dnu_drift_ghz.reserve(n_rec);
    trace.rate_est_cps.reserve(n_rec);
    trace.v_ctrl.reserve(n_rec);
    trace.residual_ghz.reserve(n_rec);

    std::size_t ool_stride = 0;
    if (s.ool_enabled) {
        trace.ool_bin_s = s.ool_bin_s;
        trace.ool_slope_cps_per_ghz = s.ool_slope_cps_per_ghz;
        ool_stride = static_cast<std::size_t>(std::llround(s.ool_bin_s / tu));
        trace.ool_counts.assign((n_rec + ool_stride - 1) / ool_stride, 0.0);
    }

    double v_applied = 0.0;
    std::vector<VoltageStep> steps;  // only used when actuator creep is on
    const bool act_creep = s.actuator.creep_dnu0_per_volt != 0.0;

    std::vector<std::uint64_t> occupied;
    occupied.reserve(256);

    const double rate_bound = s.channel.r_qd_cps + s.channel.dark_cps;

    for (std::size_t k = 0; k < plan.n_blocks_total; ++k) {
        const double t_k = (static_cast<double>(k) - static_cast<double>(plan.n_blocks_settle)) * tu;

        double act = s.actuator.gain_ghz_per_v * v_applied;
        if (act_creep)
            act = actuator_offset(s.actuator, steps, t_k).dnu_ghz;
        const double drift = disturbance(s, noise, k, t_k);
        const double residual = drift + act;

        const double nu = s.lock.nu_set_ghz + residual;
        const double lam_sig = instantaneous_rate(s.channel, nu);
        const double lam = lam_sig + s.channel.dark_cps;
        if (lam > rate_bound * (1.0 + 1e-12))
            throw PhysicsError("run_lock: rate exceeded its bound");

        // Advance the estimator through this block.
        if (s.deterministic_rate) {
            const double p = 1.0 - std::exp(-lam * s.tau_cycle_s);
            est.advance_mean(plan.cycles_per_block, p);
        } else {
            std::poisson_distribution<long> pd(lam * tu);
            const long n_ev = lam > 0.0 ? pd(rng_events) : 0;
            occupied.clear();
            std::uniform_real_distribution<double> u01(0.0, 1.0);
            for (long m = 0; m < n_ev; ++m) {
                auto c = static_cast<std::uint64_t>(u01(rng_events) *
                                                    static_cast<double>(plan.cycles_per_block));
                if (c >= plan.cycles_per_block) c = plan.cycles_per_block - 1;
                occupied.push_back(c);
            }
            std::sort(occupied.begin(), occupied.end());
            occupied.erase(std::unique(occupied.begin(), occupied.end()), occupied.end());
            std::uint64_t prev_next = 0;  // first not-yet-ticked cycle
            for (std::uint64_t c : occupied) {
                est.advance_empty(c - prev_next);
                est.tick(true);
                prev_next = c + 1;
            }
            est.advance_empty(plan.cycles_per_block - prev_next);
        }

        // Control update.
        if (s.lock_enabled) {
            const double err =
                rate_to_frequency_error(est.estimate() - s.lock.r_set_cps,
                                        s.lock.slope_cps_per_ghz);
            const double v_new = pi.update(err, tu);
            if (act_creep && v_new != v_applied)
                steps.push_back({t_k, v_new - v_applied});
            v_applied = v_new;
        }

        // Record and bin from t = 0 on.
        if (k >= plan.n_blocks_settle) {
            const std::size_t r = k - plan.n_blocks_settle;
            trace.t_s.push_back(t_k);
            trace.dnu_drift_ghz.push_back(drift);
            trace.rate_est_cps.push_back(est.estimate());
            trace.v_ctrl.push_back(v_applied);
            trace.residual_ghz.push_back(residual);

            if (s.ool_enabled) {
                const double t_ool = s.ool_curve.transmission(s.ool_nu_op_ghz + residual);
                const double lam_ool = t_ool * s.ool_r_cps + s.ool_dark_cps;
                long n = 0;
                if (lam_ool > 0.0) {
                    std::poisson_distribution<long> pd(lam_ool * tu);
                    n = pd(rng_ool);
                }
                trace.ool_counts[r / ool_stride] += static_cast<double>(n);
            }

            if (std::abs(residual) > s.watchdog_ghz) {
                trace.diverged = true;
                break;
            }
        }
    }
    trace.saturated = pi.saturated();
    return trace;
}

DriftTrace free_drift_trace(const LockScenario& s, std::uint64_t seed) {
    const BlockPlan plan = validate(s);
    const double tu = s.lock.update_period_s;
    const std::vector<double> noise = make_noise(s, derive_seed(seed, 1, stream::drift_noise));

    DriftTrace out;
    const std::size_t n_rec = plan.n_blocks_total - plan.n_blocks_settle;
    out.t_s.reserve(n_rec);
    out.dnu_ghz.reserve(n_rec);
    for (std::size_t k = plan.n_blocks_settle; k < plan.n_blocks_total; ++k) {
        const double t_k =
            (static_cast<double>(k) - static_cast<double>(plan.n_blocks_settle)) * tu;
        out.t_s.push_back(t_k);
        out.dnu_ghz.push_back(disturbance(s, noise, k, t_k));
    }
    return out;
}

}  // namespace qdlock

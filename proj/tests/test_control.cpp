#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qdlock/control.hpp"

using namespace qdlock;

namespace {

// A lock arm on a Lorentzian-like convolved curve, set point at T = 0.25 on
// the rising flank, R_set = 3600 cps.
LockScenario test_arm(double duration_s, double bandwidth_hz = 0.1,
                      double tau_filter = 0.2) {
    LockScenario s;
    s.channel.curve =
        FilterCurve::parametric({FilterPeak{0.0, 4.08, 0.44, 0.0}});
    s.channel.r_qd_cps = 14400.0;
    s.channel.dark_cps = 0.0;
    const SetPoint sp =
        find_set_point(s.channel.curve, SetPointCriterion::transmission(0.25));
    s.lock.nu_set_ghz = sp.nu_ghz;
    s.lock.r_set_cps = estimator_fixed_point(sp.transmission * s.channel.r_qd_cps, 2e-6);
    s.lock.slope_cps_per_ghz = sp.slope_per_ghz * s.channel.r_qd_cps;
    s.lock.update_period_s = 0.1;
    s.lock.target_bandwidth_hz = bandwidth_hz;
    s.tau_cycle_s = 2e-6;
    s.tau_filter_s = tau_filter;
    s.actuator.gain_ghz_per_v = 10.0;
    s.actuator.v_min = -10.0;
    s.actuator.v_max = 10.0;
    s.duration_s = duration_s;
    s.watchdog_ghz = 2.0;
    return s;
}

}  // namespace

TEST_CASE("rate_to_frequency_error") {
    CHECK(rate_to_frequency_error(0.0, -1200.0) == 0.0);
    CHECK(rate_to_frequency_error(60.0, -1200.0) == doctest::Approx(-0.05));
    CHECK_THROWS_AS(rate_to_frequency_error(10.0, 0.0), ConfigError);
}

TEST_CASE("Eq-2 linearization against exact curve inversion") {
    LockScenario s = test_arm(10.0);
    // reference in true-rate units, not the estimator reading
    const double r_set = instantaneous_rate(s.channel, s.lock.nu_set_ghz);

    SUBCASE("0.1 GHz on a 2.6 GHz-wide flank recovers within 10%") {
        const double dn = 0.1;
        const double r = instantaneous_rate(s.channel, s.lock.nu_set_ghz + dn);
        const double est = rate_to_frequency_error(r - r_set, s.lock.slope_cps_per_ghz);
        CHECK(est == doctest::Approx(dn).epsilon(0.10));
    }
    SUBCASE("at the locked residual scale the error is below 1% of the budget") {
        for (double dn = -0.030; dn <= 0.0301; dn += 0.005) {
            const double r = instantaneous_rate(s.channel, s.lock.nu_set_ghz + dn);
            const double est =
                rate_to_frequency_error(r - r_set, s.lock.slope_cps_per_ghz);
            CHECK(std::abs(est - dn) < 0.01 * 0.030);
        }
    }
}

TEST_CASE("PI controller primitives") {
    SUBCASE("zero error, zero integrator gives zero output") {
        PiController pi(2.0, 1.0, -10.0, 10.0);
        CHECK(pi.update(0.0, 0.1) == 0.0);
    }
    SUBCASE("pure proportional") {
        PiController pi(2.0, 0.0, -10.0, 10.0);
        for (int i = 0; i < 5; ++i) CHECK(pi.update(0.5, 0.1) == doctest::Approx(1.0));
    }
    SUBCASE("pure integral ramps at ki*e per second then clamps") {
        PiController pi(0.0, 4.0, -1.0, 1.0);
        double prev = 0.0;
        for (int i = 1; i <= 13; ++i) {
            const double out = pi.update(0.1, 0.25);
            CHECK(out == doctest::Approx(std::min(1.0, 0.1 * i)).epsilon(1e-12));
            CHECK(out >= prev);
            prev = out;
        }
        CHECK(pi.saturated());
        CHECK(pi.integrator() == doctest::Approx(1.0));
    }
    SUBCASE("gain rule carries the actuator sign") {
        const PiGains g = gains_for_bandwidth(0.03, 2.0, 10.0);
        CHECK(g.kp < 0.0);
        CHECK(g.ki == doctest::Approx(g.kp / 2.0));
        const PiGains gn = gains_for_bandwidth(0.03, 2.0, -10.0);
        CHECK(gn.kp > 0.0);
    }
}

TEST_CASE("closed loop with all drift disabled is limited by shot noise") {
    LockScenario s = test_arm(400.0);
    const LockTrace tr = run_lock(s, 12345);
    CHECK_FALSE(tr.diverged);
    CHECK_FALSE(tr.saturated);

    // Injected shot noise: S = 2 lambda / slope^2 through a first-order loop.
    const double lam = s.lock.r_set_cps;
    const double s_nu = 2.0 * lam / (s.lock.slope_cps_per_ghz * s.lock.slope_cps_per_ghz);
    const double pred_rms = std::sqrt(s_nu * 0.5 * pi * s.lock.target_bandwidth_hz);
    const double rms = std::sqrt(oracles::variance(tr.residual_ghz));
    CHECK(rms < 3.0 * pred_rms);
    CHECK(rms > 0.3 * pred_rms);

    // Mean residual consistent with zero at 3 standard errors.
    const double n_indep = s.duration_s * s.lock.target_bandwidth_hz;
    CHECK(std::abs(oracles::mean(tr.residual_ghz)) < 3.0 * rms / std::sqrt(n_indep));
}

TEST_CASE("disturbance step response is first order at the target bandwidth") {
    for (double bw : {0.05, 0.2}) {
        LockScenario s = test_arm(200.0, bw, 0.2);
        s.deterministic_rate = true;  // noise-free diagnostic mode
        s.settle_s = 50.0;
        s.creep_enabled = true;
        s.creep = CreepModel{0.05, 0.0, -1e-9};  // clean 50 MHz step at t = 0
        const LockTrace tr = run_lock(s, 1);

        const double tau = 1.0 / (2.0 * pi * bw);
        double t_e = -1.0, t_10 = -1.0;
        for (std::size_t i = 0; i < tr.t_s.size(); ++i) {
            const double x = tr.residual_ghz[i] / 0.05;
            if (t_e < 0.0 && x < std::exp(-1.0)) t_e = tr.t_s[i];
            if (t_10 < 0.0 && x < 0.10) t_10 = tr.t_s[i];
        }
        REQUIRE(t_e > 0.0);
        REQUIRE(t_10 > 0.0);
        CHECK(t_e == doctest::Approx(tau).epsilon(0.30));
        CHECK(t_10 == doctest::Approx(std::log(10.0) * tau).epsilon(0.30));
    }
}

TEST_CASE("loop converges for either discriminator slope sign") {
    //

    SUBCASE("rising flank (slope > 0), default arm") {
        LockScenario s = test_arm(100.0, 0.2);
        CHECK(s.lock.slope_cps_per_ghz > 0.0);
        s.deterministic_rate = true;
        s.creep_enabled = true;
        s.creep = CreepModel{0.05, 0.0, -1e-9};
        s.settle_s = 20.0;
        const LockTrace tr = run_lock(s, 2);
        CHECK_FALSE(tr.diverged);
        CHECK(std::abs(tr.residual_ghz.back()) < 0.002);
    }
    SUBCASE("falling flank (slope < 0) converges too") {
        LockScenario s = test_arm(100.0, 0.2);
        // move the set point to the high-detuning flank
        const auto& curve = s.channel.curve;
        SetPoint sp = find_set_point(curve, SetPointCriterion::transmission(0.25));
        const double mirrored = -sp.nu_ghz;  // symmetric peak at center 0
        s.lock.nu_set_ghz = mirrored;
        s.lock.slope_cps_per_ghz = slope_at(curve, mirrored) * s.channel.r_qd_cps;
        CHECK(s.lock.slope_cps_per_ghz < 0.0);
        s.deterministic_rate = true;
        s.creep_enabled = true;
        s.creep = CreepModel{0.05, 0.0, -1e-9};
        s.settle_s = 20.0;
        const LockTrace tr = run_lock(s, 3);
        CHECK_FALSE(tr.diverged);
        CHECK(std::abs(tr.residual_ghz.back()) < 0.002);
    }
    SUBCASE("a sign-flipped slope configuration diverges and trips the watchdog") {
        LockScenario s = test_arm(300.0, 0.2);
        s.lock.slope_cps_per_ghz = -s.lock.slope_cps_per_ghz;  // sabotage
        s.deterministic_rate = true;
        s.creep_enabled = true;
        s.creep = CreepModel{0.02, 0.0, -1e-9};
        const LockTrace tr = run_lock(s, 4);
        CHECK(tr.diverged);
    }
}

TEST_CASE("creep-only lock corrects the drift; open loop follows the log law") {
    LockScenario s = test_arm(1500.0, 0.1);
    s.creep_enabled = true;
    s.creep = CreepModel{0.5, 0.56, -60.0};
    s.settle_s = 60.0;

    SUBCASE("locked residual is shot-noise-scale while the drift is large") {
        const LockTrace tr = run_lock(s, 10);
        CHECK_FALSE(tr.diverged);
        const double lam = s.lock.r_set_cps;
        const double s_nu =
            2.0 * lam / (s.lock.slope_cps_per_ghz * s.lock.slope_cps_per_ghz);
        const double pred_rms = std::sqrt(s_nu * 0.5 * pi * s.lock.target_bandwidth_hz);
        const double rms = std::sqrt(oracles::variance(tr.residual_ghz));
        CHECK(rms < 2.0 * pred_rms);
        CHECK(std::abs(oracles::mean(tr.residual_ghz)) < 0.004);
        // while the raw drift reaches hundreds of MHz
        CHECK(tr.dnu_drift_ghz.back() > 0.5);
    }
    SUBCASE("lock disabled: residual is the creep law, parameters recover") {
        LockScenario f = s;
        f.lock_enabled = false;
        f.settle_s = 0.0;
        f.creep.t0_s = 0.0;
        const DriftTrace tr = free_drift_trace(f, 11);
        std::vector<double> t, y;
        for (std::size_t i = 0; i < tr.t_s.size(); ++i) {
            if (tr.t_s[i] >= creep_floor_s) {
                t.push_back(tr.t_s[i]);
                y.push_back(tr.dnu_ghz[i]);
            }
        }
        const CreepFit fit = fit_creep(t, y, 0.0);
        CHECK(fit.model.dnu0_ghz == doctest::Approx(0.5).epsilon(0.05));
        CHECK(fit.model.alpha == doctest::Approx(0.56).epsilon(0.05));
    }
}

TEST_CASE("lock runs are deterministic per seed") {
    LockScenario s = test_arm(120.0);
    s.creep_enabled = true;
    s.creep = CreepModel{0.2, 0.5, -30.0};
    s.noise_enabled = true;
    s.noise.h_flicker_ghz2 = 1e-4;
    s.noise.h_white_ghz2_per_hz = 1e-8;
    s.noise.f_high_hz = 4.0;
    s.settle_s = 30.0;
    s.ool_enabled = true;
    s.ool_curve = FilterCurve::parametric({FilterPeak{0.0, 1.0, 1.0, 1.0}});
    s.ool_nu_op_ghz = -0.5;
    s.ool_r_cps = 4000.0;
    s.ool_dark_cps = 134.0;
    s.ool_slope_cps_per_ghz = 2000.0;

    const LockTrace a = run_lock(s, 77);
    const LockTrace b = run_lock(s, 77);
    REQUIRE(a.t_s.size() == b.t_s.size());
    for (std::size_t i = 0; i < a.t_s.size(); ++i) {
        CHECK(a.residual_ghz[i] == b.residual_ghz[i]);
        CHECK(a.rate_est_cps[i] == b.rate_est_cps[i]);
        CHECK(a.v_ctrl[i] == b.v_ctrl[i]);
    }
    REQUIRE(a.ool_counts.size() == b.ool_counts.size());
    for (std::size_t i = 0; i < a.ool_counts.size(); ++i)
        CHECK(a.ool_counts[i] == b.ool_counts[i]);

    const LockTrace c = run_lock(s, 78);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.t_s.size() && !any_diff; ++i)
        any_diff = a.residual_ghz[i] != c.residual_ghz[i];
    CHECK(any_diff);
}

TEST_CASE("configuration validation happens before simulation") {
    LockScenario s = test_arm(100.0);
    SUBCASE("update period not a multiple of the cycle") {
        s.lock.update_period_s = 0.1 + 1e-7;
        CHECK_THROWS_AS(run_lock(s, 1), ConfigError);
    }
    SUBCASE("too many photons per cycle") {
        s.tau_cycle_s = 1e-3;  // 14400 cps * 1 ms >> 0.1
        CHECK_THROWS_AS(run_lock(s, 1), ConfigError);
    }
    SUBCASE("bandwidth above the estimator corner") {
        s.lock.target_bandwidth_hz = 2.0;  // corner is 0.8 Hz
        CHECK_THROWS_AS(run_lock(s, 1), ConfigError);
    }
    SUBCASE("zero slope") {
        s.lock.slope_cps_per_ghz = 0.0;
        CHECK_THROWS_AS(run_lock(s, 1), ConfigError);
    }
}

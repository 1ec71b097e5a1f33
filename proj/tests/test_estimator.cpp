#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "qdlock/estimator.hpp"

using namespace qdlock;

TEST_CASE("construction computes d and i per definition") {
    RateEstimator e(1e-3, 1.0, 0.0);
    CHECK(e.decrement() == doctest::Approx(std::exp(-1e-3)).epsilon(1e-15));
    CHECK(e.decrement() == doctest::Approx(0.9990005).epsilon(1e-6));
    CHECK(e.increment() == doctest::Approx(0.9995).epsilon(1e-4));
    CHECK(e.increment() == doctest::Approx((1.0 - e.decrement()) / 1e-3).epsilon(1e-15));

    // frozen-estimator limit
    RateEstimator frozen(1e-3, 1e9, 0.0);
    CHECK(frozen.decrement() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(frozen.increment() < 1e-8);

    CHECK_THROWS_AS(RateEstimator(1.0, 1.0, 0.0), ConfigError);
    CHECK_THROWS_AS(RateEstimator(2.0, 1.0, 0.0), ConfigError);
    CHECK_THROWS_AS(RateEstimator(1e-3, 1.0, -1.0), ConfigError);
}

TEST_CASE("single decay step from the initial value") {
    RateEstimator e(1e-3, 1.0, 3600.0);
    CHECK(e.tick(false) == doctest::Approx(3600.0 * e.decrement()).epsilon(1e-15));
}

TEST_CASE("impulse response is exactly i*d^n") {
    RateEstimator e(1e-3, 0.5, 0.0);
    e.tick(true);
    CHECK(e.estimate() == e.increment());
    double expect = e.increment();
    for (int n = 1; n <= 2000; ++n) {
        e.tick(false);
        expect *= e.decrement();
        CHECK(e.estimate() == expect);  // bit-exact same operation order
    }
}

TEST_CASE("geometric decay with B = 0 forever") {
    RateEstimator e(1e-4, 0.1, 250.0);
    double expect = 250.0;
    for (int n = 0; n < 5000; ++n) {
        e.tick(false);
        expect *= e.decrement();
    }
    CHECK(e.estimate() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("advance_empty matches sequential ticks") {
    RateEstimator a(1e-5, 0.2, 1234.0), b(1e-5, 0.2, 1234.0);
    for (int n = 0; n < 100000; ++n) a.tick(false);
    b.advance_empty(100000);
    CHECK(b.estimate() == doctest::Approx(a.estimate()).epsilon(1e-9));
}

TEST_CASE("IIR tail: single event decays below i*1e-6 only after 6 ln10 tau ratios") {
    const double tc = 1e-3, tf = 0.5;
    RateEstimator e(tc, tf, 0.0);
    e.tick(true);
    const auto n = static_cast<std::uint64_t>(std::ceil(6.0 * std::log(10.0) * tf / tc));
    e.advance_empty(n);
    CHECK(e.estimate() <= e.increment() * 1e-6);
    CHECK(e.estimate() > 0.0);  // never exactly zero
}

TEST_CASE("linearity: superposed trains = sum of separate estimates") {
    Rng rng(11);
    std::bernoulli_distribution b1(0.01), b2(0.03);
    RateEstimator ea(1e-4, 0.05, 0.0), eb(1e-4, 0.05, 0.0);
    std::vector<int> trainA(20000), trainB(20000);
    for (auto& x : trainA) x = b1(rng);
    for (auto& x : trainB) x = b2(rng);
    // The recurrence is linear in B, so feeding B1+B2 equals the sum of the
    // two separate responses; verify with real-valued drive via advance_mean
    // on single cycles.
    RateEstimator esum(1e-4, 0.05, 0.0);
    for (std::size_t i = 0; i < trainA.size(); ++i) {
        ea.tick(trainA[i] != 0);
        eb.tick(trainB[i] != 0);
        esum.advance_mean(1, static_cast<double>(trainA[i] + trainB[i]));
    }
    CHECK(esum.estimate() ==
          doctest::Approx(ea.estimate() + eb.estimate()).epsilon(1e-9));
}

TEST_CASE("steady_state_std formula and scaling") {
    RateEstimator e(1e-3, 10.0, 0.0);
    SUBCASE("zero rate gives zero") { CHECK(steady_state_std(e, 0.0) == 0.0); }
    SUBCASE("paper-scale value sqrt(3600/20) = 13.4 cps") {
        CHECK(steady_state_std(e, 3600.0) == doctest::Approx(13.4164).epsilon(2e-3));
    }
    SUBCASE("Monte-Carlo std within 10%") {
        const double tc = 1e-5, tf = 0.1, lam = 3600.0;
        RateEstimator mc(tc, tf, lam);
        Rng rng(42);
        const double p = 1.0 - std::exp(-lam * tc);
        std::bernoulli_distribution bern(p);
        // warm up 10 tau_filter
        for (int n = 0; n < int(10.0 * tf / tc); ++n) mc.tick(bern(rng));
        // sample every 5 tau_filter
        std::vector<double> samples;
        for (int s = 0; s < 400; ++s) {
            for (int n = 0; n < int(5.0 * tf / tc); ++n) mc.tick(bern(rng));
            samples.push_back(mc.estimate());
        }
        const double sd = std::sqrt(oracles::variance(samples));
        CHECK(sd == doctest::Approx(steady_state_std(mc, lam)).epsilon(0.10));
    }
    SUBCASE("halving tau_filter scales the std by sqrt(2)") {
        RateEstimator e1(1e-4, 2.0, 0.0), e2(1e-4, 1.0, 0.0);
        CHECK(steady_state_std(e2, 1000.0) / steady_state_std(e1, 1000.0) ==
              doctest::Approx(std::sqrt(2.0)).epsilon(1e-3));
    }
}

TEST_CASE("fixed point: time-averaged estimate converges to the rate") {
    // High-power variant: lambda*tau_cycle = 1e-3 keeps the Boolean-collapse
    // bias (lambda^2*tc/2 = 0.05 cps) far below the standard error.
    const double lam = 100.0, tc = 1e-5, tf = 1.0;
    RateEstimator e(tc, tf, lam);
    Rng rng(7);
    const double p = 1.0 - std::exp(-lam * tc);
    std::bernoulli_distribution bern(p);
    const auto warm = static_cast<std::uint64_t>(10.0 * tf / tc);
    for (std::uint64_t n = 0; n < warm; ++n) e.tick(bern(rng));
    const std::uint64_t N = 10000000;
    double acc = 0.0;
    for (std::uint64_t n = 0; n < N; ++n) acc += e.tick(bern(rng));
    const double mean = acc / static_cast<double>(N);

    // Exact standard error of the time average of the stationary AR(1).
    const long double d = e.decrement();
    const long double var =
        e.increment() * e.increment() * p * (1.0 - p) / (1.0 - (double)(d * d));
    const long double Nl = N;
    const long double sum_cov =
        d * (Nl * (1.0L - d) - (1.0L - std::pow((double)d, (double)N))) /
        ((1.0L - d) * (1.0L - d));
    const double se = std::sqrt((double)(var * (Nl + 2.0L * sum_cov) / (Nl * Nl)));
    CHECK(std::abs(mean - lam) < 2.0 * se);
}

TEST_CASE("frequency response is first-order low-pass") {
    // Drive with a deterministic sinusoidal arrival probability and compare
    // the output amplitude against |H| = 1/sqrt(1+(2 pi f tau)^2).
    const double tc = 1e-4, tf = 0.5, lam0 = 2000.0, amp = 400.0;
    const double fc = 1.0 / (2.0 * pi * tf);
    for (double f : {0.25 * fc, fc, 4.0 * fc}) {
        RateEstimator e(tc, tf, lam0);
        const double w = 2.0 * pi * f;
        // settle, then project two full periods onto quadratures
        const auto settle = static_cast<std::uint64_t>(20.0 * tf / tc);
        for (std::uint64_t n = 0; n < settle; ++n) {
            const double lam = lam0 + amp * std::sin(w * static_cast<double>(n) * tc);
            e.advance_mean(1, lam * tc);
        }
        const auto span = static_cast<std::uint64_t>(4.0 / f / tc);
        double cs = 0.0, sn = 0.0;
        for (std::uint64_t n = 0; n < span; ++n) {
            const double t = static_cast<double>(settle + n) * tc;
            const double lam = lam0 + amp * std::sin(w * t);
            const double y = e.advance_mean(1, lam * tc), yy = e.estimate();
            (void)y;
            cs += (yy - lam0) * std::cos(w * t);
            sn += (yy - lam0) * std::sin(w * t);
        }
        const double gain_meas =
            2.0 * std::sqrt(cs * cs + sn * sn) / static_cast<double>(span) / amp;
        const double gain_theory = 1.0 / std::sqrt(1.0 + w * w * tf * tf);
        CHECK(gain_meas == doctest::Approx(gain_theory).epsilon(0.05));
    }
}

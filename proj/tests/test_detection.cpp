#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qdlock/detection.hpp"

using namespace qdlock;

namespace {

DetectionChannel flat_channel(double r_qd, double t_level) {
    DetectionChannel c;
    c.r_qd_cps = r_qd;
    c.curve = FilterCurve::tabulated({-10.0, -5.0, 5.0, 10.0},
                                     {t_level, t_level, t_level, t_level});
    return c;
}

std::vector<double> inter_arrivals(const EventTrain& tr) {
    std::vector<double> d;
    for (std::size_t i = 1; i < tr.events.size(); ++i)
        d.push_back(tr.events[i].t_s - tr.events[i - 1].t_s);
    return d;
}

}  // namespace

TEST_CASE("instantaneous rate through the filter") {
    SUBCASE("T = 0.25 and R_QD = 6000 give the 1500 cps set rate") {
        CHECK(instantaneous_rate(flat_channel(6000.0, 0.25), 0.0) ==
              doctest::Approx(1500.0).epsilon(1e-12));
    }
    SUBCASE("opaque and transparent filters") {
        CHECK(instantaneous_rate(flat_channel(6000.0, 0.0), 0.0) == 0.0);
        CHECK(instantaneous_rate(flat_channel(6000.0, 1.0), 0.0) == 6000.0);
    }
    SUBCASE("outside the tabulated range") {
        CHECK_THROWS_AS(instantaneous_rate(flat_channel(6000.0, 0.5), 11.0),
                        PhysicsError);
    }
}

TEST_CASE("homogeneous event generation") {
    Rng rng(101);
    SUBCASE("zero rate gives an empty train") {
        const auto tr =
            generate_events([](double) { return 0.0; }, 0.0, 100.0, 0.0, rng);
        CHECK(tr.events.empty());
    }
    SUBCASE("3600 cps over 100 s lands in the 3-sigma Poisson band") {
        const auto tr =
            generate_events([](double) { return 3600.0; }, 0.0, 100.0, 3600.0, rng);
        const double n = static_cast<double>(tr.events.size());
        CHECK(std::abs(n - 360000.0) < 3.0 * std::sqrt(360000.0));
        // strictly increasing timestamps inside the window
        for (std::size_t i = 1; i < tr.events.size(); ++i)
            REQUIRE(tr.events[i].t_s > tr.events[i - 1].t_s);
        CHECK(tr.events.front().t_s >= 0.0);
        CHECK(tr.events.back().t_s < 100.0);
    }
    SUBCASE("inter-arrival times pass an exponential KS test") {
        const double lam = 800.0;
        const auto tr =
            generate_events([&](double) { return lam; }, 0.0, 50.0, lam, rng);
        const double p = oracles::ks_test(
            inter_arrivals(tr), [&](double x) { return 1.0 - std::exp(-lam * x); });
        CHECK(p > 0.01);
    }
    SUBCASE("bound violations are detected") {
        CHECK_THROWS_AS(
            generate_events([](double) { return 200.0; }, 0.0, 10.0, 100.0, rng),
            PhysicsError);
    }
    SUBCASE("same seed reproduces the train bit for bit") {
        Rng r1(7), r2(7);
        const auto a = generate_events([](double) { return 500.0; }, 0.0, 20.0, 500.0, r1);
        const auto b = generate_events([](double) { return 500.0; }, 0.0, 20.0, 500.0, r2);
        REQUIRE(a.events.size() == b.events.size());
        for (std::size_t i = 0; i < a.events.size(); ++i)
            CHECK(a.events[i].t_s == b.events[i].t_s);
    }
}

TEST_CASE("thinning tracks a sinusoidally modulated rate") {
    Rng rng(55);
    const double lam0 = 2000.0, depth = 0.8, f = 0.13;
    auto rate = [&](double t) { return lam0 * (1.0 + depth * std::sin(2.0 * pi * f * t)); };
    const double T = 400.0, bin = 2.0;
    const auto tr = generate_events(rate, 0.0, T, lam0 * (1.0 + depth) * 1.001, rng);

    const int nbins = static_cast<int>(T / bin);
    std::vector<double> counts(nbins, 0.0);
    for (const auto& e : tr.events)
        counts[static_cast<std::size_t>(e.t_s / bin)] += 1.0;

    int inside = 0;
    for (int i = 0; i < nbins; ++i) {
        // expected integral of the rate over the bin
        const double a = bin * i, b = a + bin;
        const double mu =
            lam0 * (bin + depth / (2.0 * pi * f) *
                              (std::cos(2.0 * pi * f * a) - std::cos(2.0 * pi * f * b)));
        if (std::abs(counts[i] - mu) <= 3.0 * std::sqrt(mu)) ++inside;
    }
    CHECK(static_cast<double>(inside) / nbins >= 0.95);
}

TEST_CASE("dark-count merging") {
    Rng rng(23);
    const auto sig =
        generate_events([](double) { return 300.0; }, 0.0, 1000.0, 300.0, rng);

    SUBCASE("zero dark rate leaves the train unchanged") {
        Rng r2(1);
        const auto merged = merge_dark(sig, 0.0, 0.0, 1000.0, r2);
        REQUIRE(merged.events.size() == sig.events.size());
        for (std::size_t i = 0; i < sig.events.size(); ++i)
            CHECK(merged.events[i].t_s == sig.events[i].t_s);
    }
    SUBCASE("104 cps darks over 1000 s land in the Poisson band, tags preserved") {
        Rng r2(2);
        EventTrain empty;
        empty.t_begin_s = 0.0;
        empty.t_end_s = 1000.0;
        const auto merged = merge_dark(empty, 104.0, 0.0, 1000.0, r2);
        const double n = static_cast<double>(merged.count(EventTag::dark));
        CHECK(std::abs(n - 104000.0) < 3.0 * std::sqrt(104000.0));

        Rng r3(3);
        const auto both = merge_dark(sig, 104.0, 0.0, 1000.0, r3);
        CHECK(both.count(EventTag::signal) == sig.events.size());
        for (std::size_t i = 1; i < both.events.size(); ++i)
            REQUIRE(both.events[i].t_s >= both.events[i - 1].t_s);
    }
}

TEST_CASE("superposed trains are indistinguishable from a single faster train") {
    Rng rng(71);
    const double l1 = 400.0, l2 = 900.0;
    const auto a = generate_events([&](double) { return l1; }, 0.0, 200.0, l1, rng);
    auto merged = merge_dark(a, l2, 0.0, 200.0, rng);  // homogeneous superposition
    const auto single =
        generate_events([&](double) { return l1 + l2; }, 0.0, 200.0, l1 + l2, rng);
    const double p = oracles::ks_two_sample(inter_arrivals(merged), inter_arrivals(single));
    CHECK(p > 0.01);
}

TEST_CASE("event train export format") {
    Rng rng(5);
    auto tr = generate_events([](double) { return 50.0; }, 0.0, 2.0, 50.0, rng);
    tr = merge_dark(tr, 20.0, 0.0, 2.0, rng);
    tr.write("test_events_io.txt");
    std::ifstream in("test_events_io.txt");
    std::string header;
    std::getline(in, header);
    CHECK(header == "# t_s tag");
    double t;
    std::string tag;
    std::size_t rows = 0;
    while (in >> t >> tag) {
        CHECK((tag == "signal" || tag == "dark"));
        ++rows;
    }
    CHECK(rows == tr.events.size());
    std::remove("test_events_io.txt");
}

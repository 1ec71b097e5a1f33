#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qdlock/spectra.hpp"

using namespace qdlock;

TEST_CASE("lorentzian_from_coherence reproduces the measured linewidths") {
    CHECK(lorentzian_from_coherence(153.0).fwhm_ghz == doctest::Approx(2.08).epsilon(0.005));
    CHECK(lorentzian_from_coherence(123.0).fwhm_ghz == doctest::Approx(2.59).epsilon(0.005));
    // delta-like limit
    CHECK(lorentzian_from_coherence(1e12).fwhm_ghz < 1e-9);
    CHECK_THROWS_AS(lorentzian_from_coherence(0.0), PhysicsError);
    CHECK_THROWS_AS(lorentzian_from_coherence(-5.0), PhysicsError);
}

TEST_CASE("profile density is normalized") {
    for (double t2 : {40.0, 153.0, 900.0}) {
        const SpectralProfile p = lorentzian_from_coherence(t2);
        const double span = 1e6 * p.fwhm_ghz;
        const double integral = oracles::integrate(
            [&](double nu) { return p.density(nu); }, -span, span, 1e-12);
        CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("filter peak shifts linearly with field") {
    FilterSettings s;
    s.reference_center_ghz = 0.0;
    s.reference_fwhm_ghz = 1.0;
    s.reference_field_mt = 20.0;

    SUBCASE("+10 mT moves the center by +0.246 GHz") {
        s.field_mt = 30.0;
        CHECK(peak_for_field(s).center_ghz == doctest::Approx(0.246).epsilon(1e-12));
        CHECK(center_shift_ghz(s, 30.0, 20.0) == doctest::Approx(0.246).epsilon(1e-12));
    }
    SUBCASE("center differences are linear at exactly 24.6 MHz/mT") {
        s.reference_fwhm_ghz = 5.0;  // keep the width positive over the scan
        for (double b1 : {0.0, 5.0, 17.5, 60.0}) {
            for (double b2 : {-10.0, 3.0, 42.0}) {
                s.field_mt = b1;
                const double c1 = peak_for_field(s).center_ghz;
                s.field_mt = b2;
                const double c2 = peak_for_field(s).center_ghz;
                CHECK(c1 - c2 ==
                      doctest::Approx(24.6e-3 * (b1 - b2)).epsilon(1e-12));
            }
        }
    }
    SUBCASE("width follows 40.8 MHz/mT and cannot go negative") {
        s.field_mt = 30.0;
        CHECK(peak_for_field(s).fwhm_ghz == doctest::Approx(1.0 + 0.408).epsilon(1e-12));
        s.field_mt = -20.0;  // width would be 1.0 - 40.8e-3*40 = -0.632
        CHECK_THROWS_AS(peak_for_field(s), PhysicsError);
    }
    SUBCASE("transmission at the peak center equals the amplitude") {
        s.field_mt = 25.0;
        const FilterPeak p = peak_for_field(s);
        CHECK(filter_transmission(s, p.center_ghz) == doctest::Approx(1.0).epsilon(1e-12));
        // far-detuned suppression
        CHECK(filter_transmission(s, p.center_ghz + 50.0 * p.fwhm_ghz) < 1e-3);
    }
}

TEST_CASE("tabulated curves validate and interpolate") {
    CHECK_THROWS_AS(FilterCurve::tabulated({0, 1, 1, 2}, {0, 0.5, 0.5, 0}), ConfigError);
    CHECK_THROWS_AS(FilterCurve::tabulated({0, 1, 2, 3}, {0, 1.5, 0.5, 0}), ConfigError);
    auto c = FilterCurve::tabulated({0, 1, 2, 3}, {0.0, 1.0, 1.0, 0.0});
    CHECK(c.transmission(0.5) == doctest::Approx(0.5));
    CHECK_THROWS_AS(c.transmission(3.5), PhysicsError);
}

TEST_CASE("convolution against quadrature and closed forms") {
    SUBCASE("near-delta profile leaves the curve unchanged") {
        const auto laser = FilterCurve::parametric({FilterPeak{0.5, 1.0, 0.8, 0.3}});
        SpectralProfile p;
        p.fwhm_ghz = 2e-3;
        ConvolutionGrid g;
        g.nu_min_ghz = -3.2;
        g.nu_max_ghz = 3.8;
        g.step_ghz = 2e-4;  // must resolve the narrow kernel
        g.kernel_halfwidth_mult = 50.0;
        const auto out = convolve(laser, p, g);
        for (double nu : {-2.0, -0.3, 0.5, 1.2, 3.0})
            CHECK(out.transmission(nu) ==
                  doctest::Approx(laser.transmission(nu)).epsilon(0.01));
    }

    SUBCASE("Lorentzian (x) Lorentzian gives fwhm a+b at the summed center") {
        const double a = 1.4, b = 0.9;
        const auto laser = FilterCurve::parametric({FilterPeak{0.3, a, 1.0, 0.0}});
        SpectralProfile p;
        p.center_ghz = 0.2;
        p.fwhm_ghz = b;
        const auto out = convolve(laser, p);

        // Closed form: unit-height in, peak a/(a+b), fwhm a+b, center sum.
        const double c = 0.5, w = a + b, h = a / (a + b);
        for (double x : {0.0, 0.4, 1.0, 2.5, 6.0}) {
            const double expect = h * (0.25 * w * w) / (x * x + 0.25 * w * w);
            CHECK(out.transmission(c + x) == doctest::Approx(expect).epsilon(0.01));
            CHECK(out.transmission(c - x) == doctest::Approx(expect).epsilon(0.01));
        }

        // Independent quadrature oracle at a few points.
        for (double nu : {0.5, 1.7, 3.4}) {
            const double direct = oracles::integrate(
                [&](double u) { return laser.transmission(nu - u) * p.density(u); },
                p.center_ghz - 4000.0, p.center_ghz + 4000.0, 1e-10);
            CHECK(out.transmission(nu) == doctest::Approx(direct).epsilon(0.005));
        }
    }

    SUBCASE("area is preserved") {
        // Tail-controlled case: Gaussian filter peak, narrow emitter line,
        // wide window, so the mathematical identity is numerically visible
        // at the 1e-4 level (Lorentzian windows are truncation-limited).
        const auto laser = FilterCurve::parametric({FilterPeak{0.0, 1.0, 0.8, 1.0}});
        SpectralProfile p;
        p.fwhm_ghz = 0.02;
        ConvolutionGrid g;
        g.nu_min_ghz = -40.0;
        g.nu_max_ghz = 40.0;
        g.step_ghz = 0.002;
        g.kernel_halfwidth_mult = 50.0;
        const auto out = convolve(laser, p, g);
        const auto& nu = out.grid();
        double area_out = 0.0, area_in = 0.0;
        for (std::size_t i = 1; i < nu.size(); ++i) {
            const double h = nu[i] - nu[i - 1];
            area_out += 0.5 * (out.values()[i] + out.values()[i - 1]) * h;
            area_in += 0.5 * (laser.transmission(nu[i]) + laser.transmission(nu[i - 1])) * h;
        }
        CHECK(area_out == doctest::Approx(area_in).epsilon(1e-4));
    }

    SUBCASE("area on a Lorentzian window is truncation-limited, not worse") {
        const auto laser = FilterCurve::parametric({FilterPeak{0.0, 2.0, 0.9, 0.0}});
        const SpectralProfile p = lorentzian_from_coherence(123.0);
        const auto out = convolve(laser, p);
        const auto& nu = out.grid();
        double area_out = 0.0, area_in = 0.0;
        for (std::size_t i = 1; i < nu.size(); ++i) {
            const double h = nu[i] - nu[i - 1];
            area_out += 0.5 * (out.values()[i] + out.values()[i - 1]) * h;
            area_in += 0.5 * (laser.transmission(nu[i]) + laser.transmission(nu[i - 1])) * h;
        }
        CHECK(area_out == doctest::Approx(area_in).epsilon(0.03));
    }

    SUBCASE("peak transmission never grows") {
        const auto laser = FilterCurve::parametric({FilterPeak{0.0, 1.0, 0.7, 0.5}});
        ConvolutionGrid g;
        g.kernel_halfwidth_mult = 50.0;
        for (double t2 : {153.0, 500.0}) {
            const auto out = convolve(laser, lorentzian_from_coherence(t2), g);
            CHECK(out.peak_transmission() <= laser.peak_transmission() + 1e-12);
        }
    }

    SUBCASE("too-coarse grid is rejected") {
        const auto laser = FilterCurve::parametric({FilterPeak{0.0, 1.0, 1.0, 0.0}});
        SpectralProfile p;
        p.fwhm_ghz = 1.0;
        ConvolutionGrid g;
        g.step_ghz = 0.2;  // > fwhm/10
        CHECK_THROWS_AS(convolve(laser, p, g), PhysicsError);
    }
}

TEST_CASE("slope_at matches the analytic Lorentzian derivative") {
    // Tabulate an exact unit Lorentzian so the only error is the grid.
    const double w = 2.0;
    std::vector<double> nu, tv;
    for (double x = -10.0; x <= 10.0 + 1e-12; x += 1e-3) {
        nu.push_back(x);
        tv.push_back(0.25 * w * w / (x * x + 0.25 * w * w));
    }
    const auto curve = FilterCurve::tabulated(std::move(nu), std::move(tv));

    auto analytic = [&](double x) {
        const double hw2 = 0.25 * w * w;
        return -2.0 * x * hw2 / ((x * x + hw2) * (x * x + hw2));
    };
    SUBCASE("slope vanishes at the symmetric peak center") {
        CHECK(std::abs(slope_at(curve, 0.0)) < 1e-4);
    }
    SUBCASE("slope is extremal at the inflection points nu = +-fwhm/(2*sqrt(3))") {
        const double xi = w / (2.0 * std::sqrt(3.0));
        const double si = std::abs(slope_at(curve, -xi));
        CHECK(si == doctest::Approx(std::abs(analytic(-xi))).epsilon(1e-3));
        for (double x : {-3.0, -1.5, -0.9, -0.2, 0.4, 1.1, 2.8})
            CHECK(std::abs(slope_at(curve, x)) <= si * (1.0 + 1e-6));
    }
    SUBCASE("rising flank has positive slope") {
        CHECK(slope_at(curve, -1.0) > 0.0);
        CHECK(slope_at(curve, 1.0) < 0.0);
    }
    SUBCASE("boundary refuses to extrapolate") {
        CHECK_THROWS_AS(slope_at(curve, -10.0), PhysicsError);
        CHECK_THROWS_AS(slope_at(curve, 10.5), PhysicsError);
    }
}

TEST_CASE("find_set_point") {
    const auto one_peak = FilterCurve::parametric({FilterPeak{0.0, 2.0, 1.0, 0.0}});

    SUBCASE("steepest slope lands on the flank inflection") {
        const auto sp = find_set_point(one_peak, SetPointCriterion::steepest());
        const double xi = 2.0 / (2.0 * std::sqrt(3.0));
        CHECK(std::abs(sp.nu_ghz) == doctest::Approx(xi).epsilon(0.02));
        // lowest-detuning tie break picks the rising flank
        CHECK(sp.nu_ghz < 0.0);
        CHECK(sp.slope_per_ghz > 0.0);
    }
    SUBCASE("target transmission 0.5 sits at the half maximum") {
        const auto sp =
            find_set_point(one_peak, SetPointCriterion::transmission(0.5));
        CHECK(sp.transmission == doctest::Approx(0.5));
        CHECK(sp.nu_ghz == doctest::Approx(-1.0).epsilon(1e-3));  // lower flank first
    }
    SUBCASE("two identical peaks: the lower-detuning one wins") {
        const auto two = FilterCurve::parametric({FilterPeak{-4.0, 1.0, 0.5, 0.0},
                                                  FilterPeak{4.0, 1.0, 0.5, 0.0}});
        const auto sp = find_set_point(two, SetPointCriterion::steepest());
        CHECK(sp.nu_ghz < -3.0);
        const auto sp2 = find_set_point(two, SetPointCriterion::transmission(0.25));
        CHECK(sp2.nu_ghz < -4.0);
    }
    SUBCASE("flat curve has no set point") {
        const auto flat = FilterCurve::tabulated({0, 1, 2, 3}, {0.5, 0.5, 0.5, 0.5});
        CHECK_THROWS_AS(find_set_point(flat, SetPointCriterion::steepest()), PhysicsError);
    }
}

TEST_CASE("curve file round trip") {
    const auto laser = FilterCurve::parametric({FilterPeak{0.0, 2.0, 0.9, 0.2}});
    const auto tab = convolve(laser, lorentzian_from_coherence(400.0));
    const std::string path = "test_curve_io.txt";
    tab.write(path);
    const auto back = FilterCurve::from_file(path);
    REQUIRE(back.grid().size() == tab.grid().size());
    for (std::size_t i = 0; i < tab.grid().size(); i += 97) {
        CHECK(back.grid()[i] == doctest::Approx(tab.grid()[i]).epsilon(1e-9));
        CHECK(back.values()[i] == doctest::Approx(tab.values()[i]).epsilon(1e-9));
    }
    std::remove(path.c_str());
}

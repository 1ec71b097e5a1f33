#include "qdlock/interference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace qdlock {

EmitterParams::EmitterParams(double t1, double t2) : t1_ps(t1), t2_ps(t2) {
    if (!(t1_ps > 0.0) || !(t2_ps > 0.0))
        throw ConfigError("EmitterParams: T1 and T2 must be positive");
    if (t2_ps > 2.0 * t1_ps * (1.0 + 1e-12))
        throw ConfigError("EmitterParams: T2 must not exceed 2*T1");
}

double indistinguishability(const EmitterParams& e) {
    return e.t2_ps / (2.0 * e.t1_ps);
}

double tpi_visibility(const EmitterParams& e1, const EmitterParams& e2,
                      double dnu_ghz) {
    const double g1 = e1.gamma_ns(), g2 = e2.gamma_ns();
    const double big_gamma = g1 + g2 + e1.gamma_star_ns() + e2.gamma_star_ns();
    const double x = 2.0 * pi * dnu_ghz;  // rad/ns
    return g1 * g2 / (g1 + g2) * big_gamma /
           (x * x + 0.25 * big_gamma * big_gamma);
}

double visibility_from_areas(double a_perp, double a_par) {
    if (!(a_perp > 0.0))
        throw PhysicsError("visibility_from_areas: perpendicular area must be positive");
    if (a_par < 0.0)
        throw ConfigError("visibility_from_areas: negative parallel area");
    return (a_perp - a_par) / a_perp;
}

double invert_visibility(double v, const EmitterParams& e1, const EmitterParams& e2) {
    const double vmax = tpi_visibility(e1, e2, 0.0);
    if (!(v > 0.0)) throw ConfigError("invert_visibility: v must be positive");
    if (v > vmax * (1.0 + 1e-12))
        throw PhysicsError("invert_visibility: v above the zero-detuning maximum");
    const double g1 = e1.gamma_ns(), g2 = e2.gamma_ns();
    const double big_gamma = g1 + g2 + e1.gamma_star_ns() + e2.gamma_star_ns();
    const double c = g1 * g2 / (g1 + g2);
    const double x2 = c * big_gamma / v - 0.25 * big_gamma * big_gamma;
    return std::sqrt(std::max(x2, 0.0)) / (2.0 * pi);
}

namespace {

std::vector<VisibilityPoint> windowed_impl(std::span<const double> t_s,
                                           std::span<const double> dnu_ghz,
                                           const EmitterParams& e1,
                                           const EmitterParams& e2,
                                           double window_min, double step_min,
                                           bool parallel) {
    if (t_s.size() != dnu_ghz.size())
        throw ConfigError("windowed_visibility: size mismatch");
    if (t_s.size() < 2) throw ConfigError("windowed_visibility: trace too short");
    if (!(window_min > 0.0) || !(step_min > 0.0))
        throw ConfigError("windowed_visibility: window and step must be positive");
    const double w_s = window_min * 60.0;
    const double span = t_s.back() - t_s.front();
    if (span < w_s - 1e-9)
        throw PhysicsError("windowed_visibility: drift trace shorter than the window");

    const std::size_t n = t_s.size();
    std::vector<double> vinst(n);
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i)
            vinst[i] = tpi_visibility(e1, e2, dnu_ghz[i]);
    } else {
        for (std::size_t i = 0; i < n; ++i)
            vinst[i] = tpi_visibility(e1, e2, dnu_ghz[i]);
    }

    // Prefix trapezoid integral of V(t) for O(1) window averages.
    std::vector<double> prefix(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        prefix[i] = prefix[i - 1] +
                    0.5 * (vinst[i] + vinst[i - 1]) * (t_s[i] - t_s[i - 1]);

    auto integral_to = [&](double t) {
        // integral of V from t_s.front() to t (t within range)
        auto it = std::upper_bound(t_s.begin(), t_s.end(), t);
        std::size_t i = static_cast<std::size_t>(it - t_s.begin());
        if (i == 0) return 0.0;
        if (i >= n) return prefix[n - 1];
        const double h = t_s[i] - t_s[i - 1];
        const double w = (t - t_s[i - 1]) / h;
        const double v_t = vinst[i - 1] + w * (vinst[i] - vinst[i - 1]);
        return prefix[i - 1] + 0.5 * (vinst[i - 1] + v_t) * (t - t_s[i - 1]);
    };

    std::vector<VisibilityPoint> pts;
    const double step_s = step_min * 60.0;
    for (double te = t_s.front() + w_s; te <= t_s.back() + 1e-9; te += step_s) {
        const double t_end = std::min(te, t_s.back());
        VisibilityPoint p;
        p.t_min = (t_end - t_s.front()) / 60.0;
        p.window_min = window_min;
        p.v = (integral_to(t_end) - integral_to(t_end - w_s)) / w_s;
        p.sigma_v = 0.0;
        pts.push_back(p);
    }
    return pts;
}

}  // namespace

std::vector<VisibilityPoint> windowed_visibility(std::span<const double> t_s,
                                                 std::span<const double> dnu_ghz,
                                                 const EmitterParams& e1,
                                                 const EmitterParams& e2,
                                                 double window_min, double step_min,
                                                 Exec exec) {
    return windowed_impl(t_s, dnu_ghz, e1, e2, window_min, step_min,
                         exec == Exec::parallel);
}

std::vector<VisibilityPoint> windowed_visibility_serial(
    std::span<const double> t_s, std::span<const double> dnu_ghz,
    const EmitterParams& e1, const EmitterParams& e2, double window_min,
    double step_min) {
    return windowed_impl(t_s, dnu_ghz, e1, e2, window_min, step_min, false);
}

void write_visibility(const std::string& path, std::span<const VisibilityPoint> pts) {
    std::ofstream out(path);
    if (!out) throw ConfigError("write_visibility: cannot write " + path);
    out << "# t_min V sigma_V\n";
    char buf[96];
    for (const auto& p : pts) {
        std::snprintf(buf, sizeof buf, "%.10g %.10g %.10g\n", p.t_min, p.v, p.sigma_v);
        out << buf;
    }
}

void HomHistogram::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("HomHistogram: cannot write " + path);
    out << "# bin_center_ns counts_parallel counts_perpendicular\n";
    char buf[96];
    for (std::size_t i = 0; i < counts_parallel.size(); ++i) {
        const double c = 0.5 * (bin_edges_ns[i] + bin_edges_ns[i + 1]);
        std::snprintf(buf, sizeof buf, "%.10g %.10g %.10g\n", c, counts_parallel[i],
                      counts_perpendicular[i]);
        out << buf;
    }
}

double expected_side_area(const HomSetup& s) {
    return s.signal1_cps * s.signal2_cps * s.rep_period_ns * 1e-9 * s.t_acq_s;
}

double accidental_floor_per_bin(const HomSetup& s) {
    const double rate2 = s.signal1_cps * s.dark2_cps + s.signal2_cps * s.dark1_cps +
                         s.dark1_cps * s.dark2_cps;
    return rate2 * s.bin_width_ns * 1e-9 * s.t_acq_s;
}

namespace {

void check_setup(const HomSetup& s) {
    if (!(s.rep_period_ns > 0.0)) throw ConfigError("HomSetup: rep period must be positive");
    if (s.n_side_peaks < 1) throw ConfigError("HomSetup: need at least one side peak");
    if (!(s.bin_width_ns > 0.0)) throw ConfigError("HomSetup: bin width must be positive");
    if (!(s.window_half_ns > 0.0) || s.window_half_ns > 0.5 * s.rep_period_ns + 1e-12)
        throw ConfigError("HomSetup: coincidence window must be in (0, rep/2]");
    if (!(s.blink_factor > 0.0) || s.blink_factor > 1.0)
        throw ConfigError("HomSetup: blink factor must be in (0,1]");
    if (s.signal1_cps < 0.0 || s.signal2_cps < 0.0 || s.dark1_cps < 0.0 || s.dark2_cps < 0.0)
        throw ConfigError("HomSetup: rates must be non-negative");
    if (!(s.t_acq_s > 0.0)) throw ConfigError("HomSetup: acquisition time must be positive");
}

}  // namespace

HomHistogram synthesize_histogram(double v_true, const HomSetup& s, Rng& rng) {
    if (v_true < 0.0 || v_true > 1.0)
        throw ConfigError("synthesize_histogram: v_true must be in [0,1]");
    check_setup(s);

    const double span_half = (s.n_side_peaks + 0.5) * s.rep_period_ns;
    const std::size_t nbins =
        static_cast<std::size_t>(std::llround(2.0 * span_half / s.bin_width_ns));

    HomHistogram h;
    h.rep_period_ns = s.rep_period_ns;
    h.window_half_ns = s.window_half_ns;
    h.acquisition_s = s.t_acq_s;
    h.n_side_peaks = s.n_side_peaks;
    h.bin_edges_ns.resize(nbins + 1);
    for (std::size_t i = 0; i <= nbins; ++i)
        h.bin_edges_ns[i] = -span_half + static_cast<double>(i) * s.bin_width_ns;
    h.counts_parallel.assign(nbins, 0.0);
    h.counts_perpendicular.assign(nbins, 0.0);

    const double a_side = expected_side_area(s);
    const double central_perp = 0.5 * s.blink_factor * a_side;
    const double central_par = central_perp * (1.0 - v_true);
    if (central_par < 1.0 || central_perp < 1.0) h.low_stats_warning = true;

    const double t1a = s.e1.t1_ps * 1e-3;  // ns
    const double t1b = s.e2.t1_ps * 1e-3;
    const double p_pos = t1b / (t1a + t1b);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::exponential_distribution<double> exp_a(1.0 / t1a);
    std::exponential_distribution<double> exp_b(1.0 / t1b);

    auto draw_tau = [&]() {
        // back-to-back exponentials, truncated at half the rep period
        for (;;) {
            double tau = (u01(rng) < p_pos) ? exp_b(rng) : -exp_a(rng);
            if (std::abs(tau) <= 0.5 * s.rep_period_ns) return tau;
        }
    };

    auto fill_peaks = [&](std::vector<double>& counts, double central_area) {
        for (int k = -s.n_side_peaks; k <= s.n_side_peaks; ++k) {
            const double area = (k == 0) ? central_area : a_side;
            std::poisson_distribution<long> pd(area);
            const long n = pd(rng);
            for (long m = 0; m < n; ++m) {
                const double tau = static_cast<double>(k) * s.rep_period_ns + draw_tau();
                const long bin = static_cast<long>(
                    std::floor((tau + span_half) / s.bin_width_ns));
                if (bin >= 0 && bin < static_cast<long>(nbins))
                    counts[static_cast<std::size_t>(bin)] += 1.0;
            }
        }
    };
    fill_peaks(h.counts_perpendicular, central_perp);
    fill_peaks(h.counts_parallel, central_par);

    const double floor_mean = accidental_floor_per_bin(s);
    if (floor_mean > 0.0) {
        std::poisson_distribution<long> pd(floor_mean);
        for (std::size_t i = 0; i < nbins; ++i) h.counts_perpendicular[i] += pd(rng);
        for (std::size_t i = 0; i < nbins; ++i) h.counts_parallel[i] += pd(rng);
    }
    return h;
}

CorrectedAreas dark_correct(const HomHistogram& hist, double dark1_cps,
                            double dark2_cps, double signal1_cps, double signal2_cps) {
    if (dark1_cps < 0.0 || dark2_cps < 0.0 || signal1_cps < 0.0 || signal2_cps < 0.0)
        throw ConfigError("dark_correct: rates must be non-negative");
    const double bw_s = hist.bin_width_ns() * 1e-9;
    const double floor_per_bin = (signal1_cps * dark2_cps + signal2_cps * dark1_cps +
                                  dark1_cps * dark2_cps) *
                                 bw_s * hist.acquisition_s;

    CorrectedAreas out;
    out.floor_per_bin_parallel = floor_per_bin;
    out.floor_per_bin_perpendicular = floor_per_bin;
    for (int k = -hist.n_side_peaks; k <= hist.n_side_peaks; ++k) {
        const double center = static_cast<double>(k) * hist.rep_period_ns;
        const double lo = center - hist.window_half_ns;
        const double hi = center + hist.window_half_ns;
        double a_par = 0.0, a_perp = 0.0;
        std::size_t bins_in = 0;
        for (std::size_t i = 0; i < hist.counts_parallel.size(); ++i) {
            const double c = 0.5 * (hist.bin_edges_ns[i] + hist.bin_edges_ns[i + 1]);
            if (c >= lo && c < hi) {
                a_par += hist.counts_parallel[i];
                a_perp += hist.counts_perpendicular[i];
                ++bins_in;
            }
        }
        const double floor_total = floor_per_bin * static_cast<double>(bins_in);
        a_par -= floor_total;
        a_perp -= floor_total;
        if (a_par < 0.0) {
            a_par = 0.0;
            out.clamped = true;
        }
        if (a_perp < 0.0) {
            a_perp = 0.0;
            out.clamped = true;
        }
        out.delay_ns.push_back(center);
        out.parallel.push_back(a_par);
        out.perpendicular.push_back(a_perp);
    }
    return out;
}

VisibilityEstimate visibility_estimate(const HomHistogram& hist,
                                       const CorrectedAreas& areas) {
    const std::size_t c = areas.central_index();
    const double a_perp = areas.perpendicular[c];
    const double a_par = areas.parallel[c];
    VisibilityEstimate ve;
    ve.v = visibility_from_areas(a_perp, a_par);
    // Poisson variance of the raw window counts: corrected area + the
    // subtracted floor counts.
    const double bins_in = std::round(2.0 * hist.window_half_ns / hist.bin_width_ns());
    const double var_par = a_par + areas.floor_per_bin_parallel * bins_in;
    const double var_perp = a_perp + areas.floor_per_bin_perpendicular * bins_in;
    ve.sigma = std::sqrt(var_par / (a_perp * a_perp) +
                         var_perp * a_par * a_par / (a_perp * a_perp * a_perp * a_perp));
    return ve;
}

}  // namespace qdlock

// Two-photon-interference figures of merit: indistinguishability, visibility
// versus detuning and dephasing, peak-area visibility, windowed visibility
// traces, and synthetic HOM coincidence histograms with dark-count handling.
#ifndef QDLOCK_INTERFERENCE_HPP
#define QDLOCK_INTERFERENCE_HPP

#include <span>
#include <string>
#include <vector>

#include "qdlock/common.hpp"
#include "qdlock/spectra.hpp"  // Exec

namespace qdlock {

/// Radiative lifetime and coherence time of one emitter. gamma = 1/T1 and
/// gamma_star = 2/T2 - 1/T1 (both ns^-1); requires 0 < T2 <= 2*T1.
struct EmitterParams {
    double t1_ps = 0.0;
    double t2_ps = 0.0;

    EmitterParams() = default;
    EmitterParams(double t1, double t2);

    double gamma_ns() const { return 1e3 / t1_ps; }
    double gamma_star_ns() const { return 2e3 / t2_ps - 1e3 / t1_ps; }
};

/// I = T2 / (2*T1).
double indistinguishability(const EmitterParams& e);

/// Visibility of two-photon interference between distinct emitters at mutual
/// detuning dnu:
///   V = g1*g2/(g1+g2) * G / ((2*pi*dnu)^2 + G^2/4),  G = g1+g2+g1*+g2*.
double tpi_visibility(const EmitterParams& e1, const EmitterParams& e2,
                      double dnu_ghz);

/// V = (A_perp - A_par) / A_perp. Negative results are returned as-is
/// (statistical); A_perp must be positive.
double visibility_from_areas(double a_perp, double a_par);

/// |dnu| with tpi_visibility(e1, e2, dnu) = v, on the decreasing branch.
/// Throws PhysicsError if v exceeds the zero-detuning maximum.
double invert_visibility(double v, const EmitterParams& e1, const EmitterParams& e2);

struct VisibilityPoint {
    double t_min = 0.0;       // measurement-end time
    double window_min = 0.0;
    double v = 0.0;
    double sigma_v = 0.0;     // Poisson uncertainty where applicable
};

/// Sliding time average of the instantaneous visibility over the trailing
/// window (constant-rate weighting): one point per step, first at t = window.
std::vector<VisibilityPoint> windowed_visibility(
    std::span<const double> t_s, std::span<const double> dnu_ghz,
    const EmitterParams& e1, const EmitterParams& e2, double window_min,
    double step_min = 1.0, Exec exec = Exec::parallel);
std::vector<VisibilityPoint> windowed_visibility_serial(
    std::span<const double> t_s, std::span<const double> dnu_ghz,
    const EmitterParams& e1, const EmitterParams& e2, double window_min,
    double step_min = 1.0);

void write_visibility(const std::string& path, std::span<const VisibilityPoint> pts);

/// HOM coincidence histogram for both polarization settings.
struct HomHistogram {
    std::vector<double> bin_edges_ns;   // size = counts + 1
    std::vector<double> counts_parallel;
    std::vector<double> counts_perpendicular;
    double rep_period_ns = 0.0;
    double window_half_ns = 0.0;        // coincidence window half-width
    double acquisition_s = 0.0;
    int n_side_peaks = 0;
    bool low_stats_warning = false;

    double bin_width_ns() const { return bin_edges_ns[1] - bin_edges_ns[0]; }
    /// (bin_center_ns, counts_parallel, counts_perpendicular)
    void write(const std::string& path) const;
};

struct HomSetup {
    EmitterParams e1, e2;
    double rep_period_ns = 1e3 / 76.0;  // 76 MHz pulsed excitation
    int n_side_peaks = 6;               // per side
    double bin_width_ns = (1e3 / 76.0) / 128.0;
    double window_half_ns = 0.5 * (1e3 / 76.0);
    double signal1_cps = 5000.0;        // singles at the two detectors
    double signal2_cps = 5000.0;
    double dark1_cps = 0.0;
    double dark2_cps = 0.0;
    double t_acq_s = 2400.0;
    double blink_factor = 1.0;          // central-peak reduction, both settings
};

/// Expected side-peak area: uncorrelated-pulse pair rate s1*s2*T_rep * t_acq.
double expected_side_area(const HomSetup& s);
/// Flat accidental floor per bin: (s1*d2 + s2*d1 + d1*d2) * bin_width * t_acq.
double accidental_floor_per_bin(const HomSetup& s);

/// Synthesizes Poisson-fluctuated histograms. Central-peak expected areas:
/// perpendicular = 0.5*beta*A_side, parallel = 0.5*beta*(1-v_true)*A_side;
/// peak shapes are back-to-back exponentials with the two T1 constants.
HomHistogram synthesize_histogram(double v_true, const HomSetup& s, Rng& rng);

/// Peak areas (coincidence window around each integer multiple of the rep
/// period) after subtracting the flat accidental floor.
struct CorrectedAreas {
    std::vector<double> delay_ns;        // peak centers, -n..n
    std::vector<double> parallel;
    std::vector<double> perpendicular;
    double floor_per_bin_parallel = 0.0; // identical for both settings here
    double floor_per_bin_perpendicular = 0.0;
    bool clamped = false;                // a corrected area hit zero

    std::size_t central_index() const { return delay_ns.size() / 2; }
};
CorrectedAreas dark_correct(const HomHistogram& hist, double dark1_cps,
                            double dark2_cps, double signal1_cps, double signal2_cps);

/// Visibility and its Poisson uncertainty from corrected central areas.
struct VisibilityEstimate {
    double v = 0.0;
    double sigma = 0.0;
};
VisibilityEstimate visibility_estimate(const HomHistogram& hist,
                                       const CorrectedAreas& areas);

}  // namespace qdlock

#endif

// Statistical post-processing: Welch power spectral density, shot-noise-
// excluded frequency deviation, and feedback-bandwidth recommendation from
// the 1/f / shot-noise crossover.
#ifndef QDLOCK_ANALYSIS_HPP
#define QDLOCK_ANALYSIS_HPP

#include <span>
#include <string>
#include <vector>

#include "qdlock/common.hpp"
#include "qdlock/spectra.hpp"  // Exec

namespace qdlock {

/// One-sided PSD estimate. Density units follow the input trace
/// (GHz^2/Hz for frequency traces, cps^2/Hz for rate traces).
struct PsdEstimate {
    std::vector<double> frequency_hz;
    std::vector<double> density;
    std::size_t segment_count = 0;
    std::string window = "hann";

    void write(const std::string& path) const;
};

/// Welch estimator: Hann window, per-segment mean removal, zero-padding to
/// the next power of two, one-sided scaling 1/(fs*sum(w^2)). Default overlap
/// is 50%. Throws PhysicsError if fewer than 2 segments fit.
PsdEstimate welch_psd(std::span<const double> trace, double dt_s,
                      std::size_t segment_length, double overlap_fraction = 0.5,
                      Exec exec = Exec::parallel);
PsdEstimate welch_psd_serial(std::span<const double> trace, double dt_s,
                             std::size_t segment_length, double overlap_fraction = 0.5);

/// Shot-noise-excluded frequency deviation from binned photon counts:
/// sqrt(max(var(N) - mean(N), 0)) / (bin * |slope|), returned in MHz.
/// Requires >= 30 bins; bins shorter than 0.5 s are accepted but flagged.
struct ExcessDeviation {
    double deviation_mhz = 0.0;
    double mean_counts = 0.0;
    double var_counts = 0.0;
    bool clamped = false;        // var < mean, clamped to zero
    bool short_bins = false;     // bin < 0.5 s
};
ExcessDeviation excess_deviation(std::span<const double> counts, double bin_s,
                                 double slope_cps_per_ghz);

/// Lowest frequency where the (log-smoothed) PSD falls below the shot floor,
/// divided by the safety factor. Throws PhysicsError when the PSD never sits
/// above the floor at the low end or never crosses it.
double recommend_bandwidth(const PsdEstimate& psd, double shot_floor_density,
                           double safety_factor = 3.0);

}  // namespace qdlock

#endif

// Emitter line shapes, Faraday-filter transmission curves, their convolution
// and set-point selection on a transmission flank.
#ifndef QDLOCK_SPECTRA_HPP
#define QDLOCK_SPECTRA_HPP

#include <optional>
#include <string>
#include <vector>

#include "qdlock/common.hpp"

namespace qdlock {

/// Serial/OpenMP selector for the data-parallel kernels. Both paths produce
/// bitwise-identical results; the serial one is the reference used in tests.
enum class Exec { serial, parallel };

enum class ProfileShape { lorentzian };

/// Normalized emission line. Detunings are in GHz relative to the weighted
/// Rb D1 line center; the density integrates to 1.
struct SpectralProfile {
    double center_ghz = 0.0;
    double fwhm_ghz = 0.0;
    ProfileShape shape = ProfileShape::lorentzian;

    double density(double nu_ghz) const;
};

/// Lorentzian line from the coherence time: fwhm = 1/(pi*T2).
SpectralProfile lorentzian_from_coherence(double t2_ps);

/// One pseudo-Voigt transmission peak (unit-height Lorentzian/Gaussian mix).
struct FilterPeak {
    double center_ghz = 0.0;
    double fwhm_ghz = 1.0;
    double amplitude = 1.0;       // in [0,1]
    double gauss_fraction = 0.0;  // 0 = Lorentzian, 1 = Gaussian
};

double pseudo_voigt(const FilterPeak& p, double nu_ghz);

enum class CurveLabel { laser, emitter_convolved };

/// Transmission vs detuning, either a parametric peak list or tabulated
/// samples on a strictly increasing grid. Tabulated curves interpolate
/// linearly and refuse to extrapolate.
class FilterCurve {
public:
    /// Empty curve; any evaluation throws until assigned a real one.
    FilterCurve() = default;

    static FilterCurve parametric(std::vector<FilterPeak> peaks,
                                  CurveLabel label = CurveLabel::laser);
    static FilterCurve tabulated(std::vector<double> nu_ghz,
                                 std::vector<double> transmission,
                                 CurveLabel label = CurveLabel::laser);
    /// Two-column text file (detuning_GHz transmission), '#' comments.
    static FilterCurve from_file(const std::string& path,
                                 CurveLabel label = CurveLabel::laser);
    void write(const std::string& path) const;

    double transmission(double nu_ghz) const;

    bool is_tabulated() const { return !nu_.empty(); }
    CurveLabel label() const { return label_; }
    const std::vector<FilterPeak>& peaks() const { return peaks_; }
    const std::vector<double>& grid() const { return nu_; }
    const std::vector<double>& values() const { return t_; }

    double min_nu() const;
    double max_nu() const;
    /// Narrowest feature width: min peak fwhm (parametric) or the half-max
    /// width around the global maximum (tabulated).
    double min_fwhm() const;
    double peak_transmission() const;

private:
    void require_nonempty() const;
    std::vector<FilterPeak> peaks_;
    std::vector<double> nu_, t_;
    CurveLabel label_ = CurveLabel::laser;
};

/// Field- and temperature-tagged parametric model of the filter peak used
/// for locking. Center and width shift linearly with the axial field.
struct FilterSettings {
    double temperature_c = 85.0;
    double field_mt = 0.0;
    double center_coeff_mhz_per_mt = 24.6;
    double width_coeff_mhz_per_mt = 40.8;
    double reference_center_ghz = 0.0;
    double reference_fwhm_ghz = 1.0;
    double reference_field_mt = 0.0;
    double amplitude = 1.0;
    double gauss_fraction = 0.0;
};

/// Peak parameters at the configured field. Throws PhysicsError if the field
/// drives the width non-positive.
FilterPeak peak_for_field(const FilterSettings& s);

/// Exact linear center shift between two fields, in GHz.
double center_shift_ghz(const FilterSettings& s, double field1_mt, double field2_mt);

double filter_transmission(const FilterSettings& s, double nu_ghz);

FilterCurve curve_for(const FilterSettings& s);

/// Output grid for convolve(). Defaults derived from the curve/profile:
/// span = peak-center range +- 10*(filter fwhm + profile fwhm), shifted by
/// the profile center; step = min(fwhm)/50.
struct ConvolutionGrid {
    std::optional<double> nu_min_ghz;
    std::optional<double> nu_max_ghz;
    std::optional<double> step_ghz;
    /// Kernel half-width in units of the profile fwhm.
    double kernel_halfwidth_mult = 200.0;
};

/// T_out(nu) = integral T_in(nu - u) f(u) du on a uniform grid. The profile
/// kernel is renormalized on its truncated support, which preserves the
/// discrete curve area. Steps coarser than min(fwhm)/10 raise PhysicsError.
FilterCurve convolve(const FilterCurve& filter, const SpectralProfile& profile,
                     const ConvolutionGrid& grid = {}, Exec exec = Exec::parallel);
FilterCurve convolve_serial(const FilterCurve& filter, const SpectralProfile& profile,
                            const ConvolutionGrid& grid = {});

/// dT/dnu in 1/GHz. Tabulated curves use grid central differences
/// (interpolated between nodes); parametric curves difference the model
/// with h = min_fwhm/1000. Throws at/outside the usable grid range.
double slope_at(const FilterCurve& curve, double nu_ghz);

struct SetPoint {
    double nu_ghz = 0.0;
    double transmission = 0.0;
    double slope_per_ghz = 0.0;  // dT/dnu
};

struct SetPointCriterion {
    enum class Kind { steepest_slope, target_transmission } kind = Kind::steepest_slope;
    double target = 0.5;  // used by target_transmission

    static SetPointCriterion steepest() { return {Kind::steepest_slope, 0.0}; }
    static SetPointCriterion transmission(double tau) {
        return {Kind::target_transmission, tau};
    }
};

/// Locates a lock point on a transmission flank. Ties break toward the
/// lowest detuning. Throws PhysicsError for flat curves / unreachable targets.
SetPoint find_set_point(const FilterCurve& curve, const SetPointCriterion& criterion);

}  // namespace qdlock

#endif

#include "qdlock/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace qdlock {

double SpectralProfile::density(double nu_ghz) const {
    const double x = nu_ghz - center_ghz;
    const double hw = 0.5 * fwhm_ghz;
    return (fwhm_ghz / (2.0 * pi)) / (x * x + hw * hw);
}

SpectralProfile lorentzian_from_coherence(double t2_ps) {
    if (!(t2_ps > 0.0))
        throw PhysicsError("lorentzian_from_coherence: T2 must be positive");
    SpectralProfile p;
    p.center_ghz = 0.0;
    p.fwhm_ghz = 1.0e3 / (pi * t2_ps);  // 1/(pi*T2), ps -> GHz
    p.shape = ProfileShape::lorentzian;
    return p;
}

double pseudo_voigt(const FilterPeak& p, double nu_ghz) {
    const double x = nu_ghz - p.center_ghz;
    const double hw = 0.5 * p.fwhm_ghz;
    const double lor = hw * hw / (x * x + hw * hw);
    constexpr double four_ln2 = 2.77258872223978123768;
    const double gau = std::exp(-four_ln2 * x * x / (p.fwhm_ghz * p.fwhm_ghz));
    return p.amplitude * ((1.0 - p.gauss_fraction) * lor + p.gauss_fraction * gau);
}

namespace {

void validate_peak(const FilterPeak& p) {
    if (!(p.fwhm_ghz > 0.0)) throw ConfigError("FilterPeak: fwhm must be positive");
    if (p.amplitude < 0.0 || p.amplitude > 1.0)
        throw ConfigError("FilterPeak: amplitude must be in [0,1]");
    if (p.gauss_fraction < 0.0 || p.gauss_fraction > 1.0)
        throw ConfigError("FilterPeak: gauss_fraction must be in [0,1]");
}

double parametric_sum(const std::vector<FilterPeak>& peaks, double nu) {
    double t = 0.0;
    for (const auto& p : peaks) t += pseudo_voigt(p, nu);
    return t;
}

}  // namespace

FilterCurve FilterCurve::parametric(std::vector<FilterPeak> peaks, CurveLabel label) {
    if (peaks.empty()) throw ConfigError("FilterCurve: empty peak list");
    for (const auto& p : peaks) validate_peak(p);
    FilterCurve c;
    c.peaks_ = std::move(peaks);
    c.label_ = label;
    // Overlapping peaks must not push the summed transmission above 1.
    double lo = c.min_nu(), hi = c.max_nu();
    const int n = 2000;
    for (int i = 0; i <= n; ++i) {
        double nu = lo + (hi - lo) * i / n;
        if (parametric_sum(c.peaks_, nu) > 1.0 + 1e-9)
            throw ConfigError("FilterCurve: summed transmission exceeds 1");
    }
    return c;
}

FilterCurve FilterCurve::tabulated(std::vector<double> nu_ghz,
                                   std::vector<double> transmission,
                                   CurveLabel label) {
    if (nu_ghz.size() != transmission.size())
        throw ConfigError("FilterCurve: grid/value size mismatch");
    if (nu_ghz.size() < 4)
        throw ConfigError("FilterCurve: need at least 4 tabulated samples");
    for (std::size_t i = 1; i < nu_ghz.size(); ++i)
        if (!(nu_ghz[i] > nu_ghz[i - 1]))
            throw ConfigError("FilterCurve: detunings must be strictly increasing");
    for (double t : transmission)
        if (t < -1e-12 || t > 1.0 + 1e-9)
            throw ConfigError("FilterCurve: transmission outside [0,1]");
    FilterCurve c;
    c.nu_ = std::move(nu_ghz);
    c.t_ = std::move(transmission);
    c.label_ = label;
    return c;
}

FilterCurve FilterCurve::from_file(const std::string& path, CurveLabel label) {
    std::ifstream in(path);
    if (!in) throw ConfigError("FilterCurve: cannot open " + path);
    std::vector<double> nu, t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double a, b;
        if (!(ls >> a)) continue;  // blank / comment-only line
        if (!(ls >> b))
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected two columns");
        nu.push_back(a);
        t.push_back(b);
    }
    return tabulated(std::move(nu), std::move(t), label);
}

void FilterCurve::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("FilterCurve: cannot write " + path);
    out << "# detuning_GHz transmission\n";
    char buf[80];
    if (is_tabulated()) {
        for (std::size_t i = 0; i < nu_.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.10g %.10g\n", nu_[i], t_[i]);
            out << buf;
        }
    } else {
        // Sample the model on its default span.
        double lo = min_nu(), hi = max_nu(), h = min_fwhm() / 50.0;
        for (double nu = lo; nu <= hi + 0.5 * h; nu += h) {
            std::snprintf(buf, sizeof buf, "%.10g %.10g\n", nu, transmission(nu));
            out << buf;
        }
    }
}

void FilterCurve::require_nonempty() const {
    if (peaks_.empty() && nu_.empty())
        throw ConfigError("FilterCurve: curve is empty");
}

double FilterCurve::transmission(double nu_ghz) const {
    require_nonempty();
    if (!is_tabulated()) return parametric_sum(peaks_, nu_ghz);
    if (nu_ghz < nu_.front() || nu_ghz > nu_.back())
        throw PhysicsError("FilterCurve: detuning outside tabulated range");
    auto it = std::upper_bound(nu_.begin(), nu_.end(), nu_ghz);
    if (it == nu_.end()) return t_.back();
    std::size_t i = static_cast<std::size_t>(it - nu_.begin());
    if (i == 0) return t_.front();
    double w = (nu_ghz - nu_[i - 1]) / (nu_[i] - nu_[i - 1]);
    return t_[i - 1] + w * (t_[i] - t_[i - 1]);
}

double FilterCurve::min_nu() const {
    require_nonempty();
    if (is_tabulated()) return nu_.front();
    double lo = peaks_.front().center_ghz - 10.0 * peaks_.front().fwhm_ghz;
    for (const auto& p : peaks_)
        lo = std::min(lo, p.center_ghz - 10.0 * p.fwhm_ghz);
    return lo;
}

double FilterCurve::max_nu() const {
    if (is_tabulated()) return nu_.back();
    double hi = peaks_.front().center_ghz + 10.0 * peaks_.front().fwhm_ghz;
    for (const auto& p : peaks_)
        hi = std::max(hi, p.center_ghz + 10.0 * p.fwhm_ghz);
    return hi;
}

double FilterCurve::min_fwhm() const {
    if (!is_tabulated()) {
        double w = peaks_.front().fwhm_ghz;
        for (const auto& p : peaks_) w = std::min(w, p.fwhm_ghz);
        return w;
    }
    // Half-max width around the global maximum.
    std::size_t imax = static_cast<std::size_t>(
        std::max_element(t_.begin(), t_.end()) - t_.begin());
    double half = 0.5 * t_[imax];
    std::size_t lo = imax, hi = imax;
    while (lo > 0 && t_[lo] > half) --lo;
    while (hi + 1 < t_.size() && t_[hi] > half) ++hi;
    double w = nu_[hi] - nu_[lo];
    if (!(w > 0.0)) w = nu_.back() - nu_.front();
    return w;
}

double FilterCurve::peak_transmission() const {
    if (is_tabulated()) return *std::max_element(t_.begin(), t_.end());
    double lo = min_nu(), hi = max_nu(), best = 0.0;
    const int n = 4000;
    for (int i = 0; i <= n; ++i)
        best = std::max(best, transmission(lo + (hi - lo) * i / n));
    return best;
}

FilterPeak peak_for_field(const FilterSettings& s) {
    FilterPeak p;
    const double db = s.field_mt - s.reference_field_mt;
    p.center_ghz = s.reference_center_ghz + 1e-3 * s.center_coeff_mhz_per_mt * db;
    p.fwhm_ghz = s.reference_fwhm_ghz + 1e-3 * s.width_coeff_mhz_per_mt * db;
    p.amplitude = s.amplitude;
    p.gauss_fraction = s.gauss_fraction;
    if (!(p.fwhm_ghz > 0.0))
        throw PhysicsError("FilterSettings: field drives the peak width non-positive");
    validate_peak(p);
    return p;
}

double center_shift_ghz(const FilterSettings& s, double field1_mt, double field2_mt) {
    return 1e-3 * s.center_coeff_mhz_per_mt * (field1_mt - field2_mt);
}

double filter_transmission(const FilterSettings& s, double nu_ghz) {
    return pseudo_voigt(peak_for_field(s), nu_ghz);
}

FilterCurve curve_for(const FilterSettings& s) {
    return FilterCurve::parametric({peak_for_field(s)}, CurveLabel::laser);
}

namespace {

struct ResolvedGrid {
    double lo, hi, step;
    std::size_t n;
};

ResolvedGrid resolve_grid(const FilterCurve& filter, const SpectralProfile& profile,
                          const ConvolutionGrid& grid) {
    const double wf = filter.min_fwhm();
    const double wp = profile.fwhm_ghz;
    const double pad = 10.0 * (wf + wp);
    double lo, hi;
    if (filter.is_tabulated()) {
        lo = filter.min_nu();
        hi = filter.max_nu();
    } else {
        lo = filter.min_nu() - pad + 10.0 * wf;  // peak-center range +- pad
        hi = filter.max_nu() + pad - 10.0 * wf;
    }
    lo += profile.center_ghz;
    hi += profile.center_ghz;
    ResolvedGrid g;
    g.lo = grid.nu_min_ghz.value_or(lo);
    g.hi = grid.nu_max_ghz.value_or(hi);
    g.step = grid.step_ghz.value_or(std::min(wf, wp) / 50.0);
    if (!(g.hi > g.lo) || !(g.step > 0.0))
        throw ConfigError("convolve: inconsistent output grid");
    if (g.step > std::min(wf, wp) / 10.0)
        throw PhysicsError("convolve: grid step too coarse for the narrowest feature");
    g.n = static_cast<std::size_t>(std::floor((g.hi - g.lo) / g.step)) + 1;
    return g;
}

FilterCurve convolve_impl(const FilterCurve& filter, const SpectralProfile& profile,
                          const ConvolutionGrid& grid, bool parallel) {
    const ResolvedGrid g = resolve_grid(filter, profile, grid);

    // Profile kernel, trapezoid weights renormalized on the truncated support.
    const double span = grid.kernel_halfwidth_mult * profile.fwhm_ghz;
    const std::size_t nk = static_cast<std::size_t>(std::ceil(span / g.step));
    std::vector<double> u(2 * nk + 1), w(2 * nk + 1);
    double wsum = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        u[j] = profile.center_ghz + (static_cast<double>(j) - static_cast<double>(nk)) * g.step;
        w[j] = profile.density(u[j]);
        if (j == 0 || j + 1 == u.size()) w[j] *= 0.5;
        wsum += w[j];
    }
    for (double& x : w) x /= wsum;

    const bool tab = filter.is_tabulated();
    const double tlo = tab ? filter.min_nu() : 0.0;
    const double thi = tab ? filter.max_nu() : 0.0;

    std::vector<double> nu_out(g.n), t_out(g.n);
    auto point = [&](std::size_t i) {
        const double nu = g.lo + static_cast<double>(i) * g.step;
        double acc = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) {
            const double x = nu - u[j];
            double tl;
            if (tab)
                tl = (x < tlo || x > thi) ? 0.0 : filter.transmission(x);
            else
                tl = parametric_sum(filter.peaks(), x);
            acc += w[j] * tl;
        }
        nu_out[i] = nu;
        t_out[i] = clamp(acc, 0.0, 1.0);
    };

    if (parallel) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(g.n); ++i)
            point(static_cast<std::size_t>(i));
    } else {
        for (std::size_t i = 0; i < g.n; ++i) point(i);
    }
    return FilterCurve::tabulated(std::move(nu_out), std::move(t_out),
                                  CurveLabel::emitter_convolved);
}

}  // namespace

FilterCurve convolve(const FilterCurve& filter, const SpectralProfile& profile,
                     const ConvolutionGrid& grid, Exec exec) {
    return convolve_impl(filter, profile, grid, exec == Exec::parallel);
}

FilterCurve convolve_serial(const FilterCurve& filter, const SpectralProfile& profile,
                            const ConvolutionGrid& grid) {
    return convolve_impl(filter, profile, grid, false);
}

double slope_at(const FilterCurve& curve, double nu_ghz) {
    if (!curve.is_tabulated()) {
        const double h = curve.min_fwhm() / 1000.0;
        return (curve.transmission(nu_ghz + h) - curve.transmission(nu_ghz - h)) /
               (2.0 * h);
    }
    const auto& nu = curve.grid();
    const auto& t = curve.values();
    const std::size_t n = nu.size();
    if (nu_ghz < nu[1] || nu_ghz > nu[n - 2])
        throw PhysicsError("slope_at: detuning at or beyond the grid boundary");
    // Central differences at interior nodes, interpolated between nodes.
    auto node_slope = [&](std::size_t i) {
        return (t[i + 1] - t[i - 1]) / (nu[i + 1] - nu[i - 1]);
    };
    auto it = std::upper_bound(nu.begin(), nu.end(), nu_ghz);
    std::size_t i = static_cast<std::size_t>(it - nu.begin());
    if (i < 2) return node_slope(1);
    if (i > n - 2) return node_slope(n - 2);
    const double w = (nu_ghz - nu[i - 1]) / (nu[i] - nu[i - 1]);
    return node_slope(i - 1) + w * (node_slope(i) - node_slope(i - 1));
}

namespace {

FilterCurve sample_parametric(const FilterCurve& c) {
    const double lo = c.min_nu(), hi = c.max_nu();
    const double step = c.min_fwhm() / 200.0;
    const std::size_t n = static_cast<std::size_t>(std::floor((hi - lo) / step)) + 1;
    std::vector<double> nu(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
        nu[i] = lo + static_cast<double>(i) * step;
        t[i] = c.transmission(nu[i]);
    }
    return FilterCurve::tabulated(std::move(nu), std::move(t), c.label());
}

}  // namespace

SetPoint find_set_point(const FilterCurve& curve_in, const SetPointCriterion& criterion) {
    // Parametric curves are evaluated on their default grid.
    FilterCurve tab = curve_in.is_tabulated() ? curve_in : sample_parametric(curve_in);
    const auto& nu = tab.grid();
    const auto& t = tab.values();
    const std::size_t n = nu.size();
    const double tmax = *std::max_element(t.begin(), t.end());
    const double tmin = *std::min_element(t.begin(), t.end());
    if (tmax - tmin < 1e-12)
        throw PhysicsError("find_set_point: curve is flat, no usable flank");

    if (criterion.kind == SetPointCriterion::Kind::steepest_slope) {
        // Strict improvement only, so ties keep the lowest detuning.
        std::size_t best = 1;
        double best_mag = -1.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double s = (t[i + 1] - t[i - 1]) / (nu[i + 1] - nu[i - 1]);
            if (std::abs(s) > best_mag) {
                best_mag = std::abs(s);
                best = i;
            }
        }
        SetPoint sp;
        sp.nu_ghz = nu[best];
        sp.transmission = t[best];
        sp.slope_per_ghz = (t[best + 1] - t[best - 1]) / (nu[best + 1] - nu[best - 1]);
        return sp;
    }

    const double tau = criterion.target;
    if (tau <= tmin || tau >= tmax)
        throw PhysicsError("find_set_point: target transmission outside curve range");
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if ((t[i] - tau) * (t[i + 1] - tau) <= 0.0 && t[i] != t[i + 1]) {
            const double w = (tau - t[i]) / (t[i + 1] - t[i]);
            SetPoint sp;
            sp.nu_ghz = nu[i] + w * (nu[i + 1] - nu[i]);
            sp.transmission = tau;
            sp.slope_per_ghz = slope_at(tab, sp.nu_ghz);
            return sp;
        }
    }
    throw PhysicsError("find_set_point: no crossing found");
}

}  // namespace qdlock

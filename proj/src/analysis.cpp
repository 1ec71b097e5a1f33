#include "qdlock/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>

namespace qdlock {

namespace {

// Iterative in-place radix-2 FFT (decimation in time).
void fft_pow2(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * pi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

PsdEstimate welch_impl(std::span<const double> x, double dt, std::size_t nperseg,
                       double overlap, bool parallel) {
    if (!(dt > 0.0)) throw ConfigError("welch_psd: dt must be positive");
    if (nperseg < 8) throw ConfigError("welch_psd: segment too short");
    if (overlap < 0.0 || overlap >= 1.0)
        throw ConfigError("welch_psd: overlap fraction must be in [0,1)");
    const std::size_t hop =
        std::max<std::size_t>(1, static_cast<std::size_t>(
                                     std::floor(static_cast<double>(nperseg) * (1.0 - overlap))));
    if (x.size() < nperseg + hop)
        throw PhysicsError("welch_psd: trace shorter than two segments");

    std::vector<double> win(nperseg);
    double u = 0.0;
    for (std::size_t i = 0; i < nperseg; ++i) {
        win[i] = 0.5 * (1.0 - std::cos(2.0 * pi * static_cast<double>(i) /
                                       static_cast<double>(nperseg - 1)));
        u += win[i] * win[i];
    }

    const std::size_t nfft = next_pow2(nperseg);
    const std::size_t nfreq = nfft / 2 + 1;
    const double fs = 1.0 / dt;
    const double scale = 1.0 / (fs * u);

    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + nperseg <= x.size(); s += hop) starts.push_back(s);
    const std::size_t nseg = starts.size();

    // Each segment writes its own periodogram; the reduction over segments
    // runs in fixed order afterwards, so the result is identical for any
    // thread count.
    std::vector<double> per(nseg * nfreq);
    auto one_segment = [&](std::size_t s) {
        const std::size_t start = starts[s];
        double mean = 0.0;
        for (std::size_t i = 0; i < nperseg; ++i) mean += x[start + i];
        mean /= static_cast<double>(nperseg);
        std::vector<std::complex<double>> buf(nfft, std::complex<double>(0.0, 0.0));
        for (std::size_t i = 0; i < nperseg; ++i)
            buf[i] = std::complex<double>((x[start + i] - mean) * win[i], 0.0);
        fft_pow2(buf);
        double* out = &per[s * nfreq];
        for (std::size_t k = 0; k < nfreq; ++k) {
            double p = std::norm(buf[k]) * scale;
            if (k != 0 && k != nfft / 2) p *= 2.0;  // one-sided
            out[k] = p;
        }
    };

    if (parallel) {
#pragma omp parallel for schedule(static)
        for (long long s = 0; s < static_cast<long long>(nseg); ++s)
            one_segment(static_cast<std::size_t>(s));
    } else {
        for (std::size_t s = 0; s < nseg; ++s) one_segment(s);
    }

    PsdEstimate psd;
    psd.frequency_hz.resize(nfreq);
    psd.density.assign(nfreq, 0.0);
    psd.segment_count = nseg;
    for (std::size_t s = 0; s < nseg; ++s)
        for (std::size_t k = 0; k < nfreq; ++k) psd.density[k] += per[s * nfreq + k];
    for (std::size_t k = 0; k < nfreq; ++k) {
        psd.density[k] /= static_cast<double>(nseg);
        psd.frequency_hz[k] = static_cast<double>(k) * fs / static_cast<double>(nfft);
    }
    return psd;
}

}  // namespace

void PsdEstimate::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("PsdEstimate: cannot write " + path);
    out << "# f_Hz density\n";
    char buf[80];
    for (std::size_t i = 0; i < frequency_hz.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.10g %.10g\n", frequency_hz[i], density[i]);
        out << buf;
    }
}

PsdEstimate welch_psd(std::span<const double> trace, double dt_s,
                      std::size_t segment_length, double overlap_fraction, Exec exec) {
    return welch_impl(trace, dt_s, segment_length, overlap_fraction,
                      exec == Exec::parallel);
}

PsdEstimate welch_psd_serial(std::span<const double> trace, double dt_s,
                             std::size_t segment_length, double overlap_fraction) {
    return welch_impl(trace, dt_s, segment_length, overlap_fraction, false);
}

ExcessDeviation excess_deviation(std::span<const double> counts, double bin_s,
                                 double slope_cps_per_ghz) {
    if (counts.size() < 30)
        throw ConfigError("excess_deviation: need at least 30 bins");
    if (slope_cps_per_ghz == 0.0)
        throw ConfigError("excess_deviation: discriminator slope must be non-zero");
    if (!(bin_s > 0.0)) throw ConfigError("excess_deviation: bin must be positive");

    const double n = static_cast<double>(counts.size());
    double mean = 0.0;
    for (double c : counts) mean += c;
    mean /= n;
    double var = 0.0;
    for (double c : counts) var += (c - mean) * (c - mean);
    var /= (n - 1.0);

    ExcessDeviation r;
    r.mean_counts = mean;
    r.var_counts = var;
    r.short_bins = bin_s < 0.5;
    double excess = var - mean;
    if (excess < 0.0) {
        excess = 0.0;
        r.clamped = true;
    }
    const double dev_ghz = std::sqrt(excess) / (bin_s * std::abs(slope_cps_per_ghz));
    r.deviation_mhz = dev_ghz * 1e3;
    return r;
}

double recommend_bandwidth(const PsdEstimate& psd, double shot_floor_density,
                           double safety_factor) {
    if (!(shot_floor_density > 0.0))
        throw ConfigError("recommend_bandwidth: shot floor must be positive");
    if (!(safety_factor >= 1.0))
        throw ConfigError("recommend_bandwidth: safety factor must be >= 1");
    if (psd.frequency_hz.size() < 4)
        throw ConfigError("recommend_bandwidth: PSD too short");

    // Log-spaced smoothing (third-octave bins) to tame periodogram scatter.
    const double f_lo = psd.frequency_hz[1];
    const double f_hi = psd.frequency_hz.back();
    const double ratio = std::pow(2.0, 1.0 / 3.0);
    std::vector<double> fc, sc;
    double a = f_lo;
    while (a < f_hi) {
        double b = std::min(a * ratio, f_hi);
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = 1; i < psd.frequency_hz.size(); ++i) {
            if (psd.frequency_hz[i] >= a && psd.frequency_hz[i] < b) {
                sum += psd.density[i];
                ++cnt;
            }
        }
        if (cnt > 0) {
            fc.push_back(std::sqrt(a * b));
            sc.push_back(sum / static_cast<double>(cnt));
        }
        a = b;
    }
    if (fc.size() < 2)
        throw PhysicsError("recommend_bandwidth: not enough spectral support");
    if (sc.front() <= shot_floor_density)
        throw PhysicsError(
            "recommend_bandwidth: PSD does not exceed the shot floor at low frequency");

    for (std::size_t i = 1; i < fc.size(); ++i) {
        if (sc[i] <= shot_floor_density) {
            // log-log interpolation between the bracketing smoothed bins
            const double la = std::log(sc[i - 1]), lb = std::log(sc[i]);
            const double fa = std::log(fc[i - 1]), fb = std::log(fc[i]);
            const double w = (std::log(shot_floor_density) - la) / (lb - la);
            const double fx = std::exp(fa + w * (fb - fa));
            return fx / safety_factor;
        }
    }
    throw PhysicsError("recommend_bandwidth: no crossover inside the band");
}

}  // namespace qdlock

// Timing comparison of the serial reference kernels against their OpenMP
// counterparts: curve convolution, windowed visibility, Welch PSD.
#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qdlock/analysis.hpp"
#include "qdlock/drift.hpp"
#include "qdlock/interference.hpp"
#include "qdlock/spectra.hpp"

using namespace qdlock;

namespace {

template <typename F>
double time_ms(F&& f, int reps) {
    // warm-up
    f();
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) f();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-22s %10.2f ms %10.2f ms %8.2fx\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP\n");
#endif
    std::printf("%-22s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    // Convolution: 2 GHz Lorentzian filter peak x 2.08 GHz emitter line.
    const FilterCurve laser =
        FilterCurve::parametric({FilterPeak{0.0, 2.0, 0.9, 0.0}});
    const SpectralProfile line = lorentzian_from_coherence(153.0);
    report("convolve",
           time_ms([&] { (void)convolve_serial(laser, line); }, 3),
           time_ms([&] { (void)convolve(laser, line); }, 3));

    // Windowed visibility over a 100-minute drift trace at 10 ms sampling.
    const std::size_t n = 600000;
    std::vector<double> t(n), d(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = 0.01 * static_cast<double>(i);
        d[i] = 1.8e-3 * t[i] / 60.0;
    }
    const EmitterParams e1(155.0, 153.0), e2(187.0, 123.0);
    report("windowed_visibility",
           time_ms([&] { (void)windowed_visibility_serial(t, d, e1, e2, 40.0, 1.0); }, 3),
           time_ms([&] { (void)windowed_visibility(t, d, e1, e2, 40.0, 1.0); }, 3));

    // Welch PSD of a long noise trace.
    NoiseModel nm;
    nm.h_flicker_ghz2 = 1e-4;
    nm.h_white_ghz2_per_hz = 1e-8;
    nm.f_low_hz = 1e-3;
    nm.f_high_hz = 40.0;
    nm.seed = 7;
    const auto trace = sample_noise(nm, 4000.0, 0.01);
    report("welch_psd",
           time_ms([&] { (void)welch_psd_serial(trace, 0.01, 16384); }, 3),
           time_ms([&] { (void)welch_psd(trace, 0.01, 16384); }, 3));
    return 0;
}

#include "qdlock/drift.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace qdlock {

double creep_detuning(const CreepModel& model, double t_s) {
    const double dt = t_s - model.t0_s;
    if (!(dt > 0.0))
        throw PhysicsError("creep_detuning: time at or before the voltage step");
    const double minutes = std::max(dt, creep_floor_s) / 60.0;
    return model.dnu0_ghz * (1.0 + model.alpha * std::log10(minutes));
}

ActuatorOffset actuator_offset(const ActuatorModel& model,
                               std::span<const VoltageStep> history, double t_s) {
    if (model.gain_ghz_per_v == 0.0)
        throw ConfigError("actuator_offset: gain must be non-zero");
    for (std::size_t i = 1; i < history.size(); ++i)
        if (history[i].t_s < history[i - 1].t_s)
            throw ConfigError("actuator_offset: steps must be time-ordered");

    ActuatorOffset out;
    double level = 0.0;
    for (const auto& step : history) {
        if (step.t_s > t_s) break;
        const double target = level + step.delta_v;
        const double clamped = clamp(target, model.v_min, model.v_max);
        if (clamped != target) out.saturated = true;
        const double dv = clamped - level;
        level = clamped;

        out.dnu_ghz += model.gain_ghz_per_v * dv;
        if (model.creep_dnu0_per_volt != 0.0) {
            CreepModel c{model.creep_dnu0_per_volt * dv, model.creep_alpha, step.t_s};
            if (t_s > step.t_s) out.dnu_ghz += creep_detuning(c, t_s);
        }
    }
    return out;
}

std::vector<double> sample_noise(const NoiseModel& model, double duration_s, double dt_s) {
    if (!(dt_s > 0.0) || !(duration_s > 0.0))
        throw ConfigError("sample_noise: duration and dt must be positive");
    if (model.h_flicker_ghz2 < 0.0 || model.h_white_ghz2_per_hz < 0.0)
        throw ConfigError("sample_noise: PSD coefficients must be non-negative");
    if (!(model.f_low_hz < model.f_high_hz))
        throw ConfigError("sample_noise: f_low must be below f_high");
    if (!(dt_s < 1.0 / (2.0 * model.f_high_hz)))
        throw ConfigError("sample_noise: dt too coarse for f_high");

    const std::size_t n = static_cast<std::size_t>(std::llround(duration_s / dt_s));
    std::vector<double> trace(n, 0.0);
    if (model.h_flicker_ghz2 == 0.0 && model.h_white_ghz2_per_hz == 0.0) return trace;

    Rng rng(model.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    struct Corner {
        double a;       // AR(1) pole
        double sig_in;  // innovation std
        double y;       // state
    };
    std::vector<Corner> corners;
    if (model.h_flicker_ghz2 > 0.0) {
        const double ratio = std::pow(10.0, 1.0 / 3.0);  // 3 corners per decade
        // Plateau scale making the corner sum approximate h/f in-band.
        const double c = 2.0 * model.h_flicker_ghz2 * std::log(ratio) / pi;
        // One ratio of padding on each side keeps the -1 slope valid at the
        // band edges.
        for (double fk = model.f_low_hz / ratio; fk <= model.f_high_hz * ratio * (1.0 + 1e-9);
             fk *= ratio) {
            Corner k;
            k.a = std::exp(-2.0 * pi * fk * dt_s);
            const double plateau = c / fk;
            k.sig_in = std::sqrt(plateau * (1.0 - k.a) * (1.0 - k.a) / (2.0 * dt_s));
            // stationary start, no transient
            k.y = k.sig_in / std::sqrt(1.0 - k.a * k.a) * gauss(rng);
            corners.push_back(k);
        }
    }
    const double white_sigma =
        model.h_white_ghz2_per_hz > 0.0 ? std::sqrt(model.h_white_ghz2_per_hz / (2.0 * dt_s))
                                        : 0.0;

    for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        for (auto& k : corners) {
            k.y = k.a * k.y + k.sig_in * gauss(rng);
            v += k.y;
        }
        if (white_sigma > 0.0) v += white_sigma * gauss(rng);
        trace[i] = v;
    }
    return trace;
}

namespace {

struct LinFit {
    double a = 0.0, b = 0.0;       // y = a + b*L
    double var_a = 0.0, var_b = 0.0, cov_ab = 0.0;
    double rss = 0.0;
};

// Ordinary least squares of y on {1, L}.
LinFit linear_fit(std::span<const double> L, std::span<const double> y) {
    const double n = static_cast<double>(L.size());
    double sl = 0.0, sll = 0.0, sy = 0.0, sly = 0.0;
    for (std::size_t i = 0; i < L.size(); ++i) {
        sl += L[i];
        sll += L[i] * L[i];
        sy += y[i];
        sly += L[i] * y[i];
    }
    const double det = n * sll - sl * sl;
    if (std::abs(det) < 1e-14 * n * sll)
        throw PhysicsError("fit_creep: degenerate time sampling");
    LinFit f;
    f.b = (n * sly - sl * sy) / det;
    f.a = (sy - f.b * sl) / n;
    for (std::size_t i = 0; i < L.size(); ++i) {
        const double r = y[i] - f.a - f.b * L[i];
        f.rss += r * r;
    }
    const double s2 = f.rss / std::max(1.0, n - 2.0);
    f.var_a = s2 * sll / det;
    f.var_b = s2 * n / det;
    f.cov_ab = -s2 * sl / det;
    return f;
}

std::vector<double> log_minutes(std::span<const double> t, double t0) {
    std::vector<double> L(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double dt = t[i] - t0;
        if (!(dt >= creep_floor_s))
            throw PhysicsError("fit_creep: sample inside the creep validity floor");
        L[i] = std::log10(dt / 60.0);
    }
    return L;
}

}  // namespace

CreepFit fit_creep(std::span<const double> t_s, std::span<const double> dnu_ghz,
                   std::optional<double> t0_known_s) {
    if (t_s.size() != dnu_ghz.size())
        throw ConfigError("fit_creep: size mismatch");
    if (t_s.size() < 10)
        throw ConfigError("fit_creep: need at least 10 samples");
    for (std::size_t i = 1; i < t_s.size(); ++i)
        if (!(t_s[i] > t_s[i - 1]))
            throw ConfigError("fit_creep: times must be strictly increasing");

    CreepFit fit;
    double t0;
    if (t0_known_s) {
        t0 = *t0_known_s;
    } else {
        // Profile t0: for fixed t0 the model is linear, so minimize the
        // linear-fit RSS over t0 with a coarse scan plus golden-section.
        fit.t0_fitted = true;
        const double hi = t_s.front() - creep_floor_s;
        const double span = t_s.back() - t_s.front();
        const double lo = t_s.front() - 10.0 * span;
        auto rss_at = [&](double cand) {
            ++fit.evaluations;
            auto L = log_minutes(t_s, cand);
            return linear_fit(L, dnu_ghz).rss;
        };
        double best_t0 = hi, best_rss = rss_at(hi);
        const int coarse = 64;
        for (int i = 0; i < coarse; ++i) {
            const double cand = lo + (hi - lo) * i / (coarse - 1);
            const double r = rss_at(cand);
            if (r < best_rss) {
                best_rss = r;
                best_t0 = cand;
            }
        }
        const double step = (hi - lo) / (coarse - 1);
        double a = std::max(lo, best_t0 - step), b = std::min(hi, best_t0 + step);
        const double gr = 0.6180339887498949;
        double c = b - gr * (b - a), d = a + gr * (b - a);
        double fc = rss_at(c), fd = rss_at(d);
        for (int it = 0; it < 200 && (b - a) > 1e-9 * std::max(1.0, std::abs(b)); ++it) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = rss_at(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = rss_at(d);
            }
            if (fit.evaluations > 10000)
                throw PhysicsError("fit_creep: t0 search did not converge");
        }
        t0 = 0.5 * (a + b);
    }

    auto L = log_minutes(t_s, t0);
    const double decades = *std::max_element(L.begin(), L.end()) -
                           *std::min_element(L.begin(), L.end());
    if (decades < 1.0)
        throw ConfigError("fit_creep: samples must span at least one decade in t - t0");

    const LinFit lf = linear_fit(L, dnu_ghz);
    fit.model.t0_s = t0;
    fit.model.dnu0_ghz = lf.a;
    // Flat traces: alpha indeterminate but physically zero.
    if (std::abs(lf.a) < 1e-12 && std::abs(lf.b) < 1e-12) {
        fit.model.alpha = 0.0;
        fit.alpha_err = 0.0;
    } else if (std::abs(lf.a) < 1e-12) {
        throw PhysicsError("fit_creep: dnu0 consistent with zero but slope is not");
    } else {
        fit.model.alpha = lf.b / lf.a;
        // first-order propagation of alpha = b/a
        const double a2 = lf.a * lf.a;
        fit.alpha_err = std::sqrt(std::max(
            0.0, lf.var_b / a2 + lf.var_a * lf.b * lf.b / (a2 * a2) -
                     2.0 * lf.cov_ab * lf.b / (a2 * lf.a)));
    }
    fit.dnu0_err_ghz = std::sqrt(lf.var_a);
    fit.residual_rms_ghz = std::sqrt(lf.rss / static_cast<double>(t_s.size()));
    return fit;
}

void write_trace(const std::string& path, std::span<const double> t_s,
                 std::span<const double> value, const std::string& header) {
    if (t_s.size() != value.size()) throw ConfigError("write_trace: size mismatch");
    std::ofstream out(path);
    if (!out) throw ConfigError("write_trace: cannot write " + path);
    out << "# " << header << "\n";
    char buf[96];
    for (std::size_t i = 0; i < t_s.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.10g %.10g\n", t_s[i], value[i]);
        out << buf;
    }
}

std::pair<std::vector<double>, std::vector<double>> read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("read_trace: cannot open " + path);
    std::vector<double> t, v;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double a, b;
        if (!(ls >> a)) continue;
        if (!(ls >> b))
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected two columns");
        t.push_back(a);
        v.push_back(b);
    }
    return {std::move(t), std::move(v)};
}

}  // namespace qdlock

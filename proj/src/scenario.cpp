#include "qdlock/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "qdlock/analysis.hpp"

namespace qdlock {

namespace {

const std::vector<std::string> kScenarioKeys = {
    "name", "duration_s", "master_seed", "update_period_s", "out_decimate"};
const std::vector<std::string> kEmitterKeys = {"t1_ps", "t2_ps", "r_qd_cps", "dark_cps"};
const std::vector<std::string> kFilterKeys = {
    "temperature_c",      "field_mt",           "center_coeff_mhz_per_mt",
    "width_coeff_mhz_per_mt", "reference_center_ghz", "reference_fwhm_ghz",
    "reference_field_mt", "amplitude",          "gauss_fraction",
    "curve_file"};
const std::vector<std::string> kLockKeys = {
    "mode",           "setpoint_criterion", "setpoint_transmission",
    "bandwidth_hz",   "tau_cycle_s",        "tau_filter_s",
    "settle_s",       "deterministic_rate", "watchdog_ghz"};
const std::vector<std::string> kActuatorKeys = {
    "gain_ghz_per_v", "v_min", "v_max", "creep_per_volt_ghz", "creep_alpha"};
const std::vector<std::string> kDriftKeys = {
    "creep_enabled",  "creep_dnu0_ghz", "creep_alpha",   "creep_t0_locked_s",
    "creep_t0_free_s", "noise_enabled", "h_flicker_ghz2", "h_white_ghz2_per_hz",
    "f_low_hz",       "f_high_hz",      "initial_detuning_ghz"};
const std::vector<std::string> kOolKeys = {
    "enabled", "r_cps", "dark_cps", "fwhm_ghz", "amplitude", "gauss_fraction",
    "operating_transmission", "bin_s"};
const std::vector<std::string> kTpiKeys = {
    "enabled",      "window_min",   "step_min",     "hom_enabled",
    "singles1_cps", "singles2_cps", "rep_period_ns", "n_side_peaks",
    "bin_width_ns", "window_half_ns", "t_acq_s",    "blink_factor"};

std::vector<std::pair<std::string, std::vector<std::string>>> schema() {
    std::vector<std::pair<std::string, std::vector<std::string>>> s;
    s.emplace_back("scenario", kScenarioKeys);
    for (int i = 1; i <= 2; ++i) {
        const std::string n = std::to_string(i);
        s.emplace_back("emitter" + n, kEmitterKeys);
        s.emplace_back("filter" + n, kFilterKeys);
        s.emplace_back("lock" + n, kLockKeys);
        s.emplace_back("actuator" + n, kActuatorKeys);
        s.emplace_back("drift" + n, kDriftKeys);
        s.emplace_back("ool" + n, kOolKeys);
    }
    s.emplace_back("tpi", kTpiKeys);
    return s;
}

ArmMode parse_mode(const std::string& s, const std::string& where) {
    if (s == "locked") return ArmMode::locked;
    if (s == "free") return ArmMode::free_running;
    if (s == "both") return ArmMode::both;
    if (s == "off") return ArmMode::off;
    throw ConfigError(where + ": mode must be locked|free|both|off, got '" + s + "'");
}

ArmConfig parse_arm(const IniDoc& doc, int idx) {
    const std::string n = std::to_string(idx);
    ArmConfig a;
    if (!doc.has_section("emitter" + n)) return a;
    a.present = true;

    a.emitter = EmitterParams(doc.get_double("emitter" + n, "t1_ps"),
                              doc.get_double("emitter" + n, "t2_ps"));
    a.r_qd_cps = doc.get_double("emitter" + n, "r_qd_cps");
    a.dark_cps = doc.get_double("emitter" + n, "dark_cps", 0.0);
    if (a.r_qd_cps < 0.0 || a.dark_cps < 0.0)
        throw ConfigError("emitter" + n + ": rates must be non-negative");

    const std::string fs = "filter" + n;
    a.filter.temperature_c = doc.get_double(fs, "temperature_c", 85.0);
    a.filter.field_mt = doc.get_double(fs, "field_mt", 0.0);
    a.filter.center_coeff_mhz_per_mt = doc.get_double(fs, "center_coeff_mhz_per_mt", 24.6);
    a.filter.width_coeff_mhz_per_mt = doc.get_double(fs, "width_coeff_mhz_per_mt", 40.8);
    a.filter.reference_center_ghz = doc.get_double(fs, "reference_center_ghz", 0.0);
    a.filter.reference_fwhm_ghz = doc.get_double(fs, "reference_fwhm_ghz", 1.0);
    a.filter.reference_field_mt = doc.get_double(fs, "reference_field_mt", 0.0);
    a.filter.amplitude = doc.get_double(fs, "amplitude", 1.0);
    a.filter.gauss_fraction = doc.get_double(fs, "gauss_fraction", 0.0);
    a.curve_file = doc.get_string(fs, "curve_file", "");
    if (!a.curve_file.empty() && !std::filesystem::exists(a.curve_file))
        throw ConfigError(fs + ".curve_file: no such file: " + a.curve_file);

    const std::string ls = "lock" + n;
    a.mode = parse_mode(doc.get_string(ls, "mode", "locked"), ls);
    const std::string crit = doc.get_string(ls, "setpoint_criterion", "transmission");
    if (crit == "transmission")
        a.criterion =
            SetPointCriterion::transmission(doc.get_double(ls, "setpoint_transmission", 0.25));
    else if (crit == "steepest")
        a.criterion = SetPointCriterion::steepest();
    else
        throw ConfigError(ls + ".setpoint_criterion: must be transmission|steepest");
    a.bandwidth_hz = doc.get_double(ls, "bandwidth_hz", 0.03);
    a.tau_cycle_s = doc.get_double(ls, "tau_cycle_s", 2e-6);
    a.tau_filter_s = doc.get_double(ls, "tau_filter_s", 2.0);
    a.settle_s = doc.get_double(ls, "settle_s", 0.0);
    a.deterministic_rate = doc.get_bool(ls, "deterministic_rate", false);
    a.watchdog_ghz = doc.get_double(ls, "watchdog_ghz", 0.0);

    const std::string as = "actuator" + n;
    a.actuator.gain_ghz_per_v = doc.get_double(as, "gain_ghz_per_v", 10.0);
    a.actuator.v_min = doc.get_double(as, "v_min", -10.0);
    a.actuator.v_max = doc.get_double(as, "v_max", 10.0);
    a.actuator.creep_dnu0_per_volt = doc.get_double(as, "creep_per_volt_ghz", 0.0);
    a.actuator.creep_alpha = doc.get_double(as, "creep_alpha", 0.0);

    const std::string ds = "drift" + n;
    a.creep_enabled = doc.get_bool(ds, "creep_enabled", false);
    a.creep_dnu0_ghz = doc.get_double(ds, "creep_dnu0_ghz", 0.0);
    a.creep_alpha = doc.get_double(ds, "creep_alpha", 0.0);
    a.creep_t0_locked_s = doc.get_double(ds, "creep_t0_locked_s", 0.0);
    a.creep_t0_free_s = doc.get_double(ds, "creep_t0_free_s", 0.0);
    a.noise_enabled = doc.get_bool(ds, "noise_enabled", false);
    a.noise.h_flicker_ghz2 = doc.get_double(ds, "h_flicker_ghz2", 1.2e-4);
    a.noise.h_white_ghz2_per_hz = doc.get_double(ds, "h_white_ghz2_per_hz", 1e-8);
    a.noise.f_low_hz = doc.get_double(ds, "f_low_hz", 1e-4);
    a.noise.f_high_hz = doc.get_double(ds, "f_high_hz", 4.0);
    a.initial_detuning_ghz = doc.get_double(ds, "initial_detuning_ghz", 0.0);

    const std::string os = "ool" + n;
    a.ool_enabled = doc.get_bool(os, "enabled", false);
    a.ool_r_cps = doc.get_double(os, "r_cps", 4000.0);
    a.ool_dark_cps = doc.get_double(os, "dark_cps", 0.0);
    a.ool_fwhm_ghz = doc.get_double(os, "fwhm_ghz", 1.0);
    a.ool_amplitude = doc.get_double(os, "amplitude", 1.0);
    a.ool_gauss_fraction = doc.get_double(os, "gauss_fraction", 1.0);
    a.ool_operating_transmission = doc.get_double(os, "operating_transmission", 0.5);
    a.ool_bin_s = doc.get_double(os, "bin_s", 0.5);
    return a;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

double mean_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

double rms_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return x.empty() ? 0.0 : std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace

Scenario Scenario::from_file(const std::string& path) {
    return from_ini(IniDoc::parse_file(path));
}

Scenario Scenario::from_ini(const IniDoc& doc) {
    auto problems = validate_scenario(doc);
    if (!problems.empty()) {
        std::string msg = "invalid scenario:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    Scenario sc;
    sc.doc = doc;
    sc.name = doc.get_string("scenario", "name", "scenario");
    sc.duration_s = doc.get_double("scenario", "duration_s");
    sc.master_seed = doc.get_u64("scenario", "master_seed");
    sc.update_period_s = doc.get_double("scenario", "update_period_s", 0.1);
    sc.out_decimate =
        static_cast<std::size_t>(doc.get_double("scenario", "out_decimate", 10.0));
    sc.arm[0] = parse_arm(doc, 1);
    sc.arm[1] = parse_arm(doc, 2);
    if (!sc.arm[0].present)
        throw ConfigError("scenario needs at least [emitter1]");

    const std::string ts = "tpi";
    sc.tpi.enabled = doc.get_bool(ts, "enabled", false);
    if (sc.tpi.enabled && !sc.arm[1].present)
        throw ConfigError("tpi.enabled requires both emitters");
    sc.tpi.window_min = doc.get_double(ts, "window_min", 40.0);
    sc.tpi.step_min = doc.get_double(ts, "step_min", 1.0);
    sc.tpi.hom_enabled = doc.get_bool(ts, "hom_enabled", true);
    sc.tpi.singles1_cps = doc.get_double(ts, "singles1_cps", 5000.0);
    sc.tpi.singles2_cps = doc.get_double(ts, "singles2_cps", 5000.0);
    sc.tpi.rep_period_ns = doc.get_double(ts, "rep_period_ns", 1e3 / 76.0);
    sc.tpi.n_side_peaks =
        static_cast<int>(doc.get_double(ts, "n_side_peaks", 6.0));
    sc.tpi.bin_width_ns = doc.get_double(ts, "bin_width_ns", 0.0);
    sc.tpi.window_half_ns = doc.get_double(ts, "window_half_ns", 0.0);
    sc.tpi.t_acq_s = doc.get_double(ts, "t_acq_s", 2400.0);
    sc.tpi.blink_factor = doc.get_double(ts, "blink_factor", 1.0);
    return sc;
}

std::vector<std::string> validate_scenario(const IniDoc& doc) {
    std::vector<std::string> problems = doc.unknown_keys(schema());
    if (!doc.has_section("scenario")) {
        problems.push_back(doc.origin() + ": missing [scenario] section");
        return problems;
    }
    // Required keys and basic physical sanity; deeper checks live in the
    // module constructors.
    try {
        doc.get_double("scenario", "duration_s");
    } catch (const ConfigError& e) {
        problems.push_back(e.what());
    }
    try {
        doc.get_u64("scenario", "master_seed");
    } catch (const ConfigError& e) {
        problems.push_back(e.what());
    }
    for (int i = 1; i <= 2; ++i) {
        const std::string es = "emitter" + std::to_string(i);
        if (!doc.has_section(es)) continue;
        try {
            const double t1 = doc.get_double(es, "t1_ps");
            const double t2 = doc.get_double(es, "t2_ps");
            if (!(t1 > 0.0) || !(t2 > 0.0))
                problems.push_back(es + ": T1 and T2 must be positive");
            else if (t2 > 2.0 * t1)
                problems.push_back(es + ": T2 must not exceed 2*T1");
            doc.get_double(es, "r_qd_cps");
        } catch (const ConfigError& e) {
            problems.push_back(e.what());
        }
    }
    return problems;
}

void Summary::add(const std::string& key, double v) { items.emplace_back(key, fmt(v)); }

std::optional<std::string> Summary::get(const std::string& key) const {
    for (const auto& [k, v] : items)
        if (k == key) return v;
    return std::nullopt;
}

double Summary::get_double(const std::string& key) const {
    auto v = get(key);
    if (!v) throw ConfigError("summary key not found: " + key);
    return std::stod(*v);
}

std::string Summary::serialize() const {
    std::string out;
    for (const auto& [k, v] : items) out += k + " = " + v + "\n";
    return out;
}

LockScenario build_arm(const Scenario& sc, int arm_index, bool locked_branch) {
    const ArmConfig& a = sc.arm[arm_index];
    if (!a.present) throw ConfigError("build_arm: arm not configured");

    LockScenario ls;
    const SpectralProfile profile = lorentzian_from_coherence(a.emitter.t2_ps);
    const FilterCurve laser = a.curve_file.empty()
                                  ? curve_for(a.filter)
                                  : FilterCurve::from_file(a.curve_file);
    ls.channel.curve = convolve(laser, profile);
    ls.channel.r_qd_cps = a.r_qd_cps;
    ls.channel.dark_cps = a.dark_cps;

    const SetPoint sp = find_set_point(ls.channel.curve, a.criterion);
    ls.lock.nu_set_ghz = sp.nu_ghz;
    // The lock reference is the rate as the estimator reads it.
    ls.lock.r_set_cps =
        estimator_fixed_point(sp.transmission * a.r_qd_cps + a.dark_cps, a.tau_cycle_s);
    ls.lock.slope_cps_per_ghz = sp.slope_per_ghz * a.r_qd_cps;
    ls.lock.update_period_s = sc.update_period_s;
    ls.lock.target_bandwidth_hz = a.bandwidth_hz;
    ls.tau_cycle_s = a.tau_cycle_s;
    ls.tau_filter_s = a.tau_filter_s;
    ls.actuator = a.actuator;
    ls.lock_enabled = locked_branch;
    ls.settle_s = locked_branch ? a.settle_s : 0.0;
    ls.duration_s = sc.duration_s;
    ls.deterministic_rate = a.deterministic_rate;
    ls.watchdog_ghz =
        a.watchdog_ghz > 0.0 ? a.watchdog_ghz : 0.5 * ls.channel.curve.min_fwhm();

    ls.creep_enabled = a.creep_enabled;
    ls.creep.dnu0_ghz = a.creep_dnu0_ghz;
    ls.creep.alpha = a.creep_alpha;
    ls.creep.t0_s = locked_branch ? a.creep_t0_locked_s : a.creep_t0_free_s;
    ls.noise_enabled = a.noise_enabled;
    ls.noise = a.noise;
    ls.initial_detuning_ghz = a.initial_detuning_ghz;

    if (a.ool_enabled && locked_branch) {
        ls.ool_enabled = true;
        FilterPeak cell;
        cell.center_ghz = 0.0;
        cell.fwhm_ghz = a.ool_fwhm_ghz;
        cell.amplitude = a.ool_amplitude;
        cell.gauss_fraction = a.ool_gauss_fraction;
        ls.ool_curve = convolve(FilterCurve::parametric({cell}), profile);
        const SetPoint osp = find_set_point(
            ls.ool_curve, SetPointCriterion::transmission(a.ool_operating_transmission));
        ls.ool_nu_op_ghz = osp.nu_ghz;
        ls.ool_r_cps = a.ool_r_cps;
        ls.ool_dark_cps = a.ool_dark_cps;
        ls.ool_slope_cps_per_ghz = osp.slope_per_ghz * a.ool_r_cps;
        ls.ool_bin_s = a.ool_bin_s;
    }
    return ls;
}

namespace {

struct ArmResult {
    bool has_locked = false, has_free = false;
    LockTrace locked;
    DriftTrace free_trace;
    LockScenario locked_scn;  // for set-point bookkeeping
};

ArmResult run_arm(const Scenario& sc, int idx, std::uint64_t master) {
    const ArmConfig& a = sc.arm[idx];
    ArmResult r;
    if (!a.present || a.mode == ArmMode::off) return r;
    const bool want_locked = a.mode == ArmMode::locked || a.mode == ArmMode::both;
    const bool want_free = a.mode == ArmMode::free_running || a.mode == ArmMode::both;
    if (want_locked) {
        r.locked_scn = build_arm(sc, idx, true);
        r.locked = run_lock(r.locked_scn, derive_seed(master, idx + 1, 0, 0));
        r.has_locked = true;
    }
    if (want_free) {
        LockScenario fs = build_arm(sc, idx, false);
        r.free_trace = free_drift_trace(fs, derive_seed(master, idx + 1, 0, 1));
        r.has_free = true;
        if (!r.has_locked) r.locked_scn = fs;
    }
    return r;
}

class OutputGuard {
public:
    explicit OutputGuard(std::string dir) : dir_(std::move(dir)) {}
    bool active() const { return !dir_.empty(); }
    std::string path(const std::string& file) {
        std::string p = dir_ + "/" + file;
        written_.push_back(p);
        return p;
    }
    void rollback() {
        for (const auto& p : written_) std::remove(p.c_str());
    }

private:
    std::string dir_;
    std::vector<std::string> written_;
};

}  // namespace

Summary run_scenario(const Scenario& sc, const RunOptions& opt) {
    const std::uint64_t master = opt.seed_override.value_or(sc.master_seed);
    OutputGuard out(opt.out_dir);
    if (out.active()) std::filesystem::create_directories(opt.out_dir);

    Summary sum;
    try {
        sum.add("scenario", sc.name);
        sum.add("duration_s", sc.duration_s);
        sum.add("master_seed", fmt(static_cast<double>(master)));

        ArmResult arm[2];
        for (int i = 0; i < 2; ++i) arm[i] = run_arm(sc, i, master);

        for (int i = 0; i < 2; ++i) {
            const ArmConfig& a = sc.arm[i];
            if (!a.present || a.mode == ArmMode::off) continue;
            const std::string p = "arm" + std::to_string(i + 1) + ".";
            const ArmResult& r = arm[i];
            sum.add(p + "nu_set_ghz", r.locked_scn.lock.nu_set_ghz);
            sum.add(p + "r_set_cps", r.locked_scn.lock.r_set_cps);
            sum.add(p + "slope_cps_per_ghz", r.locked_scn.lock.slope_cps_per_ghz);

            if (r.has_locked) {
                sum.add(p + "residual_rms_mhz", rms_of(r.locked.residual_ghz) * 1e3);
                sum.add(p + "residual_mean_mhz", mean_of(r.locked.residual_ghz) * 1e3);
                sum.add(p + "saturated", r.locked.saturated ? "1" : "0");
                sum.add(p + "diverged", r.locked.diverged ? "1" : "0");
                if (!r.locked.ool_counts.empty()) {
                    std::vector<double> bins = r.locked.ool_counts;
                    const auto stride = static_cast<std::size_t>(
                        std::llround(r.locked.ool_bin_s / sc.update_period_s));
                    const std::size_t complete =
                        r.locked.t_s.size() / std::max<std::size_t>(stride, 1);
                    if (bins.size() > complete) bins.resize(complete);
                    const auto ed = excess_deviation(bins, r.locked.ool_bin_s,
                                                     r.locked.ool_slope_cps_per_ghz);
                    sum.add(p + "excess_deviation_mhz", ed.deviation_mhz);
                }
            }
            if (r.has_free) {
                // Fit the creep law on samples past the validity floor.
                std::vector<double> t, y;
                const double t0 = a.creep_t0_free_s;
                for (std::size_t k = 0; k < r.free_trace.t_s.size(); ++k) {
                    if (r.free_trace.t_s[k] - t0 >= creep_floor_s) {
                        t.push_back(r.free_trace.t_s[k]);
                        y.push_back(r.free_trace.dnu_ghz[k]);
                    }
                }
                if (a.creep_enabled && t.size() >= 10) {
                    const CreepFit cf = fit_creep(t, y, t0);
                    sum.add(p + "fit_dnu0_ghz", cf.model.dnu0_ghz);
                    sum.add(p + "fit_alpha", cf.model.alpha);
                    sum.add(p + "fit_residual_rms_mhz", cf.residual_rms_ghz * 1e3);
                }
                sum.add(p + "free_final_dnu_ghz", r.free_trace.dnu_ghz.back());
            }
        }

        // Two-photon interference between the arms.
        if (sc.tpi.enabled) {
            const EmitterParams& e1 = sc.arm[0].emitter;
            const EmitterParams& e2 = sc.arm[1].emitter;
            sum.add("tpi.v_model_max", tpi_visibility(e1, e2, 0.0));

            auto mutual = [&](bool locked) -> DriftTrace {
                DriftTrace m;
                const auto& a1 = arm[0];
                const auto& a2 = arm[1];
                if (locked) {
                    if (!a1.has_locked || !a2.has_locked) return m;
                    const std::size_t n =
                        std::min(a1.locked.t_s.size(), a2.locked.t_s.size());
                    m.t_s.assign(a1.locked.t_s.begin(), a1.locked.t_s.begin() + n);
                    m.dnu_ghz.resize(n);
                    for (std::size_t k = 0; k < n; ++k)
                        m.dnu_ghz[k] =
                            a1.locked.residual_ghz[k] - a2.locked.residual_ghz[k];
                } else {
                    if (!a1.has_free || !a2.has_free) return m;
                    const std::size_t n =
                        std::min(a1.free_trace.t_s.size(), a2.free_trace.t_s.size());
                    m.t_s.assign(a1.free_trace.t_s.begin(), a1.free_trace.t_s.begin() + n);
                    m.dnu_ghz.resize(n);
                    for (std::size_t k = 0; k < n; ++k)
                        m.dnu_ghz[k] =
                            a1.free_trace.dnu_ghz[k] - a2.free_trace.dnu_ghz[k];
                }
                return m;
            };

            HomSetup hs;
            hs.e1 = e1;
            hs.e2 = e2;
            hs.rep_period_ns = sc.tpi.rep_period_ns;
            hs.n_side_peaks = sc.tpi.n_side_peaks;
            hs.bin_width_ns = sc.tpi.bin_width_ns > 0.0 ? sc.tpi.bin_width_ns
                                                        : sc.tpi.rep_period_ns / 128.0;
            hs.window_half_ns = sc.tpi.window_half_ns > 0.0 ? sc.tpi.window_half_ns
                                                            : 0.5 * sc.tpi.rep_period_ns;
            hs.signal1_cps = sc.tpi.singles1_cps;
            hs.signal2_cps = sc.tpi.singles2_cps;
            hs.dark1_cps = sc.arm[0].dark_cps;
            hs.dark2_cps = sc.arm[1].dark_cps;
            hs.t_acq_s = sc.tpi.t_acq_s;
            hs.blink_factor = sc.tpi.blink_factor;

            for (int branch = 0; branch < 2; ++branch) {
                const bool locked = branch == 0;
                const std::string tag = locked ? "locked" : "free";
                DriftTrace m = mutual(locked);
                if (m.t_s.empty()) continue;

                auto pts = windowed_visibility(m.t_s, m.dnu_ghz, e1, e2,
                                               sc.tpi.window_min, sc.tpi.step_min);
                sum.add("tpi.v_" + tag + "_windowed_first", pts.front().v);
                sum.add("tpi.v_" + tag + "_windowed_last", pts.back().v);

                double v_mean = 0.0;
                for (std::size_t k = 0; k < m.dnu_ghz.size(); ++k)
                    v_mean += tpi_visibility(e1, e2, m.dnu_ghz[k]);
                v_mean /= static_cast<double>(m.dnu_ghz.size());
                sum.add("tpi.v_" + tag + "_instantaneous_mean", v_mean);

                if (sc.tpi.hom_enabled) {
                    Rng rng(derive_seed(master, 0, stream::hom, locked ? 0u : 1u));
                    const HomHistogram h = synthesize_histogram(v_mean, hs, rng);
                    const CorrectedAreas ca = dark_correct(
                        h, hs.dark1_cps, hs.dark2_cps, hs.signal1_cps, hs.signal2_cps);
                    const VisibilityEstimate ve = visibility_estimate(h, ca);
                    sum.add("tpi.v_" + tag + "_hom", ve.v);
                    sum.add("tpi.v_" + tag + "_hom_sigma", ve.sigma);
                    if (out.active()) h.write(out.path("tpi_hom_" + tag + ".txt"));
                }
                if (out.active())
                    write_visibility(out.path("tpi_visibility_" + tag + ".txt"), pts);
            }
        }

        if (out.active()) {
            for (int i = 0; i < 2; ++i) {
                const ArmConfig& a = sc.arm[i];
                if (!a.present || a.mode == ArmMode::off) continue;
                const std::string p = "arm" + std::to_string(i + 1) + "_";
                const ArmResult& r = arm[i];
                r.locked_scn.channel.curve.write(out.path(p + "curve_conv.txt"));
                if (r.has_locked) {
                    r.locked.write(out.path(p + "lock_trace.txt"), sc.out_decimate);
                    std::vector<double> td, ed;
                    for (std::size_t k = 0; k < r.locked.t_s.size();
                         k += std::max<std::size_t>(sc.out_decimate, 1)) {
                        td.push_back(r.locked.t_s[k]);
                        ed.push_back(r.locked.rate_est_cps[k]);
                    }
                    write_trace(out.path(p + "estimate.txt"), td, ed, "t_s estimate_cps");
                    if (!r.locked.ool_counts.empty()) {
                        std::vector<double> tb(r.locked.ool_counts.size());
                        for (std::size_t k = 0; k < tb.size(); ++k)
                            tb[k] = static_cast<double>(k) * r.locked.ool_bin_s;
                        write_trace(out.path(p + "ool_counts.txt"), tb,
                                    r.locked.ool_counts, "t_s counts");
                    }
                }
                if (r.has_free) {
                    write_trace(out.path(p + "drift_free.txt"), r.free_trace.t_s,
                                r.free_trace.dnu_ghz, "t_s dnu_GHz");
                    // Free-running frequency-noise PSD.
                    const std::size_t n = r.free_trace.dnu_ghz.size();
                    if (n >= 64) {
                        std::size_t seg = 1;
                        while (seg * 8 <= n) seg <<= 1;
                        const auto psd =
                            welch_psd(r.free_trace.dnu_ghz, sc.update_period_s, seg);
                        psd.write(out.path(p + "psd_free.txt"));
                    }
                }
            }
            std::ofstream sf(out.path("summary.txt"));
            sf << sum.serialize();
        }
    } catch (...) {
        out.rollback();
        throw;
    }
    return sum;
}

std::vector<Summary> sweep(const Scenario& sc, const std::string& axis,
                           const std::vector<double>& values, const RunOptions& opt) {
    // Validate the axis before any run.
    {
        IniDoc probe = sc.doc;
        probe.set(axis, "0");
        auto dot = axis.find('.');
        const std::string s = axis.substr(0, dot), k = axis.substr(dot + 1);
        probe.get_double(s, k);  // throws if somehow non-numeric
    }
    std::vector<Summary> rows(values.size());
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(values.size()); ++i) {
        try {
            IniDoc doc = sc.doc;
            doc.set(axis, fmt(values[static_cast<std::size_t>(i)]));
            Scenario si = Scenario::from_ini(doc);
            RunOptions ro = opt;
            ro.out_dir.clear();  // sweep rows produce summaries only
            Summary s;
            s.add("axis", axis);
            s.add("value", values[static_cast<std::size_t>(i)]);
            Summary inner = run_scenario(si, ro);
            for (auto& kv : inner.items) s.items.push_back(std::move(kv));
            rows[static_cast<std::size_t>(i)] = std::move(s);
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return rows;
}

}  // namespace qdlock

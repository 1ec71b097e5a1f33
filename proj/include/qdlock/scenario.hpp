// Scenario-driven front end: parses the experiment configuration, wires the
// modules into locked / free-running runs with two-photon-interference
// analysis, and writes all exports plus a machine-readable summary.
#ifndef QDLOCK_SCENARIO_HPP
#define QDLOCK_SCENARIO_HPP

#include <optional>
#include <string>
#include <vector>

#include "qdlock/control.hpp"
#include "qdlock/ini.hpp"
#include "qdlock/interference.hpp"

namespace qdlock {

enum class ArmMode { off, locked, free_running, both };

struct ArmConfig {
    bool present = false;
    // emitter
    EmitterParams emitter;
    double r_qd_cps = 0.0;
    double dark_cps = 0.0;
    // filter
    FilterSettings filter;
    std::string curve_file;  // optional tabulated laser curve
    // lock
    ArmMode mode = ArmMode::locked;
    SetPointCriterion criterion = SetPointCriterion::transmission(0.25);
    double bandwidth_hz = 0.03;
    double tau_cycle_s = 2e-6;
    double tau_filter_s = 2.0;
    double settle_s = 0.0;
    bool deterministic_rate = false;
    double watchdog_ghz = 0.0;  // 0 = auto (half the convolved fwhm)
    // actuator
    ActuatorModel actuator;
    // drift
    bool creep_enabled = false;
    double creep_dnu0_ghz = 0.0;
    double creep_alpha = 0.0;
    double creep_t0_locked_s = 0.0;
    double creep_t0_free_s = 0.0;
    bool noise_enabled = false;
    NoiseModel noise;
    double initial_detuning_ghz = 0.0;
    // out-of-loop monitor
    bool ool_enabled = false;
    double ool_r_cps = 4000.0;
    double ool_dark_cps = 0.0;
    double ool_fwhm_ghz = 1.0;
    double ool_amplitude = 1.0;
    double ool_gauss_fraction = 1.0;
    double ool_operating_transmission = 0.5;
    double ool_bin_s = 0.5;
};

struct TpiConfig {
    bool enabled = false;
    double window_min = 40.0;
    double step_min = 1.0;
    bool hom_enabled = true;
    double singles1_cps = 5000.0;
    double singles2_cps = 5000.0;
    double rep_period_ns = 1e3 / 76.0;
    int n_side_peaks = 6;
    double bin_width_ns = 0.0;    // 0 = rep/128
    double window_half_ns = 0.0;  // 0 = rep/2
    double t_acq_s = 2400.0;
    double blink_factor = 1.0;
};

struct Scenario {
    std::string name = "scenario";
    double duration_s = 0.0;
    std::uint64_t master_seed = 0;
    double update_period_s = 0.1;
    std::size_t out_decimate = 10;
    ArmConfig arm[2];
    TpiConfig tpi;
    IniDoc doc;  // raw document, kept for round-tripping and overrides

    static Scenario from_file(const std::string& path);
    static Scenario from_ini(const IniDoc& doc);
};

/// Ordered key-value summary; serialization is byte-stable.
struct Summary {
    std::vector<std::pair<std::string, std::string>> items;

    void add(const std::string& key, const std::string& v) { items.emplace_back(key, v); }
    void add(const std::string& key, double v);
    std::optional<std::string> get(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::string serialize() const;
};

struct RunOptions {
    std::string out_dir;      // empty = no file output
    bool quiet = true;
    std::optional<std::uint64_t> seed_override;
};

/// Runs the full scenario. With an out_dir, writes traces, curves, PSDs,
/// visibility traces, HOM histograms and summary.txt; on failure all files
/// created by this run are removed before the exception propagates.
Summary run_scenario(const Scenario& sc, const RunOptions& opt);

/// One run per value of the numeric field "section.key"; returns one summary
/// per value, rows independent.
std::vector<Summary> sweep(const Scenario& sc, const std::string& axis,
                           const std::vector<double>& values, const RunOptions& opt);

/// Schema check; returns human-readable problems (empty = valid).
std::vector<std::string> validate_scenario(const IniDoc& doc);

/// Builds the single-arm lock scenario (locked branch when locked_branch,
/// else the free-running variant). Exposed for tests and the acceptance suite.
LockScenario build_arm(const Scenario& sc, int arm_index, bool locked_branch);

}  // namespace qdlock

#endif

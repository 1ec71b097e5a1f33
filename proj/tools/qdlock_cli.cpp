// qdlock command line: scenario runs, parameter sweeps, spectral analysis,
// creep fitting and HOM synthesis.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qdlock/analysis.hpp"
#include "qdlock/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frequency-lock simulator for single-photon emitters on an "
                 "atomic-filter standard"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir, axis, values_csv, trace_path;
    bool quiet = false;
    std::uint64_t seed = 0;
    bool seed_given = false;
    double t0 = 0.0;
    bool t0_given = false;
    std::size_t segment = 0;
    double overlap = 0.5;

    app.add_flag("--quiet", quiet, "suppress normal output");

    auto* run = app.add_subcommand("run", "run a scenario file");
    run->add_option("scenario", scenario_path, "scenario file")->required();
    run->add_option("--out-dir", out_dir, "artifact directory (default: <name>_out)");
    run->add_option("--seed", seed, "override the master seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* sw = app.add_subcommand("sweep", "run a scenario across parameter values");
    sw->add_option("scenario", scenario_path)->required();
    sw->add_option("--axis", axis, "numeric scenario field, e.g. lock1.bandwidth_hz")
        ->required();
    sw->add_option("--values", values_csv, "comma-separated values")->required();
    sw->add_option("--out-dir", out_dir, "directory for sweep.txt");
    sw->add_option("--seed", seed, "override the master seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* psd = app.add_subcommand("psd", "Welch PSD of a two-column trace");
    psd->add_option("trace", trace_path, "(t, value) trace file")->required();
    psd->add_option("--segment", segment, "segment length (default: n/8, power of two)");
    psd->add_option("--overlap", overlap, "overlap fraction (default 0.5)");
    psd->add_option("--out-dir", out_dir, "write psd.txt here instead of stdout");

    auto* fc = app.add_subcommand("fit-creep", "fit the logarithmic creep law");
    fc->add_option("trace", trace_path, "(t_s, dnu_GHz) trace file")->required();
    fc->add_option("--t0", t0, "known step time (otherwise fitted)")
        ->each([&](const std::string&) { t0_given = true; });

    auto* hom = app.add_subcommand("hom", "synthesize a HOM histogram from a scenario");
    hom->add_option("scenario", scenario_path)->required();
    hom->add_option("--out-dir", out_dir, "artifact directory");
    hom->add_option("--seed", seed, "override the master seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* val = app.add_subcommand("validate", "check a scenario file");
    val->add_option("scenario", scenario_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (app.got_subcommand(run)) {
            qdlock::Scenario sc = qdlock::Scenario::from_file(scenario_path);
            qdlock::RunOptions opt;
            opt.out_dir = out_dir.empty() ? sc.name + "_out" : out_dir;
            opt.quiet = quiet;
            if (seed_given) opt.seed_override = seed;
            qdlock::Summary sum = qdlock::run_scenario(sc, opt);
            if (!quiet) {
                std::cout << sum.serialize();
                std::cout << "# artifacts in " << opt.out_dir << "\n";
            }
        } else if (app.got_subcommand(sw)) {
            qdlock::Scenario sc = qdlock::Scenario::from_file(scenario_path);
            qdlock::RunOptions opt;
            opt.quiet = quiet;
            if (seed_given) opt.seed_override = seed;
            auto values = parse_values(values_csv);
            auto rows = qdlock::sweep(sc, axis, values, opt);
            std::string table;
            for (const auto& row : rows) {
                std::string line;
                for (const auto& [k, v] : row.items) {
                    if (!line.empty()) line += " ";
                    line += k + "=" + v;
                }
                table += line + "\n";
            }
            if (!out_dir.empty()) {
                std::filesystem::create_directories(out_dir);
                std::ofstream f(out_dir + "/sweep.txt");
                f << table;
            }
            if (!quiet) std::cout << table;
        } else if (app.got_subcommand(psd)) {
            auto [t, v] = qdlock::read_trace(trace_path);
            if (t.size() < 16) throw qdlock::ConfigError("psd: trace too short");
            const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
            std::size_t seg = segment;
            if (seg == 0) {
                seg = 1;
                while (seg * 8 <= t.size()) seg <<= 1;
            }
            auto est = qdlock::welch_psd(v, dt, seg, overlap);
            if (!out_dir.empty()) {
                std::filesystem::create_directories(out_dir);
                est.write(out_dir + "/psd.txt");
                if (!quiet) std::cout << "# wrote " << out_dir << "/psd.txt\n";
            } else {
                char buf[80];
                std::cout << "# f_Hz density\n";
                for (std::size_t i = 0; i < est.frequency_hz.size(); ++i) {
                    std::snprintf(buf, sizeof buf, "%.10g %.10g\n", est.frequency_hz[i],
                                  est.density[i]);
                    std::cout << buf;
                }
            }
        } else if (app.got_subcommand(fc)) {
            auto [t, v] = qdlock::read_trace(trace_path);
            std::optional<double> t0opt;
            if (t0_given) t0opt = t0;
            auto fit = qdlock::fit_creep(t, v, t0opt);
            std::printf("dnu0_ghz = %.10g +- %.3g\n", fit.model.dnu0_ghz, fit.dnu0_err_ghz);
            std::printf("alpha = %.10g +- %.3g\n", fit.model.alpha, fit.alpha_err);
            std::printf("t0_s = %.10g (%s)\n", fit.model.t0_s,
                        fit.t0_fitted ? "fitted" : "supplied");
            std::printf("residual_rms_mhz = %.10g\n", fit.residual_rms_ghz * 1e3);
        } else if (app.got_subcommand(hom)) {
            qdlock::Scenario sc = qdlock::Scenario::from_file(scenario_path);
            if (!sc.arm[1].present)
                throw qdlock::ConfigError("hom: scenario needs both emitters");
            const std::uint64_t master = seed_given ? seed : sc.master_seed;
            qdlock::HomSetup hs;
            hs.e1 = sc.arm[0].emitter;
            hs.e2 = sc.arm[1].emitter;
            hs.rep_period_ns = sc.tpi.rep_period_ns;
            hs.n_side_peaks = sc.tpi.n_side_peaks;
            hs.bin_width_ns = sc.tpi.bin_width_ns > 0.0 ? sc.tpi.bin_width_ns
                                                        : sc.tpi.rep_period_ns / 128.0;
            hs.window_half_ns = sc.tpi.window_half_ns > 0.0
                                    ? sc.tpi.window_half_ns
                                    : 0.5 * sc.tpi.rep_period_ns;
            hs.signal1_cps = sc.tpi.singles1_cps;
            hs.signal2_cps = sc.tpi.singles2_cps;
            hs.dark1_cps = sc.arm[0].dark_cps;
            hs.dark2_cps = sc.arm[1].dark_cps;
            hs.t_acq_s = sc.tpi.t_acq_s;
            hs.blink_factor = sc.tpi.blink_factor;
            const double v_true =
                qdlock::tpi_visibility(hs.e1, hs.e2, sc.arm[0].initial_detuning_ghz -
                                                         sc.arm[1].initial_detuning_ghz);
            qdlock::Rng rng(qdlock::derive_seed(master, 0, qdlock::stream::hom, 0));
            auto h = qdlock::synthesize_histogram(v_true, hs, rng);
            auto ca = qdlock::dark_correct(h, hs.dark1_cps, hs.dark2_cps, hs.signal1_cps,
                                           hs.signal2_cps);
            auto ve = qdlock::visibility_estimate(h, ca);
            if (!out_dir.empty()) {
                std::filesystem::create_directories(out_dir);
                h.write(out_dir + "/hom.txt");
            }
            if (!quiet) {
                std::printf("v_true = %.6g\n", v_true);
                std::printf("v_hom = %.6g +- %.3g\n", ve.v, ve.sigma);
                if (!out_dir.empty()) std::printf("# wrote %s/hom.txt\n", out_dir.c_str());
            }
        } else if (app.got_subcommand(val)) {
            auto doc = qdlock::IniDoc::parse_file(scenario_path);
            auto problems = qdlock::validate_scenario(doc);
            if (!problems.empty()) {
                for (const auto& p : problems) std::cerr << p << "\n";
                return kExitConfig;
            }
            qdlock::Scenario::from_ini(doc);  // deep checks
            if (!quiet) std::cout << scenario_path << ": ok\n";
        }
    } catch (const qdlock::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

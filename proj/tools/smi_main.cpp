#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smi/analysis.hpp"
#include "smi/config.hpp"
#include "smi/constants.hpp"
#include "smi/csv.hpp"
#include "smi/digest.hpp"
#include "smi/engine.hpp"
#include "smi/errors.hpp"
#include "smi/protocol.hpp"
#include "smi/rng.hpp"

namespace fs = std::filesystem;
using namespace smi;

namespace {

std::string fmt(double v) { return format_double(v); }

std::string json_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out.push_back(c);
    }
    out += "\"";
    return out;
}

/// Re-shape a CSV table into a JSON document with the same numbers verbatim.
std::string csv_to_json_table(const std::string& csv) {
    std::string out = "{\n  \"columns\": [";
    std::size_t pos = csv.find('\n');
    const std::string header = csv.substr(0, pos);
    std::size_t start = 0;
    bool first = true;
    while (start <= header.size()) {
        const auto comma = header.find(',', start);
        const std::string col =
            header.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!first) out += ", ";
        out += json_quote(col);
        first = false;
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    out += "],\n  \"rows\": [\n";
    bool first_row = true;
    while (pos != std::string::npos && pos + 1 < csv.size()) {
        const auto next = csv.find('\n', pos + 1);
        const std::string row =
            csv.substr(pos + 1, next == std::string::npos ? std::string::npos : next - pos - 1);
        if (!row.empty()) {
            if (!first_row) out += ",\n";
            out += "    [" + row + "]";
            first_row = false;
        }
        pos = next;
    }
    out += "\n  ]\n}\n";
    return out;
}

void emit_table(const fs::path& dir, const std::string& base, const std::string& csv,
                const std::string& format) {
    if (format == "json") {
        write_text_file((dir / (base + ".json")).string(), csv_to_json_table(csv));
    } else {
        write_text_file((dir / (base + ".csv")).string(), csv);
    }
}

struct Overrides {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double compress = 0.0;
    std::string format = "csv";
};

ExperimentConfig resolve_config(const Overrides& ov, bool config_required) {
    ExperimentConfig cfg;
    if (!ov.config_path.empty()) {
        cfg = load_config(ov.config_path);
    } else if (config_required) {
        throw ConfigError("--config is required for this subcommand");
    }
    if (ov.seed_set) cfg.noise.seed = ov.seed;
    if (!ov.out_dir.empty()) cfg.run.out_dir = ov.out_dir;
    if (ov.compress > 0.0) cfg.run.time_compress = ov.compress;
    return cfg;
}

fs::path prepare_out_dir(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.run.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
    return dir;
}

void write_manifest(const fs::path& dir, const ExperimentConfig& cfg, const std::string& command,
                    const Overrides& ov, const std::string& notes) {
    write_text_file((dir / "resolved_config.ini").string(), canonical_config(cfg));
    std::string m = "{\n";
    m += "  \"command\": " + json_quote(command) + ",\n";
    m += "  \"config_digest\": " + json_quote(config_digest_hex(cfg)) + ",\n";
    m += "  \"seed\": " + std::to_string(cfg.noise.seed) + ",\n";
    m += "  \"version\": " + json_quote(version_string) + ",\n";
    m += "  \"prng\": " + json_quote(prng_id) + ",\n";
    m += "  \"format\": " + json_quote(ov.format) + ",\n";
    m += "  \"time_compress\": " + fmt(cfg.run.time_compress) + ",\n";
    m += "  \"notes\": " + json_quote(notes) + "\n";
    m += "}\n";
    write_text_file((dir / "manifest.json").string(), m);
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) {
        v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    }
    return v;
}

int cmd_sweep(const Overrides& ov) {
    const ExperimentConfig cfg = resolve_config(ov, true);
    const fs::path dir = prepare_out_dir(cfg);
    const ResolvedSetup rs = resolve_mode(cfg);

    const auto f0s = linspace(rs.carrier.f0 - 0.5 * cfg.sweep.span_hz,
                              rs.carrier.f0 + 0.5 * cfg.sweep.span_hz, cfg.sweep.points);
    const auto trace =
        spectroscopy_trace(cfg.resonator, ResonatorState{}, rs.mod, rs.carrier, f0s);

    emit_table(dir, "sweep", csv_spectroscopy(trace), ov.format);
    write_manifest(dir, cfg, "sweep", ov, "");
    return 0;
}

int cmd_map(const Overrides& ov) {
    const ExperimentConfig cfg = resolve_config(ov, true);
    const fs::path dir = prepare_out_dir(cfg);
    const ResolvedSetup rs = resolve_mode(cfg);

    const DutResponse dut =
        effective_dut(cfg.resonator, ResonatorState{}, rs.carrier.f0 + rs.mod.f_mod,
                      rs.carrier.f0 - rs.mod.f_mod);
    const auto a2_grid = linspace(cfg.map.a2_min_v, cfg.map.a2_max_v, cfg.map.a2_points);
    std::vector<double> alpha2_grid(cfg.map.alpha2_points);
    for (int i = 0; i < cfg.map.alpha2_points; ++i) {
        alpha2_grid[i] = 2.0 * std::numbers::pi * i / cfg.map.alpha2_points;
    }

    const SensitivityMapResult map =
        sensitivity_map(rs.mod.a1, rs.mod.alpha1, rs.carrier, dut, a2_grid, alpha2_grid,
                        cfg.map.perturbation, cfg.map.magnitude);
    emit_table(dir, "map", csv_map(map), ov.format);

    // Cross section along a2 through the row holding the global minimum.
    std::size_t best = 0;
    for (std::size_t i = 1; i < map.cells.size(); ++i) {
        if (map.cells[i].delta_s < map.cells[best].delta_s) best = i;
    }
    const std::size_t ialpha = best % alpha2_grid.size();
    std::vector<double> cut(a2_grid.size());
    for (std::size_t ia = 0; ia < a2_grid.size(); ++ia) cut[ia] = map.at(ia, ialpha).delta_s;
    emit_table(dir, "linecut", csv_linecut(a2_grid, cut, "a2_v"), ov.format);

    write_manifest(dir, cfg, "map", ov, "linecut at alpha2_rad = " + fmt(alpha2_grid[ialpha]));
    return 0;
}

FrequencyTrace recover_detuning(const ExperimentConfig& cfg, const RunResult& run_out) {
    const ResolvedSetup rs = resolve_mode(cfg);
    FrequencyTrace rec;
    rec.t0 = run_out.x.t0;
    rec.dt = run_out.x.dt;
    rec.meta = run_out.x.meta;
    rec.values.resize(run_out.x.size());

    if (cfg.run.readout == ReadoutMode::iq) {
        const IqJacobian jac = iq_jacobian(cfg.resonator, ResonatorState{}, rs.mod, rs.carrier);
        for (std::size_t i = 0; i < rec.values.size(); ++i) {
            rec.values[i] = jac.decode(run_out.x.values[i], run_out.y.values[i])[0];
        }
    } else {
        const double span = 4.0 * cfg.resonator.linewidth_hz();
        const auto f0s = linspace(rs.carrier.f0 - 0.5 * span, rs.carrier.f0 + 0.5 * span, 401);
        const auto sweep =
            spectroscopy_trace(cfg.resonator, ResonatorState{}, rs.mod, rs.carrier, f0s);
        const PhaseCalibration cal = calibrate_phase_to_frequency(sweep);
        for (std::size_t i = 0; i < rec.values.size(); ++i) {
            rec.values[i] = detuning_from_phase(cal, run_out.x.values[i], run_out.y.values[i]);
        }
    }
    return rec;
}

std::string analysis_summary(const ExperimentConfig& cfg, const FrequencyTrace& rec) {
    const std::size_t n = rec.size();
    double mean = 0.0;
    for (double v : rec.values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : rec.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);

    std::string s = "{\n";
    s += "  \"n_samples\": " + std::to_string(n) + ",\n";
    s += "  \"dt_s\": " + fmt(rec.dt) + ",\n";
    s += "  \"duration_s\": " + fmt(rec.duration()) + ",\n";
    s += "  \"mean_hz\": " + fmt(mean) + ",\n";
    s += "  \"rms_hz\": " + fmt(std::sqrt(var)) + ",\n";

    const PsdEstimate est = psd(rec, cfg.analysis.bins_per_decade, cfg.analysis.psd_method);
    s += std::string("  \"psd_method\": ") +
         (cfg.analysis.psd_method == PsdMethod::welch ? "\"welch\"" : "\"periodogram\"") + ",\n";

    const double f_lo = cfg.analysis.fit_fmin_hz > 0.0
                            ? cfg.analysis.fit_fmin_hz
                            : std::max(3.0 / rec.duration(), est.freq.front());
    const double f_hi = cfg.analysis.fit_fmax_hz > 0.0 ? cfg.analysis.fit_fmax_hz
                                                       : 0.05 / rec.dt; // a tenth of Nyquist
    try {
        const FlickerFit fit = fit_flicker(est, f_lo, f_hi);
        s += "  \"flicker\": {\"fitted\": true, \"a_p_hz2\": " + fmt(fit.a_p) +
             ", \"f_lo_hz\": " + fmt(fit.f_lo) + ", \"f_hi_hz\": " + fmt(fit.f_hi) +
             ", \"n_bins\": " + std::to_string(fit.n_bins) +
             ", \"log_residual_rms\": " + fmt(fit.log_residual_rms) +
             ", \"sigma_flat_hz\": " + fmt(std::sqrt(2.0 * std::log(2.0) * fit.a_p)) + "},\n";
    } catch (const BandEmptyError&) {
        s += "  \"flicker\": {\"fitted\": false, \"reason\": \"empty fit band\"},\n";
    }

    if (cfg.analysis.mixture_k > 0) {
        try {
            const GaussianMixture mix = fit_mixture(rec.values, cfg.analysis.mixture_k);
            s += "  \"mixture\": {\"fitted\": true, \"k\": " +
                 std::to_string(cfg.analysis.mixture_k) + ", \"converged\": " +
                 (mix.converged ? "true" : "false") +
                 ", \"low_weight\": " + (mix.low_weight ? "true" : "false") +
                 ", \"log_likelihood\": " + fmt(mix.log_likelihood) + ", \"components\": [";
            for (std::size_t i = 0; i < mix.components.size(); ++i) {
                const auto& c = mix.components[i];
                if (i) s += ", ";
                s += "{\"weight\": " + fmt(c.weight) + ", \"mean_hz\": " + fmt(c.mean) +
                     ", \"sigma_hz\": " + fmt(c.sigma) + "}";
            }
            s += "]},\n";
        } catch (const DegenerateError& e) {
            s += std::string("  \"mixture\": {\"fitted\": false, \"reason\": ") +
                 json_quote(e.what()) + "},\n";
        } catch (const TooShortError& e) {
            s += std::string("  \"mixture\": {\"fitted\": false, \"reason\": ") +
                 json_quote(e.what()) + "},\n";
        }
    } else {
        s += "  \"mixture\": {\"fitted\": false, \"reason\": \"disabled\"},\n";
    }

    const auto taus = default_tau_grid(rec, cfg.analysis.allan_points_per_decade);
    s += "  \"allan\": {\"n_points\": " + std::to_string(taus.size());
    if (!taus.empty()) {
        s += ", \"tau_min_s\": " + fmt(taus.front()) + ", \"tau_max_s\": " + fmt(taus.back());
    }
    s += "}\n}\n";
    return s;
}

void write_analysis_artifacts(const fs::path& dir, const ExperimentConfig& cfg,
                              const FrequencyTrace& rec, const std::string& format) {
    emit_table(dir, "recovered_delta_f", csv_value_trace(rec, "delta_f_hz"), format);
    emit_table(dir, "histogram", csv_histogram(histogram(rec.values)), format);
    emit_table(dir, "psd",
               csv_psd(psd(rec, cfg.analysis.bins_per_decade, cfg.analysis.psd_method)), format);
    emit_table(dir, "allan",
               csv_allan(allan(rec, default_tau_grid(rec, cfg.analysis.allan_points_per_decade))),
               format);
    write_text_file((dir / "summary.json").string(), analysis_summary(cfg, rec));
}

int cmd_monitor(const Overrides& ov) {
    const ExperimentConfig cfg = resolve_config(ov, true);
    const fs::path dir = prepare_out_dir(cfg);

    const EngineConfig engine_cfg = make_engine_config(cfg);
    const RunResult out = run(engine_cfg);

    emit_table(dir, "trace_xy", csv_xy_trace(out.x, out.y), ov.format);
    emit_table(dir, "truth_delta_f", csv_value_trace(out.truth, "truth_delta_f_hz"), ov.format);

    const FrequencyTrace rec = recover_detuning(cfg, out);
    write_analysis_artifacts(dir, cfg, rec, ov.format);
    write_manifest(dir, cfg, "monitor", ov, out.manifest.notes);
    return 0;
}

int cmd_calibrate(const Overrides& ov) {
    const ExperimentConfig cfg = resolve_config(ov, true);
    const fs::path dir = prepare_out_dir(cfg);

    const double floor_v = cfg.protocol.mixer_floor_v > 0.0
                               ? cfg.protocol.mixer_floor_v
                               : cfg.carrier.leakage * cfg.mod.a1;
    const MixerModel mixer =
        MixerModel::from_seed(derive_seed(cfg.noise.seed, seed_tag::mixer, 0),
                              cfg.protocol.mixer_offset_max_v, floor_v);
    VirtualSetup setup(cfg.mod, cfg.carrier, cfg.resonator, mixer, cfg.bands.tau_lockin,
                       cfg.readout_noise_v, cfg.noise.seed);

    const CalibrationReport report = run_guide(setup, cfg.protocol.calib);
    write_text_file((dir / "calibration_report.json").string(), report.to_json());
    write_manifest(dir, cfg, "calibrate", ov, "");
    return report.converged ? 0 : 3;
}

FrequencyTrace read_trace_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    FrequencyTrace tr;
    std::vector<double> times;
    std::size_t pos = text.find('\n'); // skip the header line
    if (pos == std::string::npos) throw ConfigError("'" + path + "': missing CSV header");
    while (pos != std::string::npos && pos + 1 < text.size()) {
        auto next = text.find('\n', pos + 1);
        const std::string row =
            text.substr(pos + 1, next == std::string::npos ? std::string::npos : next - pos - 1);
        pos = next;
        if (row.empty()) continue;
        const auto comma = row.find(',');
        if (comma == std::string::npos) {
            throw ConfigError("'" + path + "': expected two comma-separated columns");
        }
        char* end = nullptr;
        const double t = std::strtod(row.c_str(), &end);
        const double v = std::strtod(row.c_str() + comma + 1, nullptr);
        times.push_back(t);
        tr.values.push_back(v);
    }
    if (tr.values.size() < 2) throw ConfigError("'" + path + "': need at least two samples");
    tr.t0 = times.front();
    tr.dt = times[1] - times[0];
    if (tr.dt <= 0.0) throw ConfigError("'" + path + "': time column must increase");
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (std::abs(times[i] - (tr.t0 + tr.dt * static_cast<double>(i))) > 1e-6 * tr.dt * i +
                1e-9) {
            throw ConfigError("'" + path + "': non-uniform sampling");
        }
    }
    return tr;
}

int cmd_analyze(const Overrides& ov, const std::string& input) {
    const ExperimentConfig cfg = resolve_config(ov, false);
    const fs::path dir = prepare_out_dir(cfg);

    const FrequencyTrace rec = read_trace_csv(input);
    write_analysis_artifacts(dir, cfg, rec, ov.format);
    write_manifest(dir, cfg, "analyze", ov,
                   "input " + input + " digest " + digest_hex(read_text_file(input)));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale sideband interferometer simulator"};
    app.set_version_flag("--version", std::string(version_string));
    app.require_subcommand(1);

    Overrides ov;
    app.add_option("--config", ov.config_path, "experiment config file (.ini or .json)");
    auto* seed_opt = app.add_option("--seed", ov.seed, "override the noise seed");
    app.add_option("--out", ov.out_dir, "override the output directory");
    app.add_option("--compress", ov.compress, "override the time-compression factor")
        ->check(CLI::PositiveNumber);
    app.add_option("--format", ov.format, "table format for artifacts")
        ->check(CLI::IsMember({"csv", "json"}));
    app.fallthrough();

    auto* sweep = app.add_subcommand("sweep", "carrier sweep spectroscopy trace");
    auto* map = app.add_subcommand("map", "common-mode sensitivity map over (a2, alpha2)");
    auto* monitor = app.add_subcommand("monitor", "time-domain run with noise recovery analysis");
    auto* calibrate = app.add_subcommand("calibrate", "automated bring-up against a virtual bench");
    auto* analyze = app.add_subcommand("analyze", "analysis of an existing two-column CSV trace");
    std::string analyze_input;
    analyze->add_option("input", analyze_input, "CSV with header and columns (t_s, value)")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    ov.seed_set = seed_opt->count() > 0;

    try {
        if (sweep->parsed()) return cmd_sweep(ov);
        if (map->parsed()) return cmd_map(ov);
        if (monitor->parsed()) return cmd_monitor(ov);
        if (calibrate->parsed()) return cmd_calibrate(ov);
        if (analyze->parsed()) return cmd_analyze(ov, analyze_input);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 2;
}

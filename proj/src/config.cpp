#include "smi/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "smi/csv.hpp"
#include "smi/digest.hpp"
#include "smi/errors.hpp"

namespace smi {

std::string to_hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_double(const std::string& sec, const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') {
        throw ConfigError("[" + sec + "] " + key + ": cannot parse number '" + v + "'");
    }
    return d;
}

long long parse_int(const std::string& sec, const std::string& key, const std::string& v) {
    char* end = nullptr;
    const long long i = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') {
        throw ConfigError("[" + sec + "] " + key + ": cannot parse integer '" + v + "'");
    }
    return i;
}

std::uint64_t parse_u64(const std::string& sec, const std::string& key, const std::string& v) {
    char* end = nullptr;
    const unsigned long long i = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') {
        throw ConfigError("[" + sec + "] " + key + ": cannot parse unsigned integer '" + v + "'");
    }
    return i;
}

std::vector<RtsParams> parse_rts_list(const std::string& sec, const std::string& key,
                                      const std::string& v) {
    std::vector<RtsParams> out;
    const std::string body = trim(v);
    if (body.empty() || body == "none") return out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        double f[3];
        int n = 0;
        std::stringstream fs(item);
        std::string tok;
        while (std::getline(fs, tok, ':')) {
            if (n >= 3) break;
            f[n++] = parse_double(sec, key, trim(tok));
        }
        if (n != 3) {
            throw ConfigError("[" + sec + "] " + key +
                              ": expected 'delta_f:rate_up:rate_down', got '" + item + "'");
        }
        out.push_back({f[0], f[1], f[2]});
    }
    return out;
}

std::string rts_to_string(const std::vector<RtsParams>& rts) {
    if (rts.empty()) return "none";
    std::string s;
    for (std::size_t i = 0; i < rts.size(); ++i) {
        if (i) s += ",";
        s += format_double(rts[i].delta_f) + ":" + format_double(rts[i].rate_up) + ":" +
             format_double(rts[i].rate_down);
    }
    return s;
}

template <typename Enum>
Enum parse_enum(const std::string& sec, const std::string& key, const std::string& v,
                const std::vector<std::pair<std::string, Enum>>& table) {
    for (const auto& [name, val] : table) {
        if (v == name) return val;
    }
    std::string allowed;
    for (const auto& [name, val] : table) {
        if (!allowed.empty()) allowed += ", ";
        allowed += name;
    }
    throw ConfigError("[" + sec + "] " + key + ": unknown value '" + v + "' (expected one of " +
                      allowed + ")");
}

template <typename Enum>
std::string enum_name(Enum v, const std::vector<std::pair<std::string, Enum>>& table) {
    for (const auto& [name, val] : table) {
        if (val == v) return name;
    }
    return "?";
}

const std::vector<std::pair<std::string, CommonModeKind>> kind_table = {
    {"none", CommonModeKind::none},
    {"amplitude", CommonModeKind::amplitude},
    {"phase", CommonModeKind::phase}};
const std::vector<std::pair<std::string, CommonModeModel>> model_table = {
    {"sine", CommonModeModel::sine},
    {"random_walk", CommonModeModel::random_walk},
    {"step", CommonModeModel::step}};
const std::vector<std::pair<std::string, Perturbation>> perturbation_table = {
    {"amplitude", Perturbation::amplitude}, {"phase", Perturbation::phase}};
const std::vector<std::pair<std::string, PsdMethod>> psd_table = {
    {"periodogram", PsdMethod::periodogram}, {"welch", PsdMethod::welch}};
const std::vector<std::pair<std::string, RunMode>> mode_table = {
    {"manual", RunMode::manual},
    {"ssb", RunMode::ssb},
    {"smi_destructive", RunMode::smi_destructive},
    {"smi_constructive", RunMode::smi_constructive}};
const std::vector<std::pair<std::string, ReadoutMode>> readout_table = {
    {"iq", ReadoutMode::iq}, {"phase", ReadoutMode::phase}};

using Setter = std::function<void(ExperimentConfig&, const std::string& sec,
                                  const std::string& key, const std::string& value)>;

std::map<std::string, std::map<std::string, Setter>> build_schema() {
    std::map<std::string, std::map<std::string, Setter>> schema;

#define SMI_DBL(sec, key, target)                                                       \
    schema[sec][key] = [](ExperimentConfig& c, const std::string& s, const std::string& k, \
                          const std::string& v) { c.target = parse_double(s, k, v); }
#define SMI_INT(sec, key, target)                                                       \
    schema[sec][key] = [](ExperimentConfig& c, const std::string& s, const std::string& k, \
                          const std::string& v) {                                        \
        c.target = static_cast<int>(parse_int(s, k, v));                                 \
    }

    SMI_DBL("modulation", "a1_v", mod.a1);
    SMI_DBL("modulation", "a2_v", mod.a2);
    SMI_DBL("modulation", "alpha1_rad", mod.alpha1);
    SMI_DBL("modulation", "alpha2_rad", mod.alpha2);
    SMI_DBL("modulation", "f_mod_hz", mod.f_mod);
    SMI_DBL("modulation", "dc_i_v", mod.dc_i);
    SMI_DBL("modulation", "dc_q_v", mod.dc_q);

    SMI_DBL("carrier", "f0_hz", carrier.f0);
    SMI_DBL("carrier", "delta_rad", carrier.delta);
    SMI_DBL("carrier", "leakage", carrier.leakage);

    SMI_DBL("resonator", "fr_hz", resonator.fr);
    SMI_DBL("resonator", "ql", resonator.ql);
    SMI_DBL("resonator", "qc", resonator.qc);
    SMI_DBL("resonator", "qi", resonator.qi);
    SMI_DBL("resonator", "zr_ohm", resonator.zr);
    SMI_DBL("resonator", "phi0_rad", resonator.phi0);
    SMI_DBL("resonator", "tau_d_s", resonator.tau_d);
    SMI_DBL("resonator", "bg_amp", resonator.bg_amp);

    schema["noise"]["seed"] = [](ExperimentConfig& c, const std::string& s, const std::string& k,
                                 const std::string& v) { c.noise.seed = parse_u64(s, k, v); };
    schema["noise"]["rts"] = [](ExperimentConfig& c, const std::string& s, const std::string& k,
                                const std::string& v) { c.noise.rts = parse_rts_list(s, k, v); };
    SMI_DBL("noise", "flicker_ap_hz2", noise.flicker.a_p);
    SMI_DBL("noise", "flicker_fmin_hz", noise.flicker.f_min);
    SMI_DBL("noise", "flicker_fmax_hz", noise.flicker.f_max);
    SMI_DBL("noise", "white_psd_hz2_per_hz", noise.white.psd_level);
    SMI_DBL("noise", "readout_noise_v", readout_noise_v);

    schema["common_mode"]["kind"] = [](ExperimentConfig& c, const std::string& s,
                                       const std::string& k, const std::string& v) {
        c.common_mode.kind = parse_enum(s, k, v, kind_table);
    };
    schema["common_mode"]["model"] = [](ExperimentConfig& c, const std::string& s,
                                        const std::string& k, const std::string& v) {
        c.common_mode.model = parse_enum(s, k, v, model_table);
    };
    SMI_DBL("common_mode", "magnitude", common_mode.magnitude);
    SMI_DBL("common_mode", "freq_hz", common_mode.freq_hz);
    SMI_DBL("common_mode", "step_time_s", common_mode.step_time_s);

    SMI_DBL("bands", "f_sample_hz", bands.f_sample);
    SMI_DBL("bands", "tau_lockin_s", bands.tau_lockin);
    SMI_INT("bands", "filter_order", bands.filter_order);

    SMI_DBL("protocol", "null_tol_rel", protocol.calib.null_tol_rel);
    SMI_INT("protocol", "max_iterations", protocol.calib.max_iterations);
    SMI_DBL("protocol", "sweep_span_hz", protocol.calib.sweep_span_hz);
    SMI_INT("protocol", "sweep_points", protocol.calib.sweep_points);
    SMI_INT("protocol", "n_avg", protocol.calib.n_avg);
    SMI_DBL("protocol", "mixer_offset_max_v", protocol.mixer_offset_max_v);
    SMI_DBL("protocol", "mixer_floor_v", protocol.mixer_floor_v);

    SMI_DBL("sweep", "span_hz", sweep.span_hz);
    SMI_INT("sweep", "points", sweep.points);

    SMI_DBL("map", "a2_min_v", map.a2_min_v);
    SMI_DBL("map", "a2_max_v", map.a2_max_v);
    SMI_INT("map", "a2_points", map.a2_points);
    SMI_INT("map", "alpha2_points", map.alpha2_points);
    schema["map"]["perturbation"] = [](ExperimentConfig& c, const std::string& s,
                                       const std::string& k, const std::string& v) {
        c.map.perturbation = parse_enum(s, k, v, perturbation_table);
    };
    SMI_DBL("map", "magnitude", map.magnitude);

    SMI_INT("analysis", "bins_per_decade", analysis.bins_per_decade);
    schema["analysis"]["psd_method"] = [](ExperimentConfig& c, const std::string& s,
                                          const std::string& k, const std::string& v) {
        c.analysis.psd_method = parse_enum(s, k, v, psd_table);
    };
    SMI_DBL("analysis", "fit_fmin_hz", analysis.fit_fmin_hz);
    SMI_DBL("analysis", "fit_fmax_hz", analysis.fit_fmax_hz);
    SMI_INT("analysis", "mixture_k", analysis.mixture_k);
    SMI_INT("analysis", "allan_points_per_decade", analysis.allan_points_per_decade);

    SMI_DBL("run", "duration_s", run.duration_s);
    SMI_DBL("run", "time_compress", run.time_compress);
    schema["run"]["mode"] = [](ExperimentConfig& c, const std::string& s, const std::string& k,
                               const std::string& v) {
        c.run.mode = parse_enum(s, k, v, mode_table);
    };
    schema["run"]["readout"] = [](ExperimentConfig& c, const std::string& s, const std::string& k,
                                  const std::string& v) {
        c.run.readout = parse_enum(s, k, v, readout_table);
    };
    schema["run"]["out_dir"] = [](ExperimentConfig& c, const std::string&, const std::string&,
                                  const std::string& v) { c.run.out_dir = v; };

#undef SMI_DBL
#undef SMI_INT
    return schema;
}

void apply_key(ExperimentConfig& cfg, const std::string& sec, const std::string& key,
               const std::string& value) {
    static const auto schema = build_schema();
    const auto sit = schema.find(sec);
    if (sit == schema.end()) throw ConfigError("unknown config section [" + sec + "]");
    const auto kit = sit->second.find(key);
    if (kit == sit->second.end()) {
        throw ConfigError("unknown key '" + key + "' in section [" + sec + "]");
    }
    kit->second(cfg, sec, key, value);
}

ExperimentConfig parse_ini(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto cut = line.find_first_of("#;");
        if (cut != std::string::npos) line = line.substr(0, cut);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        }
        if (section.empty()) {
            throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
        }
        apply_key(cfg, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

std::string json_scalar_to_string(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

ExperimentConfig parse_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("json parse error: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("json config must be an object of sections");
    ExperimentConfig cfg;
    for (const auto& [sec, body] : doc.items()) {
        if (!body.is_object()) {
            throw ConfigError("json section '" + sec + "' must be an object");
        }
        for (const auto& [key, value] : body.items()) {
            apply_key(cfg, sec, key, json_scalar_to_string(value));
        }
    }
    return cfg;
}

void validate(const ExperimentConfig& c) {
    auto require = [](bool ok, const char* msg) {
        if (!ok) throw ConfigError(msg);
    };
    require(c.mod.a1 > 0.0, "modulation.a1_v must be positive");
    require(c.mod.a2 >= 0.0, "modulation.a2_v must be non-negative");
    require(c.mod.f_mod > 0.0, "modulation.f_mod_hz must be positive");
    require(c.resonator.fr > 0.0, "resonator.fr_hz must be positive");
    require(c.resonator.qc > 0.0 && c.resonator.qi > 0.0 && c.resonator.ql > 0.0,
            "resonator quality factors must be positive");
    require(c.bands.f_sample > 0.0, "bands.f_sample_hz must be positive");
    require(c.bands.tau_lockin > 0.0, "bands.tau_lockin_s must be positive");
    require(c.bands.filter_order >= 1, "bands.filter_order must be >= 1");
    require(c.run.duration_s > 0.0, "run.duration_s must be positive");
    require(c.run.time_compress > 0.0, "run.time_compress must be positive");
    require(c.sweep.points >= 2, "sweep.points must be >= 2");
    require(c.map.a2_points >= 2 && c.map.alpha2_points >= 2, "map grids need >= 2 points");
    require(c.analysis.mixture_k >= 0, "analysis.mixture_k must be >= 0");
    for (const auto& r : c.noise.rts) {
        require(r.rate_up > 0.0 && r.rate_down > 0.0, "noise.rts rates must be positive");
    }
    require(c.noise.flicker.a_p >= 0.0, "noise.flicker_ap_hz2 must be non-negative");
    require(c.noise.white.psd_level >= 0.0, "noise.white_psd_hz2_per_hz must be non-negative");
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text, bool json) {
    ExperimentConfig cfg = json ? parse_json(text) : parse_ini(text);
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
    if (!json) {
        for (char c : text) {
            if (std::isspace(static_cast<unsigned char>(c))) continue;
            json = (c == '{');
            break;
        }
    }
    return parse_config_text(text, json);
}

std::string canonical_config(const ExperimentConfig& c) {
    std::string s;
    auto kv = [&s](const char* key, const std::string& v) {
        s += key;
        s += " = ";
        s += v;
        s += "\n";
    };
    auto kd = [&kv](const char* key, double v) { kv(key, format_double(v)); };
    auto ki = [&kv](const char* key, long long v) { kv(key, std::to_string(v)); };

    s += "[modulation]\n";
    kd("a1_v", c.mod.a1);
    kd("a2_v", c.mod.a2);
    kd("alpha1_rad", c.mod.alpha1);
    kd("alpha2_rad", c.mod.alpha2);
    kd("f_mod_hz", c.mod.f_mod);
    kd("dc_i_v", c.mod.dc_i);
    kd("dc_q_v", c.mod.dc_q);

    s += "\n[carrier]\n";
    kd("f0_hz", c.carrier.f0);
    kd("delta_rad", c.carrier.delta);
    kd("leakage", c.carrier.leakage);

    s += "\n[resonator]\n";
    kd("fr_hz", c.resonator.fr);
    kd("ql", c.resonator.ql);
    kd("qc", c.resonator.qc);
    kd("qi", c.resonator.qi);
    kd("zr_ohm", c.resonator.zr);
    kd("phi0_rad", c.resonator.phi0);
    kd("tau_d_s", c.resonator.tau_d);
    kd("bg_amp", c.resonator.bg_amp);

    s += "\n[noise]\n";
    kv("seed", std::to_string(c.noise.seed));
    kv("rts", rts_to_string(c.noise.rts));
    kd("flicker_ap_hz2", c.noise.flicker.a_p);
    kd("flicker_fmin_hz", c.noise.flicker.f_min);
    kd("flicker_fmax_hz", c.noise.flicker.f_max);
    kd("white_psd_hz2_per_hz", c.noise.white.psd_level);
    kd("readout_noise_v", c.readout_noise_v);

    s += "\n[common_mode]\n";
    kv("kind", enum_name(c.common_mode.kind, kind_table));
    kv("model", enum_name(c.common_mode.model, model_table));
    kd("magnitude", c.common_mode.magnitude);
    kd("freq_hz", c.common_mode.freq_hz);
    kd("step_time_s", c.common_mode.step_time_s);

    s += "\n[bands]\n";
    kd("f_sample_hz", c.bands.f_sample);
    kd("tau_lockin_s", c.bands.tau_lockin);
    ki("filter_order", c.bands.filter_order);

    s += "\n[protocol]\n";
    kd("null_tol_rel", c.protocol.calib.null_tol_rel);
    ki("max_iterations", c.protocol.calib.max_iterations);
    kd("sweep_span_hz", c.protocol.calib.sweep_span_hz);
    ki("sweep_points", c.protocol.calib.sweep_points);
    ki("n_avg", c.protocol.calib.n_avg);
    kd("mixer_offset_max_v", c.protocol.mixer_offset_max_v);
    kd("mixer_floor_v", c.protocol.mixer_floor_v);

    s += "\n[sweep]\n";
    kd("span_hz", c.sweep.span_hz);
    ki("points", c.sweep.points);

    s += "\n[map]\n";
    kd("a2_min_v", c.map.a2_min_v);
    kd("a2_max_v", c.map.a2_max_v);
    ki("a2_points", c.map.a2_points);
    ki("alpha2_points", c.map.alpha2_points);
    kv("perturbation", enum_name(c.map.perturbation, perturbation_table));
    kd("magnitude", c.map.magnitude);

    s += "\n[analysis]\n";
    ki("bins_per_decade", c.analysis.bins_per_decade);
    kv("psd_method", enum_name(c.analysis.psd_method, psd_table));
    kd("fit_fmin_hz", c.analysis.fit_fmin_hz);
    kd("fit_fmax_hz", c.analysis.fit_fmax_hz);
    ki("mixture_k", c.analysis.mixture_k);
    ki("allan_points_per_decade", c.analysis.allan_points_per_decade);

    s += "\n[run]\n";
    kd("duration_s", c.run.duration_s);
    kd("time_compress", c.run.time_compress);
    kv("mode", enum_name(c.run.mode, mode_table));
    kv("readout", enum_name(c.run.readout, readout_table));
    kv("out_dir", c.run.out_dir);
    return s;
}

std::string config_digest_hex(const ExperimentConfig& cfg) {
    return digest_hex(canonical_config(cfg));
}

ResolvedSetup resolve_mode(const ExperimentConfig& cfg) {
    ResolvedSetup out{cfg.mod, cfg.carrier};
    if (cfg.run.mode == RunMode::manual) return out;

    // Park the carrier so the probe sideband sits on the resonance.
    out.carrier.f0 = cfg.resonator.fr - cfg.mod.f_mod;

    if (cfg.run.mode == RunMode::ssb) {
        out.mod = single_sideband_settings(cfg.mod.a1, cfg.mod.alpha1, cfg.mod.f_mod);
        out.mod.dc_i = cfg.mod.dc_i;
        out.mod.dc_q = cfg.mod.dc_q;
        return out;
    }

    const DutResponse eff =
        effective_dut(cfg.resonator, ResonatorState{}, out.carrier.f0 + cfg.mod.f_mod,
                      out.carrier.f0 - cfg.mod.f_mod);
    const InterferenceMode mode = cfg.run.mode == RunMode::smi_destructive
                                      ? InterferenceMode::destructive
                                      : InterferenceMode::constructive;
    const auto points = solve_operating_point(cfg.mod.a1, cfg.mod.alpha1, eff, mode);
    out.mod.a2 = points[0].a2;
    out.mod.alpha2 = points[0].alpha2;
    out.carrier.delta = points[0].delta;
    return out;
}

EngineConfig make_engine_config(const ExperimentConfig& cfg) {
    const ResolvedSetup setup = resolve_mode(cfg);
    const double c = cfg.run.time_compress;

    EngineConfig e;
    e.mod = setup.mod;
    e.carrier = setup.carrier;
    e.resonator = cfg.resonator;
    e.bands = cfg.bands;
    e.readout_noise_v = cfg.readout_noise_v;

    e.noise = cfg.noise;
    for (auto& r : e.noise.rts) {
        r.rate_up *= c;
        r.rate_down *= c;
    }
    e.noise.flicker.f_min *= c;
    e.noise.flicker.f_max *= c;
    e.noise.white.psd_level /= c;

    e.common_mode = cfg.common_mode;
    e.common_mode.freq_hz *= c;
    e.common_mode.step_time_s /= c;
    if (e.common_mode.model == CommonModeModel::random_walk) {
        e.common_mode.magnitude *= std::sqrt(c);
    }

    e.duration_s = cfg.run.duration_s / c;
    e.time_scale = c;
    return e;
}

} // namespace smi

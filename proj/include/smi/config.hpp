#pragma once

#include <numbers>
#include <string>

#include "smi/analysis.hpp"
#include "smi/engine.hpp"
#include "smi/protocol.hpp"

namespace smi {

enum class RunMode { manual, ssb, smi_destructive, smi_constructive };
enum class ReadoutMode { iq, phase };

struct ProtocolSection {
    CalibrationConfig calib;
    double mixer_offset_max_v = 5e-3;
    double mixer_floor_v = 0.0; // 0: use carrier leakage fraction times a1
};

struct SweepSection {
    double span_hz = 8e6;
    int points = 401;
};

struct MapSection {
    double a2_min_v = 0.5;
    double a2_max_v = 1.5;
    int a2_points = 41;
    int alpha2_points = 41;
    Perturbation perturbation = Perturbation::amplitude;
    double magnitude = 0.01;
};

struct AnalysisSection {
    int bins_per_decade = 10;
    PsdMethod psd_method = PsdMethod::periodogram;
    double fit_fmin_hz = 0.0; // 0 = lowest decade of the estimate
    double fit_fmax_hz = 0.0; // 0 = one tenth of the output Nyquist
    int mixture_k = 0;        // 0 = skip the mixture fit
    int allan_points_per_decade = 8;
};

struct RunSection {
    double duration_s = 10.0;
    double time_compress = 1.0;
    RunMode mode = RunMode::smi_destructive;
    ReadoutMode readout = ReadoutMode::iq;
    std::string out_dir = "out";
};

/// Full experiment description, 1:1 with the INI/JSON file.
struct ExperimentConfig {
    ModulationSettings mod{1.0, 1.0, 0.0, std::numbers::pi, 10e6, 0.0, 0.0};
    CarrierSettings carrier{6.15e9, 0.0, 1e-5};
    ResonatorParams resonator{};
    NoiseSpec noise{};
    CommonModeSpec common_mode{};
    BandsConfig bands{};
    double readout_noise_v = 0.0;
    ProtocolSection protocol{};
    SweepSection sweep{};
    MapSection map{};
    AnalysisSection analysis{};
    RunSection run{};
};

/// Parse a config file; the format is chosen by extension (.json vs
/// anything else) with a first-character sniff as fallback. Unknown sections
/// or keys raise ConfigError.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, bool json);

/// Deterministic fully-resolved INI rendering (every key, fixed order).
std::string canonical_config(const ExperimentConfig& cfg);

/// FNV-1a digest of the canonical rendering, as 16 hex digits.
std::string config_digest_hex(const ExperimentConfig& cfg);

/// Modulation and carrier settings after applying run.mode:
///  - ssb: probe-only modulation, carrier parked so the probe sits on fr
///  - smi_destructive / smi_constructive: closed-form operating point for
///    the configured resonator at the parked carrier
///  - manual: settings exactly as configured
struct ResolvedSetup {
    ModulationSettings mod;
    CarrierSettings carrier;
};
ResolvedSetup resolve_mode(const ExperimentConfig& cfg);

/// Engine input with the mode applied and the time-compression factor
/// folded in: event rates and band edges scale by c, white PSD by 1/c, the
/// simulated duration by 1/c, and the output timestamps are stamped with the
/// physical (uncompressed) sample interval.
EngineConfig make_engine_config(const ExperimentConfig& cfg);

} // namespace smi

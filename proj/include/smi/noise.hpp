#pragma once

#include <cstdint>
#include <vector>

#include "smi/trace.hpp"

namespace smi {

/// Two-state telegraph component. rate_up is the transition rate out of the
/// 0 state (into delta_f), rate_down the rate back; dwell times are
/// exponential, so the stationary occupation of the delta_f state is
/// rate_up / (rate_up + rate_down) and the power spectrum is a Lorentzian
/// with corner frequency (rate_up + rate_down) / (2 pi).
struct RtsParams {
    double delta_f = 0.0;  // Hz offset of the up state
    double rate_up = 0.0;  // 1/s, 0 -> delta_f
    double rate_down = 0.0; // 1/s, delta_f -> 0
};

/// 1/f component with one-sided PSD S(f) = a_p / f inside [f_min, f_max].
struct FlickerParams {
    double a_p = 0.0;   // Hz^2
    double f_min = 0.0; // below this the synthesis magnitude is held flat
    double f_max = 0.0; // upper edge of the stated validity band
};

struct WhiteParams {
    double psd_level = 0.0; // one-sided PSD, Hz^2/Hz; per-sample variance = psd/(2 dt)
};

struct NoiseSpec {
    std::vector<RtsParams> rts;
    FlickerParams flicker;
    WhiteParams white;
    std::uint64_t seed = 0;
};

/// Telegraph trace: dwell times drawn as exponentials and rasterized to the
/// sample grid (the value at sample i is the state at time i*dt), initial
/// state drawn from the stationary occupation.
FrequencyTrace gen_rts(const RtsParams& p, std::size_t n, double dt, std::uint64_t seed);

/// 1/f trace by frequency-domain shaping of complex Gaussian noise: bin k
/// gets expected periodogram a_p/f_k, the DC bin is zeroed and bins below
/// f_min are held at a_p/f_min. Gaussian by construction.
FrequencyTrace gen_flicker(const FlickerParams& p, std::size_t n, double dt, std::uint64_t seed);

FrequencyTrace gen_white(const WhiteParams& p, std::size_t n, double dt, std::uint64_t seed);

/// Sum of all configured components on a shared grid. Component streams are
/// split deterministically from spec.seed via derive_seed(seed, tag, index),
/// so adding one component never reshuffles the others.
FrequencyTrace compose(const NoiseSpec& spec, std::size_t n, double dt);

struct CommonModeSample {
    double eps_amp = 0.0;     // relative common amplitude perturbation
    double theta_phase = 0.0; // common RF phase perturbation, rad
};

enum class CommonModeKind { none, amplitude, phase };
enum class CommonModeModel { sine, random_walk, step };

struct CommonModeSpec {
    CommonModeKind kind = CommonModeKind::none;
    CommonModeModel model = CommonModeModel::sine;
    double magnitude = 0.0;   // sine/step amplitude; random-walk std per sqrt(s)
    double freq_hz = 0.1;     // sine only
    double step_time_s = 0.0; // step only; 0 means half the duration
};

/// Deterministic common-mode drive sampled on the given grid.
std::vector<CommonModeSample> common_mode_stream(const CommonModeSpec& spec, std::size_t n,
                                                 double dt, std::uint64_t seed);

} // namespace smi

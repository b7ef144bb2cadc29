#pragma once

#include <complex>
#include <cstdint>
#include <string>

#include "smi/noise.hpp"
#include "smi/phasor.hpp"
#include "smi/resonator.hpp"
#include "smi/trace.hpp"

namespace smi {

/// Sampling chain configuration. Defaults keep the alias band of the output
/// rate at least 40 dB down: with tau = 40 ms, order 4 and f_sample = 100 Hz
/// the cascade attenuates everything above f_sample/2 by >= 41 dB.
struct BandsConfig {
    double f_sample = 100.0;   // output sample rate, Hz
    double tau_lockin = 0.04;  // lock-in time constant, s
    int filter_order = 4;      // identical one-pole stages
    int steps_per_tau = 20;    // internal rate = steps_per_tau / tau_lockin (min 10)

    double measurement_bandwidth_hz() const;
};

/// Cascade of `order` identical one-pole low-pass stages, each with time
/// constant tau/order. Step update y += (1 - e^{-dt/tau_stage})(x - y), which
/// reproduces the continuous exponential exactly for piecewise-constant
/// input and has DC gain exactly 1.
class LockinFilter {
  public:
    LockinFilter(double tau, int order, double dt);

    std::complex<double> step(std::complex<double> in);
    void reset(std::complex<double> value = {0.0, 0.0});

    /// Analytic amplitude response of the discrete cascade at frequency f.
    static double magnitude(double f, double tau, int order, double dt);

  private:
    std::vector<std::complex<double>> stages_;
    double alpha_ = 0.0;
};

/// Hidden up-conversion mixer imperfection. The monitored residual carrier is
///   sqrt(k^2 |dc - dc*|^2 + floor^2),
/// quadratic in the DC offsets by construction and reaching the floor at the
/// true offsets dc*.
struct MixerModel {
    double true_dc_i = 0.0;
    double true_dc_q = 0.0;
    double slope_k = 1.0;      // residual V per V of offset error
    double floor_v = 0.0;      // best-achievable residual, V

    double residual(double dc_i, double dc_q) const;

    /// Random true offsets in [-max_offset, +max_offset].
    static MixerModel from_seed(std::uint64_t seed, double max_offset_v, double floor_v);
};

struct EngineConfig {
    ModulationSettings mod;
    CarrierSettings carrier;
    ResonatorParams resonator;
    NoiseSpec noise;
    CommonModeSpec common_mode;
    BandsConfig bands;
    double duration_s = 10.0;
    double readout_noise_v = 0.0; // additive white floor per internal sample, each quadrature
    double time_scale = 1.0;      // output dt is stamped as time_scale / f_sample
};

struct RunManifest {
    std::string config_digest;
    std::uint64_t seed = 0;
    std::string version;
    std::string prng;
    std::string notes;
};

struct RunResult {
    FrequencyTrace x;     // V
    FrequencyTrace y;     // V
    FrequencyTrace truth; // injected resonator detuning at the output instants, Hz
    RunManifest manifest;
};

/// Time-domain simulation: per internal step the composed detuning trace
/// updates the resonator state, both sideband reflections are applied, the
/// common-mode stream perturbs the settings, readout noise is added, and the
/// lock-in cascade filters the demodulated phasor; every M-th filtered sample
/// is emitted at f_sample together with the unfiltered truth detuning.
RunResult run(const EngineConfig& cfg);

} // namespace smi

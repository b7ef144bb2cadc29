#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "smi/engine.hpp"
#include "smi/phasor.hpp"
#include "smi/resonator.hpp"
#include "smi/rng.hpp"

namespace smi {

/// Measurement-level emulation of the bench used by the calibration
/// procedures. Every measurement advances a simulated clock by one lock-in
/// settling time (times the averaging count) and draws fresh readout noise;
/// the procedures only see what a real instrument would expose.
class VirtualSetup {
  public:
    VirtualSetup(ModulationSettings mod, CarrierSettings carrier, ResonatorParams res,
                 MixerModel mixer, double tau_lockin_s, double readout_noise_v,
                 std::uint64_t seed);

    ModulationSettings& mod() { return mod_; }
    const ModulationSettings& mod() const { return mod_; }
    CarrierSettings& carrier() { return carrier_; }
    const CarrierSettings& carrier() const { return carrier_; }
    const ResonatorParams& resonator() const { return res_; }
    ResonatorState& state() { return state_; }
    double readout_noise_v() const { return noise_v_; }
    double tau_lockin_s() const { return tau_; }

    /// Residual carrier amplitude on the leakage monitor at the current DC
    /// trim (V). The carrier sits away from the demodulation frequency, so
    /// this is observed on its own detector, not in the (x, y) output.
    double measure_leak();

    /// Demodulated output at the current settings, averaged over n_avg
    /// consecutive lock-in outputs (noise shrinks by sqrt(n_avg)).
    std::complex<double> measure_iq(int n_avg = 1);

    int evaluations() const { return evals_; }
    double clock_s() const { return clock_s_; }

  private:
    ModulationSettings mod_;
    CarrierSettings carrier_;
    ResonatorParams res_;
    ResonatorState state_;
    MixerModel mixer_;
    double tau_ = 0.04;
    double noise_v_ = 0.0;
    Rng rng_;
    int evals_ = 0;
    double clock_s_ = 0.0;
};

struct CalibrationConfig {
    double null_tol_rel = 1e-4; // accept the null when |s| <= tol * a1 (or the noise floor)
    int max_iterations = 400;   // simplex iteration budget for the null search
    double sweep_span_hz = 0.0; // carrier sweep span; 0 = 1.6e-3 * guess
    int sweep_points = 201;
    int n_avg = 1;              // averaging per demodulated measurement
};

struct MixerBalanceResult {
    double dc_i = 0.0;
    double dc_q = 0.0;
    double leak_before = 0.0;
    double leak_after = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/// Null the residual carrier by trimming the two DC offsets. The monitored
/// power is quadratic in each offset, so each axis is solved with a
/// three-point parabola; two passes absorb the (absent) cross term and
/// measurement noise. Well under 50 leak measurements in total.
MixerBalanceResult balance_mixer(VirtualSetup& setup);

struct ResonanceScanResult {
    ResonatorParams fit;                 // fr, ql, qc, phi0, tau_d from the fit
    std::complex<double> background;     // complex off-resonant level, centre-referenced
    double rms_residual_v = 0.0;
    int evaluations = 0;
    bool converged = false;
    std::vector<double> f0_grid;
    std::vector<std::complex<double>> trace;
};

/// Locate and fit the resonance near f_center_hz (the expected resonance
/// frequency itself, not the carrier). Sweeps the carrier with only the
/// probe sideband populated, rejects sweeps without a significant dip
/// (NotFoundError), then fits the full complex notch model. Modulation and
/// carrier settings are restored afterwards.
ResonanceScanResult find_resonance(VirtualSetup& setup, double f_center_hz,
                                   const CalibrationConfig& cfg = {});

struct NullSearchResult {
    double a2 = 0.0;
    double alpha2 = 0.0;
    double amp_before = 0.0; // |s| at the starting settings, V
    double amp_after = 0.0;  // |s| at the accepted settings, V
    int evaluations = 0;
    bool converged = false;
    std::vector<double> history; // best objective per iteration, non-increasing
};

/// Minimize |output| over (a2, alpha2) at the current down-conversion phase.
/// Accepts when the remaining amplitude is below null_tol_rel * a1 or below
/// five standard deviations of the averaged readout noise; otherwise throws
/// NotConvergedError after the iteration budget.
NullSearchResult find_null(VirtualSetup& setup, const CalibrationConfig& cfg = {});

/// Quarter-turn of the down-conversion phase: moves the operating point from
/// the amplitude-rejecting null to the phase-rejecting one. Applying it twice
/// restores the original output at the null. Returns the new phase.
double switch_to_phase_rejection(VirtualSetup& setup);

struct CalibrationStep {
    std::string name;
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    int evaluations = 0;
    double metric_before = 0.0;
    double metric_after = 0.0;
    std::string note;
};

struct CalibrationReport {
    std::vector<CalibrationStep> steps;
    double fr_hz = 0.0;
    double ql = 0.0;
    double qc = 0.0;
    double phi0_rad = 0.0;
    double f0_hz = 0.0;
    double delta_rad = 0.0;              // amplitude-rejecting operating point
    double delta_phase_reject_rad = 0.0; // same null, phase-rejecting quadrature
    double a2_v = 0.0;
    double alpha2_rad = 0.0;
    double null_amp_v = 0.0;
    double dc_i_v = 0.0;
    double dc_q_v = 0.0;
    bool converged = false;

    std::string to_json() const;
};

/// Full guided bring-up: balance the mixer, find and fit the resonance, park
/// the probe sideband on it, search the destructive null from the fitted
/// operating point, and re-check the mixer balance. Running it twice on the
/// same setup reproduces the same end state.
CalibrationReport run_guide(VirtualSetup& setup, const CalibrationConfig& cfg = {});

} // namespace smi

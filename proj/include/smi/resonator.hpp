#pragma once

#include <array>
#include <complex>
#include <vector>

#include "smi/phasor.hpp"

namespace smi {

/// Notch-type (hanger) resonator. ql is stored for reporting and for the
/// photon-number calibration; the reflection model always derives the loaded
/// Q from (qc, qi * qi_factor) so that quality-factor drift acts through qi.
struct ResonatorParams {
    double fr = 6.16e9;  // resonance frequency, Hz
    double ql = 8.0e3;   // loaded quality factor (as measured/reported)
    double qc = 9.8e3;   // coupling quality factor
    double qi = 5.0e4;   // internal quality factor
    double zr = 316.0;   // resonator impedance, Ohm
    double phi0 = 0.0;   // impedance-mismatch rotation of the notch, rad
    double tau_d = 0.0;  // electrical delay, s
    double bg_amp = 1.0; // off-resonant background amplitude

    double loaded_q(double qi_factor = 1.0) const { return 1.0 / (1.0 / qc + 1.0 / (qi * qi_factor)); }
    double linewidth_hz(double qi_factor = 1.0) const { return fr / loaded_q(qi_factor); }
    /// 1/ql vs 1/qc + 1/qi consistency check (diagnostic, not a hard constraint).
    bool q_consistent(double rel_tol = 0.05) const;

    /// Consistent triple from (fr, ql, qc): qi chosen so loaded_q() == ql exactly.
    static ResonatorParams from_loaded(double fr, double ql, double qc);
    /// Consistent triple from (fr, qc, qi): ql = derived loaded Q.
    static ResonatorParams from_coupling(double fr, double qc, double qi);
};

/// Slow-variable state: resonance shift delta_r (Hz) and the multiplicative
/// internal-quality factor drift.
struct ResonatorState {
    double delta_r = 0.0;
    double qi_factor = 1.0;
};

/// Full complex reflection
///   S(f) = bg_amp e^{-i 2 pi f tau_d} [1 - (Ql/Qc) e^{i phi0} / (1 + 2i Ql (f - fr - delta_r)/fr)]
/// with Ql = loaded_q(qi_factor).
std::complex<double> reflection(const ResonatorParams& p, const ResonatorState& st, double f);

/// Reflection normalized by the background at the same frequency (pure notch factor).
std::complex<double> notch_factor(const ResonatorParams& p, const ResonatorState& st, double f);

/// Probe-sideband response relative to its own background:
/// xi = |S|/|S_bg|, phi = arg S - arg S_bg.
DutResponse dut_response(const ResonatorParams& p, const ResonatorState& st, double f_probe);

/// Ratio the interferometer actually compares: probe reflection over the
/// conjugated reference reflection (the reference demodulates conjugated).
/// Reduces to dut_response when tau_d = 0 and bg is real.
DutResponse effective_dut(const ResonatorParams& p, const ResonatorState& st, double f_probe,
                          double f_ref);

/// Mean intracavity photon number for applied power p_in (W):
///   <n> = (2 / (hbar w_r^2)) (Ql^2 / Qc) (Z0 / Zr) P_in, w_r = 2 pi fr.
/// Uses the stored ql.
double mean_photon_number(const ResonatorParams& p, double p_in_w);
double input_power_for_photons(const ResonatorParams& p, double n_photons);

struct SpectroscopyPoint {
    double f0 = 0.0; // carrier frequency, Hz
    double x = 0.0;
    double y = 0.0;
};

/// Carrier sweep with fixed modulation: probe rides at f0 + f_mod, reference
/// at f0 - f_mod, both with their full complex reflection applied
/// (reference conjugated).
std::vector<SpectroscopyPoint> spectroscopy_trace(const ResonatorParams& p,
                                                  const ResonatorState& st,
                                                  const ModulationSettings& mod,
                                                  const CarrierSettings& carrier,
                                                  const std::vector<double>& f0_values);

struct PhaseCalibration {
    double slope_hz_per_rad = 0.0; // detuning per unit demodulated phase
    double phase0 = 0.0;           // unwrapped phase at the reference carrier
    double f0_ref = 0.0;           // carrier the fit is centred on
    double residual_rms_rad = 0.0;
    int n_used = 0;
};

/// Linear map from demodulated phase to resonator detuning, fitted on a
/// carrier sweep. fit_halfspan_hz = 0 picks the window adaptively (points
/// whose local phase slope is at least 90% of the steepest slope). Keep the
/// fitted span comparable to the detuning range you intend to read back; the
/// notch phase is an arctan, so a wide fit window folds its compression into
/// the slope. Throws InsufficientSpanError when the sweep does not cross the
/// resonance.
PhaseCalibration calibrate_phase_to_frequency(const std::vector<SpectroscopyPoint>& trace,
                                              double fit_halfspan_hz = 0.0);

/// Apply the calibration to one demodulated sample.
double detuning_from_phase(const PhaseCalibration& cal, double x, double y);

/// 2x2 sensitivity of (x, y) to (delta_r, qi_factor) at a state, by central
/// differences of the full two-sided output. Columns: d(x,y)/d(delta_r) in
/// V/Hz and d(x,y)/d(qi_factor) in V.
struct IqJacobian {
    std::array<double, 2> d_delta{}; // dx/ddr, dy/ddr
    std::array<double, 2> d_qi{};    // dx/dqi_factor, dy/dqi_factor
    double x0 = 0.0, y0 = 0.0;

    /// |cos| of the angle between the two columns (0 = perpendicular).
    double orthogonality() const;
    /// Invert around (x0, y0): returns (delta_r, qi_factor - 1).
    std::array<double, 2> decode(double x, double y) const;
};

IqJacobian iq_jacobian(const ResonatorParams& p, const ResonatorState& st,
                       const ModulationSettings& mod, const CarrierSettings& carrier);

} // namespace smi

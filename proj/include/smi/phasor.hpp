#pragma once

#include <array>
#include <complex>
#include <utility>
#include <vector>

namespace smi {

/// Sideband synthesis settings: two tones at +-f_mod around the carrier with
/// amplitudes a1, a2 (V) and phases alpha1, alpha2 (rad), plus the DC offsets
/// trimming the up-conversion mixer.
struct ModulationSettings {
    double a1 = 0.0;
    double a2 = 0.0;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double f_mod = 10e6;  // sideband offset from the carrier, Hz
    double dc_i = 0.0;
    double dc_q = 0.0;
};

struct CarrierSettings {
    double f0 = 0.0;       // carrier frequency, Hz
    double delta = 0.0;    // down-conversion phase, rad
    double leakage = 1e-5; // residual carrier floor relative to sideband amplitude
};

/// Device response at the probe sideband: amplitude ratio xi and phase phi,
/// both relative to the off-resonant background.
struct DutResponse {
    double xi = 1.0;
    double phi = 0.0;
};

struct DemodOutput {
    double x = 0.0;
    double y = 0.0;
};

/// One-tone interference decomposition of the demodulated output:
/// b1 e^{i beta1} from the reference sideband, b2 e^{i beta2} from the probe.
struct InterferencePoint {
    double b1 = 0.0;
    double beta1 = 0.0;
    double b2 = 0.0;
    double beta2 = 0.0;
};

enum class InterferenceMode { constructive, destructive };

struct OperatingPoint {
    double a2 = 0.0;
    double alpha2 = 0.0;
    double delta = 0.0;
};

double wrap_2pi(double angle);  // into [0, 2*pi)
double wrap_pi(double angle);   // into (-pi, pi]

/// Demodulated output phasor x + iy:
///   (a1 e^{i alpha1} + a2 e^{i alpha2}) e^{i delta}
///   + xi e^{i phi} (a1 e^{i alpha1} - a2 e^{i alpha2}) e^{-i delta}.
/// The sum term is the reference sideband, the difference term the probe.
std::complex<double> output_phasor(const ModulationSettings& mod, const CarrierSettings& carrier,
                                   const DutResponse& dut);

DemodOutput eval_output(const ModulationSettings& mod, const CarrierSettings& carrier,
                        const DutResponse& dut);

/// Generalization with a complex response on each sideband. The reference
/// sideband demodulates conjugated (it sits on the opposite side of the
/// carrier), so its physical response enters as conj(ref).
///   conj(ref) (a1 e^{i alpha1} + a2 e^{i alpha2}) e^{i delta}
///   + probe (a1 e^{i alpha1} - a2 e^{i alpha2}) e^{-i delta}.
/// With ref = 1, probe = xi e^{i phi} this reduces to output_phasor.
std::complex<double> eval_output_two_sided(const ModulationSettings& mod,
                                           const CarrierSettings& carrier,
                                           std::complex<double> probe, std::complex<double> ref);

/// Amplitudes and phases of the two interfering terms. Closed forms:
///   b1^2 = a1^2 + a2^2 + 2 a1 a2 cos(alpha1 - alpha2)
///   b2^2 = xi^2 (a1^2 + a2^2 - 2 a1 a2 cos(alpha1 - alpha2))
InterferencePoint interference_terms(const ModulationSettings& mod, const CarrierSettings& carrier,
                                     const DutResponse& dut);

/// Right-hand side of the balance condition
///   cos(alpha1 - alpha2) = (xi^2 - 1)(a1^2 + a2^2) / ((1 + xi^2) 2 a1 a2).
double balance_cosine(double a1, double a2, double xi);

/// Both phase-difference branches +-dalpha solving b1 = b2.
/// Throws NoSolutionError when |balance_cosine| > 1.
struct BalanceBranches {
    double dalpha = 0.0; // principal value in [0, pi]
    std::array<double, 2> branches{};
};
BalanceBranches solve_balance(double a1, double a2, double xi);

/// Full operating point for the requested interference mode with a2 = a1
/// (canonical gauge; the condition only constrains the phase difference).
/// Returns both dalpha branches; [0] is the branch with alpha2 in [0, pi)
/// when exactly one qualifies. delta is solved so that beta1 - beta2 = 0
/// (constructive) or pi (destructive).
std::array<OperatingPoint, 2> solve_operating_point(double a1, double alpha1, const DutResponse& dut,
                                                    InterferenceMode mode);

/// (a2, alpha2) reaching the requested mode at a *fixed* delta, via
/// w = A (rho - 1)/(rho + 1) with A = a1 e^{i alpha1} and
/// rho = xi e^{i (target + phi - 2 delta)}. This mirrors tuning only the
/// modulation amplitudes/phases on a setup whose down-conversion phase is
/// whatever the cabling gives.
std::pair<double, double> solve_modulation_at_delta(double a1, double alpha1, const DutResponse& dut,
                                                    double delta, InterferenceMode mode);

/// Common-mode perturbation: both sideband amplitudes scale by (1 + eps) and
/// the common RF phase theta enters as a shift of delta (+delta on the
/// reference term, -delta on the probe term, exactly as in the output phasor).
std::pair<ModulationSettings, CarrierSettings> apply_common_noise(const ModulationSettings& mod,
                                                                  const CarrierSettings& carrier,
                                                                  double eps_amp,
                                                                  double theta_phase);

enum class Perturbation { amplitude, phase };

struct SensitivityCell {
    double a2 = 0.0;
    double alpha2 = 0.0;
    double x = 0.0;       // unperturbed working point
    double y = 0.0;
    double delta_s = 0.0; // |(x,y)_perturbed - (x,y)|
};

struct SensitivityMapResult {
    std::vector<double> a2_grid;
    std::vector<double> alpha2_grid;
    std::vector<SensitivityCell> cells; // row-major: a2 index slow, alpha2 fast
    Perturbation kind = Perturbation::amplitude;
    double magnitude = 0.0;

    const SensitivityCell& at(std::size_t ia2, std::size_t ialpha) const {
        return cells[ia2 * alpha2_grid.size() + ialpha];
    }
};

/// |output change| under a fixed common-mode perturbation over an
/// (a2, alpha2) grid, with (a1, alpha1, delta) held fixed.
SensitivityMapResult sensitivity_map(double a1, double alpha1, const CarrierSettings& carrier,
                                     const DutResponse& dut, const std::vector<double>& a2_grid,
                                     const std::vector<double>& alpha2_grid, Perturbation kind,
                                     double magnitude);

/// Modulation settings leaving only the probe sideband populated
/// (a2 = a1, alpha2 = alpha1 + pi zeroes the reference term).
ModulationSettings single_sideband_settings(double a1, double alpha1, double f_mod = 10e6);

} // namespace smi

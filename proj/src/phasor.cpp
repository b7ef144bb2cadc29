#include "smi/phasor.hpp"

#include <cmath>
#include <numbers>

#include "smi/errors.hpp"

namespace smi {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;

std::complex<double> polar1(double phase) { return {std::cos(phase), std::sin(phase)}; }

double mode_target(InterferenceMode mode) {
    return mode == InterferenceMode::constructive ? 0.0 : std::numbers::pi;
}
} // namespace

double wrap_2pi(double angle) {
    double w = std::fmod(angle, two_pi);
    if (w < 0.0) w += two_pi;
    return w;
}

double wrap_pi(double angle) {
    double w = wrap_2pi(angle);
    if (w > std::numbers::pi) w -= two_pi;
    return w;
}

std::complex<double> eval_output_two_sided(const ModulationSettings& mod,
                                           const CarrierSettings& carrier,
                                           std::complex<double> probe, std::complex<double> ref) {
    const std::complex<double> t1 = mod.a1 * polar1(mod.alpha1);
    const std::complex<double> t2 = mod.a2 * polar1(mod.alpha2);
    const std::complex<double> up = polar1(carrier.delta);
    return std::conj(ref) * (t1 + t2) * up + probe * (t1 - t2) * std::conj(up);
}

std::complex<double> output_phasor(const ModulationSettings& mod, const CarrierSettings& carrier,
                                   const DutResponse& dut) {
    return eval_output_two_sided(mod, carrier, dut.xi * polar1(dut.phi), {1.0, 0.0});
}

DemodOutput eval_output(const ModulationSettings& mod, const CarrierSettings& carrier,
                        const DutResponse& dut) {
    const auto s = output_phasor(mod, carrier, dut);
    return {s.real(), s.imag()};
}

InterferencePoint interference_terms(const ModulationSettings& mod, const CarrierSettings& carrier,
                                     const DutResponse& dut) {
    const std::complex<double> t1 = mod.a1 * polar1(mod.alpha1);
    const std::complex<double> t2 = mod.a2 * polar1(mod.alpha2);
    InterferencePoint p;
    p.b1 = std::abs(t1 + t2);
    p.beta1 = std::arg(t1 + t2) + carrier.delta;
    p.b2 = dut.xi * std::abs(t1 - t2);
    p.beta2 = std::arg(t1 - t2) + dut.phi - carrier.delta;
    return p;
}

double balance_cosine(double a1, double a2, double xi) {
    return (xi * xi - 1.0) * (a1 * a1 + a2 * a2) / ((1.0 + xi * xi) * 2.0 * a1 * a2);
}

BalanceBranches solve_balance(double a1, double a2, double xi) {
    const double c = balance_cosine(a1, a2, xi);
    if (std::abs(c) > 1.0) {
        throw NoSolutionError("balance condition unreachable: required cos(alpha1-alpha2) = " +
                              std::to_string(c));
    }
    BalanceBranches out;
    out.dalpha = std::acos(c);
    out.branches = {out.dalpha, -out.dalpha};
    return out;
}

std::array<OperatingPoint, 2> solve_operating_point(double a1, double alpha1,
                                                    const DutResponse& dut,
                                                    InterferenceMode mode) {
    const auto bal = solve_balance(a1, a1, dut.xi);
    const double target = mode_target(mode);

    std::array<OperatingPoint, 2> points;
    for (std::size_t i = 0; i < 2; ++i) {
        OperatingPoint op;
        op.a2 = a1;
        op.alpha2 = wrap_2pi(alpha1 - bal.branches[i]);
        const std::complex<double> t1 = a1 * polar1(alpha1);
        const std::complex<double> t2 = op.a2 * polar1(op.alpha2);
        // beta1 - beta2 = arg(t1+t2) - arg(t1-t2) - phi + 2 delta = target
        op.delta = wrap_pi(0.5 * (target + dut.phi + std::arg(t1 - t2) - std::arg(t1 + t2)));
        points[i] = op;
    }
    // Default branch: alpha2 in [0, pi).
    if (points[1].alpha2 < std::numbers::pi && points[0].alpha2 >= std::numbers::pi) {
        std::swap(points[0], points[1]);
    }
    return points;
}

std::pair<double, double> solve_modulation_at_delta(double a1, double alpha1,
                                                    const DutResponse& dut, double delta,
                                                    InterferenceMode mode) {
    // Conditions: |t1+t2| = xi |t1-t2| and arg(t1+t2) - arg(t1-t2) = target + phi - 2 delta,
    // i.e. (t1+t2)/(t1-t2) = rho. Solving for t2 = w:
    const double target = mode_target(mode);
    const std::complex<double> rho = dut.xi * polar1(target + dut.phi - 2.0 * delta);
    const std::complex<double> a = a1 * polar1(alpha1);
    const std::complex<double> w = a * (rho - 1.0) / (rho + 1.0);
    return {std::abs(w), wrap_2pi(std::arg(w))};
}

std::pair<ModulationSettings, CarrierSettings> apply_common_noise(const ModulationSettings& mod,
                                                                  const CarrierSettings& carrier,
                                                                  double eps_amp,
                                                                  double theta_phase) {
    ModulationSettings m = mod;
    CarrierSettings c = carrier;
    m.a1 *= 1.0 + eps_amp;
    m.a2 *= 1.0 + eps_amp;
    c.delta += theta_phase;
    return {m, c};
}

SensitivityMapResult sensitivity_map(double a1, double alpha1, const CarrierSettings& carrier,
                                     const DutResponse& dut, const std::vector<double>& a2_grid,
                                     const std::vector<double>& alpha2_grid, Perturbation kind,
                                     double magnitude) {
    SensitivityMapResult map;
    map.a2_grid = a2_grid;
    map.alpha2_grid = alpha2_grid;
    map.kind = kind;
    map.magnitude = magnitude;
    map.cells.reserve(a2_grid.size() * alpha2_grid.size());

    const double eps = kind == Perturbation::amplitude ? magnitude : 0.0;
    const double theta = kind == Perturbation::phase ? magnitude : 0.0;

    ModulationSettings mod;
    mod.a1 = a1;
    mod.alpha1 = alpha1;
    for (double a2 : a2_grid) {
        for (double alpha2 : alpha2_grid) {
            mod.a2 = a2;
            mod.alpha2 = alpha2;
            const auto s0 = output_phasor(mod, carrier, dut);
            const auto [pm, pc] = apply_common_noise(mod, carrier, eps, theta);
            const auto s1 = output_phasor(pm, pc, dut);
            map.cells.push_back({a2, alpha2, s0.real(), s0.imag(), std::abs(s1 - s0)});
        }
    }
    return map;
}

ModulationSettings single_sideband_settings(double a1, double alpha1, double f_mod) {
    ModulationSettings mod;
    mod.a1 = a1;
    mod.alpha1 = alpha1;
    mod.a2 = a1;
    mod.alpha2 = wrap_2pi(alpha1 + std::numbers::pi);
    mod.f_mod = f_mod;
    return mod;
}

} // namespace smi

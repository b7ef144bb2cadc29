#include "smi/resonator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "smi/constants.hpp"
#include "smi/errors.hpp"

namespace smi {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;
} // namespace

bool ResonatorParams::q_consistent(double rel_tol) const {
    const double derived = loaded_q();
    return std::abs(derived - ql) <= rel_tol * ql;
}

ResonatorParams ResonatorParams::from_loaded(double fr, double ql, double qc) {
    ResonatorParams p;
    p.fr = fr;
    p.ql = ql;
    p.qc = qc;
    p.qi = 1.0 / (1.0 / ql - 1.0 / qc); // requires ql < qc
    return p;
}

ResonatorParams ResonatorParams::from_coupling(double fr, double qc, double qi) {
    ResonatorParams p;
    p.fr = fr;
    p.qc = qc;
    p.qi = qi;
    p.ql = p.loaded_q();
    return p;
}

std::complex<double> notch_factor(const ResonatorParams& p, const ResonatorState& st, double f) {
    const double ql = p.loaded_q(st.qi_factor);
    const std::complex<double> denom(1.0, 2.0 * ql * (f - p.fr - st.delta_r) / p.fr);
    const std::complex<double> rot(std::cos(p.phi0), std::sin(p.phi0));
    return 1.0 - (ql / p.qc) * rot / denom;
}

std::complex<double> reflection(const ResonatorParams& p, const ResonatorState& st, double f) {
    const double ph = -two_pi * f * p.tau_d;
    return p.bg_amp * std::complex<double>(std::cos(ph), std::sin(ph)) * notch_factor(p, st, f);
}

DutResponse dut_response(const ResonatorParams& p, const ResonatorState& st, double f_probe) {
    const auto n = notch_factor(p, st, f_probe); // background divides out exactly
    return {std::abs(n), std::arg(n)};
}

DutResponse effective_dut(const ResonatorParams& p, const ResonatorState& st, double f_probe,
                          double f_ref) {
    const auto rp = reflection(p, st, f_probe);
    const auto rr = reflection(p, st, f_ref);
    const auto ratio = rp / std::conj(rr);
    return {std::abs(ratio), std::arg(ratio)};
}

double mean_photon_number(const ResonatorParams& p, double p_in_w) {
    const double wr = two_pi * p.fr;
    return 2.0 / (hbar_js * wr * wr) * (p.ql * p.ql / p.qc) * (z0_ohm / p.zr) * p_in_w;
}

double input_power_for_photons(const ResonatorParams& p, double n_photons) {
    const double per_watt = mean_photon_number(p, 1.0);
    return n_photons / per_watt;
}

std::vector<SpectroscopyPoint> spectroscopy_trace(const ResonatorParams& p,
                                                  const ResonatorState& st,
                                                  const ModulationSettings& mod,
                                                  const CarrierSettings& carrier,
                                                  const std::vector<double>& f0_values) {
    std::vector<SpectroscopyPoint> out;
    out.reserve(f0_values.size());
    CarrierSettings c = carrier;
    for (double f0 : f0_values) {
        c.f0 = f0;
        const auto probe = reflection(p, st, f0 + mod.f_mod);
        const auto ref = reflection(p, st, f0 - mod.f_mod);
        const auto s = eval_output_two_sided(mod, c, probe, ref);
        out.push_back({f0, s.real(), s.imag()});
    }
    return out;
}

PhaseCalibration calibrate_phase_to_frequency(const std::vector<SpectroscopyPoint>& trace,
                                              double fit_halfspan_hz) {
    if (trace.size() < 5) throw InsufficientSpanError("calibration sweep has fewer than 5 points");

    // Unwrapped demodulated phase along the sweep.
    std::vector<double> theta(trace.size());
    theta[0] = std::atan2(trace[0].y, trace[0].x);
    for (std::size_t i = 1; i < trace.size(); ++i) {
        const double raw = std::atan2(trace[i].y, trace[i].x);
        theta[i] = theta[i - 1] + wrap_pi(raw - theta[i - 1]);
    }

    // Steepest local phase slope marks the resonance crossing.
    std::size_t steepest = 1;
    double max_slope = 0.0;
    std::vector<double> slope(trace.size(), 0.0);
    for (std::size_t i = 1; i + 1 < trace.size(); ++i) {
        const double df = trace[i + 1].f0 - trace[i - 1].f0;
        if (df == 0.0) continue;
        slope[i] = std::abs((theta[i + 1] - theta[i - 1]) / df);
        if (slope[i] > max_slope) {
            max_slope = slope[i];
            steepest = i;
        }
    }
    const double span = trace.back().f0 - trace.front().f0;
    if (max_slope * span < 0.5) {
        throw InsufficientSpanError("no resonance crossing inside the sweep span");
    }
    if (steepest <= 1 || steepest + 2 >= trace.size()) {
        throw InsufficientSpanError("resonance sits at the edge of the sweep span");
    }

    const double f_ref = trace[steepest].f0;
    std::vector<std::size_t> pick;
    if (fit_halfspan_hz > 0.0) {
        for (std::size_t i = 0; i < trace.size(); ++i) {
            if (std::abs(trace[i].f0 - f_ref) <= fit_halfspan_hz) pick.push_back(i);
        }
    } else {
        // Adaptive: contiguous run around the crossing where the local slope
        // stays within 90% of the steepest slope.
        std::size_t lo = steepest, hi = steepest;
        while (lo > 1 && slope[lo - 1] >= 0.9 * max_slope) --lo;
        while (hi + 2 < trace.size() && slope[hi + 1] >= 0.9 * max_slope) ++hi;
        for (std::size_t i = lo; i <= hi; ++i) pick.push_back(i);
    }
    if (pick.size() < 3) throw InsufficientSpanError("fewer than 3 sweep points in the fit window");

    // Least squares theta = p (f0 - f_ref) + q.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto i : pick) {
        const double fx = trace[i].f0 - f_ref;
        sx += fx;
        sy += theta[i];
        sxx += fx * fx;
        sxy += fx * theta[i];
    }
    const double n = static_cast<double>(pick.size());
    const double det = n * sxx - sx * sx;
    if (det == 0.0) throw InsufficientSpanError("degenerate frequency axis in fit window");
    const double p_slope = (n * sxy - sx * sy) / det;
    const double q = (sy * sxx - sx * sxy) / det;
    if (p_slope == 0.0) throw InsufficientSpanError("flat phase response in fit window");

    double ss = 0.0;
    for (auto i : pick) {
        const double r = theta[i] - (p_slope * (trace[i].f0 - f_ref) + q);
        ss += r * r;
    }

    PhaseCalibration cal;
    // Moving the carrier by +d is equivalent to moving the resonance by -d.
    cal.slope_hz_per_rad = -1.0 / p_slope;
    cal.phase0 = q;
    cal.f0_ref = f_ref;
    cal.residual_rms_rad = std::sqrt(ss / n);
    cal.n_used = static_cast<int>(pick.size());
    return cal;
}

double detuning_from_phase(const PhaseCalibration& cal, double x, double y) {
    const double theta = std::atan2(y, x);
    return cal.slope_hz_per_rad * wrap_pi(theta - cal.phase0);
}

double IqJacobian::orthogonality() const {
    const double dot = d_delta[0] * d_qi[0] + d_delta[1] * d_qi[1];
    const double n1 = std::hypot(d_delta[0], d_delta[1]);
    const double n2 = std::hypot(d_qi[0], d_qi[1]);
    if (n1 == 0.0 || n2 == 0.0) return 0.0;
    return std::abs(dot) / (n1 * n2);
}

std::array<double, 2> IqJacobian::decode(double x, double y) const {
    const double det = d_delta[0] * d_qi[1] - d_qi[0] * d_delta[1];
    const double rx = x - x0;
    const double ry = y - y0;
    return {(d_qi[1] * rx - d_qi[0] * ry) / det, (-d_delta[1] * rx + d_delta[0] * ry) / det};
}

IqJacobian iq_jacobian(const ResonatorParams& p, const ResonatorState& st,
                       const ModulationSettings& mod, const CarrierSettings& carrier) {
    const double f_probe = carrier.f0 + mod.f_mod;
    const double f_ref = carrier.f0 - mod.f_mod;
    const auto eval = [&](const ResonatorState& s) {
        return eval_output_two_sided(mod, carrier, reflection(p, s, f_probe),
                                     reflection(p, s, f_ref));
    };

    const double h_dr = p.linewidth_hz(st.qi_factor) * 1e-3;
    const double h_qi = 1e-4;

    IqJacobian jac;
    const auto s0 = eval(st);
    jac.x0 = s0.real();
    jac.y0 = s0.imag();

    ResonatorState sp = st, sm = st;
    sp.delta_r += h_dr;
    sm.delta_r -= h_dr;
    const auto d1 = (eval(sp) - eval(sm)) / (2.0 * h_dr);
    jac.d_delta = {d1.real(), d1.imag()};

    sp = st;
    sm = st;
    sp.qi_factor += h_qi;
    sm.qi_factor -= h_qi;
    const auto d2 = (eval(sp) - eval(sm)) / (2.0 * h_qi);
    jac.d_qi = {d2.real(), d2.imag()};
    return jac;
}

} // namespace smi

#include "smi/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>

#include "smi/errors.hpp"
#include "smi/optim.hpp"

namespace smi {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}
} // namespace

VirtualSetup::VirtualSetup(ModulationSettings mod, CarrierSettings carrier, ResonatorParams res,
                           MixerModel mixer, double tau_lockin_s, double readout_noise_v,
                           std::uint64_t seed)
    : mod_(mod),
      carrier_(carrier),
      res_(res),
      mixer_(mixer),
      tau_(tau_lockin_s),
      noise_v_(readout_noise_v),
      rng_(derive_seed(seed, seed_tag::protocol, 0)) {}

double VirtualSetup::measure_leak() {
    ++evals_;
    clock_s_ += tau_;
    double r = mixer_.residual(mod_.dc_i, mod_.dc_q);
    if (noise_v_ > 0.0) r = std::abs(r + noise_v_ * rng_.gauss());
    return r;
}

std::complex<double> VirtualSetup::measure_iq(int n_avg) {
    if (n_avg < 1) n_avg = 1;
    ++evals_;
    clock_s_ += tau_ * n_avg;
    const auto probe = reflection(res_, state_, carrier_.f0 + mod_.f_mod);
    const auto ref = reflection(res_, state_, carrier_.f0 - mod_.f_mod);
    std::complex<double> s = eval_output_two_sided(mod_, carrier_, probe, ref);
    if (noise_v_ > 0.0) {
        const double sig = noise_v_ / std::sqrt(static_cast<double>(n_avg));
        s += std::complex<double>(sig * rng_.gauss(), sig * rng_.gauss());
    }
    return s;
}

MixerBalanceResult balance_mixer(VirtualSetup& setup) {
    MixerBalanceResult out;
    const int evals0 = setup.evaluations();
    out.leak_before = setup.measure_leak();

    const double noise_allow = 5.0 * setup.readout_noise_v();
    double scale = std::max(1e-4, 0.5 * out.leak_before);
    double current = out.leak_before;
    double min_sampled = out.leak_before;

    for (int pass = 0; pass < 4; ++pass) {
        for (int axis = 0; axis < 2; ++axis) {
            double& dc = axis == 0 ? setup.mod().dc_i : setup.mod().dc_q;
            const double c = dc;
            const double h = scale;

            dc = c - h;
            const double lm = setup.measure_leak();
            dc = c + h;
            const double lp = setup.measure_leak();
            dc = c;
            const double l0 = current;

            min_sampled = std::min({min_sampled, lm, lp});
            // Power is quadratic in the offset, so the vertex of the parabola
            // through the three samples is the minimum.
            const double curv = lp * lp - 2.0 * l0 * l0 + lm * lm;
            if (curv > 0.0) dc = c - h * (lp * lp - lm * lm) / (2.0 * curv);
            current = setup.measure_leak();
            min_sampled = std::min(min_sampled, current);
        }
        scale = std::max(1e-6, 0.5 * current);
        if (pass >= 1 && current <= min_sampled * (1.0 + 1e-9) + noise_allow + 1e-15) break;
    }

    out.leak_after = current;
    out.dc_i = setup.mod().dc_i;
    out.dc_q = setup.mod().dc_q;
    out.evaluations = setup.evaluations() - evals0;
    out.converged = out.leak_after <= min_sampled * (1.0 + 1e-9) + noise_allow + 1e-15;
    if (!out.converged) {
        throw NotConvergedError("balance_mixer: residual carrier still above the sampled floor");
    }
    return out;
}

ResonanceScanResult find_resonance(VirtualSetup& setup, double f_center_hz,
                                   const CalibrationConfig& cfg) {
    const ModulationSettings saved_mod = setup.mod();
    const CarrierSettings saved_carrier = setup.carrier();
    const int evals0 = setup.evaluations();

    ModulationSettings ssb =
        single_sideband_settings(saved_mod.a1, saved_mod.alpha1, saved_mod.f_mod);
    ssb.dc_i = saved_mod.dc_i;
    ssb.dc_q = saved_mod.dc_q;
    setup.mod() = ssb;

    const double span = cfg.sweep_span_hz > 0.0 ? cfg.sweep_span_hz : 1.6e-3 * f_center_hz;
    const int npts = std::max(21, cfg.sweep_points);

    ResonanceScanResult out;
    out.f0_grid.resize(npts);
    out.trace.resize(npts);
    std::vector<double> fp(npts), mags(npts);
    for (int i = 0; i < npts; ++i) {
        fp[i] = f_center_hz - 0.5 * span + span * i / (npts - 1);
        setup.carrier().f0 = fp[i] - saved_mod.f_mod;
        out.f0_grid[i] = setup.carrier().f0;
        out.trace[i] = setup.measure_iq(cfg.n_avg);
        mags[i] = std::abs(out.trace[i]);
    }
    setup.mod() = saved_mod;
    setup.carrier() = saved_carrier;
    out.evaluations = setup.evaluations() - evals0;

    // Off-resonant level and scatter from the outer fifth of the sweep.
    const int n_edge = std::max(2, npts / 10);
    std::vector<double> edge_mags;
    std::complex<double> bg0{0.0, 0.0};
    for (int i = 0; i < n_edge; ++i) {
        edge_mags.push_back(mags[i]);
        edge_mags.push_back(mags[npts - 1 - i]);
        bg0 += out.trace[i] + out.trace[npts - 1 - i];
    }
    bg0 /= static_cast<double>(2 * n_edge);
    const double baseline = median_of(edge_mags);
    std::vector<double> edge_dev;
    for (double m : edge_mags) edge_dev.push_back(std::abs(m - baseline));
    const double sigma_est = 1.4826 * median_of(edge_dev);

    const auto min_it = std::min_element(mags.begin(), mags.end());
    const int idx_min = static_cast<int>(min_it - mags.begin());
    const double dip = baseline - *min_it;
    if (dip < std::max(5.0 * sigma_est, 1e-3 * baseline)) {
        throw NotFoundError("find_resonance: no significant dip inside the sweep span");
    }

    // Crude initial width from the half-depth crossings.
    const double level = 0.5 * (baseline + *min_it);
    int il = idx_min, ir = idx_min;
    while (il > 0 && mags[il] < level) --il;
    while (ir < npts - 1 && mags[ir] < level) ++ir;
    const double grid_df = span / (npts - 1);
    const double w0 = std::max(fp[ir] - fp[il], 2.0 * grid_df);
    const double fr0 = fp[idx_min];
    const double ql0 = std::clamp(fr0 / w0, 10.0, 1e9);
    const double depth = std::clamp(*min_it / baseline, 0.0, 0.999);
    const double qc0 = ql0 / (1.0 - depth);

    // Fit parameters, all O(1): complex background, delay in ns referenced to
    // the sweep centre, resonance offset in units of the initial width, and
    // log quality factors.
    const double bl_scale = std::max(baseline, 1e-30);
    auto model = [&](const std::vector<double>& p, double f) {
        const std::complex<double> bg(p[0], p[1]);
        const double tau = p[2] * 1e-9;
        const double fr = fr0 + p[3] * w0;
        const double ql = std::exp(p[4]);
        const double qc = std::exp(p[5]);
        const double phi0 = p[6];
        const std::complex<double> phase(0.0, -two_pi * (f - f_center_hz) * tau);
        const std::complex<double> denom(1.0, 2.0 * ql * (f - fr) / fr);
        const std::complex<double> notch =
            1.0 - ql / qc * std::exp(std::complex<double>(0.0, phi0)) / denom;
        return bg * std::exp(phase) * notch;
    };
    auto residuals = [&](const std::vector<double>& p) {
        std::vector<double> r(2 * npts);
        for (int i = 0; i < npts; ++i) {
            const auto d = (model(p, fp[i]) - out.trace[i]) / bl_scale;
            r[2 * i] = d.real();
            r[2 * i + 1] = d.imag();
        }
        return r;
    };

    std::vector<double> p0 = {bg0.real(), bg0.imag(), 0.0, 0.0, std::log(ql0), std::log(qc0), 0.0};
    LmOptions lm;
    lm.max_iterations = 200;
    lm.jacobian_step = {1e-6, 1e-6, 1e-3, 1e-6, 1e-6, 1e-6, 1e-6};
    const LmResult fit = levenberg_marquardt(residuals, p0, lm);

    const double ql_fit = std::exp(fit.x[4]);
    const double qc_fit = std::exp(fit.x[5]);
    out.fit = ResonatorParams::from_loaded(fr0 + fit.x[3] * w0, ql_fit, qc_fit);
    out.fit.phi0 = wrap_pi(fit.x[6]);
    out.fit.tau_d = fit.x[2] * 1e-9;
    out.fit.zr = setup.resonator().zr;
    out.background = {fit.x[0], fit.x[1]};
    // Only the probe sideband is populated, so the fitted prefactor carries
    // the full modulation amplitude 2 a1; refer the background to unit drive.
    out.fit.bg_amp = std::abs(out.background) / std::max(2.0 * saved_mod.a1, 1e-30);
    out.rms_residual_v = std::sqrt(fit.chi2 / (2.0 * npts)) * bl_scale;
    out.converged = fit.converged;
    return out;
}

NullSearchResult find_null(VirtualSetup& setup, const CalibrationConfig& cfg) {
    const double a1 = setup.mod().a1;
    const int evals0 = setup.evaluations();

    NullSearchResult out;
    out.amp_before = std::abs(setup.measure_iq(cfg.n_avg));

    auto objective = [&](const std::vector<double>& x) {
        setup.mod().a2 = x[0];
        setup.mod().alpha2 = x[1];
        return std::norm(setup.measure_iq(cfg.n_avg));
    };

    SimplexOptions opt;
    opt.max_iterations = cfg.max_iterations;
    const std::vector<double> x0 = {setup.mod().a2, setup.mod().alpha2};
    const std::vector<double> step = {0.05 * std::max(a1, 1e-12), 0.1};
    const SimplexResult best = nelder_mead(objective, x0, step, opt);

    double a2 = best.x[0];
    double alpha2 = best.x[1];
    if (a2 < 0.0) { // negative amplitude is a pi phase flip of the same tone
        a2 = -a2;
        alpha2 += std::numbers::pi;
    }
    setup.mod().a2 = a2;
    setup.mod().alpha2 = wrap_2pi(alpha2);

    out.a2 = setup.mod().a2;
    out.alpha2 = setup.mod().alpha2;
    out.amp_after = std::abs(setup.measure_iq(cfg.n_avg));
    out.history = best.best_history;
    out.evaluations = setup.evaluations() - evals0;

    const double sigma_eff =
        setup.readout_noise_v() / std::sqrt(static_cast<double>(std::max(1, cfg.n_avg)));
    const double accept = std::max(cfg.null_tol_rel * a1, 5.0 * sigma_eff);
    out.converged = out.amp_after <= accept;
    if (!out.converged) {
        throw NotConvergedError("find_null: residual output above tolerance after the budget");
    }
    return out;
}

double switch_to_phase_rejection(VirtualSetup& setup) {
    setup.carrier().delta = wrap_pi(setup.carrier().delta + 0.5 * std::numbers::pi);
    return setup.carrier().delta;
}

CalibrationReport run_guide(VirtualSetup& setup, const CalibrationConfig& cfg) {
    CalibrationReport rep;
    bool all_ok = true;

    auto add_step = [&](const char* name, double t0, int ev0, double before, double after,
                        const char* note) {
        CalibrationStep st;
        st.name = name;
        st.t_start_s = t0;
        st.t_end_s = setup.clock_s();
        st.evaluations = setup.evaluations() - ev0;
        st.metric_before = before;
        st.metric_after = after;
        st.note = note;
        rep.steps.push_back(std::move(st));
    };

    {
        const double t0 = setup.clock_s();
        const int ev0 = setup.evaluations();
        const MixerBalanceResult r = balance_mixer(setup);
        add_step("balance_mixer", t0, ev0, r.leak_before, r.leak_after, "residual carrier, V");
        all_ok = all_ok && r.converged;
    }

    ResonanceScanResult scan;
    {
        const double t0 = setup.clock_s();
        const int ev0 = setup.evaluations();
        scan = find_resonance(setup, setup.carrier().f0 + setup.mod().f_mod, cfg);
        add_step("find_resonance", t0, ev0, 0.0, scan.rms_residual_v, "fit rms residual, V");
        all_ok = all_ok && scan.converged;
        rep.fr_hz = scan.fit.fr;
        rep.ql = scan.fit.ql;
        rep.qc = scan.fit.qc;
        rep.phi0_rad = scan.fit.phi0;
        // Park the probe sideband on the fitted resonance.
        setup.carrier().f0 = scan.fit.fr - setup.mod().f_mod;
    }

    {
        const double t0 = setup.clock_s();
        const int ev0 = setup.evaluations();
        // Seed the search with the closed-form point for the fitted device.
        const DutResponse eff =
            effective_dut(scan.fit, ResonatorState{}, setup.carrier().f0 + setup.mod().f_mod,
                          setup.carrier().f0 - setup.mod().f_mod);
        const auto [a2, alpha2] =
            solve_modulation_at_delta(setup.mod().a1, setup.mod().alpha1, eff,
                                      setup.carrier().delta, InterferenceMode::destructive);
        setup.mod().a2 = a2;
        setup.mod().alpha2 = alpha2;
        const NullSearchResult r = find_null(setup, cfg);
        add_step("find_null", t0, ev0, r.amp_before, r.amp_after, "output amplitude, V");
        all_ok = all_ok && r.converged;
        rep.null_amp_v = r.amp_after;
    }

    {
        const double t0 = setup.clock_s();
        const int ev0 = setup.evaluations();
        const MixerBalanceResult r = balance_mixer(setup);
        add_step("verify_balance", t0, ev0, r.leak_before, r.leak_after, "residual carrier, V");
        all_ok = all_ok && r.converged;
    }

    rep.f0_hz = setup.carrier().f0;
    rep.delta_rad = setup.carrier().delta;
    rep.delta_phase_reject_rad = wrap_pi(setup.carrier().delta + 0.5 * std::numbers::pi);
    rep.a2_v = setup.mod().a2;
    rep.alpha2_rad = setup.mod().alpha2;
    rep.dc_i_v = setup.mod().dc_i;
    rep.dc_q_v = setup.mod().dc_q;
    rep.converged = all_ok;
    return rep;
}

std::string CalibrationReport::to_json() const {
    std::string s = "{\n  \"steps\": [\n";
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& st = steps[i];
        s += "    {\"name\": \"" + json_escape(st.name) + "\"";
        s += ", \"t_start_s\": " + fmt_double(st.t_start_s);
        s += ", \"t_end_s\": " + fmt_double(st.t_end_s);
        s += ", \"evaluations\": " + std::to_string(st.evaluations);
        s += ", \"metric_before\": " + fmt_double(st.metric_before);
        s += ", \"metric_after\": " + fmt_double(st.metric_after);
        s += ", \"note\": \"" + json_escape(st.note) + "\"}";
        s += (i + 1 < steps.size()) ? ",\n" : "\n";
    }
    s += "  ],\n";
    s += "  \"resonance\": {\"fr_hz\": " + fmt_double(fr_hz) + ", \"ql\": " + fmt_double(ql) +
         ", \"qc\": " + fmt_double(qc) + ", \"phi0_rad\": " + fmt_double(phi0_rad) + "},\n";
    s += "  \"settings\": {\"f0_hz\": " + fmt_double(f0_hz) +
         ", \"delta_rad\": " + fmt_double(delta_rad) +
         ", \"delta_phase_reject_rad\": " + fmt_double(delta_phase_reject_rad) +
         ", \"a2_v\": " + fmt_double(a2_v) + ", \"alpha2_rad\": " + fmt_double(alpha2_rad) +
         ", \"null_amp_v\": " + fmt_double(null_amp_v) + ", \"dc_i_v\": " + fmt_double(dc_i_v) +
         ", \"dc_q_v\": " + fmt_double(dc_q_v) + "},\n";
    s += std::string("  \"converged\": ") + (converged ? "true" : "false") + "\n}\n";
    return s;
}

} // namespace smi

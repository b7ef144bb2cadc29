#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "helpers.hpp"
#include "smi/engine.hpp"
#include "smi/errors.hpp"

using namespace smi;
using doctest::Approx;

namespace {

constexpr double pi = std::numbers::pi;

// Destructive working point with the probe sideband parked on resonance.
EngineConfig quiet_destructive() {
    EngineConfig cfg;
    cfg.resonator = ResonatorParams::from_loaded(6.16e9, 8.0e3, 9.8e3);
    cfg.resonator.phi0 = 0.3;
    cfg.mod.a1 = 1.0;
    cfg.mod.alpha1 = 0.3;
    cfg.mod.f_mod = 10e6;
    cfg.carrier.f0 = cfg.resonator.fr - cfg.mod.f_mod;

    const auto dut = effective_dut(cfg.resonator, ResonatorState{}, cfg.carrier.f0 + cfg.mod.f_mod,
                                   cfg.carrier.f0 - cfg.mod.f_mod);
    const auto op = solve_operating_point(cfg.mod.a1, cfg.mod.alpha1, dut,
                                          InterferenceMode::destructive)[0];
    cfg.mod.a2 = op.a2;
    cfg.mod.alpha2 = op.alpha2;
    cfg.carrier.delta = op.delta;
    return cfg;
}

double dft_amplitude(const std::vector<double>& v, std::size_t i0, std::size_t n, double k_per_n) {
    std::complex<double> acc = 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += v[i0 + i];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        acc += (v[i0 + i] - mean) *
               std::polar(1.0, -2.0 * pi * k_per_n * static_cast<double>(i));
    }
    return 2.0 * std::abs(acc) / static_cast<double>(n);
}

} // namespace

TEST_CASE("lock-in cascade: steady state, exact step, corner gain") {
    SUBCASE("constant input passes with unit DC gain at any order") {
        for (int order : {1, 3, 8}) {
            LockinFilter f(0.02, order, 1e-3);
            std::complex<double> out;
            for (int i = 0; i < 4000; ++i) out = f.step({0.7, -0.3});
            CHECK(std::abs(out - std::complex<double>(0.7, -0.3)) < 1e-9);
        }
    }

    SUBCASE("first-order step response matches the continuous exponential") {
        const double tau = 0.05, dt = 1e-3;
        LockinFilter f(tau, 1, dt);
        std::complex<double> out;
        for (int k = 1; k <= 500; ++k) {
            out = f.step({1.0, 0.0});
            const double expected = 1.0 - std::exp(-static_cast<double>(k) * dt / tau);
            CHECK(std::abs(out.real() - expected) < 1e-9);
        }
    }

    SUBCASE("gain at f = 1/(2 pi tau) is 1/sqrt(2) for one pole") {
        const double tau = 0.05, dt = tau / 100.0;
        const double f_c = 1.0 / (2.0 * pi * tau);
        LockinFilter f(tau, 1, dt);
        std::complex<double> out;
        std::size_t n = static_cast<std::size_t>(30.0 * tau / dt);
        double last = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            out = f.step(std::polar(1.0, 2.0 * pi * f_c * dt * static_cast<double>(i)));
            last = std::abs(out);
        }
        CHECK(last == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-3));
        CHECK(last == Approx(LockinFilter::magnitude(f_c, tau, 1, dt)).epsilon(1e-9));
    }

    SUBCASE("throws on nonsensical parameters") {
        CHECK_THROWS_AS(LockinFilter(0.0, 1, 1e-3), ConfigError);
        CHECK_THROWS_AS(LockinFilter(0.1, 0, 1e-3), ConfigError);
        CHECK_THROWS_AS(LockinFilter(0.1, 1, 0.0), ConfigError);
    }
}

TEST_CASE("default band settings keep the alias band 40 dB down") {
    const BandsConfig bands;
    CHECK(bands.measurement_bandwidth_hz() == Approx(1.0 / (2.0 * pi * 0.04)).epsilon(1e-12));
    const double dt_int = bands.tau_lockin / bands.steps_per_tau;
    // Everything from the output Nyquist up to the internal Nyquist.
    for (double f = 50.0; f <= 250.0; f += 5.0) {
        CHECK(LockinFilter::magnitude(f, bands.tau_lockin, bands.filter_order, dt_int) <= 0.01);
    }
}

TEST_CASE("mixer model: quadratic residual with a floor") {
    const auto m = MixerModel::from_seed(123, 0.05, 1e-6);
    CHECK(std::abs(m.true_dc_i) <= 0.05);
    CHECK(std::abs(m.true_dc_q) <= 0.05);
    CHECK(m.residual(m.true_dc_i, m.true_dc_q) == Approx(1e-6).epsilon(1e-12));
    // Linear growth well above the floor.
    const double r1 = m.residual(m.true_dc_i + 0.01, m.true_dc_q);
    const double r2 = m.residual(m.true_dc_i + 0.02, m.true_dc_q);
    CHECK(r2 / r1 == Approx(2.0).epsilon(1e-3));
    // Seed-stable.
    const auto m2 = MixerModel::from_seed(123, 0.05, 1e-6);
    CHECK(m2.true_dc_i == m.true_dc_i);
    CHECK(m2.true_dc_q == m.true_dc_q);
}

TEST_CASE("noiseless destructive run outputs the numerical floor") {
    EngineConfig cfg = quiet_destructive();
    cfg.duration_s = 2.0;
    const auto res = run(cfg);
    REQUIRE(res.x.size() == 200);
    for (std::size_t i = 0; i < res.x.size(); ++i) {
        CHECK(std::abs(res.x.values[i]) < 1e-12);
        CHECK(std::abs(res.y.values[i]) < 1e-12);
        CHECK(res.truth.values[i] == 0.0);
    }
}

TEST_CASE("steady constructive output matches the static evaluation") {
    EngineConfig cfg = quiet_destructive();
    const auto dut = effective_dut(cfg.resonator, ResonatorState{}, cfg.carrier.f0 + cfg.mod.f_mod,
                                   cfg.carrier.f0 - cfg.mod.f_mod);
    const auto op = solve_operating_point(cfg.mod.a1, cfg.mod.alpha1, dut,
                                          InterferenceMode::constructive)[0];
    cfg.mod.a2 = op.a2;
    cfg.mod.alpha2 = op.alpha2;
    cfg.carrier.delta = op.delta;
    cfg.duration_s = 4.0;

    const auto res = run(cfg);
    const auto probe = reflection(cfg.resonator, ResonatorState{}, cfg.carrier.f0 + cfg.mod.f_mod);
    const auto ref = reflection(cfg.resonator, ResonatorState{}, cfg.carrier.f0 - cfg.mod.f_mod);
    const auto direct = eval_output_two_sided(cfg.mod, cfg.carrier, probe, ref);

    double mx = 0.0, my = 0.0;
    const std::size_t half = res.x.size() / 2;
    for (std::size_t i = half; i < res.x.size(); ++i) {
        mx += res.x.values[i];
        my += res.y.values[i];
    }
    mx /= static_cast<double>(res.x.size() - half);
    my /= static_cast<double>(res.x.size() - half);
    CHECK(mx == Approx(direct.real()).epsilon(1e-3));
    CHECK(my == Approx(direct.imag()).epsilon(1e-3));
    CHECK(std::hypot(mx, my) > 0.1); // genuinely bright point
}

TEST_CASE("70 Hz common-mode drive folds to 30 Hz with filter attenuation") {
    EngineConfig cfg;
    cfg.resonator = ResonatorParams::from_loaded(6.16e9, 8.0e3, 9.8e3);
    cfg.mod = single_sideband_settings(1.0, 0.3);
    cfg.carrier.f0 = cfg.resonator.fr + 1.0e9; // far detuned: flat background
    cfg.carrier.delta = 0.2;
    cfg.common_mode.kind = CommonModeKind::amplitude;
    cfg.common_mode.model = CommonModeModel::sine;
    cfg.common_mode.magnitude = 0.01;
    cfg.common_mode.freq_hz = 70.0;
    cfg.duration_s = 10.0;

    const auto res = run(cfg);
    std::vector<double> mag(res.x.size());
    for (std::size_t i = 0; i < mag.size(); ++i) {
        mag[i] = std::hypot(res.x.values[i], res.y.values[i]);
    }
    const double base = 2.0; // 2 a1 |background|
    // 8 s window after a 2 s settle; 30 Hz sits on bin 240 of 800.
    const double alias_amp = dft_amplitude(mag, 200, 800, 30.0 / 100.0);
    const double injected = base * cfg.common_mode.magnitude;

    const double dt_int = cfg.bands.tau_lockin / cfg.bands.steps_per_tau;
    const double h70 =
        LockinFilter::magnitude(70.0, cfg.bands.tau_lockin, cfg.bands.filter_order, dt_int);
    CHECK(alias_amp / injected <= 0.01);
    CHECK(alias_amp == Approx(injected * h70).epsilon(0.2));
}

TEST_CASE("telegraph detuning closes the loop through jacobian decoding") {
    EngineConfig cfg = quiet_destructive();
    cfg.bands.tau_lockin = 0.005;
    cfg.bands.filter_order = 4;
    cfg.duration_s = 200.0;
    cfg.noise.seed = 616;
    cfg.noise.rts.push_back({30e3, 0.02, 0.02});

    const auto res = run(cfg);
    const auto jac = iq_jacobian(cfg.resonator, ResonatorState{}, cfg.mod, cfg.carrier);

    double se = 0.0, st = 0.0;
    for (std::size_t i = 0; i < res.x.size(); ++i) {
        const auto dec = jac.decode(res.x.values[i], res.y.values[i]);
        const double err = dec[0] - res.truth.values[i];
        se += err * err;
        st += res.truth.values[i] * res.truth.values[i];
    }
    REQUIRE(st > 0.0);
    CHECK(std::sqrt(se / st) < 0.02);
}

TEST_CASE("truth channel replays the composed detuning at output instants") {
    EngineConfig cfg = quiet_destructive();
    cfg.duration_s = 5.0;
    cfg.noise.seed = 99;
    cfg.noise.rts.push_back({2e3, 0.5, 0.7});
    cfg.noise.white.psd_level = 10.0;

    const auto res = run(cfg);
    // Reproduce the internal grid: tau/20 preferred step at f_sample = 100.
    const double dt_pref = cfg.bands.tau_lockin / cfg.bands.steps_per_tau;
    const auto decim = static_cast<std::size_t>(std::ceil(1.0 / (100.0 * dt_pref) - 1e-9));
    const double dt_int = 1.0 / (100.0 * static_cast<double>(decim));
    const auto comp = compose(cfg.noise, res.x.size() * decim, dt_int);
    for (std::size_t j = 0; j < res.truth.size(); ++j) {
        CHECK(res.truth.values[j] == comp.values[(j + 1) * decim - 1]);
    }
}

TEST_CASE("readout noise floor is seed-stable and filtered") {
    EngineConfig cfg = quiet_destructive();
    cfg.duration_s = 10.0;
    cfg.readout_noise_v = 1e-5;
    cfg.noise.seed = 7;

    const auto a = run(cfg);
    const auto b = run(cfg);
    CHECK(a.x.values == b.x.values);
    CHECK(a.manifest.config_digest == b.manifest.config_digest);

    cfg.noise.seed = 8;
    const auto c = run(cfg);
    CHECK(a.x.values != c.x.values);

    double var = 0.0;
    for (double v : a.x.values) var += v * v;
    var /= static_cast<double>(a.x.size());
    const double sd = std::sqrt(var);
    CHECK(sd > 1e-7);
    CHECK(sd < 1e-5); // narrowed by the lock-in bandwidth
}

TEST_CASE("manifest carries rate bookkeeping and the alias warning") {
    EngineConfig cfg = quiet_destructive();
    cfg.duration_s = 2.0;
    const auto ok = run(cfg);
    CHECK(ok.manifest.notes.empty());
    CHECK(ok.x.dt == Approx(0.01));

    cfg.time_scale = 20.0;
    const auto scaled = run(cfg);
    CHECK(scaled.x.dt == Approx(0.2)); // stamped in physical units

    cfg.bands.tau_lockin = 0.01; // f_sample * tau = 1 < 3.82
    const auto warned = run(cfg);
    CHECK_FALSE(warned.manifest.notes.empty());

    cfg.bands.f_sample = 0.0;
    CHECK_THROWS_AS(run(cfg), ConfigError);
}

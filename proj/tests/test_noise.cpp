#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "helpers.hpp"
#include "smi/analysis.hpp"
#include "smi/noise.hpp"
#include "smi/rng.hpp"

using namespace smi;
using doctest::Approx;

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

} // namespace

TEST_CASE("seed splitting is deterministic and component-stable") {
    CHECK(derive_seed(42, seed_tag::rts, 0) == derive_seed(42, seed_tag::rts, 0));
    CHECK(derive_seed(42, seed_tag::rts, 0) != derive_seed(42, seed_tag::rts, 1));
    CHECK(derive_seed(42, seed_tag::rts, 0) != derive_seed(42, seed_tag::flicker, 0));
    CHECK(derive_seed(42, seed_tag::rts, 0) != derive_seed(43, seed_tag::rts, 0));

    const RtsParams p{100.0, 0.1, 0.2};
    const auto a = gen_rts(p, 5000, 0.1, 777);
    const auto b = gen_rts(p, 5000, 0.1, 777);
    CHECK(a.values == b.values);
    CHECK(a.meta.config_digest == b.meta.config_digest);
    const auto c = gen_rts(p, 5000, 0.1, 778);
    CHECK(a.values != c.values);
}

TEST_CASE("composed trace is the exact sum of its split components") {
    NoiseSpec spec;
    spec.seed = 2024;
    spec.rts.push_back({1500.0, 0.05, 0.08});
    spec.rts.push_back({400.0, 0.5, 0.3});
    spec.flicker = {1e5, 1e-4, 50.0};
    spec.white = {100.0};

    const std::size_t n = 4096;
    const double dt = 0.05;
    const auto total = compose(spec, n, dt);
    const auto r0 = gen_rts(spec.rts[0], n, dt, derive_seed(spec.seed, seed_tag::rts, 0));
    const auto r1 = gen_rts(spec.rts[1], n, dt, derive_seed(spec.seed, seed_tag::rts, 1));
    const auto fl = gen_flicker(spec.flicker, n, dt, derive_seed(spec.seed, seed_tag::flicker));
    const auto wh = gen_white(spec.white, n, dt, derive_seed(spec.seed, seed_tag::white));

    for (std::size_t i = 0; i < n; ++i) {
        const double sum = r0.values[i] + r1.values[i] + fl.values[i] + wh.values[i];
        CHECK(total.values[i] == sum);
    }

    // Dropping one component leaves the others' streams untouched.
    NoiseSpec no_white = spec;
    no_white.white.psd_level = 0.0;
    const auto partial = compose(no_white, n, dt);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(partial.values[i] == r0.values[i] + r1.values[i] + fl.values[i]);
    }
}

TEST_CASE("telegraph occupancy matches the stationary law") {
    const RtsParams p{1.0, 0.08, 0.05};
    const std::size_t n = 200000;
    const double dt = 0.1;
    const auto tr = gen_rts(p, n, dt, 99);

    const double p_up = 0.08 / 0.13;
    const double occupancy = mean_of(tr.values);
    // Mean of a two-state Markov chain over T: var ~ 2 p q tau_c / T.
    const double tau_c = 1.0 / 0.13;
    const double sigma = std::sqrt(2.0 * p_up * (1.0 - p_up) * tau_c / (dt * n));
    CHECK(std::abs(occupancy - p_up) < 3.0 * sigma);

    // Values are strictly two-level.
    for (double v : tr.values) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("telegraph spectrum has a lorentzian corner near (up+down)/2pi") {
    const double fc = 0.02;
    const double lambda = 2.0 * std::numbers::pi * fc;
    const RtsParams p{1000.0, lambda / 2.0, lambda / 2.0};
    const std::size_t n = 100000;
    const auto tr = gen_rts(p, n, 1.0, 1234);

    const auto est = psd(tr, 12);
    double plateau = 0.0;
    int n_pl = 0;
    for (std::size_t i = 0; i < est.freq.size(); ++i) {
        if (est.freq[i] < fc / 4.0) {
            plateau += est.value[i];
            ++n_pl;
        }
    }
    REQUIRE(n_pl >= 3);
    plateau /= n_pl;

    // First crossing below half the plateau, log-log interpolated.
    double fc_est = 0.0;
    for (std::size_t i = 1; i < est.freq.size(); ++i) {
        if (est.freq[i] > fc / 4.0 && est.value[i] < 0.5 * plateau &&
            est.value[i - 1] >= 0.5 * plateau) {
            const double t = (std::log(0.5 * plateau) - std::log(est.value[i - 1])) /
                             (std::log(est.value[i]) - std::log(est.value[i - 1]));
            fc_est = std::exp(std::log(est.freq[i - 1]) +
                              t * (std::log(est.freq[i]) - std::log(est.freq[i - 1])));
            break;
        }
    }
    REQUIRE(fc_est > 0.0);
    CHECK(fc_est == Approx(fc).epsilon(0.10));
}

TEST_CASE("telegraph allan deviation peaks near 1.85 over the total rate") {
    const double fc = 0.02;
    const double lambda = 2.0 * std::numbers::pi * fc;
    const RtsParams p{1000.0, lambda / 2.0, lambda / 2.0};
    const auto tr = gen_rts(p, 100000, 1.0, 4321);

    const auto taus = default_tau_grid(tr, 8);
    const auto est = allan(tr, taus);
    std::size_t peak = 0;
    for (std::size_t i = 1; i < est.adev.size(); ++i) {
        if (est.adev[i] > est.adev[peak]) peak = i;
    }
    const double tau_star = 1.85 / lambda; // ~14.7 s
    CHECK(est.tau[peak] > 0.5 * tau_star);
    CHECK(est.tau[peak] < 2.0 * tau_star);
    // Genuine bump: well above both ends of the grid.
    CHECK(est.adev[peak] > 1.5 * est.adev.front());
    CHECK(est.adev[peak] > 1.5 * est.adev.back());
}

TEST_CASE("flicker synthesis closes the loop through the spectrum fit") {
    const FlickerParams p{4e6, 1e-4, 50.0};
    const std::size_t n = 131072;
    const double dt = 0.01;
    const auto tr = gen_flicker(p, n, dt, 555);

    const auto est = psd(tr, 10);
    const auto fit = fit_flicker(est, 0.01, 10.0);
    CHECK(fit.a_p == Approx(4e6).epsilon(0.15));
    CHECK(fit.n_bins >= 20);

    // Log-log slope across three decades.
    std::vector<double> lf, ls;
    for (std::size_t i = 0; i < est.freq.size(); ++i) {
        if (est.freq[i] >= 0.01 && est.freq[i] <= 10.0 && est.value[i] > 0.0) {
            lf.push_back(std::log(est.freq[i]));
            ls.push_back(std::log(est.value[i]));
        }
    }
    const auto line = testutil::linear_fit(lf, ls);
    CHECK(line.slope == Approx(-1.0).epsilon(0.1));
}

TEST_CASE("flicker allan deviation sits on the sqrt(2 ln2 a_p) plateau") {
    const FlickerParams p{4e6, 1e-4, 50.0};
    const auto tr = gen_flicker(p, 131072, 0.01, 808);
    const double plateau = std::sqrt(2.0 * std::log(2.0) * 4e6); // 2354.8

    const auto est = allan(tr, {0.5, 2.0, 8.0, 32.0});
    for (double a : est.adev) CHECK(a == Approx(plateau).epsilon(0.15));
}

TEST_CASE("white noise level, distribution and allan slope") {
    const WhiteParams p{1e4};
    const std::size_t n = 65536;
    const double dt = 0.01;
    const auto tr = gen_white(p, n, dt, 31415);

    CHECK(variance_of(tr.values) == Approx(1e4 / (2.0 * dt)).epsilon(0.03));
    CHECK(std::abs(mean_of(tr.values)) < 3.0 * std::sqrt(5e5 / n));

    const auto est = psd(tr, 10);
    double acc = 0.0;
    int cnt = 0;
    for (std::size_t i = 0; i < est.freq.size(); ++i) {
        if (est.freq[i] >= 1.0 && est.freq[i] <= 10.0) {
            acc += est.value[i] * est.count[i];
            cnt += static_cast<int>(est.count[i]);
        }
    }
    REQUIRE(cnt > 100);
    CHECK(acc / cnt == Approx(1e4).epsilon(0.05));

    std::vector<double> taus, lt, la;
    for (double t = 0.05; t <= 10.0; t *= 2.0) taus.push_back(t);
    const auto al = allan(tr, taus);
    for (std::size_t i = 0; i < al.tau.size(); ++i) {
        lt.push_back(std::log(al.tau[i]));
        la.push_back(std::log(al.adev[i]));
    }
    const auto line = testutil::linear_fit(lt, la);
    CHECK(line.slope == Approx(-0.5).epsilon(0.1));
}

TEST_CASE("common-mode stream shapes") {
    CommonModeSpec spec;

    SUBCASE("disabled stream is all zeros") {
        spec.kind = CommonModeKind::none;
        const auto s = common_mode_stream(spec, 100, 0.01, 1);
        for (const auto& smp : s) {
            CHECK(smp.eps_amp == 0.0);
            CHECK(smp.theta_phase == 0.0);
        }
    }

    SUBCASE("sine drive on the amplitude channel") {
        spec.kind = CommonModeKind::amplitude;
        spec.model = CommonModeModel::sine;
        spec.magnitude = 0.01;
        spec.freq_hz = 2.0;
        const std::size_t n = 1000;
        const double dt = 1e-3;
        const auto s = common_mode_stream(spec, n, dt, 1);
        CHECK(s[0].eps_amp == 0.0);
        for (const auto& smp : s) {
            CHECK(std::abs(smp.eps_amp) <= 0.01 + 1e-15);
            CHECK(smp.theta_phase == 0.0);
        }
        // Period 0.5 s = 500 samples.
        CHECK(s[125].eps_amp == Approx(0.01).epsilon(1e-9));
        CHECK(s[625].eps_amp == Approx(0.01).epsilon(1e-9));
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) w[i] = s[i].eps_amp;
        CHECK(std::sqrt(variance_of(w)) == Approx(0.01 / std::sqrt(2.0)).epsilon(0.01));
    }

    SUBCASE("step drive on the phase channel") {
        spec.kind = CommonModeKind::phase;
        spec.model = CommonModeModel::step;
        spec.magnitude = 0.05;
        spec.step_time_s = 0.3;
        const auto s = common_mode_stream(spec, 1000, 1e-3, 1);
        CHECK(s[299].theta_phase == 0.0);
        CHECK(s[300].theta_phase == Approx(0.05));
        CHECK(s[999].theta_phase == Approx(0.05));
        CHECK(s[150].eps_amp == 0.0);

        spec.step_time_s = 0.0; // defaults to half the duration
        const auto h = common_mode_stream(spec, 1000, 1e-3, 1);
        CHECK(h[499].theta_phase == 0.0);
        CHECK(h[500].theta_phase == Approx(0.05));
    }

    SUBCASE("random walk scales with sqrt(dt) and is seed-stable") {
        spec.kind = CommonModeKind::phase;
        spec.model = CommonModeModel::random_walk;
        spec.magnitude = 0.01;
        const std::size_t n = 20000;
        const double dt = 0.01;
        const auto a = common_mode_stream(spec, n, dt, 9);
        const auto b = common_mode_stream(spec, n, dt, 9);
        std::vector<double> inc;
        for (std::size_t i = 1; i < n; ++i) {
            CHECK(a[i].theta_phase == b[i].theta_phase);
            inc.push_back(a[i].theta_phase - a[i - 1].theta_phase);
        }
        CHECK(a[0].theta_phase == 0.0);
        CHECK(std::sqrt(variance_of(inc)) == Approx(0.01 * std::sqrt(dt)).epsilon(0.05));
    }
}

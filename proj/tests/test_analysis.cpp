#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "helpers.hpp"
#include "smi/analysis.hpp"
#include "smi/errors.hpp"
#include "smi/rng.hpp"

using namespace smi;
using doctest::Approx;

namespace {

constexpr double pi = std::numbers::pi;

FrequencyTrace make_trace(std::vector<double> v, double dt) {
    FrequencyTrace tr;
    tr.dt = dt;
    tr.values = std::move(v);
    return tr;
}

double trace_variance(const FrequencyTrace& tr) {
    double m = 0.0;
    for (double x : tr.values) m += x;
    m /= static_cast<double>(tr.size());
    double s = 0.0;
    for (double x : tr.values) s += (x - m) * (x - m);
    return s / static_cast<double>(tr.size());
}

double psd_integral(const PsdEstimate& est) {
    double acc = 0.0;
    for (std::size_t i = 0; i < est.value.size(); ++i) acc += est.value[i] * est.count[i];
    return acc * est.df_raw;
}

} // namespace

TEST_CASE("periodogram concentrates an on-grid sine into one bin") {
    const std::size_t n = 4096;
    const double dt = 1e-2;
    const double df = 1.0 / (static_cast<double>(n) * dt);
    const double f0 = 256.0 * df; // exactly on-grid
    const double amp = 3.0;
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = 5.0 + amp * std::sin(2.0 * pi * f0 * dt * static_cast<double>(i));
    }
    const auto tr = make_trace(std::move(v), dt);

    const auto raw = periodogram_raw(tr);
    CHECK(raw.df_raw == Approx(df).epsilon(1e-12));
    CHECK(raw.value[255] * df == Approx(amp * amp / 2.0).epsilon(0.02));
    // No leakage: neighbours carry nothing.
    CHECK(raw.value[254] * df < 1e-10);
    CHECK(raw.value[256] * df < 1e-10);
    // One-sided integral reproduces the variance exactly.
    CHECK(psd_integral(raw) == Approx(trace_variance(tr)).epsilon(1e-9));
}

TEST_CASE("smoothed and welch estimates stay consistent on white noise") {
    Rng rng(2718);
    std::vector<double> v(32768);
    for (auto& x : v) x = 4.0 * rng.gauss();
    const auto tr = make_trace(std::move(v), 0.05);

    const auto raw = periodogram_raw(tr);
    const auto sm = psd(tr, 10);
    CHECK(sm.value.size() < raw.value.size() / 4);
    CHECK(psd_integral(sm) == Approx(trace_variance(tr)).epsilon(1e-9));
    // Ordinate level: flat at sigma^2 * 2 dt.
    const double level = 16.0 * 2.0 * 0.05;
    double acc = 0.0, cnt = 0.0;
    for (std::size_t i = 0; i < sm.value.size(); ++i) {
        acc += sm.value[i] * sm.count[i];
        cnt += sm.count[i];
    }
    CHECK(acc / cnt == Approx(level).epsilon(0.03));

    const auto we = psd(tr, 0, PsdMethod::welch);
    CHECK(we.method == PsdMethod::welch);
    double accw = 0.0, cntw = 0.0;
    for (std::size_t i = 0; i < we.value.size(); ++i) {
        if (we.freq[i] > 0.5) { // away from the mean-removal notch
            accw += we.value[i];
            cntw += 1.0;
        }
    }
    CHECK(accw / cntw == Approx(level).epsilon(0.05));
}

TEST_CASE("psd input validation") {
    std::vector<double> v(63, 1.0);
    CHECK_THROWS_AS(psd(make_trace(v, 0.1)), TooShortError);
    CHECK_THROWS_AS(periodogram_raw(make_trace(v, 0.1)), TooShortError);
    v.resize(64);
    CHECK_NOTHROW(psd(make_trace(v, 0.1)));
}

TEST_CASE("flicker fit is exact on noiseless ordinates and rejects empty bands") {
    PsdEstimate est;
    const double a_true = 7.5e5;
    for (double f = 1e-3; f <= 100.0; f *= 1.3) {
        est.freq.push_back(f);
        est.value.push_back(a_true / f);
        est.count.push_back(1000.0); // high count: log bias correction ~ 5e-4
    }
    est.df_raw = 1e-3;
    const auto fit = fit_flicker(est, 1e-3, 100.0);
    CHECK(fit.a_p == Approx(a_true).epsilon(0.002));
    CHECK(fit.log_residual_rms < 1e-3);
    CHECK(fit.n_bins == static_cast<int>(est.freq.size()));

    CHECK_THROWS_AS(fit_flicker(est, 200.0, 300.0), BandEmptyError);

    // A white floor contaminating the top decade shows up in the residual.
    PsdEstimate mixed = est;
    for (std::size_t i = 0; i < mixed.freq.size(); ++i) {
        mixed.value[i] += 5e4; // flat addition dominates above ~15 Hz
    }
    const auto bad = fit_flicker(mixed, 1e-3, 100.0);
    CHECK(bad.log_residual_rms > 10.0 * fit.log_residual_rms);
}

TEST_CASE("allan deviation of a pure ramp is d tau over sqrt(2)") {
    const double d = 12.5; // Hz per s
    const std::size_t n = 20000;
    const double dt = 0.1;
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = d * dt * static_cast<double>(i);
    const auto tr = make_trace(std::move(v), dt);

    const auto est = allan(tr, {0.5, 1.0, 4.0, 100.0});
    for (std::size_t i = 0; i < est.tau.size(); ++i) {
        CHECK(est.adev[i] == Approx(d * est.tau[i] / std::sqrt(2.0)).epsilon(1e-9));
        CHECK(est.ci_low[i] < est.adev[i]);
        CHECK(est.ci_high[i] > est.adev[i]);
    }
}

TEST_CASE("allan tau grid validation") {
    std::vector<double> v(1000, 0.0);
    const auto tr = make_trace(std::move(v), 0.1);
    CHECK_THROWS_AS(allan(tr, {0.1234}), TauOutOfRangeError); // off the dt grid
    CHECK_THROWS_AS(allan(tr, {50.0}), TauOutOfRangeError);   // beyond duration/5
    CHECK_THROWS_AS(allan(tr, {0.0}), TauOutOfRangeError);
    CHECK_NOTHROW(allan(tr, {0.1, 20.0}));

    const auto grid = default_tau_grid(tr, 8);
    REQUIRE(!grid.empty());
    CHECK(std::is_sorted(grid.begin(), grid.end()));
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
    for (double t : grid) {
        const double m = t / 0.1;
        CHECK(std::abs(m - std::llround(m)) < 1e-6);
        CHECK(t <= 0.1 * 1000 / 5.0 + 1e-9);
    }
    CHECK_NOTHROW(allan(tr, grid));
}

TEST_CASE("white-noise allan follows the tau^-1/2 law at the right level") {
    Rng rng(141421);
    const double dt = 0.01;
    const double psd_level = 1e4;
    const double sigma = std::sqrt(psd_level / (2.0 * dt));
    std::vector<double> v(100000);
    for (auto& x : v) x = sigma * rng.gauss();
    const auto tr = make_trace(std::move(v), dt);

    const auto est = allan(tr, {0.05, 0.2, 1.0, 5.0});
    std::vector<double> lt, la;
    for (std::size_t i = 0; i < est.tau.size(); ++i) {
        CHECK(est.adev[i] ==
              Approx(std::sqrt(psd_level / (2.0 * est.tau[i]))).epsilon(0.05));
        lt.push_back(std::log(est.tau[i]));
        la.push_back(std::log(est.adev[i]));
    }
    const auto line = testutil::linear_fit(lt, la);
    CHECK(line.slope == Approx(-0.5).epsilon(0.05));
    // Confidence interval tightens as terms accumulate at small tau.
    CHECK((est.ci_high[0] - est.ci_low[0]) / est.adev[0] <
          (est.ci_high[3] - est.ci_low[3]) / est.adev[3]);
}

TEST_CASE("histogram auto-binning and totals") {
    Rng rng(55);
    std::vector<double> s(10000);
    for (auto& x : s) x = rng.gauss();
    const auto h = histogram(s);
    CHECK(h.center.size() == 100); // ceil(sqrt(10000))
    double total = 0.0;
    for (double c : h.count) total += c;
    CHECK(total == Approx(10000.0));
    CHECK(h.bin_width > 0.0);
    // Fixed bin count override.
    CHECK(histogram(s, 32).center.size() == 32);
}

TEST_CASE("three-component mixture is recovered from samples") {
    Rng rng(0xabcdef);
    const std::vector<double> w{0.5, 0.3, 0.2};
    const std::vector<double> mu{0.0, 1500.0, 2400.0};
    const std::vector<double> sg{150.0, 150.0, 200.0};
    std::vector<double> samples;
    samples.reserve(30000);
    for (int i = 0; i < 30000; ++i) {
        const double u = rng.uniform01();
        const std::size_t c = u < w[0] ? 0 : (u < w[0] + w[1] ? 1 : 2);
        samples.push_back(mu[c] + sg[c] * rng.gauss());
    }

    const auto fit = fit_mixture(samples, 3);
    REQUIRE(fit.components.size() == 3);
    CHECK(fit.converged);
    CHECK_FALSE(fit.low_weight);
    for (std::size_t i = 1; i < fit.loglik_history.size(); ++i) {
        CHECK(fit.loglik_history[i] >= fit.loglik_history[i - 1] - 1e-9);
    }
    CHECK(fit.components[0].mean == Approx(0.0).scale(2400.0).epsilon(0.01));
    CHECK(fit.components[1].mean == Approx(1500.0).epsilon(0.10));
    CHECK(fit.components[2].mean == Approx(2400.0).epsilon(0.10));
    CHECK(fit.components[0].weight == Approx(0.5).epsilon(0.10));
    CHECK(fit.components[1].weight == Approx(0.3).epsilon(0.15));
    CHECK(fit.components[2].weight == Approx(0.2).epsilon(0.15));
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(fit.components[i].sigma == Approx(sg[i]).epsilon(0.15));
    }

    // Deterministic: bit-identical on a second run.
    const auto fit2 = fit_mixture(samples, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(fit.components[i].mean == fit2.components[i].mean);
        CHECK(fit.components[i].weight == fit2.components[i].weight);
    }
}

TEST_CASE("single-component fit recovers mean and width at sampling accuracy") {
    Rng rng(31337);
    const double mu = 42.0, sigma = 5.0;
    const std::size_t n = 20000;
    std::vector<double> s(n);
    for (auto& x : s) x = mu + sigma * rng.gauss();

    const auto fit = fit_mixture(s, 1);
    REQUIRE(fit.components.size() == 1);
    CHECK(fit.components[0].weight == Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(fit.components[0].mean - mu) < 3.0 * sigma / std::sqrt(double(n)));
    CHECK(std::abs(fit.components[0].sigma - sigma) <
          3.0 * sigma / std::sqrt(2.0 * double(n)) + fit.components[0].sigma * 0.01);
}

TEST_CASE("mixture degeneracy and size guards") {
    Rng rng(77);
    std::vector<double> uni(5000);
    for (auto& x : uni) x = rng.gauss(); // one mode only
    CHECK_THROWS_AS(fit_mixture(uni, 3), DegenerateError);

    const std::vector<double> identical(1000, 4.2);
    CHECK_THROWS_AS(fit_mixture(identical, 2), DegenerateError);

    std::vector<double> tiny(150, 0.0);
    for (std::size_t i = 0; i < tiny.size(); ++i) tiny[i] = static_cast<double>(i % 7);
    CHECK_THROWS_AS(fit_mixture(tiny, 2), TooShortError); // needs 100 per component

    CHECK_THROWS_AS(fit_mixture(uni, 0), std::invalid_argument);
}

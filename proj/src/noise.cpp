#include "smi/noise.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "smi/digest.hpp"
#include "smi/fft.hpp"
#include "smi/rng.hpp"

namespace smi {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;

std::string trace_digest(const char* kind, double p1, double p2, double p3, std::size_t n,
                         double dt, std::uint64_t seed) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s|%.17g|%.17g|%.17g|%zu|%.17g|%llu", kind, p1, p2, p3, n, dt,
                  static_cast<unsigned long long>(seed));
    return digest_hex(buf);
}
} // namespace

FrequencyTrace gen_rts(const RtsParams& p, std::size_t n, double dt, std::uint64_t seed) {
    if (p.rate_up <= 0.0 || p.rate_down <= 0.0) {
        throw std::invalid_argument("gen_rts: rates must be positive");
    }
    FrequencyTrace tr;
    tr.dt = dt;
    tr.values.resize(n);
    tr.meta.seed = seed;
    tr.meta.config_digest = trace_digest("rts", p.delta_f, p.rate_up, p.rate_down, n, dt, seed);

    Rng rng(seed);
    const double p_up = p.rate_up / (p.rate_up + p.rate_down);
    int state = rng.uniform01() < p_up ? 1 : 0;
    double t_flip = rng.exponential(state == 0 ? p.rate_up : p.rate_down);

    for (std::size_t i = 0; i < n; ++i) {
        const double t = dt * static_cast<double>(i);
        while (t_flip <= t) {
            state = 1 - state;
            t_flip += rng.exponential(state == 0 ? p.rate_up : p.rate_down);
        }
        tr.values[i] = state ? p.delta_f : 0.0;
    }
    return tr;
}

FrequencyTrace gen_flicker(const FlickerParams& p, std::size_t n, double dt, std::uint64_t seed) {
    FrequencyTrace tr;
    tr.dt = dt;
    tr.meta.seed = seed;
    tr.meta.config_digest = trace_digest("flicker", p.a_p, p.f_min, p.f_max, n, dt, seed);
    if (p.a_p == 0.0) {
        tr.values.assign(n, 0.0);
        return tr;
    }
    if (n < 4) throw std::invalid_argument("gen_flicker: need at least 4 samples");

    // Build the one-sided spectrum so that the expected periodogram
    // (2 dt / n) |X_k|^2 equals S(f_k) = a_p / max(f_k, f_min).
    Rng rng(seed);
    const std::size_t nbins = n / 2 + 1;
    std::vector<std::complex<double>> spec(nbins);
    spec[0] = 0.0; // DC removed by construction
    const double df = 1.0 / (static_cast<double>(n) * dt);
    for (std::size_t k = 1; k < nbins; ++k) {
        const double f = df * static_cast<double>(k);
        const double target = p.a_p / std::max(f, p.f_min);
        const bool nyquist = (n % 2 == 0) && (k == n / 2);
        if (nyquist) {
            // One-sided convention has no factor 2 at Nyquist.
            spec[k] = rng.gauss() * std::sqrt(target * static_cast<double>(n) / dt);
        } else {
            const double sigma = std::sqrt(target * static_cast<double>(n) / (4.0 * dt));
            spec[k] = std::complex<double>(rng.gauss(), rng.gauss()) * sigma;
        }
    }
    tr.values = irfft(spec, n);
    return tr;
}

FrequencyTrace gen_white(const WhiteParams& p, std::size_t n, double dt, std::uint64_t seed) {
    FrequencyTrace tr;
    tr.dt = dt;
    tr.meta.seed = seed;
    tr.meta.config_digest = trace_digest("white", p.psd_level, 0.0, 0.0, n, dt, seed);
    tr.values.resize(n);
    if (p.psd_level == 0.0) {
        return tr;
    }
    Rng rng(seed);
    const double sigma = std::sqrt(p.psd_level / (2.0 * dt));
    for (auto& v : tr.values) v = sigma * rng.gauss();
    return tr;
}

FrequencyTrace compose(const NoiseSpec& spec, std::size_t n, double dt) {
    FrequencyTrace tr;
    tr.dt = dt;
    tr.values.assign(n, 0.0);
    tr.meta.seed = spec.seed;

    std::string id = "compose";
    for (std::size_t i = 0; i < spec.rts.size(); ++i) {
        const auto part = gen_rts(spec.rts[i], n, dt, derive_seed(spec.seed, seed_tag::rts, i));
        for (std::size_t j = 0; j < n; ++j) tr.values[j] += part.values[j];
        id += "|" + part.meta.config_digest;
    }
    if (spec.flicker.a_p != 0.0) {
        const auto part = gen_flicker(spec.flicker, n, dt, derive_seed(spec.seed, seed_tag::flicker));
        for (std::size_t j = 0; j < n; ++j) tr.values[j] += part.values[j];
        id += "|" + part.meta.config_digest;
    }
    if (spec.white.psd_level != 0.0) {
        const auto part = gen_white(spec.white, n, dt, derive_seed(spec.seed, seed_tag::white));
        for (std::size_t j = 0; j < n; ++j) tr.values[j] += part.values[j];
        id += "|" + part.meta.config_digest;
    }
    tr.meta.config_digest = digest_hex(id);
    return tr;
}

std::vector<CommonModeSample> common_mode_stream(const CommonModeSpec& spec, std::size_t n,
                                                 double dt, std::uint64_t seed) {
    std::vector<CommonModeSample> out(n);
    if (spec.kind == CommonModeKind::none || spec.magnitude == 0.0) return out;

    std::vector<double> wave(n, 0.0);
    switch (spec.model) {
    case CommonModeModel::sine:
        for (std::size_t i = 0; i < n; ++i) {
            wave[i] = spec.magnitude * std::sin(two_pi * spec.freq_hz * dt * static_cast<double>(i));
        }
        break;
    case CommonModeModel::step: {
        const double t_step = spec.step_time_s > 0.0
                                  ? spec.step_time_s
                                  : 0.5 * dt * static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            wave[i] = dt * static_cast<double>(i) >= t_step ? spec.magnitude : 0.0;
        }
        break;
    }
    case CommonModeModel::random_walk: {
        Rng rng(derive_seed(seed, seed_tag::common));
        const double sigma_step = spec.magnitude * std::sqrt(dt);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            wave[i] = acc;
            acc += sigma_step * rng.gauss();
        }
        break;
    }
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (spec.kind == CommonModeKind::amplitude) {
            out[i].eps_amp = wave[i];
        } else {
            out[i].theta_phase = wave[i];
        }
    }
    return out;
}

} // namespace smi

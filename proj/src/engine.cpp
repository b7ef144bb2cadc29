#include "smi/engine.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "smi/constants.hpp"
#include "smi/digest.hpp"
#include "smi/errors.hpp"
#include "smi/rng.hpp"

namespace smi {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;
} // namespace

double BandsConfig::measurement_bandwidth_hz() const { return 1.0 / (two_pi * tau_lockin); }

LockinFilter::LockinFilter(double tau, int order, double dt) {
    if (tau <= 0.0 || order < 1 || dt <= 0.0) {
        throw ConfigError("lock-in filter needs tau > 0, order >= 1, dt > 0");
    }
    stages_.assign(static_cast<std::size_t>(order), {0.0, 0.0});
    alpha_ = 1.0 - std::exp(-dt / (tau / static_cast<double>(order)));
}

std::complex<double> LockinFilter::step(std::complex<double> in) {
    for (auto& st : stages_) {
        st += alpha_ * (in - st);
        in = st;
    }
    return in;
}

void LockinFilter::reset(std::complex<double> value) {
    for (auto& st : stages_) st = value;
}

double LockinFilter::magnitude(double f, double tau, int order, double dt) {
    const double alpha = 1.0 - std::exp(-dt / (tau / static_cast<double>(order)));
    const std::complex<double> z = std::polar(1.0, -two_pi * f * dt);
    const std::complex<double> h1 = alpha / (1.0 - (1.0 - alpha) * z);
    return std::pow(std::abs(h1), order);
}

double MixerModel::residual(double dc_i, double dc_q) const {
    const double di = dc_i - true_dc_i;
    const double dq = dc_q - true_dc_q;
    return std::sqrt(slope_k * slope_k * (di * di + dq * dq) + floor_v * floor_v);
}

MixerModel MixerModel::from_seed(std::uint64_t seed, double max_offset_v, double floor_v) {
    Rng rng(derive_seed(seed, seed_tag::mixer));
    MixerModel m;
    m.true_dc_i = (2.0 * rng.uniform01() - 1.0) * max_offset_v;
    m.true_dc_q = (2.0 * rng.uniform01() - 1.0) * max_offset_v;
    m.floor_v = floor_v;
    return m;
}

RunResult run(const EngineConfig& cfg) {
    const auto& bands = cfg.bands;
    if (bands.f_sample <= 0.0 || cfg.duration_s <= 0.0) {
        throw ConfigError("run: f_sample and duration must be positive");
    }
    if (bands.steps_per_tau < 10) {
        throw ConfigError("run: internal step must be at most tau_lockin/10");
    }

    // Internal rate: a multiple of f_sample no coarser than tau/steps_per_tau.
    const double dt_pref = bands.tau_lockin / static_cast<double>(bands.steps_per_tau);
    const std::size_t decim = static_cast<std::size_t>(
        std::max(1.0, std::ceil(1.0 / (bands.f_sample * dt_pref) - 1e-9)));
    const double dt_int = 1.0 / (bands.f_sample * static_cast<double>(decim));

    const std::size_t n_out = static_cast<std::size_t>(std::llround(cfg.duration_s * bands.f_sample));
    if (n_out < 2) throw ConfigError("run: duration too short for the sample rate");
    const std::size_t n_int = n_out * decim;

    const auto detuning = compose(cfg.noise, n_int, dt_int);
    const auto common = common_mode_stream(cfg.common_mode, n_int, dt_int, cfg.noise.seed);
    Rng readout_rng(derive_seed(cfg.noise.seed, seed_tag::readout));

    const double f_probe = cfg.carrier.f0 + cfg.mod.f_mod;
    const double f_ref = cfg.carrier.f0 - cfg.mod.f_mod;

    LockinFilter filter(bands.tau_lockin, bands.filter_order, dt_int);

    RunResult res;
    const double dt_out = cfg.time_scale / bands.f_sample;
    for (FrequencyTrace* tr : {&res.x, &res.y, &res.truth}) {
        tr->dt = dt_out;
        tr->values.reserve(n_out);
        tr->meta.seed = cfg.noise.seed;
    }

    ResonatorState state;
    for (std::size_t i = 0; i < n_int; ++i) {
        state.delta_r = detuning.values[i];
        const auto probe = reflection(cfg.resonator, state, f_probe);
        const auto ref = reflection(cfg.resonator, state, f_ref);
        const auto [mod_i, car_i] =
            apply_common_noise(cfg.mod, cfg.carrier, common[i].eps_amp, common[i].theta_phase);
        std::complex<double> s = eval_output_two_sided(mod_i, car_i, probe, ref);
        if (cfg.readout_noise_v > 0.0) {
            s += std::complex<double>(readout_rng.gauss(), readout_rng.gauss()) *
                 cfg.readout_noise_v;
        }
        const auto filtered = filter.step(s);
        if ((i + 1) % decim == 0) {
            res.x.values.push_back(filtered.real());
            res.y.values.push_back(filtered.imag());
            res.truth.values.push_back(state.delta_r);
        }
    }

    char summary[512];
    std::snprintf(summary, sizeof(summary),
                  "run|%.17g|%.17g|%.17g|%.17g|%.17g|%d|%zu|%llu|%s",
                  cfg.mod.a1, cfg.mod.a2, cfg.carrier.f0, bands.f_sample, bands.tau_lockin,
                  bands.filter_order, n_out,
                  static_cast<unsigned long long>(cfg.noise.seed),
                  detuning.meta.config_digest.c_str());
    res.manifest.config_digest = digest_hex(summary);
    res.manifest.seed = cfg.noise.seed;
    res.manifest.version = version_string;
    res.manifest.prng = prng_id;
    if (bands.f_sample * bands.tau_lockin < 3.82) {
        res.manifest.notes = "alias band attenuation below 40 dB for this f_sample*tau";
    }
    for (FrequencyTrace* tr : {&res.x, &res.y, &res.truth}) {
        tr->meta.config_digest = res.manifest.config_digest;
    }
    return res;
}

} // namespace smi

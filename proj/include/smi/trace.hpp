#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace smi {

struct TraceMeta {
    std::uint64_t seed = 0;
    std::string config_digest; // hex digest of the generating configuration
};

/// Uniformly sampled scalar time series. `values` are in the unit implied by
/// the producer (Hz for detuning traces, V for demodulated quadratures).
struct FrequencyTrace {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<double> values;
    TraceMeta meta;

    std::size_t size() const { return values.size(); }
    double duration() const { return dt * static_cast<double>(values.size()); }
    double time_at(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
};

} // namespace smi

#pragma once

namespace smi {

// Single authoritative constants table; nothing else in the tree redefines these.
inline constexpr double hbar_js = 1.054571817e-34; // reduced Planck constant, J*s (CODATA 2018)
inline constexpr double z0_ohm = 50.0;             // line impedance the power calibration refers to

inline constexpr const char* version_string = "0.1.0";
inline constexpr const char* prng_id = "xoshiro256++-1.0/splitmix64/box-muller";

} // namespace smi

#pragma once

#include <complex>
#include <vector>

namespace smi {

/// Forward real-to-complex DFT, unnormalized: X_k = sum_j x_j e^{-2 pi i jk/n},
/// k = 0..n/2. Backed by FFTW (planning serialized internally).
std::vector<std::complex<double>> rfft(const std::vector<double>& x);

/// Inverse of rfft including the 1/n normalization, so irfft(rfft(x)) == x.
/// `n` is the length of the real output (needed since n and n-1 map to the
/// same spectrum length for odd/even n).
std::vector<double> irfft(const std::vector<std::complex<double>>& spectrum, std::size_t n);

} // namespace smi

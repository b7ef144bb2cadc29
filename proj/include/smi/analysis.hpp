#pragma once

#include <cstddef>
#include <vector>

#include "smi/trace.hpp"

namespace smi {

enum class PsdMethod { periodogram, welch };

struct PsdEstimate {
    std::vector<double> freq;   // Hz, geometric centre of each smoothed bin
    std::vector<double> value;  // one-sided PSD, unit^2/Hz
    std::vector<double> count;  // raw periodogram ordinates aggregated per bin
    double df_raw = 0.0;        // raw grid spacing, Hz
    PsdMethod method = PsdMethod::periodogram;
};

/// One-sided PSD of a mean-subtracted trace. Default estimator is a single
/// periodogram smoothed by an arithmetic moving average over log-spaced
/// windows (value: arithmetic mean, frequency: geometric mean), which keeps
/// the integral equal to the variance. bins_per_decade <= 0 disables
/// smoothing. Throws TooShortError below 64 samples.
PsdEstimate psd(const FrequencyTrace& trace, int bins_per_decade = 10,
                PsdMethod method = PsdMethod::periodogram, int welch_segments = 8);

/// Raw (unsmoothed, unit-weight) periodogram helper used by psd(); exposed
/// for line-detection tests that need single-bin resolution.
PsdEstimate periodogram_raw(const FrequencyTrace& trace);

struct FlickerFit {
    double a_p = 0.0;             // amplitude of S(f) = a_p/f
    double log_residual_rms = 0.0; // rms of ln(S) - ln(a_p/f) over the fitted band
    double f_lo = 0.0, f_hi = 0.0;
    int n_bins = 0;
};

/// Least squares of log S vs log f with the slope fixed to -1, weighted by
/// the per-bin ordinate count, with the small-count chi^2 log-bias correction
/// (ln N - psi(N)) applied per bin. Throws BandEmptyError when no PSD bin
/// falls inside [f_lo, f_hi].
FlickerFit fit_flicker(const PsdEstimate& estimate, double f_lo, double f_hi);

struct AllanEstimate {
    std::vector<double> tau;      // s
    std::vector<double> adev;     // same unit as the trace values
    std::vector<double> ci_low;   // approximate 68% interval (white-FM edf)
    std::vector<double> ci_high;
    std::vector<std::size_t> n_terms;
};

/// Overlapping Allan deviation of a frequency trace at tau = m*dt for the
/// requested taus. Confidence intervals use a chi-square model with the
/// white-FM equivalent-degrees-of-freedom approximation (documented as
/// approximate). Throws TauOutOfRangeError for tau not on the grid or
/// tau > duration/5.
AllanEstimate allan(const FrequencyTrace& trace, const std::vector<double>& taus);

/// Log-spaced tau grid (unique multiples of dt) up to duration/5.
std::vector<double> default_tau_grid(const FrequencyTrace& trace, int points_per_decade = 8);

struct GaussComponent {
    double weight = 0.0;
    double mean = 0.0;
    double sigma = 0.0;
};

struct GaussianMixture {
    std::vector<GaussComponent> components; // sorted by mean
    double log_likelihood = 0.0;            // binned objective, per histogram
    int iterations = 0;
    bool converged = false;
    bool low_weight = false;                // some component ended below 1e-3
    std::vector<double> loglik_history;     // per EM iteration, non-decreasing
};

/// k-component Gaussian mixture via EM on a fixed histogram binning of the
/// samples. Initialization is deterministic: k-quantile means first, with a
/// histogram-peak start retried when the quantile start ends unresolvable.
/// Converges on relative log-likelihood change < 1e-8 or 500 iterations.
/// Throws DegenerateError when a component width collapses below 1e-6 of the
/// data range or fewer than k separated modes can be fit.
GaussianMixture fit_mixture(const std::vector<double>& samples, int k);

struct Histogram {
    std::vector<double> center;
    std::vector<double> count;
    double bin_width = 0.0;
};

Histogram histogram(const std::vector<double>& samples, int n_bins = 0);

} // namespace smi

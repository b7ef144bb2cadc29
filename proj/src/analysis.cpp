#include "smi/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "smi/errors.hpp"
#include "smi/fft.hpp"

namespace smi {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;

double digamma(double x) {
    // Recurrence up to x >= 6, then the asymptotic series.
    double result = 0.0;
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0));
    return result;
}

struct RawSpectrum {
    std::vector<double> freq;
    std::vector<double> value;
    double df = 0.0;
};

RawSpectrum single_periodogram(const std::vector<double>& data, double dt) {
    const std::size_t n = data.size();
    std::vector<double> centred(data);
    double mean = 0.0;
    for (double v : centred) mean += v;
    mean /= static_cast<double>(n);
    for (double& v : centred) v -= mean;

    const auto spec = rfft(centred);
    RawSpectrum out;
    out.df = 1.0 / (static_cast<double>(n) * dt);
    const std::size_t n_half = spec.size() - 1; // index of the Nyquist/last bin
    out.freq.reserve(n_half);
    out.value.reserve(n_half);
    for (std::size_t k = 1; k < spec.size(); ++k) {
        const bool nyquist = (n % 2 == 0) && (k == n / 2);
        const double scale = (nyquist ? 1.0 : 2.0) * dt / static_cast<double>(n);
        out.freq.push_back(out.df * static_cast<double>(k));
        out.value.push_back(scale * std::norm(spec[k]));
    }
    return out;
}

RawSpectrum welch_spectrum(const std::vector<double>& data, double dt, int segments) {
    const std::size_t n = data.size();
    const std::size_t seg = std::max<std::size_t>(16, 2 * n / static_cast<std::size_t>(segments + 1));
    const std::size_t hop = seg / 2;

    std::vector<double> window(seg);
    double u = 0.0;
    for (std::size_t i = 0; i < seg; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(two_pi * static_cast<double>(i) / static_cast<double>(seg - 1)));
        u += window[i] * window[i];
    }

    double mean = 0.0;
    for (double v : data) mean += v;
    mean /= static_cast<double>(n);

    RawSpectrum out;
    out.df = 1.0 / (static_cast<double>(seg) * dt);
    std::size_t n_avg = 0;
    std::vector<double> buf(seg);
    for (std::size_t start = 0; start + seg <= n; start += hop) {
        for (std::size_t i = 0; i < seg; ++i) buf[i] = (data[start + i] - mean) * window[i];
        const auto spec = rfft(buf);
        if (out.value.empty()) {
            out.value.assign(spec.size() - 1, 0.0);
            out.freq.resize(spec.size() - 1);
            for (std::size_t k = 1; k < spec.size(); ++k) {
                out.freq[k - 1] = out.df * static_cast<double>(k);
            }
        }
        for (std::size_t k = 1; k < spec.size(); ++k) {
            const bool nyquist = (seg % 2 == 0) && (k == seg / 2);
            const double scale = (nyquist ? 1.0 : 2.0) * dt / u;
            out.value[k - 1] += scale * std::norm(spec[k]);
        }
        ++n_avg;
    }
    for (double& v : out.value) v /= static_cast<double>(n_avg);
    return out;
}
} // namespace

PsdEstimate periodogram_raw(const FrequencyTrace& trace) {
    if (trace.size() < 64) throw TooShortError("psd needs at least 64 samples");
    const auto raw = single_periodogram(trace.values, trace.dt);
    PsdEstimate est;
    est.freq = raw.freq;
    est.value = raw.value;
    est.count.assign(raw.freq.size(), 1.0);
    est.df_raw = raw.df;
    return est;
}

PsdEstimate psd(const FrequencyTrace& trace, int bins_per_decade, PsdMethod method,
                int welch_segments) {
    if (trace.size() < 64) throw TooShortError("psd needs at least 64 samples");
    const RawSpectrum raw = method == PsdMethod::welch
                                ? welch_spectrum(trace.values, trace.dt, welch_segments)
                                : single_periodogram(trace.values, trace.dt);

    PsdEstimate est;
    est.df_raw = raw.df;
    est.method = method;
    if (bins_per_decade <= 0) {
        est.freq = raw.freq;
        est.value = raw.value;
        est.count.assign(raw.freq.size(), 1.0);
        return est;
    }

    // Log-spaced aggregation: arithmetic mean of the ordinates in each window
    // (unbiased for chi^2 ordinates and integral-preserving), geometric-mean
    // placement of the frequency coordinate.
    const double ratio = std::pow(10.0, 1.0 / static_cast<double>(bins_per_decade));
    double edge_lo = raw.freq.front() * 0.999999;
    std::size_t i = 0;
    while (i < raw.freq.size()) {
        const double edge_hi = edge_lo * ratio;
        double sum = 0.0, logf = 0.0;
        std::size_t cnt = 0;
        while (i < raw.freq.size() && raw.freq[i] <= edge_hi) {
            sum += raw.value[i];
            logf += std::log(raw.freq[i]);
            ++cnt;
            ++i;
        }
        if (cnt > 0) {
            est.freq.push_back(std::exp(logf / static_cast<double>(cnt)));
            est.value.push_back(sum / static_cast<double>(cnt));
            est.count.push_back(static_cast<double>(cnt));
        }
        edge_lo = edge_hi;
    }
    return est;
}

FlickerFit fit_flicker(const PsdEstimate& estimate, double f_lo, double f_hi) {
    double sw = 0.0, swy = 0.0;
    std::vector<double> ys, ws;
    for (std::size_t i = 0; i < estimate.freq.size(); ++i) {
        const double f = estimate.freq[i];
        if (f < f_lo || f > f_hi) continue;
        if (estimate.value[i] <= 0.0) continue;
        const double n = std::max(1.0, estimate.count[i]);
        // Mean of N chi^2_2 ordinates: E[ln(mean)] = ln(S) + psi(N) - ln(N).
        const double y = std::log(estimate.value[i]) + std::log(f) + (std::log(n) - digamma(n));
        ys.push_back(y);
        ws.push_back(n);
        sw += n;
        swy += n * y;
    }
    if (ys.empty()) throw BandEmptyError("no PSD bins inside the requested fit band");

    FlickerFit fit;
    const double log_ap = swy / sw;
    fit.a_p = std::exp(log_ap);
    double ss = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        ss += ws[i] * (ys[i] - log_ap) * (ys[i] - log_ap);
    }
    fit.log_residual_rms = std::sqrt(ss / sw);
    fit.f_lo = f_lo;
    fit.f_hi = f_hi;
    fit.n_bins = static_cast<int>(ys.size());
    return fit;
}

AllanEstimate allan(const FrequencyTrace& trace, const std::vector<double>& taus) {
    const std::size_t n = trace.size();
    if (n < 8) throw TooShortError("allan needs at least 8 samples");
    const double duration = trace.dt * static_cast<double>(n);

    // Prefix sums give O(1) block averages per term.
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + trace.values[i];

    AllanEstimate est;
    for (double tau : taus) {
        const double m_real = tau / trace.dt;
        const auto m = static_cast<std::size_t>(std::llround(m_real));
        if (m < 1 || std::abs(m_real - static_cast<double>(m)) > 1e-6 * std::max(1.0, m_real)) {
            throw TauOutOfRangeError("tau is not a multiple of the sample interval");
        }
        if (tau > duration / 5.0) {
            throw TauOutOfRangeError("tau exceeds one fifth of the trace duration");
        }
        if (2 * m >= n) throw TauOutOfRangeError("tau too long for the trace");

        double sum = 0.0;
        const std::size_t terms = n - 2 * m + 1;
        for (std::size_t j = 0; j < terms; ++j) {
            const double d = prefix[j + 2 * m] - 2.0 * prefix[j + m] + prefix[j];
            sum += d * d;
        }
        const double avar = sum / (2.0 * static_cast<double>(terms) * static_cast<double>(m) *
                                   static_cast<double>(m));
        const double adev = std::sqrt(avar);

        // White-FM equivalent degrees of freedom (approximate).
        const double nn = static_cast<double>(n);
        const double mm = static_cast<double>(m);
        double edf = (3.0 * (nn - 1.0) / (2.0 * mm) - 2.0 * (nn - 2.0) / nn) * 4.0 * mm * mm /
                     (4.0 * mm * mm + 5.0);
        edf = std::max(1.0, edf);
        // Wilson-Hilferty chi-square quantiles for a 68% interval.
        auto chi2_quantile = [&](double z) {
            const double t = 1.0 - 2.0 / (9.0 * edf) + z * std::sqrt(2.0 / (9.0 * edf));
            return edf * t * t * t;
        };
        est.tau.push_back(tau);
        est.adev.push_back(adev);
        est.ci_low.push_back(adev * std::sqrt(edf / chi2_quantile(0.9945)));
        est.ci_high.push_back(adev * std::sqrt(edf / chi2_quantile(-0.9945)));
        est.n_terms.push_back(terms);
    }
    return est;
}

std::vector<double> default_tau_grid(const FrequencyTrace& trace, int points_per_decade) {
    const std::size_t n = trace.size();
    const auto m_max = static_cast<double>(n) / 5.0;
    std::vector<double> taus;
    const double ratio = std::pow(10.0, 1.0 / static_cast<double>(points_per_decade));
    std::size_t last = 0;
    for (double m = 1.0; m <= m_max; m *= ratio) {
        const auto mi = static_cast<std::size_t>(std::llround(m));
        if (mi == last) continue;
        if (2 * mi >= n) break;
        last = mi;
        taus.push_back(static_cast<double>(mi) * trace.dt);
    }
    return taus;
}

Histogram histogram(const std::vector<double>& samples, int n_bins) {
    Histogram h;
    if (samples.empty()) return h;
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi == lo) hi = lo + 1.0;
    if (n_bins <= 0) {
        n_bins = static_cast<int>(std::clamp<std::size_t>(
            static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(samples.size())))), 64,
            1024));
    }
    h.bin_width = (hi - lo) / n_bins;
    h.center.resize(n_bins);
    h.count.assign(n_bins, 0.0);
    for (int b = 0; b < n_bins; ++b) h.center[b] = lo + (b + 0.5) * h.bin_width;
    for (double v : samples) {
        auto b = static_cast<std::size_t>((v - lo) / h.bin_width);
        if (b >= static_cast<std::size_t>(n_bins)) b = n_bins - 1;
        h.count[b] += 1.0;
    }
    return h;
}

namespace {

struct EmOutcome {
    GaussianMixture mix;
    bool ok = false;
    const char* why = "";
};

EmOutcome run_em(const Histogram& h, double n_total, int k, std::vector<double> mu,
                 std::vector<double> sg, double sigma_floor) {
    const std::size_t nb = h.center.size();
    std::vector<double> pi(static_cast<std::size_t>(k), 1.0 / k);
    std::vector<double> resp(nb * static_cast<std::size_t>(k));
    EmOutcome res;
    GaussianMixture& out = res.mix;
    double prev_ll = -1e300;

    for (int iter = 0; iter < 500; ++iter) {
        // E step on bin centres.
        double ll = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            if (h.count[b] == 0.0) continue;
            double norm = 0.0;
            for (int j = 0; j < k; ++j) {
                const double z = (h.center[b] - mu[j]) / sg[j];
                const double dens = pi[j] / (sg[j] * std::sqrt(two_pi)) * std::exp(-0.5 * z * z);
                resp[b * k + j] = dens;
                norm += dens;
            }
            if (norm <= 0.0) norm = 1e-300;
            for (int j = 0; j < k; ++j) resp[b * k + j] /= norm;
            ll += h.count[b] * std::log(norm);
        }
        out.loglik_history.push_back(ll);
        out.iterations = iter + 1;

        // M step.
        for (int j = 0; j < k; ++j) {
            double w = 0.0, wm = 0.0;
            for (std::size_t b = 0; b < nb; ++b) {
                if (h.count[b] == 0.0) continue;
                const double r = resp[b * k + j] * h.count[b];
                w += r;
                wm += r * h.center[b];
            }
            if (w <= 0.0) {
                res.why = "fit_mixture: component lost all weight";
                return res;
            }
            mu[j] = wm / w;
            double wv = 0.0;
            for (std::size_t b = 0; b < nb; ++b) {
                if (h.count[b] == 0.0) continue;
                const double r = resp[b * k + j] * h.count[b];
                wv += r * (h.center[b] - mu[j]) * (h.center[b] - mu[j]);
            }
            const double sg_raw = std::sqrt(wv / w);
            if (sg_raw < sigma_floor) {
                res.why = "fit_mixture: component width collapsed";
                return res;
            }
            // A mode narrower than one bin is not representable on the
            // histogram; flooring at the bin resolution keeps EM stable.
            sg[j] = std::max(sg_raw, h.bin_width / std::sqrt(12.0));
            pi[j] = w / n_total;
        }

        if (iter > 0 && std::abs(ll - prev_ll) < 1e-8 * std::abs(prev_ll)) {
            out.converged = true;
            prev_ll = ll;
            break;
        }
        prev_ll = ll;
    }

    out.log_likelihood = prev_ll;
    out.components.resize(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        out.components[static_cast<std::size_t>(j)] = {pi[j], mu[j], sg[j]};
    }
    std::sort(out.components.begin(), out.components.end(),
              [](const GaussComponent& a, const GaussComponent& b) { return a.mean < b.mean; });
    for (const auto& c : out.components) {
        if (c.weight < 1e-3) out.low_weight = true;
    }
    // Two Gaussians merge into a single histogram mode once their means are
    // closer than twice the wider sigma; such a pair is one mode, not two.
    for (int j = 0; j + 1 < k; ++j) {
        const auto& a = out.components[static_cast<std::size_t>(j)];
        const auto& b = out.components[static_cast<std::size_t>(j) + 1];
        if (b.mean - a.mean < 2.0 * std::max(a.sigma, b.sigma)) {
            res.why = "fit_mixture: fewer than k resolvable components";
            return res;
        }
    }
    res.ok = true;
    return res;
}

/// Bin centres of the k most prominent local maxima, left to right. May
/// return fewer than k.
std::vector<double> histogram_peaks(const Histogram& h, int k) {
    const std::size_t nb = h.center.size();
    std::vector<std::size_t> maxima;
    for (std::size_t b = 0; b < nb; ++b) {
        const double left = b > 0 ? h.count[b - 1] : -1.0;
        const double right = b + 1 < nb ? h.count[b + 1] : -1.0;
        if (h.count[b] > 0.0 && h.count[b] > left && h.count[b] >= right) maxima.push_back(b);
    }
    std::sort(maxima.begin(), maxima.end(),
              [&](std::size_t a, std::size_t b) { return h.count[a] > h.count[b]; });

    const auto min_gap = std::max<std::size_t>(2, nb / (4 * static_cast<std::size_t>(k)));
    std::vector<std::size_t> picked;
    for (std::size_t b : maxima) {
        bool clear = true;
        for (std::size_t q : picked) {
            if ((b > q ? b - q : q - b) < min_gap) {
                clear = false;
                break;
            }
        }
        if (clear) picked.push_back(b);
        if (picked.size() == static_cast<std::size_t>(k)) break;
    }
    std::sort(picked.begin(), picked.end());
    std::vector<double> centers;
    centers.reserve(picked.size());
    for (std::size_t b : picked) centers.push_back(h.center[b]);
    return centers;
}

} // namespace

GaussianMixture fit_mixture(const std::vector<double>& samples, int k) {
    if (k < 1) throw std::invalid_argument("fit_mixture: k must be >= 1");
    if (samples.size() < static_cast<std::size_t>(100 * k)) {
        throw TooShortError("fit_mixture: too few samples for the requested k");
    }

    std::vector<double> sorted(samples);
    std::sort(sorted.begin(), sorted.end());
    const double range = sorted.back() - sorted.front();
    if (range == 0.0) throw DegenerateError("fit_mixture: all samples identical");
    const double sigma_floor = 1e-6 * range;

    // Weighted EM on a fixed histogram binning of the samples.
    const Histogram h = histogram(samples);
    const double n_total = static_cast<double>(samples.size());

    double mean_all = 0.0;
    for (double v : samples) mean_all += v;
    mean_all /= n_total;
    double var_all = 0.0;
    for (double v : samples) var_all += (v - mean_all) * (v - mean_all);
    var_all /= n_total;
    const double sg0 = std::max(std::sqrt(var_all) / k, sigma_floor * 10.0);

    // First start: k-quantile means. A heavily occupied mode can pull two
    // quantiles into one peak, so an unresolvable outcome triggers a second
    // deterministic start seeded from the histogram peaks.
    std::vector<double> mu_q(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        const auto q = static_cast<std::size_t>((j + 0.5) / k * (sorted.size() - 1));
        mu_q[static_cast<std::size_t>(j)] = sorted[q];
    }
    auto attempt =
        run_em(h, n_total, k, mu_q, std::vector<double>(static_cast<std::size_t>(k), sg0),
               sigma_floor);
    if (attempt.ok) return attempt.mix;

    std::vector<double> mu_p = histogram_peaks(h, k);
    for (int j = 0; mu_p.size() < static_cast<std::size_t>(k) && j < k; ++j) {
        // Pad with quantiles far from the peaks found so far.
        double best = mu_q[static_cast<std::size_t>(j)];
        double best_d = -1.0;
        for (double cand : mu_q) {
            double d = 1e300;
            for (double p : mu_p) d = std::min(d, std::abs(cand - p));
            if (d > best_d) {
                best_d = d;
                best = cand;
            }
        }
        mu_p.push_back(best);
    }
    std::sort(mu_p.begin(), mu_p.end());
    auto retry =
        run_em(h, n_total, k, mu_p, std::vector<double>(static_cast<std::size_t>(k), sg0),
               sigma_floor);
    if (retry.ok) return retry.mix;
    throw DegenerateError(retry.why);
}

} // namespace smi

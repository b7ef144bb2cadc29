#include "smi/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>
#include <stdexcept>

namespace smi {

namespace {
// The FFTW planner is not thread safe; execution of a plan is.
std::mutex planner_mutex;

// Deterministic transforms require the same plan for every call of a given
// size. Plans depend on the buffer alignment, and ordinary heap vectors are
// not consistently aligned, so all data goes through fftw_malloc'd scratch.
struct FftwBuffer {
    void* p = nullptr;
    explicit FftwBuffer(std::size_t bytes) : p(fftw_malloc(bytes)) {
        if (!p) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(p); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};
} // namespace

std::vector<std::complex<double>> rfft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n == 0) throw std::invalid_argument("rfft: empty input");
    FftwBuffer in(n * sizeof(double));
    FftwBuffer out((n / 2 + 1) * sizeof(fftw_complex));
    std::memcpy(in.p, x.data(), n * sizeof(double));

    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex);
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), static_cast<double*>(in.p),
                                    static_cast<fftw_complex*>(out.p), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(planner_mutex);
        fftw_destroy_plan(plan);
    }
    std::vector<std::complex<double>> result(n / 2 + 1);
    std::memcpy(result.data(), out.p, result.size() * sizeof(fftw_complex));
    return result;
}

std::vector<double> irfft(const std::vector<std::complex<double>>& spectrum, std::size_t n) {
    if (spectrum.size() != n / 2 + 1) throw std::invalid_argument("irfft: spectrum/length mismatch");
    FftwBuffer in(spectrum.size() * sizeof(fftw_complex));
    FftwBuffer out(n * sizeof(double));
    std::memcpy(in.p, spectrum.data(), spectrum.size() * sizeof(fftw_complex));

    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex);
        plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), static_cast<fftw_complex*>(in.p),
                                    static_cast<double*>(out.p), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(planner_mutex);
        fftw_destroy_plan(plan);
    }
    std::vector<double> result(n);
    std::memcpy(result.data(), out.p, n * sizeof(double));
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : result) v *= scale;
    return result;
}

} // namespace smi

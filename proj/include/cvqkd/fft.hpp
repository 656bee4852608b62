#pragma once

// Thin FFTW3 wrapper: cached in-place complex plans, safe to execute from many threads.

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include <fftw3.h>

namespace cvqkd::fft {

using cplx = std::complex<double>;

namespace detail {

class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(std::size_t n, int sign) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto key = std::make_pair(n, sign);
        if (auto it = plans_.find(key); it != plans_.end()) {
            return it->second;
        }
        std::vector<cplx> scratch(n);
        auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
        fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign,
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, plan);
        return plan;
    }

    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;

private:
    PlanCache() = default;
    ~PlanCache() {
        for (auto& [key, plan] : plans_) {
            fftw_destroy_plan(plan);
        }
    }

    std::mutex mutex_;
    std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

inline void execute(std::span<cplx> data, int sign) {
    if (data.empty()) {
        return;
    }
    fftw_plan plan = PlanCache::instance().get(data.size(), sign);
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, buf, buf);
}

}  // namespace detail

/// In-place forward DFT, X[m] = sum_k x[k] exp(-j 2 pi m k / n).
inline void forward(std::span<cplx> data) { detail::execute(data, FFTW_FORWARD); }

/// In-place inverse DFT without the 1/n factor.
inline void inverse_unscaled(std::span<cplx> data) { detail::execute(data, FFTW_BACKWARD); }

/// In-place inverse DFT including the 1/n factor.
inline void inverse(std::span<cplx> data) {
    detail::execute(data, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(data.size());
    for (auto& v : data) {
        v *= scale;
    }
}

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) {
        p <<= 1;
    }
    return p;
}

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Frequency (Hz) of DFT bin m for an n-point transform at sample rate fs, mapped to [-fs/2, fs/2).
inline double bin_frequency(std::size_t m, std::size_t n, double fs) {
    const auto half = n / 2;
    const double k = m < half ? static_cast<double>(m)
                              : static_cast<double>(m) - static_cast<double>(n);
    return k * fs / static_cast<double>(n);
}

}  // namespace cvqkd::fft

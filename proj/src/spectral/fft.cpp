// SPDX-License-Identifier: Apache-2.0
#include "fcl/spectral/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace fcl::spectral {

FftPlan::FftPlan(std::size_t n) : n_(n), twiddle_(n) {
    if (n == 0) throw std::invalid_argument("FFT length must be positive");
    for (std::size_t t = 0; t < n; ++t) {
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(n);
        twiddle_[t] = {std::cos(angle), std::sin(angle)};
    }
}

void FftPlan::transform(std::span<const cplx> in, std::span<cplx> out, bool inverse) const {
    if (in.size() != n_ || out.size() != n_) throw std::invalid_argument("FFT span size mismatch");
    recurse(in.data(), 1, out.data(), n_, 1, inverse);
}

void FftPlan::recurse(const cplx* in, std::size_t stride, cplx* out, std::size_t n,
                      std::size_t tw_step, bool inverse) const {
    if (n == 1) {
        out[0] = in[0];
        return;
    }
    if (n % 2 != 0) {
        for (std::size_t k = 0; k < n; ++k) {
            cplx acc{0.0, 0.0};
            for (std::size_t j = 0; j < n; ++j) {
                const cplx w = twiddle_[(k * j * tw_step) % n_];
                acc += in[j * stride] * (inverse ? std::conj(w) : w);
            }
            out[k] = acc;
        }
        return;
    }
    const std::size_t half = n / 2;
    recurse(in, stride * 2, out, half, tw_step * 2, inverse);
    recurse(in + stride, stride * 2, out + half, half, tw_step * 2, inverse);
    for (std::size_t k = 0; k < half; ++k) {
        const cplx w = twiddle_[k * tw_step];
        const cplx e = out[k];
        const cplx o = out[k + half] * (inverse ? std::conj(w) : w);
        out[k] = e + o;
        out[k + half] = e - o;
    }
}

const FftPlan& plan_for(std::size_t n) {
    thread_local std::unordered_map<std::size_t, FftPlan> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, FftPlan(n)).first;
    return it->second;
}

void fft2_standard(std::span<cplx> data, std::size_t height, std::size_t width, bool inverse) {
    const FftPlan& row_plan = plan_for(width);
    const FftPlan& col_plan = plan_for(height);
    std::vector<cplx> src(std::max(height, width));
    std::vector<cplx> dst(std::max(height, width));

    for (std::size_t r = 0; r < height; ++r) {
        std::span<cplx> row = data.subspan(r * width, width);
        std::copy(row.begin(), row.end(), src.begin());
        row_plan.transform({src.data(), width}, row, inverse);
    }
    for (std::size_t c = 0; c < width; ++c) {
        for (std::size_t r = 0; r < height; ++r) src[r] = data[r * width + c];
        col_plan.transform({src.data(), height}, {dst.data(), height}, inverse);
        for (std::size_t r = 0; r < height; ++r) data[r * width + c] = dst[r];
    }
}

}  // namespace fcl::spectral

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace fcl::spectral {

using cplx = std::complex<double>;

/// Mixed-radix complex FFT for any length: radix-2 decimation while the
/// length is even, direct summation on the odd remainder. Unnormalized in
/// both directions.
class FftPlan {
public:
    explicit FftPlan(std::size_t n);

    std::size_t size() const noexcept { return n_; }

    /// out[k] = sum_j in[j] * exp(-+ 2 pi i jk / n); `in` and `out` must not alias.
    void transform(std::span<const cplx> in, std::span<cplx> out, bool inverse) const;

private:
    void recurse(const cplx* in, std::size_t stride, cplx* out, std::size_t n, std::size_t tw_step,
                 bool inverse) const;

    std::size_t n_;
    std::vector<cplx> twiddle_;  // exp(-2 pi i t / n)
};

/// Plans are cached per thread; the returned reference stays valid for the
/// lifetime of the calling thread.
const FftPlan& plan_for(std::size_t n);

/// 2-D transform of a row-major H x W array in standard (uncentered) layout.
void fft2_standard(std::span<cplx> data, std::size_t height, std::size_t width, bool inverse);

}  // namespace fcl::spectral

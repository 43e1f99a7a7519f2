// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include "fcl/error.hpp"
#include "fcl/spectral/spectral.hpp"

namespace fcl::spectral {

ImageD lowpass_kernel(std::size_t height, std::size_t width, int bandwidth) {
    if (bandwidth <= 0 || bandwidth % 2 != 0 || static_cast<std::size_t>(bandwidth) > std::min(height, width)) {
        throw ParameterError("kernel bandwidth must be positive, even and at most the image side");
    }
    const int half = bandwidth / 2;
    // Sum over the band factorizes into two geometric sums; the kernel is the
    // real part of their product.
    auto axis_sum = [&](std::size_t n) {
        std::vector<cplx> s(n);
        for (std::size_t x = 0; x < n; ++x) {
            cplx acc{0.0, 0.0};
            for (int u = -half; u < half; ++u) {
                const double a = 2.0 * std::numbers::pi * u * static_cast<double>(x) / static_cast<double>(n);
                acc += cplx(std::cos(a), std::sin(a));
            }
            s[x] = acc;
        }
        return s;
    };
    const auto sx = axis_sum(height);
    const auto sy = axis_sum(width);
    ImageD kernel(1, height, width);
    const double norm = 1.0 / static_cast<double>(height * width);
    for (std::size_t x = 0; x < height; ++x) {
        for (std::size_t y = 0; y < width; ++y) kernel(0, x, y) = norm * (sx[x] * sy[y]).real();
    }
    return kernel;
}

ImageD circular_convolve(const ImageD& image, const ImageD& kernel) {
    if (kernel.channels() != 1 || kernel.height() != image.height() || kernel.width() != image.width()) {
        throw SizeError("circular_convolve: kernel must be single-channel and match the image size");
    }
    const std::size_t h = image.height();
    const std::size_t w = image.width();
    std::vector<cplx> kf(kernel.data().begin(), kernel.data().end());
    fft2_standard(kf, h, w, false);
    ImageD out(image.channels(), h, w);
    std::vector<cplx> buf(h * w);
    for (std::size_t c = 0; c < image.channels(); ++c) {
        auto plane = image.plane(c);
        std::copy(plane.begin(), plane.end(), buf.begin());
        fft2_standard(buf, h, w, false);
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] *= kf[i];
        fft2_standard(buf, h, w, true);
        auto dst = out.plane(c);
        for (std::size_t i = 0; i < buf.size(); ++i) dst[i] = buf[i].real() / static_cast<double>(h * w);
    }
    return out;
}

double sinc2d(double gamma, double x, double y) {
    auto factor = [gamma](double t) {
        if (t == 0.0) return 1.0;
        const double a = 2.0 * std::numbers::pi * gamma * t;
        return std::sin(a) / a;
    };
    return factor(x) * factor(y);
}

}  // namespace fcl::spectral

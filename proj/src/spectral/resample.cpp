// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "fcl/error.hpp"
#include "fcl/spectral/spectral.hpp"

namespace fcl::spectral {

namespace {

// Per-axis list of (source index, weight) pairs for one output index.
struct AxisTaps {
    std::size_t taps = 0;
    std::vector<int> index;
    std::vector<double> weight;
};

AxisTaps integer_taps(std::size_t k, DownsampleMethod method, std::size_t in_size, std::size_t out_size) {
    AxisTaps t;
    switch (method) {
        case DownsampleMethod::nearest:
            t.taps = 1;
            for (std::size_t o = 0; o < out_size; ++o) {
                t.index.push_back(static_cast<int>(o * k));
                t.weight.push_back(1.0);
            }
            break;
        case DownsampleMethod::box:
            t.taps = k;
            for (std::size_t o = 0; o < out_size; ++o) {
                for (std::size_t s = 0; s < k; ++s) {
                    t.index.push_back(static_cast<int>(o * k + s));
                    t.weight.push_back(1.0 / static_cast<double>(k));
                }
            }
            break;
        case DownsampleMethod::bilinear:
            t.taps = 2;
            for (std::size_t o = 0; o < out_size; ++o) {
                double src = (static_cast<double>(o) + 0.5) * static_cast<double>(k) - 0.5;
                if (src < 0.0) src = 0.0;
                const auto i0 = static_cast<std::size_t>(std::floor(src));
                const std::size_t i1 = std::min(i0 + 1, in_size - 1);
                const double frac = src - static_cast<double>(i0);
                t.index.push_back(static_cast<int>(i0));
                t.weight.push_back(1.0 - frac);
                t.index.push_back(static_cast<int>(i1));
                t.weight.push_back(frac);
            }
            break;
    }
    return t;
}

ImageD separable_resample(const ImageD& image, const AxisTaps& rows, std::size_t out_h,
                          const AxisTaps& cols, std::size_t out_w) {
    const std::size_t in_w = image.width();
    ImageD tmp(image.channels(), out_h, in_w);
    for (std::size_t c = 0; c < image.channels(); ++c) {
        for (std::size_t o = 0; o < out_h; ++o) {
            for (std::size_t x = 0; x < in_w; ++x) {
                double acc = 0.0;
                for (std::size_t t = 0; t < rows.taps; ++t) {
                    const std::size_t j = o * rows.taps + t;
                    acc += rows.weight[j] * image(c, static_cast<std::size_t>(rows.index[j]), x);
                }
                tmp(c, o, x) = acc;
            }
        }
    }
    ImageD out(image.channels(), out_h, out_w);
    for (std::size_t c = 0; c < image.channels(); ++c) {
        for (std::size_t r = 0; r < out_h; ++r) {
            for (std::size_t o = 0; o < out_w; ++o) {
                double acc = 0.0;
                for (std::size_t t = 0; t < cols.taps; ++t) {
                    const std::size_t j = o * cols.taps + t;
                    acc += cols.weight[j] * tmp(c, r, static_cast<std::size_t>(cols.index[j]));
                }
                out(c, r, o) = acc;
            }
        }
    }
    return out;
}

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

int reflect101(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

}  // namespace

ImageD decimate(const ImageD& image, std::size_t k_rows, std::size_t k_cols) {
    if (k_rows == 0 || k_cols == 0 || image.height() % k_rows != 0 || image.width() % k_cols != 0) {
        throw ParameterError("decimation factor must divide the image size");
    }
    ImageD out(image.channels(), image.height() / k_rows, image.width() / k_cols);
    for (std::size_t c = 0; c < image.channels(); ++c) {
        for (std::size_t r = 0; r < out.height(); ++r) {
            for (std::size_t q = 0; q < out.width(); ++q) out(c, r, q) = image(c, r * k_rows, q * k_cols);
        }
    }
    return out;
}

ImageD upsample_nearest(const ImageD& image, std::size_t factor) {
    if (factor == 0) throw ParameterError("up-sampling factor must be positive");
    ImageD out(image.channels(), image.height() * factor, image.width() * factor);
    for (std::size_t c = 0; c < image.channels(); ++c) {
        for (std::size_t r = 0; r < out.height(); ++r) {
            for (std::size_t q = 0; q < out.width(); ++q) out(c, r, q) = image(c, r / factor, q / factor);
        }
    }
    return out;
}

ImageD downsample(const ImageD& image, std::size_t out_side, DownsampleMethod method) {
    if (out_side == 0 || out_side > std::min(image.height(), image.width())) {
        throw ParameterError("down-sampling target " + std::to_string(out_side) +
                             " must be positive and at most the input side");
    }
    if (out_side == image.height() && out_side == image.width()) return image;

    // Reduce each axis ratio out/in = m/k; an axis with m > 1 needs the
    // up-then-down construction.
    const std::size_t gh = std::gcd(out_side, image.height());
    const std::size_t gw = std::gcd(out_side, image.width());
    const std::size_t up_h = out_side / gh;
    const std::size_t up_w = out_side / gw;
    if (up_h != 1 || up_w != 1) {
        if (up_h != up_w) {
            throw ParameterError("non-integer down-sampling requires a square input");
        }
        return downsample(upsample_nearest(image, up_h), out_side, method);
    }
    const std::size_t kh = image.height() / out_side;
    const std::size_t kw = image.width() / out_side;
    return separable_resample(image, integer_taps(kh, method, image.height(), out_side), out_side,
                              integer_taps(kw, method, image.width(), out_side), out_side);
}

std::vector<double> lanczos_weights(std::size_t in_size, std::size_t out_size, int lobes,
                                    std::vector<int>& tap_index, std::size_t& taps_per_output) {
    if (lobes < 1) throw ParameterError("windowed-sinc lobe count must be at least 1");
    if (out_size == 0 || out_size > in_size) {
        throw ParameterError("windowed-sinc output size must lie in [1, input size]");
    }
    const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
    const double support = static_cast<double>(lobes) * scale;
    const int reach = static_cast<int>(std::ceil(support));
    taps_per_output = static_cast<std::size_t>(2 * reach + 1);
    std::vector<double> weights(out_size * taps_per_output, 0.0);
    tap_index.assign(out_size * taps_per_output, 0);
    for (std::size_t o = 0; o < out_size; ++o) {
        const double center = static_cast<double>(o) * scale;
        const int base = static_cast<int>(std::floor(center));
        double total = 0.0;
        for (int t = 0; t < static_cast<int>(taps_per_output); ++t) {
            const int src = base - reach + t;
            const double dist = (static_cast<double>(src) - center) / scale;
            double w = 0.0;
            if (std::abs(dist) < static_cast<double>(lobes)) w = sinc(dist) * sinc(dist / lobes);
            const std::size_t j = o * taps_per_output + static_cast<std::size_t>(t);
            weights[j] = w;
            tap_index[j] = reflect101(src, static_cast<int>(in_size));
            total += w;
        }
        for (std::size_t t = 0; t < taps_per_output; ++t) weights[o * taps_per_output + t] /= total;
    }
    return weights;
}

ImageD efficient_lowfreq_downsample(const ImageD& image, int bandwidth, const LowFreqPath& path) {
    if (bandwidth <= 0 || bandwidth % 2 != 0) {
        throw ParameterError("bandwidth must be a positive even number, got " + std::to_string(bandwidth));
    }
    const auto band = static_cast<std::size_t>(bandwidth);
    if (band > std::min(image.height(), image.width())) {
        throw ParameterError("bandwidth " + std::to_string(bandwidth) + " exceeds the image side");
    }
    if (band == image.height() && band == image.width()) return image;

    if (std::holds_alternative<ExactPath>(path)) {
        if (image.height() % band != 0 || image.width() % band != 0) {
            throw ParameterError("exact low-frequency down-sampling needs an integer ratio H/B; " +
                                 std::to_string(image.height()) + "/" + std::to_string(bandwidth) +
                                 " is not, use the windowed-sinc path instead");
        }
        const ImageD filtered = apply_filter(image, FilterSpec::square(bandwidth));
        return decimate(filtered, image.height() / band, image.width() / band);
    }

    const int lobes = std::get<WindowedSincPath>(path).lobes;
    AxisTaps rows;
    rows.weight = lanczos_weights(image.height(), band, lobes, rows.index, rows.taps);
    AxisTaps cols;
    cols.weight = lanczos_weights(image.width(), band, lobes, cols.index, cols.taps);
    return separable_resample(image, rows, band, cols, band);
}

}  // namespace fcl::spectral

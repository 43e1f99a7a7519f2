// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numbers>

#include "fcl/error.hpp"
#include "fcl/pipeline/dataset.hpp"
#include "fcl/rng.hpp"

namespace fcl::pipeline {

namespace {

constexpr int kClasses = 10;
constexpr int kSuper = 4;  // supersampling per axis for anti-aliased edges

// Membership tests in the shape's local frame, unit half-size.
bool inside(int cls, double x, double y) {
    const double ax = std::abs(x), ay = std::abs(y);
    switch (cls) {
        case 0:  // disk
            return x * x + y * y <= 1.0;
        case 1:  // square
            return ax <= 0.85 && ay <= 0.85;
        case 2:  // triangle, apex up
            return y <= 0.8 && y >= -0.8 && ax <= (y + 0.8) * 0.62;
        case 3: {  // ring
            const double r = std::sqrt(x * x + y * y);
            return r <= 1.0 && r >= 0.55;
        }
        case 4:  // plus sign
            return (ax <= 1.0 && ay <= 0.3) || (ax <= 0.3 && ay <= 1.0);
        case 5:  // horizontal bars
            return ax <= 0.9 && ay <= 0.9 && std::fmod(y + 0.9, 0.6) < 0.3;
        case 6:  // vertical bars
            return ax <= 0.9 && ay <= 0.9 && std::fmod(x + 0.9, 0.6) < 0.3;
        case 7:  // checkerboard patch
            return ax <= 0.9 && ay <= 0.9 &&
                   ((static_cast<int>(std::floor((x + 0.9) / 0.45)) + static_cast<int>(std::floor((y + 0.9) / 0.45))) % 2 == 0);
        case 8:  // two disks side by side
            return (x - 0.5) * (x - 0.5) + y * y <= 0.2 || (x + 0.5) * (x + 0.5) + y * y <= 0.2;
        case 9:  // diamond
            return ax + ay <= 1.0;
        default:
            return false;
    }
}

}  // namespace

Dataset synthetic_shapes(std::size_t count, std::uint64_t seed, std::size_t side) {
    if (side < 8 || side % 2) throw ParameterError("synthetic side must be even and at least 8");
    const std::size_t plane = side * side;
    std::vector<std::uint8_t> pixels(count * 3 * plane);
    std::vector<int> labels(count);
    const double s = static_cast<double>(side);
    std::vector<double> img(3 * plane);

    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, {i}));
        const int cls = static_cast<int>(i % kClasses);
        labels[i] = cls;

        // Smooth background: base colour plus two random low-frequency waves per channel.
        double base[3];
        for (double& b : base) b = uniform(rng, 0.25, 0.75);
        for (int c = 0; c < 3; ++c) {
            double amp[2], fx[2], fy[2], ph[2];
            for (int k = 0; k < 2; ++k) {
                amp[k] = uniform(rng, 0.0, 0.12);
                fx[k] = uniform(rng, -1.5, 1.5);
                fy[k] = uniform(rng, -1.5, 1.5);
                ph[k] = uniform(rng, 0.0, 2 * std::numbers::pi);
            }
            for (std::size_t r = 0; r < side; ++r)
                for (std::size_t q = 0; q < side; ++q) {
                    double v = base[c];
                    for (int k = 0; k < 2; ++k)
                        v += amp[k] * std::sin(2 * std::numbers::pi * (fx[k] * r + fy[k] * q) / s + ph[k]);
                    img[c * plane + r * side + q] = v;
                }
        }

        // A small distractor blob, then the class shape on top.
        auto paint = [&](int shape, double cx, double cy, double half, double angle, const double colour[3]) {
            const double ca = std::cos(angle), sa = std::sin(angle);
            const int lo_r = std::max(0, static_cast<int>(std::floor(cy - 1.5 * half)));
            const int hi_r = std::min(static_cast<int>(side) - 1, static_cast<int>(std::ceil(cy + 1.5 * half)));
            const int lo_q = std::max(0, static_cast<int>(std::floor(cx - 1.5 * half)));
            const int hi_q = std::min(static_cast<int>(side) - 1, static_cast<int>(std::ceil(cx + 1.5 * half)));
            for (int r = lo_r; r <= hi_r; ++r)
                for (int q = lo_q; q <= hi_q; ++q) {
                    int hits = 0;
                    for (int a = 0; a < kSuper; ++a)
                        for (int b = 0; b < kSuper; ++b) {
                            const double py = r + (a + 0.5) / kSuper - 0.5 - cy;
                            const double px = q + (b + 0.5) / kSuper - 0.5 - cx;
                            const double lx = (ca * px + sa * py) / half;
                            const double ly = (-sa * px + ca * py) / half;
                            hits += inside(shape, lx, ly) ? 1 : 0;
                        }
                    const double cover = static_cast<double>(hits) / (kSuper * kSuper);
                    for (int c = 0; c < 3; ++c) {
                        double& v = img[c * plane + static_cast<std::size_t>(r) * side + static_cast<std::size_t>(q)];
                        v = (1 - cover) * v + cover * colour[c];
                    }
                }
        };

        double blob[3];
        for (double& b : blob) b = uniform(rng, 0.0, 1.0);
        const double bh = uniform(rng, 0.06, 0.1) * s;
        paint(0, uniform(rng, 0, s), uniform(rng, 0, s), bh, 0.0, blob);

        const double half = uniform(rng, 0.2, 0.34) * s;
        const double cx = uniform(rng, 0.35 * s, 0.65 * s);
        const double cy = uniform(rng, 0.35 * s, 0.65 * s);
        const double angle = uniform(rng, -20.0, 20.0) * std::numbers::pi / 180.0;
        double colour[3];
        const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
        for (int c = 0; c < 3; ++c) colour[c] = std::clamp(base[c] + sign * uniform(rng, 0.25, 0.5), 0.0, 1.0);
        paint(cls, cx, cy, half, angle, colour);

        // Pixel noise (Box-Muller on the portable uniform stream).
        for (std::size_t k = 0; k < img.size(); k += 2) {
            const double u1 = std::max(uniform01(rng), 1e-12), u2 = uniform01(rng);
            const double rad = std::sqrt(-2.0 * std::log(u1)) * 0.06;
            img[k] += rad * std::cos(2 * std::numbers::pi * u2);
            if (k + 1 < img.size()) img[k + 1] += rad * std::sin(2 * std::numbers::pi * u2);
        }
        for (std::size_t k = 0; k < img.size(); ++k) {
            pixels[i * 3 * plane + k] = static_cast<std::uint8_t>(std::lround(std::clamp(img[k], 0.0, 1.0) * 255.0));
        }
    }
    Dataset d(3, side, side, std::move(pixels), std::move(labels), kClasses);
    d.origin = "synthetic:" + std::to_string(seed);
    return d;
}

}  // namespace fcl::pipeline

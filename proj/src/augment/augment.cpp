// SPDX-License-Identifier: Apache-2.0
#include "fcl/augment.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "fcl/error.hpp"

namespace fcl::augment {

namespace {

constexpr double kMaxRotateDeg = 30.0;
constexpr double kMaxShear = 0.3;
constexpr double kMaxTranslate = 0.45;  // fraction of the side
constexpr double kMaxEnhance = 0.9;
constexpr double kMaxPosterizeBits = 4.0;

int reflect101(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

double sample_bilinear(const ImageD& img, std::size_t c, double r, double q) {
    const int h = static_cast<int>(img.height());
    const int w = static_cast<int>(img.width());
    const double rf = std::floor(r);
    const double qf = std::floor(q);
    const double fr = r - rf;
    const double fq = q - qf;
    const int r0 = static_cast<int>(rf);
    const int q0 = static_cast<int>(qf);
    auto px = [&](int a, int b) {
        return img(c, static_cast<std::size_t>(reflect101(a, h)), static_cast<std::size_t>(reflect101(b, w)));
    };
    return (1 - fr) * ((1 - fq) * px(r0, q0) + fq * px(r0, q0 + 1)) +
           fr * ((1 - fq) * px(r0 + 1, q0) + fq * px(r0 + 1, q0 + 1));
}

// Inverse-mapped affine warp: out(r, q) = in(a*r + b*q + e, c*r + d*q + f)
// with coordinates relative to the image center.
ImageD warp(const ImageD& img, double a, double b, double c, double d, double e, double f) {
    ImageD out(img.channels(), img.height(), img.width());
    const double cr = (static_cast<double>(img.height()) - 1) / 2;
    const double cq = (static_cast<double>(img.width()) - 1) / 2;
    for (std::size_t ch = 0; ch < img.channels(); ++ch) {
        for (std::size_t r = 0; r < img.height(); ++r) {
            for (std::size_t q = 0; q < img.width(); ++q) {
                const double dr = static_cast<double>(r) - cr;
                const double dq = static_cast<double>(q) - cq;
                out(ch, r, q) = sample_bilinear(img, ch, cr + a * dr + b * dq + e, cq + c * dr + d * dq + f);
            }
        }
    }
    return out;
}

}  // namespace

std::string_view op_name(Op op) {
    switch (op) {
        case Op::rotate: return "rotate";
        case Op::shear_x: return "shear_x";
        case Op::shear_y: return "shear_y";
        case Op::translate_x: return "translate_x";
        case Op::translate_y: return "translate_y";
        case Op::brightness: return "brightness";
        case Op::contrast: return "contrast";
        case Op::solarize: return "solarize";
        case Op::posterize: return "posterize";
    }
    return "?";
}

Op op_from_name(std::string_view name) {
    for (Op op : kAllOps) {
        if (op_name(op) == name) return op;
    }
    throw ParameterError("unknown augmentation op '" + std::string(name) + "'");
}

void AugmentPolicy::validate() const {
    if (ops.empty()) throw ParameterError("augmentation policy needs at least one op");
    if (n < 1) throw ParameterError("augmentation policy n must be at least 1");
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("augmentation probability must lie in [0, 1]");
    if (!(m_max > 0.0)) throw ParameterError("augmentation m_max must be positive");
}

double magnitude_at(double progress, double m0) {
    if (!(progress >= 0.0 && progress <= 1.0)) {
        throw ParameterError("progress must lie in [0, 1], got " + std::to_string(progress));
    }
    return progress * m0;
}

ImageD apply_op(const ImageD& image, Op op, double m, bool negate) {
    if (m < 0.0) throw ParameterError("augmentation magnitude must be non-negative");
    if (m == 0.0) return image;
    const double level = m / 10.0;
    const double sign = negate ? -1.0 : 1.0;
    switch (op) {
        case Op::rotate: {
            const double t = sign * kMaxRotateDeg * level * std::numbers::pi / 180.0;
            return warp(image, std::cos(t), std::sin(t), -std::sin(t), std::cos(t), 0, 0);
        }
        case Op::shear_x:
            return warp(image, 1, 0, sign * kMaxShear * level, 1, 0, 0);
        case Op::shear_y:
            return warp(image, 1, sign * kMaxShear * level, 0, 1, 0, 0);
        case Op::translate_x:
            return warp(image, 1, 0, 0, 1, 0, -sign * kMaxTranslate * level * static_cast<double>(image.width()));
        case Op::translate_y:
            return warp(image, 1, 0, 0, 1, -sign * kMaxTranslate * level * static_cast<double>(image.height()), 0);
        case Op::brightness: {
            ImageD out = image;
            const double factor = 1.0 + sign * kMaxEnhance * level;
            for (auto& v : out.data()) v *= factor;
            return out;
        }
        case Op::contrast: {
            ImageD out = image;
            const double factor = 1.0 + sign * kMaxEnhance * level;
            const double mean = std::accumulate(image.data().begin(), image.data().end(), 0.0) /
                                static_cast<double>(image.size());
            for (auto& v : out.data()) v = mean + (v - mean) * factor;
            return out;
        }
        case Op::solarize: {
            ImageD out = image;
            const double threshold = 1.0 - level;
            for (auto& v : out.data()) {
                if (v > threshold) v = 1.0 - v;
            }
            return out;
        }
        case Op::posterize: {
            const int drop = static_cast<int>(std::lround(kMaxPosterizeBits * level));
            if (drop == 0) return image;
            ImageD out = image;
            for (auto& v : out.data()) {
                const int q = static_cast<int>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
                v = static_cast<double>((q >> drop) << drop) / 255.0;
            }
            return out;
        }
    }
    return image;
}

ImageD apply_randaug(const ImageD& image, const AugmentPolicy& policy, double m, Rng& rng) {
    policy.validate();
    if (m > policy.m_max) {
        throw ParameterError("magnitude " + std::to_string(m) + " exceeds m_max " + std::to_string(policy.m_max));
    }
    ImageD out = image;
    for (int i = 0; i < policy.n; ++i) {
        // Draws are unconditional so the stream position does not depend on m.
        const Op op = policy.ops[uniform_index(rng, policy.ops.size())];
        const bool apply = uniform01(rng) < policy.p;
        const bool negate = uniform01(rng) < 0.5;
        if (apply) out = apply_op(out, op, m, negate);
    }
    clamp_unit(out);
    return out;
}

double sample_beta(double alpha, Rng& rng) {
    if (!(alpha > 0.0)) throw ParameterError("beta parameter must be positive");
    std::gamma_distribution<double> gamma(alpha, 1.0);
    const double x = gamma(rng);
    const double y = gamma(rng);
    return (x + y) > 0.0 ? x / (x + y) : 0.5;
}

MixupResult mixup(const Batch& batch, std::size_t classes, double alpha, Rng& rng,
                  std::optional<double> forced_lambda) {
    if (!(alpha > 0.0)) throw ParameterError("mixup alpha must be positive");
    MixupResult result{batch, 1.0};
    if (batch.count < 2) return result;
    const double lam = forced_lambda ? *forced_lambda : sample_beta(alpha, rng);
    result.lambda = lam;

    std::vector<std::size_t> perm(batch.count);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, i + 1)]);

    // Current soft targets (one-hot if the batch had none).
    std::vector<float> targets(batch.count * classes, 0.0f);
    if (batch.has_soft_labels()) {
        targets = batch.soft;
    } else {
        for (std::size_t i = 0; i < batch.count; ++i) {
            const int label = batch.labels[i];
            if (label < 0 || static_cast<std::size_t>(label) >= classes) throw ParameterError("label out of range");
            targets[i * classes + static_cast<std::size_t>(label)] = 1.0f;
        }
    }
    const std::size_t s = batch.sample_size();
    Batch& out = result.batch;
    out.soft.assign(batch.count * classes, 0.0f);
    out.classes = classes;
    const auto l = static_cast<float>(lam);
    for (std::size_t i = 0; i < batch.count; ++i) {
        const std::size_t j = perm[i];
        for (std::size_t k = 0; k < s; ++k) {
            out.inputs[i * s + k] = l * batch.inputs[i * s + k] + (1.0f - l) * batch.inputs[j * s + k];
        }
        for (std::size_t k = 0; k < classes; ++k) {
            out.soft[i * classes + k] = l * targets[i * classes + k] + (1.0f - l) * targets[j * classes + k];
        }
    }
    return result;
}

CropBox sample_crop_box(std::size_t height, std::size_t width, const CropOptions& o, Rng& rng) {
    const double area = static_cast<double>(height * width);
    const double log_lo = std::log(o.min_aspect);
    const double log_hi = std::log(o.max_aspect);
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double target = area * uniform(rng, o.min_area, o.max_area);
        const double aspect = std::exp(uniform(rng, log_lo, log_hi));
        const double w = std::sqrt(target * aspect);
        const double h = std::sqrt(target / aspect);
        if (w <= static_cast<double>(width) && h <= static_cast<double>(height)) {
            const double top = uniform(rng, 0.0, static_cast<double>(height) - h);
            const double left = uniform(rng, 0.0, static_cast<double>(width) - w);
            return {top, left, h, w};
        }
    }
    return {0.0, 0.0, static_cast<double>(height), static_cast<double>(width)};
}

ImageD resize_box(const ImageD& image, const CropBox& box, std::size_t side) {
    ImageD out(image.channels(), side, side);
    const double sr = box.height / static_cast<double>(side);
    const double sq = box.width / static_cast<double>(side);
    const double hmax = static_cast<double>(image.height()) - 1;
    const double wmax = static_cast<double>(image.width()) - 1;
    for (std::size_t c = 0; c < image.channels(); ++c) {
        for (std::size_t r = 0; r < side; ++r) {
            const double y = std::clamp(box.top + (static_cast<double>(r) + 0.5) * sr - 0.5, 0.0, hmax);
            for (std::size_t q = 0; q < side; ++q) {
                const double x = std::clamp(box.left + (static_cast<double>(q) + 0.5) * sq - 0.5, 0.0, wmax);
                out(c, r, q) = sample_bilinear(image, c, y, x);
            }
        }
    }
    return out;
}

ImageD baseline_augment(const ImageD& image, std::size_t target_side, Rng& rng, const CropOptions& options) {
    if (target_side == 0) throw ParameterError("baseline_augment: target side must be positive");
    const CropBox box = sample_crop_box(image.height(), image.width(), options, rng);
    const bool flip = uniform01(rng) < options.flip_p;
    const bool whole = box.top == 0.0 && box.left == 0.0 && box.height == static_cast<double>(image.height()) &&
                       box.width == static_cast<double>(image.width());
    ImageD out = (whole && target_side == image.height() && target_side == image.width())
                     ? image
                     : resize_box(image, box, target_side);
    if (flip) {
        for (std::size_t c = 0; c < out.channels(); ++c)
            for (std::size_t r = 0; r < out.height(); ++r)
                for (std::size_t q = 0; q < out.width() / 2; ++q) std::swap(out(c, r, q), out(c, r, out.width() - 1 - q));
    }
    return out;
}

}  // namespace fcl::augment

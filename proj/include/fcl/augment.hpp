// SPDX-License-Identifier: Apache-2.0
//
// RandAug-style magnitude-parameterized augmentation, the linear magnitude
// ramp, mixup and the baseline random-resized-crop + flip.
//
// Magnitude maps (m on the 0..10 scale, sign drawn at random for the
// symmetric ops):
//   rotate        30 deg * m/10
//   shear_x/y     0.3 * m/10
//   translate_x/y 0.45 * side * m/10 pixels
//   brightness    x * (1 +- 0.9 m/10)
//   contrast      mean + (x - mean) * (1 +- 0.9 m/10)
//   solarize      x > 1 - m/10  ->  1 - x
//   posterize     drop round(4 m/10) of 8 bits
// Every op is the exact identity at m = 0.
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fcl/batch.hpp"
#include "fcl/image.hpp"
#include "fcl/rng.hpp"

namespace fcl::augment {

enum class Op { rotate, shear_x, shear_y, translate_x, translate_y, brightness, contrast, solarize, posterize };

inline constexpr std::array<Op, 9> kAllOps = {Op::rotate,      Op::shear_x,    Op::shear_y,
                                              Op::translate_x, Op::translate_y, Op::brightness,
                                              Op::contrast,    Op::solarize,   Op::posterize};

std::string_view op_name(Op op);
Op op_from_name(std::string_view name);  // ParameterError on unknown names

struct AugmentPolicy {
    std::vector<Op> ops{kAllOps.begin(), kAllOps.end()};
    int n = 2;
    double p = 0.5;
    double m_max = 10.0;

    void validate() const;
};

/// progress * m0, with progress in [0, 1].
double magnitude_at(double progress, double m0);

/// One op at magnitude m. `negate` flips the direction of the symmetric ops.
/// No clamping here; apply_randaug clamps its result.
ImageD apply_op(const ImageD& image, Op op, double m, bool negate);

ImageD apply_randaug(const ImageD& image, const AugmentPolicy& policy, double m, Rng& rng);

struct MixupResult {
    Batch batch;
    double lambda = 1.0;
};

/// Mixes the batch with a random permutation of itself. Labels become soft
/// (N x classes). `forced_lambda` bypasses the Beta draw (tests). A batch of
/// one passes through unchanged.
MixupResult mixup(const Batch& batch, std::size_t classes, double alpha, Rng& rng,
                  std::optional<double> forced_lambda = std::nullopt);

/// Draw from Beta(alpha, alpha) via two gamma variates.
double sample_beta(double alpha, Rng& rng);

struct CropOptions {
    double min_area = 0.67;
    double max_area = 1.0;
    double min_aspect = 3.0 / 4.0;
    double max_aspect = 4.0 / 3.0;
    double flip_p = 0.5;
};

struct CropBox {
    double top = 0, left = 0, height = 0, width = 0;
};

/// Samples a crop box inside an H x W frame (10 attempts, then the whole frame).
CropBox sample_crop_box(std::size_t height, std::size_t width, const CropOptions& options, Rng& rng);

/// Bilinear resize of the given box to side x side.
ImageD resize_box(const ImageD& image, const CropBox& box, std::size_t side);

ImageD baseline_augment(const ImageD& image, std::size_t target_side, Rng& rng, const CropOptions& options = {});

}  // namespace fcl::augment

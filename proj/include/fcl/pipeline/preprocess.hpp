// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>

#include "fcl/augment.hpp"
#include "fcl/image.hpp"
#include "fcl/rng.hpp"
#include "fcl/spectral/spectral.hpp"

namespace fcl::pipeline {

/// How a stage shrinks the augmented full-size sample to its bandwidth.
enum class ResampleMethod {
    windowed_sinc,  ///< separable Lanczos, any ratio
    exact,          ///< square low-pass + decimation, integer ratios only
    crop,           ///< low-frequency crop of the spectrum, any even B
};

ResampleMethod resample_from_name(const std::string& name);
std::string resample_name(ResampleMethod method);

struct PreprocessOptions {
    int final_size = 32;
    bool baseline_augment = true;
    augment::CropOptions crop;
    bool randaug = true;
    augment::AugmentPolicy policy;
    double m0 = 9.0;
    bool ramp_magnitude = true;  // false: constant m0 (the plain baseline recipe)
    ResampleMethod resample = ResampleMethod::windowed_sinc;
    int lobes = 3;
    double mixup_alpha = 0.0;  // > 0 mixes every fresh batch (soft labels)
    /// Frequency filter on the training input after resampling (probe runs).
    /// Filtered inputs skip the final clamp, like filtered evaluation.
    std::optional<spectral::FilterSpec> train_filter;
};

/// Augment at full size, then reduce to `bandwidth`. Returns the tensor
/// before the final [0, 1] clamp so spectral properties can be inspected.
ImageD preprocess_unclamped(const ImageD& sample, int bandwidth, double progress, const PreprocessOptions& options,
                            Rng& rng);

/// preprocess_unclamped followed by the clamp to [0, 1] (skipped for filtered inputs).
ImageD preprocess(const ImageD& sample, int bandwidth, double progress, const PreprocessOptions& options, Rng& rng);

/// Reduce without augmentation (evaluation at a non-final bandwidth).
ImageD resample_to(const ImageD& image, int bandwidth, ResampleMethod method, int lobes);

/// Seed of the augmentation stream for one sample occurrence.
inline std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index) {
    return derive_seed(seed, {epoch, index});
}

}  // namespace fcl::pipeline

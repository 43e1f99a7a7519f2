// SPDX-License-Identifier: Apache-2.0
#include "fcl/pipeline/preprocess.hpp"

#include "fcl/error.hpp"
#include "fcl/spectral/spectral.hpp"

namespace fcl::pipeline {

ResampleMethod resample_from_name(const std::string& name) {
    if (name == "windowed_sinc") return ResampleMethod::windowed_sinc;
    if (name == "exact") return ResampleMethod::exact;
    if (name == "crop") return ResampleMethod::crop;
    throw ParameterError("unknown resample method '" + name + "' (expected windowed_sinc, exact or crop)");
}

std::string resample_name(ResampleMethod method) {
    switch (method) {
        case ResampleMethod::windowed_sinc: return "windowed_sinc";
        case ResampleMethod::exact: return "exact";
        case ResampleMethod::crop: return "crop";
    }
    return "?";
}

ImageD resample_to(const ImageD& image, int bandwidth, ResampleMethod method, int lobes) {
    if (bandwidth <= 0 || static_cast<std::size_t>(bandwidth) > std::min(image.height(), image.width())) {
        throw ParameterError("bandwidth " + std::to_string(bandwidth) + " exceeds the sample side " +
                             std::to_string(std::min(image.height(), image.width())));
    }
    switch (method) {
        case ResampleMethod::windowed_sinc:
            return spectral::efficient_lowfreq_downsample(image, bandwidth, spectral::WindowedSincPath{lobes});
        case ResampleMethod::exact:
            return spectral::efficient_lowfreq_downsample(image, bandwidth, spectral::ExactPath{});
        case ResampleMethod::crop:
            return spectral::low_freq_crop(image, bandwidth);
    }
    return image;
}

ImageD preprocess_unclamped(const ImageD& sample, int bandwidth, double progress, const PreprocessOptions& o,
                            Rng& rng) {
    const auto side = static_cast<std::size_t>(o.final_size);
    ImageD x = o.baseline_augment ? augment::baseline_augment(sample, side, rng, o.crop)
                                  : (sample.height() == side && sample.width() == side
                                         ? sample
                                         : augment::resize_box(sample,
                                                               {0, 0, static_cast<double>(sample.height()),
                                                                static_cast<double>(sample.width())},
                                                               side));
    if (o.randaug) {
        const double m = o.ramp_magnitude ? augment::magnitude_at(progress, o.m0) : o.m0;
        x = augment::apply_randaug(x, o.policy, m, rng);
    }
    x = resample_to(x, bandwidth, o.resample, o.lobes);
    if (o.train_filter) x = spectral::apply_filter(x, *o.train_filter);
    return x;
}

ImageD preprocess(const ImageD& sample, int bandwidth, double progress, const PreprocessOptions& options, Rng& rng) {
    ImageD x = preprocess_unclamped(sample, bandwidth, progress, options, rng);
    if (!options.train_filter) clamp_unit(x);
    return x;
}

}  // namespace fcl::pipeline

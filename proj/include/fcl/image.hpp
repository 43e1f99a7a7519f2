// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fcl/error.hpp"

namespace fcl {

/// Real-valued C x H x W sample array, row-major. Height and width must be
/// even; the spectral index math assumes a centered layout with a single
/// unmirrored Nyquist row/column.
template <typename T>
class Image {
public:
    using value_type = T;

    Image() = default;

    Image(std::size_t channels, std::size_t height, std::size_t width, T fill = T{0})
        : channels_(channels), height_(height), width_(width) {
        validate(channels, height, width);
        data_.assign(channels * height * width, fill);
    }

    Image(std::size_t channels, std::size_t height, std::size_t width, std::vector<T> data)
        : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
        validate(channels, height, width);
        if (data_.size() != channels * height * width) {
            throw SizeError("image data length " + std::to_string(data_.size()) +
                            " does not match " + std::to_string(channels) + "x" +
                            std::to_string(height) + "x" + std::to_string(width));
        }
    }

    std::size_t channels() const noexcept { return channels_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t plane_size() const noexcept { return height_ * width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t c, std::size_t row, std::size_t col) {
        return data_[(c * height_ + row) * width_ + col];
    }
    const T& operator()(std::size_t c, std::size_t row, std::size_t col) const {
        return data_[(c * height_ + row) * width_ + col];
    }

    std::span<T> plane(std::size_t c) { return {data_.data() + c * plane_size(), plane_size()}; }
    std::span<const T> plane(std::size_t c) const {
        return {data_.data() + c * plane_size(), plane_size()};
    }

    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    bool same_shape(const Image& other) const noexcept {
        return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    static void validate(std::size_t channels, std::size_t height, std::size_t width) {
        if (channels == 0 || height == 0 || width == 0) {
            throw SizeError("image dimensions must be positive");
        }
        if (height % 2 != 0 || width % 2 != 0) {
            throw SizeError("image height and width must be even, got " + std::to_string(height) +
                            "x" + std::to_string(width));
        }
    }

    std::size_t channels_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<T> data_;
};

using ImageD = Image<double>;
using ImageF = Image<float>;

template <typename To, typename From>
Image<To> image_cast(const Image<From>& src) {
    std::vector<To> out(src.size());
    std::transform(src.data().begin(), src.data().end(), out.begin(),
                   [](From v) { return static_cast<To>(v); });
    return Image<To>(src.channels(), src.height(), src.width(), std::move(out));
}

template <typename T>
void clamp_unit(Image<T>& img) {
    for (auto& v : img.data()) v = std::clamp(v, T{0}, T{1});
}

}  // namespace fcl

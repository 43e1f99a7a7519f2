// SPDX-License-Identifier: Apache-2.0
//
// Labeled image sources. Samples decode lazily from an in-memory copy of
// the file payload; pixel values are scaled to [0, 1].
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fcl/image.hpp"

namespace fcl::pipeline {

enum class DatasetFormat { idx, cifar10_bin, rten_dir };

DatasetFormat format_from_name(const std::string& name);
std::string format_name(DatasetFormat format);

enum class Split { train, val };

class Dataset {
public:
    Dataset() = default;

    /// 8-bit samples, N x C x H x W row-major.
    Dataset(std::size_t channels, std::size_t height, std::size_t width, std::vector<std::uint8_t> pixels,
            std::vector<int> labels, std::size_t classes);
    /// Real-valued samples, already in [0, 1] (RTEN sources).
    Dataset(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> pixels,
            std::vector<int> labels, std::size_t classes);

    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t classes() const noexcept { return classes_; }

    ImageD sample(std::size_t index) const;
    /// Same sample straight into float storage (no intermediate image).
    void sample_into(std::size_t index, float* out) const;
    int label(std::size_t index) const { return labels_.at(index); }
    const std::vector<int>& labels() const noexcept { return labels_; }

    /// First `count` samples (or every `stride`-th) as a new dataset.
    Dataset subset(std::size_t begin, std::size_t count) const;

    Split split = Split::train;
    std::string origin;

private:
    std::size_t channels_ = 0, height_ = 0, width_ = 0, classes_ = 0;
    std::vector<std::uint8_t> bytes_;
    std::vector<float> floats_;
    std::vector<int> labels_;
};

struct DatasetSpec {
    DatasetFormat format = DatasetFormat::cifar10_bin;
    std::vector<std::filesystem::path> paths;  // CIFAR: one or more batch files; IDX: images file; RTEN: directory
    std::filesystem::path labels;              // IDX only; derived from the images name when empty
    std::size_t class_count = 0;               // 0 = infer (max label + 1, or 10 for CIFAR)
    std::size_t limit = 0;                     // keep only the first `limit` samples (0 = all)
    Split split = Split::train;
};

Dataset open_dataset(const DatasetSpec& spec);

// Readers for the individual formats. All throw FormatError with the byte
// offset of the first inconsistency.
Dataset read_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t classes = 0);
Dataset read_cifar10(const std::vector<std::filesystem::path>& files, std::size_t classes = 10);
Dataset read_rten_dir(const std::filesystem::path& dir, std::size_t classes = 0);

// Writers (fixtures, the synthetic generator and the transform tool).
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels, const Dataset& data);
void write_cifar10(const std::filesystem::path& file, const Dataset& data);
void write_rten_dir(const std::filesystem::path& dir, const Dataset& data);

/// Deterministic 10-class 3 x 32 x 32 shape dataset used in place of CIFAR-10
/// where the real files are unavailable. Each class is a geometric shape
/// family rendered at random position, scale, rotation and colour over a
/// smooth random background with pixel noise.
Dataset synthetic_shapes(std::size_t count, std::uint64_t seed, std::size_t side = 32);

}  // namespace fcl::pipeline

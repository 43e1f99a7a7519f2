// SPDX-License-Identifier: Apache-2.0
#include "fcl/pipeline/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "fcl/error.hpp"
#include "fcl/rten.hpp"

namespace fcl::pipeline {

namespace fs = std::filesystem;

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off) {
    return (static_cast<std::uint32_t>(b[off]) << 24) | (static_cast<std::uint32_t>(b[off + 1]) << 16) |
           (static_cast<std::uint32_t>(b[off + 2]) << 8) | static_cast<std::uint32_t>(b[off + 3]);
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 24));
    b.push_back(static_cast<std::uint8_t>(v >> 16));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}

std::size_t infer_classes(const std::vector<int>& labels, std::size_t declared) {
    int max_label = -1;
    for (int l : labels) max_label = std::max(max_label, l);
    const std::size_t inferred = static_cast<std::size_t>(max_label + 1);
    if (declared == 0) return inferred;
    if (inferred > declared) {
        throw FormatError("label " + std::to_string(max_label) + " outside declared class count " +
                              std::to_string(declared),
                          0);
    }
    return declared;
}

constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarRecord = 1 + 3 * kCifarSide * kCifarSide;

}  // namespace

DatasetFormat format_from_name(const std::string& name) {
    if (name == "idx") return DatasetFormat::idx;
    if (name == "cifar10-bin" || name == "cifar10_bin") return DatasetFormat::cifar10_bin;
    if (name == "rten-dir" || name == "rten_dir") return DatasetFormat::rten_dir;
    throw ParameterError("unknown dataset format '" + name + "' (expected idx, cifar10-bin or rten-dir)");
}

std::string format_name(DatasetFormat format) {
    switch (format) {
        case DatasetFormat::idx: return "idx";
        case DatasetFormat::cifar10_bin: return "cifar10-bin";
        case DatasetFormat::rten_dir: return "rten-dir";
    }
    return "?";
}

Dataset::Dataset(std::size_t channels, std::size_t height, std::size_t width, std::vector<std::uint8_t> pixels,
                 std::vector<int> labels, std::size_t classes)
    : channels_(channels), height_(height), width_(width), classes_(classes), bytes_(std::move(pixels)),
      labels_(std::move(labels)) {
    if (bytes_.size() != labels_.size() * channels * height * width) {
        throw SizeError("dataset pixel count does not match the label count");
    }
}

Dataset::Dataset(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> pixels,
                 std::vector<int> labels, std::size_t classes)
    : channels_(channels), height_(height), width_(width), classes_(classes), floats_(std::move(pixels)),
      labels_(std::move(labels)) {
    if (floats_.size() != labels_.size() * channels * height * width) {
        throw SizeError("dataset pixel count does not match the label count");
    }
}

ImageD Dataset::sample(std::size_t index) const {
    if (index >= size()) throw ParameterError("sample index out of range");
    const std::size_t n = channels_ * height_ * width_;
    std::vector<double> v(n);
    if (!bytes_.empty()) {
        const std::uint8_t* p = bytes_.data() + index * n;
        for (std::size_t i = 0; i < n; ++i) v[i] = p[i] / 255.0;
    } else {
        const float* p = floats_.data() + index * n;
        for (std::size_t i = 0; i < n; ++i) v[i] = p[i];
    }
    return ImageD(channels_, height_, width_, std::move(v));
}

void Dataset::sample_into(std::size_t index, float* out) const {
    if (index >= size()) throw ParameterError("sample index out of range");
    const std::size_t n = channels_ * height_ * width_;
    if (!bytes_.empty()) {
        const std::uint8_t* p = bytes_.data() + index * n;
        for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(p[i] / 255.0);
    } else {
        std::memcpy(out, floats_.data() + index * n, n * sizeof(float));
    }
}

Dataset Dataset::subset(std::size_t begin, std::size_t count) const {
    if (begin + count > size()) throw ParameterError("subset exceeds dataset size");
    const std::size_t n = channels_ * height_ * width_;
    std::vector<int> labels(labels_.begin() + static_cast<std::ptrdiff_t>(begin),
                            labels_.begin() + static_cast<std::ptrdiff_t>(begin + count));
    Dataset out;
    if (!bytes_.empty()) {
        out = Dataset(channels_, height_, width_,
                      std::vector<std::uint8_t>(bytes_.begin() + static_cast<std::ptrdiff_t>(begin * n),
                                                bytes_.begin() + static_cast<std::ptrdiff_t>((begin + count) * n)),
                      std::move(labels), classes_);
    } else {
        out = Dataset(channels_, height_, width_,
                      std::vector<float>(floats_.begin() + static_cast<std::ptrdiff_t>(begin * n),
                                         floats_.begin() + static_cast<std::ptrdiff_t>((begin + count) * n)),
                      std::move(labels), classes_);
    }
    out.split = split;
    out.origin = origin;
    return out;
}

Dataset read_idx(const fs::path& images, const fs::path& labels, std::size_t classes) {
    auto img = rten::read_file(images);
    auto lab = rten::read_file(labels);
    std::uint32_t n = 0, rows = 0, cols = 0;
    std::vector<int> y;
    try {
        if (lab.size() < 4 || read_be32(lab, 0) != 0x00000801) throw FormatError("bad IDX label magic", 0);
        if (lab.size() < 8) throw FormatError("truncated IDX label header", lab.size());
        const std::uint32_t count = read_be32(lab, 4);
        if (lab.size() < 8 + static_cast<std::size_t>(count)) throw FormatError("truncated IDX label payload", lab.size());
        y.assign(lab.begin() + 8, lab.begin() + 8 + count);
    } catch (const FormatError& e) {
        throw e.in_file(labels.string());
    }
    try {
        if (img.size() < 4 || read_be32(img, 0) != 0x00000803) throw FormatError("bad IDX image magic", 0);
        if (img.size() < 16) throw FormatError("truncated IDX image header", img.size());
        n = read_be32(img, 4);
        rows = read_be32(img, 8);
        cols = read_be32(img, 12);
        if (n != y.size()) {
            throw FormatError("IDX image count " + std::to_string(n) + " != label count " + std::to_string(y.size()), 4);
        }
        if (rows % 2 || cols % 2) throw FormatError("IDX images must have even sides", 8);
        const std::size_t payload = static_cast<std::size_t>(n) * rows * cols;
        if (img.size() < 16 + payload) throw FormatError("truncated IDX image payload", img.size());
        std::vector<std::uint8_t> x(img.begin() + 16, img.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
        const std::size_t k = infer_classes(y, classes);
        Dataset d(1, rows, cols, std::move(x), std::move(y), k);
        d.origin = images.string();
        return d;
    } catch (const FormatError& e) {
        throw e.in_file(images.string());
    }
}

Dataset read_cifar10(const std::vector<fs::path>& files, std::size_t classes) {
    if (files.empty()) throw ParameterError("no CIFAR-10 batch files given");
    std::vector<std::uint8_t> pixels;
    std::vector<int> labels;
    for (const auto& f : files) {
        auto bytes = rten::read_file(f);
        if (bytes.empty() || bytes.size() % kCifarRecord != 0) {
            const std::size_t whole = bytes.size() / kCifarRecord * kCifarRecord;
            throw FormatError("CIFAR-10 file is not a whole number of 3073-byte records", whole).in_file(f.string());
        }
        for (std::size_t off = 0; off < bytes.size(); off += kCifarRecord) {
            const int label = bytes[off];
            if (static_cast<std::size_t>(label) >= classes) {
                throw FormatError("label " + std::to_string(label) + " out of range", off).in_file(f.string());
            }
            labels.push_back(label);
            pixels.insert(pixels.end(), bytes.begin() + static_cast<std::ptrdiff_t>(off + 1),
                          bytes.begin() + static_cast<std::ptrdiff_t>(off + kCifarRecord));
        }
    }
    Dataset d(3, kCifarSide, kCifarSide, std::move(pixels), std::move(labels), classes);
    d.origin = files.front().string();
    return d;
}

Dataset read_rten_dir(const fs::path& dir, std::size_t classes) {
    const fs::path label_file = dir / "labels.bin";
    auto lab = rten::read_file(label_file);
    if (lab.size() % 2 != 0) throw FormatError("labels.bin must hold u16 values", lab.size() - 1).in_file(label_file.string());
    const std::size_t n = lab.size() / 2;
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = lab[2 * i] | (lab[2 * i + 1] << 8);
    std::vector<float> pixels;
    std::size_t c = 0, h = 0, w = 0;
    for (std::size_t i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%06zu.rten", i);
        const ImageD img = rten::read_image(dir / name);
        if (i == 0) {
            c = img.channels();
            h = img.height();
            w = img.width();
            pixels.reserve(n * img.size());
        } else if (img.channels() != c || img.height() != h || img.width() != w) {
            throw FormatError("sample shape differs from the first sample", 8).in_file((dir / name).string());
        }
        for (double v : img.data()) pixels.push_back(static_cast<float>(v));
    }
    if (n == 0) throw FormatError("empty RTEN directory", 0).in_file(label_file.string());
    const std::size_t k = infer_classes(labels, classes);
    Dataset d(c, h, w, std::move(pixels), std::move(labels), k);
    d.origin = dir.string();
    return d;
}

Dataset open_dataset(const DatasetSpec& spec) {
    if (spec.paths.empty()) throw ParameterError("dataset spec has no paths");
    Dataset d;
    switch (spec.format) {
        case DatasetFormat::idx: {
            fs::path labels = spec.labels;
            if (labels.empty()) {
                std::string name = spec.paths.front().filename().string();
                const auto pos = name.find("images-idx3");
                if (pos == std::string::npos) throw ParameterError("cannot derive IDX label file name from " + name);
                name.replace(pos, 11, "labels-idx1");
                labels = spec.paths.front().parent_path() / name;
            }
            d = read_idx(spec.paths.front(), labels, spec.class_count);
            break;
        }
        case DatasetFormat::cifar10_bin:
            d = read_cifar10(spec.paths, spec.class_count ? spec.class_count : 10);
            break;
        case DatasetFormat::rten_dir:
            d = read_rten_dir(spec.paths.front(), spec.class_count);
            break;
    }
    if (spec.limit && spec.limit < d.size()) d = d.subset(0, spec.limit);
    d.split = spec.split;
    return d;
}

void write_idx(const fs::path& images, const fs::path& labels, const Dataset& data) {
    if (data.channels() != 1) throw ParameterError("IDX holds single-channel images only");
    std::vector<std::uint8_t> img, lab;
    put_be32(img, 0x00000803);
    put_be32(img, static_cast<std::uint32_t>(data.size()));
    put_be32(img, static_cast<std::uint32_t>(data.height()));
    put_be32(img, static_cast<std::uint32_t>(data.width()));
    put_be32(lab, 0x00000801);
    put_be32(lab, static_cast<std::uint32_t>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const ImageD x = data.sample(i);
        for (double v : x.data()) img.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255)));
        lab.push_back(static_cast<std::uint8_t>(data.label(i)));
    }
    rten::write_file(images, img);
    rten::write_file(labels, lab);
}

void write_cifar10(const fs::path& file, const Dataset& data) {
    if (data.channels() != 3 || data.height() != kCifarSide || data.width() != kCifarSide) {
        throw ParameterError("CIFAR-10 records are 3x32x32");
    }
    std::vector<std::uint8_t> out;
    out.reserve(data.size() * kCifarRecord);
    for (std::size_t i = 0; i < data.size(); ++i) {
        out.push_back(static_cast<std::uint8_t>(data.label(i)));
        const ImageD x = data.sample(i);
        for (double v : x.data()) out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255)));
    }
    rten::write_file(file, out);
}

void write_rten_dir(const fs::path& dir, const Dataset& data) {
    fs::create_directories(dir);
    std::vector<std::uint8_t> lab;
    for (std::size_t i = 0; i < data.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%06zu.rten", i);
        rten::write_image(dir / name, data.sample(i), rten::DType::f32);
        lab.push_back(static_cast<std::uint8_t>(data.label(i) & 0xff));
        lab.push_back(static_cast<std::uint8_t>(data.label(i) >> 8));
    }
    rten::write_file(dir / "labels.bin", lab);
}

}  // namespace fcl::pipeline

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fcl {

/// A mini-batch at a single bandwidth: inputs are N x C x side x side floats in
/// [0, 1]; labels are hard class indices, and `soft` (N x classes) is filled
/// when mixing produced soft targets.
struct Batch {
    std::size_t count = 0;
    std::size_t channels = 0;
    std::size_t side = 0;
    std::vector<float> inputs;
    std::vector<int> labels;
    std::vector<float> soft;
    std::size_t classes = 0;

    // provenance
    double progress = 0.0;
    int bandwidth = 0;
    std::uint64_t seed = 0;
    std::uint64_t index = 0;  // position in the fresh-batch stream

    std::size_t sample_size() const noexcept { return channels * side * side; }
    bool has_soft_labels() const noexcept { return !soft.empty(); }
};

}  // namespace fcl

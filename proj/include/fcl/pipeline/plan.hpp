// SPDX-License-Identifier: Apache-2.0
//
// Iteration-level training plan: which stage every iteration belongs to,
// its progress coordinate, and whether it trains on a fresh or a replayed
// batch. Everything is decided up front from (segments, replay, seed) so a
// run is reproducible regardless of worker count.
#pragma once

#include <cstdint>
#include <vector>

namespace fcl::pipeline {

/// A contiguous run of iterations at one bandwidth. Progress runs linearly
/// from progress_begin to progress_end over the segment; it indexes both the
/// LR curve and the augmentation magnitude.
struct Segment {
    int bandwidth = 0;
    std::uint64_t batch = 0;
    std::uint64_t iterations = 0;
    double progress_begin = 0.0;
    double progress_end = 1.0;
    double lr_scale = 1.0;  // stage multiplier on the LR curve (square-root batch rule)
    bool augment = true;    // false for evaluation-style passes
};

struct ReplayConfig {
    std::size_t n_buffer = 0;
    std::size_t capacity = 8;
};

struct FreshBatch {
    std::uint32_t segment = 0;
    double progress = 0.0;
    std::uint64_t stream_offset = 0;  // position of the first sample in the shuffled stream
};

struct Iteration {
    std::uint32_t segment = 0;
    double progress = 0.0;
    std::uint64_t fresh_index = 0;  // batch trained on (index into `fresh`)
    bool replay = false;
};

struct TrainingPlan {
    std::vector<Segment> segments;
    std::vector<FreshBatch> fresh;
    std::vector<Iteration> iterations;
    std::uint64_t stream_begin = 0;  // stream position before the first fresh batch
    std::uint64_t stream_end = 0;

    std::uint64_t fresh_count() const noexcept { return fresh.size(); }
};

/// `stream_begin` continues a sample stream (resumed or branched runs).
TrainingPlan make_plan(const std::vector<Segment>& segments, const ReplayConfig& replay, std::uint64_t seed,
                       std::uint64_t stream_begin = 0);

/// Sum over segments of ceil(iterations / (n_buffer + 1)).
std::uint64_t expected_fresh_count(const std::vector<Segment>& segments, std::size_t n_buffer);

}  // namespace fcl::pipeline

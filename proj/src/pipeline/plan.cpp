// SPDX-License-Identifier: Apache-2.0
#include "fcl/pipeline/plan.hpp"

#include "fcl/error.hpp"
#include "fcl/pipeline/replay.hpp"
#include "fcl/rng.hpp"

namespace fcl::pipeline {

namespace {
constexpr std::uint64_t kReplayStream = 0x7265706c6179ULL;  // "replay"
}

TrainingPlan make_plan(const std::vector<Segment>& segments, const ReplayConfig& replay, std::uint64_t seed,
                       std::uint64_t stream_begin) {
    TrainingPlan plan;
    plan.segments = segments;
    plan.stream_begin = stream_begin;
    std::uint64_t offset = stream_begin;
    ReplayFeeder<std::uint64_t> feeder(replay.n_buffer, replay.capacity, derive_seed(seed, {kReplayStream}));

    for (std::uint32_t s = 0; s < segments.size(); ++s) {
        const Segment& seg = segments[s];
        if (seg.iterations > 0 && (seg.batch == 0 || seg.bandwidth <= 0)) {
            throw ParameterError("segment needs a positive batch size and bandwidth");
        }
        feeder.flush();
        for (std::uint64_t i = 0; i < seg.iterations; ++i) {
            const double progress = seg.progress_begin + (seg.progress_end - seg.progress_begin) *
                                                             static_cast<double>(i) / static_cast<double>(seg.iterations);
            auto step = feeder.next([&] {
                plan.fresh.push_back(FreshBatch{s, progress, offset});
                offset += seg.batch;
                return static_cast<std::uint64_t>(plan.fresh.size() - 1);
            });
            plan.iterations.push_back(Iteration{s, progress, step.item, !step.fresh});
        }
    }
    plan.stream_end = offset;
    return plan;
}

std::uint64_t expected_fresh_count(const std::vector<Segment>& segments, std::size_t n_buffer) {
    std::uint64_t total = 0;
    for (const auto& s : segments) total += (s.iterations + n_buffer) / (n_buffer + 1);
    return total;
}

}  // namespace fcl::pipeline

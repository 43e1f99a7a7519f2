// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include "fcl/batch.hpp"
#include "fcl/pipeline/dataset.hpp"
#include "fcl/pipeline/plan.hpp"
#include "fcl/pipeline/preprocess.hpp"

namespace fcl::pipeline {

/// Sample index at a position of the shuffled training stream. Each epoch
/// is an independent seed-derived permutation.
class SampleStream {
public:
    SampleStream(std::size_t dataset_size, std::uint64_t seed, bool shuffle = true);
    std::size_t at(std::uint64_t position);
    std::uint64_t epoch_of(std::uint64_t position) const noexcept { return position / size_; }

private:
    const std::vector<std::uint32_t>& permutation(std::uint64_t epoch);

    std::size_t size_;
    std::uint64_t seed_;
    bool shuffle_;
    std::map<std::uint64_t, std::vector<std::uint32_t>> cache_;
};

/// Builds the fresh batch `index` of a plan. Pure function of its inputs.
Batch build_fresh_batch(const Dataset& data, const TrainingPlan& plan, std::uint64_t index,
                        const PreprocessOptions& options, std::uint64_t seed, SampleStream& stream);

/// K preprocessing workers feeding a bounded, order-preserving queue of the
/// plan's fresh batches. `workers == 0` builds batches on the calling thread.
/// Batch contents depend only on (seed, batch index), never on K or depth.
/// `first` skips the batches a resumed run has already consumed.
class BatchProducer {
public:
    BatchProducer(const Dataset& data, const TrainingPlan& plan, PreprocessOptions options, std::uint64_t seed,
                  std::size_t workers = 1, std::size_t depth = 4, std::uint64_t first = 0);
    ~BatchProducer();

    BatchProducer(const BatchProducer&) = delete;
    BatchProducer& operator=(const BatchProducer&) = delete;

    /// Next fresh batch in plan order; rethrows worker failures.
    Batch next();

    std::uint64_t produced() const noexcept { return consumed_; }

private:
    void worker_loop();

    const Dataset& data_;
    const TrainingPlan& plan_;
    PreprocessOptions options_;
    std::uint64_t seed_;
    std::size_t depth_;

    std::mutex mutex_;
    std::condition_variable ready_;
    std::condition_variable space_;
    std::map<std::uint64_t, Batch> done_;
    std::uint64_t claimed_ = 0;
    std::uint64_t consumed_ = 0;
    bool stop_ = false;
    std::exception_ptr failure_;
    std::vector<std::thread> threads_;
    SampleStream inline_stream_;
};

}  // namespace fcl::pipeline

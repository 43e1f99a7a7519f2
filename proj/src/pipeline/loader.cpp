// SPDX-License-Identifier: Apache-2.0
#include "fcl/pipeline/loader.hpp"

#include <numeric>

#include "fcl/error.hpp"
#include "fcl/rng.hpp"

namespace fcl::pipeline {

namespace {
constexpr std::uint64_t kShuffleStream = 0x73687566666c65ULL;  // "shuffle"
constexpr std::uint64_t kMixupStream = 0x6d69787570ULL;         // "mixup"
}

SampleStream::SampleStream(std::size_t dataset_size, std::uint64_t seed, bool shuffle)
    : size_(dataset_size), seed_(seed), shuffle_(shuffle) {
    if (dataset_size == 0) throw ParameterError("empty dataset");
}

const std::vector<std::uint32_t>& SampleStream::permutation(std::uint64_t epoch) {
    auto it = cache_.find(epoch);
    if (it != cache_.end()) return it->second;
    if (cache_.size() > 4) cache_.erase(cache_.begin());
    std::vector<std::uint32_t> perm(size_);
    std::iota(perm.begin(), perm.end(), 0u);
    if (shuffle_) {
        Rng rng(derive_seed(seed_, {kShuffleStream, epoch}));
        for (std::size_t i = size_ - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, i + 1)]);
    }
    return cache_.emplace(epoch, std::move(perm)).first->second;
}

std::size_t SampleStream::at(std::uint64_t position) { return permutation(position / size_)[position % size_]; }

Batch build_fresh_batch(const Dataset& data, const TrainingPlan& plan, std::uint64_t index,
                        const PreprocessOptions& options, std::uint64_t seed, SampleStream& stream) {
    const FreshBatch& fb = plan.fresh.at(index);
    const Segment& seg = plan.segments.at(fb.segment);
    Batch batch;
    batch.count = seg.batch;
    batch.channels = data.channels();
    batch.side = static_cast<std::size_t>(seg.bandwidth);
    batch.classes = data.classes();
    batch.progress = fb.progress;
    batch.bandwidth = seg.bandwidth;
    batch.seed = seed;
    batch.index = index;
    batch.inputs.resize(batch.count * batch.sample_size());
    batch.labels.resize(batch.count);

    PreprocessOptions opts = options;
    if (!seg.augment) {
        opts.baseline_augment = false;
        opts.randaug = false;
        opts.mixup_alpha = 0.0;
    }
    for (std::size_t k = 0; k < batch.count; ++k) {
        const std::uint64_t pos = fb.stream_offset + k;
        const std::size_t sample = stream.at(pos);
        Rng rng(sample_seed(seed, stream.epoch_of(pos), sample));
        const ImageD x = preprocess(data.sample(sample), seg.bandwidth, fb.progress, opts, rng);
        float* dst = batch.inputs.data() + k * batch.sample_size();
        for (std::size_t i = 0; i < x.size(); ++i) dst[i] = static_cast<float>(x.data()[i]);
        batch.labels[k] = data.label(sample);
    }
    if (opts.mixup_alpha > 0.0) {
        Rng rng(derive_seed(seed, {kMixupStream, index}));
        batch = augment::mixup(batch, batch.classes, opts.mixup_alpha, rng).batch;
    }
    return batch;
}

BatchProducer::BatchProducer(const Dataset& data, const TrainingPlan& plan, PreprocessOptions options,
                             std::uint64_t seed, std::size_t workers, std::size_t depth, std::uint64_t first)
    : data_(data), plan_(plan), options_(std::move(options)), seed_(seed), depth_(std::max<std::size_t>(depth, 1)),
      claimed_(first), consumed_(first), inline_stream_(data.size(), seed, data.split == Split::train) {
    for (std::size_t i = 0; i < workers; ++i) threads_.emplace_back([this] { worker_loop(); });
}

BatchProducer::~BatchProducer() {
    {
        std::lock_guard lock(mutex_);
        stop_ = true;
    }
    space_.notify_all();
    ready_.notify_all();
    for (auto& t : threads_) t.join();
}

void BatchProducer::worker_loop() {
    SampleStream stream(data_.size(), seed_, data_.split == Split::train);
    for (;;) {
        std::uint64_t index;
        {
            std::unique_lock lock(mutex_);
            space_.wait(lock, [&] { return stop_ || claimed_ >= plan_.fresh.size() || claimed_ < consumed_ + depth_; });
            if (stop_ || claimed_ >= plan_.fresh.size()) return;
            index = claimed_++;
        }
        try {
            Batch b = build_fresh_batch(data_, plan_, index, options_, seed_, stream);
            std::lock_guard lock(mutex_);
            done_.emplace(index, std::move(b));
        } catch (...) {
            std::lock_guard lock(mutex_);
            if (!failure_) failure_ = std::current_exception();
        }
        ready_.notify_all();
    }
}

Batch BatchProducer::next() {
    if (consumed_ >= plan_.fresh.size()) throw Error("batch producer exhausted");
    if (threads_.empty()) return build_fresh_batch(data_, plan_, consumed_++, options_, seed_, inline_stream_);
    std::unique_lock lock(mutex_);
    ready_.wait(lock, [&] { return failure_ || done_.count(consumed_) > 0; });
    if (failure_ && done_.count(consumed_) == 0) std::rethrow_exception(failure_);
    auto node = done_.extract(consumed_);
    ++consumed_;
    lock.unlock();
    space_.notify_all();
    return std::move(node.mapped());
}

}  // namespace fcl::pipeline

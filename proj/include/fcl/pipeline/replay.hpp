// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <utility>

#include "fcl/error.hpp"
#include "fcl/rng.hpp"

namespace fcl::pipeline {

/// FIFO of the most recent `capacity` items, sampled uniformly with
/// replacement. Owned by the consumer thread only.
template <typename T>
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw ParameterError("replay buffer capacity must be positive");
    }

    void insert(T item) {
        if (items_.size() == capacity_) items_.pop_front();
        items_.push_back(std::move(item));
    }

    const T& sample(Rng& rng) const {
        if (items_.empty()) throw Error("sampling from an empty replay buffer");
        return items_[uniform_index(rng, items_.size())];
    }

    void flush() { items_.clear(); }

    std::size_t size() const noexcept { return items_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    bool empty() const noexcept { return items_.empty(); }
    const std::deque<T>& items() const noexcept { return items_; }

private:
    std::size_t capacity_;
    std::deque<T> items_;
};

/// Produces the training sequence of one stage: after every fresh batch,
/// `n_buffer` replays drawn from the buffer. While the buffer is empty only
/// fresh batches are produced.
template <typename T>
class ReplayFeeder {
public:
    ReplayFeeder(std::size_t n_buffer, std::size_t capacity, std::uint64_t seed)
        : n_buffer_(n_buffer), buffer_(capacity), rng_(seed) {}

    struct Step {
        T item;
        bool fresh;
    };

    Step next(const std::function<T()>& produce_fresh) {
        if (pending_replays_ > 0 && !buffer_.empty()) {
            --pending_replays_;
            return {buffer_.sample(rng_), false};
        }
        T item = produce_fresh();
        buffer_.insert(item);
        pending_replays_ = n_buffer_;
        ++fresh_count_;
        return {std::move(item), true};
    }

    /// Stage boundary: drop every buffered batch.
    void flush() {
        buffer_.flush();
        pending_replays_ = 0;
    }

    std::uint64_t fresh_count() const noexcept { return fresh_count_; }
    const ReplayBuffer<T>& buffer() const noexcept { return buffer_; }

private:
    std::size_t n_buffer_;
    ReplayBuffer<T> buffer_;
    Rng rng_;
    std::size_t pending_replays_ = 0;
    std::uint64_t fresh_count_ = 0;
};

}  // namespace fcl::pipeline

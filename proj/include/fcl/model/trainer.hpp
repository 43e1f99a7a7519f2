// SPDX-License-Identifier: Apache-2.0
//
// Training state, the segment runner, evaluation and checkpoints.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcl/curriculum.hpp"
#include "fcl/model/network.hpp"
#include "fcl/model/optim.hpp"
#include "fcl/pipeline/dataset.hpp"
#include "fcl/pipeline/plan.hpp"
#include "fcl/pipeline/preprocess.hpp"
#include "fcl/spectral/spectral.hpp"

namespace fcl::model {

/// Everything needed to continue a run bit-exactly. Data order and
/// augmentation are pure functions of (seed, stream position), so no
/// generator state has to be stored.
struct TrainerState {
    Network<float> net;
    Optimizer<float> opt;
    std::uint64_t seed = 0;
    std::uint64_t iteration = 0;  // optimizer steps taken
    double progress = 0.0;        // schedule progress of the last step
    double equivalent_epochs = 0.0;
    std::uint64_t stream_position = 0;  // next unread position of the shuffled sample stream

    bool operator==(const TrainerState& o) const;
};

TrainerState init_state(const NetworkSpec& spec, const OptimizerConfig& opt, std::uint64_t seed);

/// SHA-256 (hex) over parameters, moments and counters.
std::string state_digest(const TrainerState& state);

struct TrainConfig {
    curriculum::LRConfig lr;
    OptimizerConfig optimizer;
    double label_smoothing = 0.1;
    std::uint64_t base_batch = 64;
    pipeline::PreprocessOptions preprocess;
    pipeline::ReplayConfig replay;
    std::size_t workers = 1;
    std::size_t queue_depth = 4;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);

struct StepLog {
    std::uint64_t iteration = 0;
    int bandwidth = 0;
    std::uint64_t batch = 0;
    double lr = 0.0;
    double loss = 0.0;
    double equivalent_epochs = 0.0;
    double progress = 0.0;
    bool replay = false;
};

nlohmann::json to_json(const StepLog& row);

struct RunHooks {
    std::function<void(const StepLog&)> on_step;
    /// Equivalent-epoch values; on_mark fires once after the step that reaches each.
    std::vector<double> marks;
    std::function<void(double mark, const TrainerState&)> on_mark;
    /// Stop after this many iterations of the plan (resume tests, partial runs).
    std::uint64_t max_iterations = std::numeric_limits<std::uint64_t>::max();
};

struct RunSummary {
    std::uint64_t iterations = 0;  // run in this call
    std::uint64_t fresh_batches = 0;
    double last_loss = 0.0;
    double seconds = 0.0;
};

/// Segments of a curriculum schedule (one per stage), with iteration counts
/// from the compute-budget rule and the square-root batch/LR rule.
std::vector<pipeline::Segment> schedule_segments(const curriculum::CurriculumSchedule& schedule,
                                                 const curriculum::FlopsModel& flops, std::uint64_t dataset_size,
                                                 std::uint64_t base_batch, const curriculum::LRConfig& lr);

class Trainer {
public:
    Trainer(const pipeline::Dataset& train, NetworkSpec spec, TrainConfig cfg);

    const TrainConfig& config() const noexcept { return cfg_; }
    const NetworkSpec& spec() const noexcept { return spec_; }
    const pipeline::Dataset& data() const noexcept { return data_; }
    int final_size() const noexcept { return cfg_.preprocess.final_size; }

    /// Cost model in MACs per sample for this network.
    curriculum::FlopsModel flops_model() const;
    /// Equivalent epochs of one step at (bandwidth, batch).
    double step_cost(int bandwidth, std::uint64_t batch) const;

    TrainerState init(std::uint64_t seed) const { return init_state(spec_, cfg_.optimizer, seed); }

    /// Plan continuing the state's sample stream.
    pipeline::TrainingPlan plan(const std::vector<pipeline::Segment>& segments, const TrainerState& state) const;

    /// Runs plan iterations [start, end) on `state`. Throws DivergedError on a
    /// non-finite loss; the state is then left at the failing iteration.
    RunSummary run(TrainerState& state, const pipeline::TrainingPlan& plan, const RunHooks& hooks = {},
                   std::uint64_t start = 0) const;

private:
    const pipeline::Dataset& data_;
    NetworkSpec spec_;
    TrainConfig cfg_;
};

/// Optional transform applied to every validation input before inference.
struct EvalTransform {
    enum class Kind { none, filter, bandwidth } kind = Kind::none;
    spectral::FilterSpec filter;
    int bandwidth = 0;
    pipeline::ResampleMethod method = pipeline::ResampleMethod::windowed_sinc;
    int lobes = 3;

    static EvalTransform filtered(const spectral::FilterSpec& f) { return {Kind::filter, f}; }
    static EvalTransform at_bandwidth(int b, pipeline::ResampleMethod m = pipeline::ResampleMethod::windowed_sinc) {
        EvalTransform t;
        t.kind = Kind::bandwidth;
        t.bandwidth = b;
        t.method = m;
        return t;
    }
    std::string describe() const;
};

/// Top-1 accuracy on a validation split. Filtered inputs are not clamped
/// (high-pass images are zero-mean); resampled inputs are, as in training.
double evaluate(const Network<float>& net, const pipeline::Dataset& val, const EvalTransform& transform = {},
                std::size_t batch = 200);

/// Several transforms over one pass of the split (each sample decoded once).
std::vector<double> evaluate_many(const Network<float>& net, const pipeline::Dataset& val,
                                  const std::vector<EvalTransform>& transforms, std::size_t batch = 200);

// ---------------------------------------------------------------- checkpoints

void save_checkpoint(const std::filesystem::path& path, const TrainerState& state,
                     const nlohmann::json& extra = nlohmann::json::object());
/// Throws CheckpointError on a bad header, digest or truncation, and
/// SpecError when `expected` is given and differs from the stored spec.
TrainerState load_checkpoint(const std::filesystem::path& path, const std::optional<NetworkSpec>& expected = std::nullopt,
                             nlohmann::json* extra = nullptr);

// ---------------------------------------------------------------- gradient check

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // a ReLU kink lay within epsilon / 1000
    std::string worst_block;
};

/// Central differences on a random parameter subset (every block covered)
/// against backprop. Relative error |a - b| / max(|a|, |b|, floor). A step
/// that flips any ReLU is retried at epsilon/10 and epsilon/100. The optional
/// hook may tamper with the backprop gradient (negative controls).
GradCheckResult grad_check(Network<double>& net, const std::vector<double>& inputs, std::size_t n, std::size_t side,
                           const std::vector<int>& labels, double smoothing, double epsilon, std::size_t per_block,
                           std::uint64_t seed, const std::function<void(std::vector<double>&)>& corrupt = {},
                           double floor = 1e-6);

}  // namespace fcl::model

// SPDX-License-Identifier: Apache-2.0
//
// Curriculum schedules, compute accounting in equivalent epochs and the
// learning-rate machinery (warmup + cosine, square-root batch scaling).
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace fcl::curriculum {

/// Per-sample forward cost at a given input side. Any positive unit works;
/// only ratios are used.
using FlopsModel = std::function<double(int side)>;

enum class ProgressBasis { compute, epoch };

struct Stage {
    double start_frac = 0.0;
    double end_frac = 1.0;
    int bandwidth = 0;
    double batch_scale = 1.0;

    double span() const noexcept { return end_frac - start_frac; }
};

struct CurriculumSchedule {
    std::vector<Stage> stages;
    int final_size = 0;
    double m0 = 9.0;
    double budget = 0.0;  // equivalent epochs (compute basis) or epochs (epoch basis)
    ProgressBasis basis = ProgressBasis::compute;
    std::string name = "custom";

    /// Throws ParameterError unless the stages partition [0, 1] exactly, every
    /// bandwidth is even and the last stage runs at final_size.
    void validate() const;

    /// Stage whose [start, end) contains `progress` (the last stage owns 1).
    std::size_t stage_at(double progress) const;
};

/// Nearest even integer (halves round up), at least 8.
int round_even(double x);

/// Adapted bandwidth triple (b, (b + g)/2, g) for a base bandwidth b defined
/// at 224 and final size g; each entry rounded by round_even and capped at g.
std::vector<int> adapted_bandwidths(double base_at_224, int final_size);

CurriculumSchedule baseline_schedule(int final_size, double budget, double m0 = 9.0);
CurriculumSchedule default_etpp(int final_size, double budget, double m0 = 9.0);
CurriculumSchedule default_et(int total_epochs, int final_size, double m0 = 9.0);

/// Equal-length stages with the given bandwidths (used by the searches).
CurriculumSchedule uniform_schedule(const std::vector<int>& bandwidths, int final_size, double budget,
                                    double m0 = 9.0, ProgressBasis basis = ProgressBasis::compute);

/// floor(span * budget * dataset_size / batch * flops(final)/flops(B)) on the
/// compute basis; the cost ratio is dropped on the epoch basis.
std::uint64_t stage_iterations(const Stage& stage, double budget, const FlopsModel& flops, int final_size,
                               std::uint64_t dataset_size, std::uint64_t batch,
                               ProgressBasis basis = ProgressBasis::compute);

struct StepRecord {
    int bandwidth = 0;
    std::uint64_t batch = 0;
    std::uint64_t iterations = 1;
};

double equivalent_epochs(const std::vector<StepRecord>& log, const FlopsModel& flops, int final_size,
                         std::uint64_t dataset_size);

struct LRConfig {
    double base_lr = 1e-3;
    double warmup_frac = 20.0 / 300.0;
    double min_lr = 1e-6;
    double lr_cap = 1e9;

    void validate() const;
};

/// Linear warmup 0 -> base_lr, then cosine base_lr -> min_lr.
double lr_at(double progress, const LRConfig& cfg);

struct BatchLR {
    std::uint64_t batch = 0;
    double lr_max = 0.0;
};

/// batch = base_batch * batch_scale; lr_max = min(base_lr * sqrt(scale), lr_cap).
BatchLR scale_batch_lr(double batch_scale, std::uint64_t base_batch, const LRConfig& cfg);

/// lr_at rescaled by lr_max / base_lr.
double stage_lr(double progress, const LRConfig& cfg, const BatchLR& scaled);

/// Iteration-level plan of a schedule.
struct StagePlan {
    Stage stage;
    std::uint64_t batch = 0;
    std::uint64_t iterations = 0;
    double lr_max = 0.0;
    double residue = 0.0;  // fractional iterations lost to flooring
};

std::vector<StagePlan> plan_schedule(const CurriculumSchedule& schedule, const FlopsModel& flops,
                                     std::uint64_t dataset_size, std::uint64_t base_batch, const LRConfig& lr);

/// Progress fraction of iteration `i` (0-based) inside a stage of `n`.
double progress_in_stage(const Stage& stage, std::uint64_t i, std::uint64_t n);

nlohmann::json to_json(const CurriculumSchedule& schedule);
CurriculumSchedule schedule_from_json(const nlohmann::json& j);
std::string describe(const CurriculumSchedule& schedule);

}  // namespace fcl::curriculum

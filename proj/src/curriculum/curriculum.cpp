// SPDX-License-Identifier: Apache-2.0
#include "fcl/curriculum.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "fcl/error.hpp"

namespace fcl::curriculum {

namespace {

// Absorbs representation error in products like 0.2 * 200 * 50000 / 128
// before flooring.
constexpr double kFloorSlack = 1e-9;

void check_flops(double value, int side) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw CostModelError("cost model returned " + std::to_string(value) + " FLOPs at side " +
                             std::to_string(side));
    }
}

std::string basis_name(ProgressBasis b) { return b == ProgressBasis::compute ? "compute" : "epoch"; }

}  // namespace

void CurriculumSchedule::validate() const {
    if (stages.empty()) throw ParameterError("schedule has no stages");
    if (final_size < 8 || final_size % 2 != 0) {
        throw ParameterError("final size must be even and at least 8, got " + std::to_string(final_size));
    }
    if (!(budget > 0.0)) throw ParameterError("schedule budget must be positive");
    if (stages.front().start_frac != 0.0) throw ParameterError("first stage must start at 0");
    if (stages.back().end_frac != 1.0) throw ParameterError("last stage must end at 1");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const Stage& s = stages[i];
        if (!(s.start_frac < s.end_frac)) throw ParameterError("stage " + std::to_string(i) + " is empty or reversed");
        if (i + 1 < stages.size() && s.end_frac != stages[i + 1].start_frac) {
            throw ParameterError("stages " + std::to_string(i) + " and " + std::to_string(i + 1) +
                                 " leave a gap or overlap");
        }
        if (s.bandwidth <= 0 || s.bandwidth % 2 != 0 || s.bandwidth > final_size) {
            throw ParameterError("stage bandwidth must be even and within (0, final size], got " +
                                 std::to_string(s.bandwidth));
        }
        if (!(s.batch_scale >= 1.0)) throw ParameterError("batch scale must be at least 1");
    }
    if (stages.back().bandwidth != final_size) throw ParameterError("last stage must run at the final size");
}

std::size_t CurriculumSchedule::stage_at(double progress) const {
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (progress < stages[i].end_frac) return i;
    }
    return stages.size() - 1;
}

int round_even(double x) {
    const int r = 2 * static_cast<int>(std::floor(x / 2.0 + 0.5));
    return std::max(r, 8);
}

std::vector<int> adapted_bandwidths(double base_at_224, int final_size) {
    if (final_size < 8 || final_size % 2 != 0) {
        throw ParameterError("final size must be even and at least 8, got " + std::to_string(final_size));
    }
    const int b1 = std::min(round_even(base_at_224 * final_size / 224.0), final_size);
    const int b2 = std::min(round_even((b1 + final_size) / 2.0), final_size);
    return {b1, b2, final_size};
}

CurriculumSchedule baseline_schedule(int final_size, double budget, double m0) {
    CurriculumSchedule s;
    s.stages = {Stage{0.0, 1.0, final_size, 1.0}};
    s.final_size = final_size;
    s.m0 = m0;
    s.budget = budget;
    s.name = "baseline";
    s.validate();
    return s;
}

CurriculumSchedule default_etpp(int final_size, double budget, double m0) {
    const auto b = adapted_bandwidths(96.0, final_size);
    CurriculumSchedule s;
    s.stages = {Stage{0.0, 0.2, b[0], 1.0}, Stage{0.2, 0.6, b[1], 1.0}, Stage{0.6, 1.0, b[2], 1.0}};
    s.final_size = final_size;
    s.m0 = m0;
    s.budget = budget;
    s.basis = ProgressBasis::compute;
    s.name = "etpp";
    s.validate();
    return s;
}

CurriculumSchedule default_et(int total_epochs, int final_size, double m0) {
    if (total_epochs < 3) throw ParameterError("EfficientTrain schedule needs at least 3 epochs");
    const auto b = adapted_bandwidths(160.0, final_size);
    CurriculumSchedule s;
    s.stages = {Stage{0.0, 0.6, b[0], 1.0}, Stage{0.6, 0.8, b[1], 1.0}, Stage{0.8, 1.0, b[2], 1.0}};
    s.final_size = final_size;
    s.m0 = m0;
    s.budget = total_epochs;
    s.basis = ProgressBasis::epoch;
    s.name = "et";
    s.validate();
    return s;
}

CurriculumSchedule uniform_schedule(const std::vector<int>& bandwidths, int final_size, double budget, double m0,
                                    ProgressBasis basis) {
    CurriculumSchedule s;
    const std::size_t n = bandwidths.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double a = static_cast<double>(i) / static_cast<double>(n);
        const double b = i + 1 == n ? 1.0 : static_cast<double>(i + 1) / static_cast<double>(n);
        s.stages.push_back(Stage{a, b, bandwidths[i], 1.0});
    }
    s.final_size = final_size;
    s.m0 = m0;
    s.budget = budget;
    s.basis = basis;
    s.validate();
    return s;
}

std::uint64_t stage_iterations(const Stage& stage, double budget, const FlopsModel& flops, int final_size,
                               std::uint64_t dataset_size, std::uint64_t batch, ProgressBasis basis) {
    if (batch == 0) throw ParameterError("batch size must be positive");
    double ratio = 1.0;
    if (basis == ProgressBasis::compute) {
        const double full = flops(final_size);
        const double here = flops(stage.bandwidth);
        check_flops(full, final_size);
        check_flops(here, stage.bandwidth);
        ratio = full / here;
    }
    const double exact = stage.span() * budget * static_cast<double>(dataset_size) / static_cast<double>(batch) * ratio;
    return static_cast<std::uint64_t>(std::floor(exact * (1.0 + kFloorSlack)));
}

double equivalent_epochs(const std::vector<StepRecord>& log, const FlopsModel& flops, int final_size,
                         std::uint64_t dataset_size) {
    if (log.empty()) return 0.0;
    const double full = flops(final_size);
    check_flops(full, final_size);
    double total = 0.0;
    for (const auto& r : log) {
        const double f = flops(r.bandwidth);
        check_flops(f, r.bandwidth);
        total += static_cast<double>(r.batch) * static_cast<double>(r.iterations) * f;
    }
    return total / (static_cast<double>(dataset_size) * full);
}

void LRConfig::validate() const {
    if (!(warmup_frac >= 0.0 && warmup_frac < 1.0)) throw ParameterError("warmup fraction must lie in [0, 1)");
    if (!(min_lr <= base_lr && base_lr <= lr_cap)) throw ParameterError("need min_lr <= base_lr <= lr_cap");
}

double lr_at(double progress, const LRConfig& cfg) {
    if (!(progress >= 0.0 && progress <= 1.0)) {
        throw ParameterError("progress must lie in [0, 1], got " + std::to_string(progress));
    }
    if (progress < cfg.warmup_frac) return cfg.base_lr * progress / cfg.warmup_frac;
    const double t = (progress - cfg.warmup_frac) / (1.0 - cfg.warmup_frac);
    return cfg.min_lr + 0.5 * (cfg.base_lr - cfg.min_lr) * (1.0 + std::cos(std::numbers::pi * t));
}

BatchLR scale_batch_lr(double batch_scale, std::uint64_t base_batch, const LRConfig& cfg) {
    if (!(batch_scale >= 1.0)) throw ParameterError("batch scale must be at least 1");
    BatchLR out;
    out.batch = static_cast<std::uint64_t>(std::llround(static_cast<double>(base_batch) * batch_scale));
    const double ratio = static_cast<double>(out.batch) / static_cast<double>(base_batch);
    out.lr_max = std::min(cfg.base_lr * std::sqrt(ratio), cfg.lr_cap);
    return out;
}

double stage_lr(double progress, const LRConfig& cfg, const BatchLR& scaled) {
    const double base = lr_at(progress, cfg);
    return cfg.base_lr > 0.0 ? base * scaled.lr_max / cfg.base_lr : base;
}

std::vector<StagePlan> plan_schedule(const CurriculumSchedule& schedule, const FlopsModel& flops,
                                     std::uint64_t dataset_size, std::uint64_t base_batch, const LRConfig& lr) {
    schedule.validate();
    std::vector<StagePlan> plans;
    for (const auto& stage : schedule.stages) {
        StagePlan p;
        p.stage = stage;
        const BatchLR scaled = scale_batch_lr(stage.batch_scale, base_batch, lr);
        p.batch = scaled.batch;
        p.lr_max = scaled.lr_max;
        p.iterations = stage_iterations(stage, schedule.budget, flops, schedule.final_size, dataset_size, p.batch,
                                        schedule.basis);
        double ratio = 1.0;
        if (schedule.basis == ProgressBasis::compute) ratio = flops(schedule.final_size) / flops(stage.bandwidth);
        const double exact = stage.span() * schedule.budget * static_cast<double>(dataset_size) /
                             static_cast<double>(p.batch) * ratio;
        p.residue = std::max(0.0, exact - static_cast<double>(p.iterations));
        plans.push_back(p);
    }
    return plans;
}

double progress_in_stage(const Stage& stage, std::uint64_t i, std::uint64_t n) {
    if (n == 0) return stage.start_frac;
    return stage.start_frac + stage.span() * static_cast<double>(i) / static_cast<double>(n);
}

nlohmann::json to_json(const CurriculumSchedule& schedule) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : schedule.stages) {
        stages.push_back({{"start_frac", s.start_frac},
                          {"end_frac", s.end_frac},
                          {"bandwidth", s.bandwidth},
                          {"batch_scale", s.batch_scale}});
    }
    return {{"name", schedule.name},
            {"final_size", schedule.final_size},
            {"m0", schedule.m0},
            {"budget", schedule.budget},
            {"progress_basis", basis_name(schedule.basis)},
            {"stages", stages}};
}

CurriculumSchedule schedule_from_json(const nlohmann::json& j) {
    CurriculumSchedule s;
    try {
        s.name = j.value("name", std::string("custom"));
        s.final_size = j.at("final_size").get<int>();
        s.m0 = j.value("m0", 9.0);
        s.budget = j.at("budget").get<double>();
        const std::string basis = j.value("progress_basis", std::string("compute"));
        if (basis == "compute") {
            s.basis = ProgressBasis::compute;
        } else if (basis == "epoch") {
            s.basis = ProgressBasis::epoch;
        } else {
            throw ParameterError("unknown progress basis '" + basis + "'");
        }
        for (const auto& st : j.at("stages")) {
            s.stages.push_back(Stage{st.at("start_frac").get<double>(), st.at("end_frac").get<double>(),
                                     st.at("bandwidth").get<int>(), st.value("batch_scale", 1.0)});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed schedule: ") + e.what());
    }
    s.validate();
    return s;
}

std::string describe(const CurriculumSchedule& schedule) {
    std::ostringstream os;
    os << schedule.name << " (" << basis_name(schedule.basis) << " basis, budget " << schedule.budget
       << ", m0 " << schedule.m0 << ")\n";
    for (const auto& s : schedule.stages) {
        os << "  " << s.start_frac * 100 << "%-" << s.end_frac * 100 << "%: B=" << s.bandwidth;
        if (s.batch_scale != 1.0) os << " batch x" << s.batch_scale;
        os << '\n';
    }
    return os.str();
}

}  // namespace fcl::curriculum

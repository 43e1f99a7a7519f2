// SPDX-License-Identifier: Apache-2.0
//
// Curriculum searches: the greedy from-scratch search and the
// compute-constrained sequential search with proxy fine-tuning. Both drive
// an abstract trainer surface so they can be tested against rigged stubs.
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcl/curriculum.hpp"
#include "fcl/model/trainer.hpp"
#include "fcl/pipeline/plan.hpp"

namespace fcl::search {

/// Opaque training state held by a backend.
struct Snapshot {
    virtual ~Snapshot() = default;
};
using SnapshotPtr = std::shared_ptr<const Snapshot>;

/// What the searches need from a trainer.
class SearchBackend {
public:
    virtual ~SearchBackend() = default;

    virtual int final_size() const = 0;
    virtual std::uint64_t dataset_size() const = 0;
    virtual std::uint64_t base_batch() const = 0;
    virtual curriculum::FlopsModel flops() const = 0;
    virtual curriculum::LRConfig lr() const = 0;

    virtual SnapshotPtr fresh(std::uint64_t seed) = 0;
    /// Continue `from` through the segments; the parent is left untouched.
    /// Throws DivergedError on a non-finite loss.
    virtual SnapshotPtr train(const SnapshotPtr& from, const std::vector<pipeline::Segment>& segments) = 0;
    virtual double validate(const SnapshotPtr& s) = 0;
    /// Equivalent epochs consumed since fresh().
    virtual double consumed(const SnapshotPtr& s) const = 0;
    virtual std::string digest(const SnapshotPtr& s) const = 0;
    /// Persist a snapshot (optional).
    virtual void save(const SnapshotPtr&, const std::filesystem::path&) const {}
};

enum class Algorithm { greedy, sequential };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

struct SearchConfig {
    Algorithm algorithm = Algorithm::sequential;
    std::size_t stages = 3;      // N
    std::vector<int> candidates;  // ascending even bandwidths, each <= final size
    std::uint64_t seed = 0;
    double tolerance_points = 0.15;  // accuracy-equality tolerance, in accuracy points

    // greedy
    double epochs = 0.0;                      // T: budget of every from-scratch probe
    std::optional<double> baseline_accuracy;  // a0; measured by a baseline run when absent

    // sequential
    double beta = 2.0 / 3.0;        // T = beta * T0
    double baseline_epochs = 0.0;   // T0
    double finetune_epochs = 1.0;   // T_ft

    std::filesystem::path run_dir;  // when set, every trial is checkpointed there

    void validate(int final_size) const;
    double tolerance() const noexcept { return tolerance_points / 100.0; }
};

nlohmann::json to_json(const SearchConfig& cfg);
SearchConfig search_config_from_json(const nlohmann::json& j);

/// Default candidate grid: the adapted bandwidth triple of the default
/// curriculum plus the final size, deduplicated and sorted.
std::vector<int> default_candidates(int final_size);

struct Trial {
    std::size_t stage = 0;  // 1-based
    int bandwidth = 0;
    std::uint64_t iterations = 0;           // stage iterations (sequential) or total (greedy)
    std::uint64_t finetune_iterations = 0;  // sequential only
    double accuracy = 0.0;                  // proxy (sequential) or final (greedy) accuracy
    double consumed = 0.0;                  // equivalent epochs spent on this trial
    bool diverged = false;
    bool accepted = false;
    std::string parent_digest;
    std::string digest;  // trained (pre-fine-tune) state
    std::vector<int> schedule;  // greedy: bandwidth per stage probed
};

struct SearchReport {
    Algorithm algorithm = Algorithm::sequential;
    SearchConfig config;
    int final_size = 0;
    std::vector<Trial> trials;
    std::vector<int> chosen;            // B-hat per stage
    std::vector<std::size_t> unsatisfied;  // greedy stages where no candidate met a0 - tol
    std::optional<double> baseline_accuracy;
    double baseline_cost = 0.0;  // greedy: cost of measuring a0 (counted in search_cost)
    double search_cost = 0.0;    // equivalent epochs over all trials
    // sequential: the chosen schedule carried to completion
    double executed_cost = 0.0;
    double final_accuracy = 0.0;
    std::string final_digest;
    double wall_seconds = 0.0;  // not part of the deterministic content

    /// Report without timing; identical across repeat runs.
    nlohmann::json deterministic_json() const;
    nlohmann::json to_json() const;
    std::string trials_csv() const;
};

SearchReport greedy_search(SearchBackend& backend, const SearchConfig& cfg);
SearchReport sequential_search(SearchBackend& backend, const SearchConfig& cfg);
SearchReport run_search(SearchBackend& backend, const SearchConfig& cfg);

/// Accounting model alone (no training): equivalent epochs a search would
/// spend for the configuration, assuming every greedy stage scans all
/// candidates and a0 is measured.
double greedy_cost_bound(const SearchConfig& cfg, std::size_t candidates);
double sequential_cost_model(SearchBackend& backend, const SearchConfig& cfg);

/// Backend over the model module's trainer.
class ModelBackend : public SearchBackend {
public:
    ModelBackend(const model::Trainer& trainer, const pipeline::Dataset& val);

    int final_size() const override { return trainer_.final_size(); }
    std::uint64_t dataset_size() const override { return trainer_.data().size(); }
    std::uint64_t base_batch() const override { return trainer_.config().base_batch; }
    curriculum::FlopsModel flops() const override { return trainer_.flops_model(); }
    curriculum::LRConfig lr() const override { return trainer_.config().lr; }

    SnapshotPtr fresh(std::uint64_t seed) override;
    SnapshotPtr train(const SnapshotPtr& from, const std::vector<pipeline::Segment>& segments) override;
    double validate(const SnapshotPtr& s) override;
    double consumed(const SnapshotPtr& s) const override;
    std::string digest(const SnapshotPtr& s) const override;
    void save(const SnapshotPtr& s, const std::filesystem::path& path) const override;

    static const model::TrainerState& state(const SnapshotPtr& s);

private:
    const model::Trainer& trainer_;
    const pipeline::Dataset& val_;
};

}  // namespace fcl::search

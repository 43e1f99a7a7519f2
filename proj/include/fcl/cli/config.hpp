// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: a JSON document validated key by key (unknown keys are
// errors) and resolved into the library's option structs. The resolved form
// is written into every run directory and loads back to the same run.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcl/curriculum.hpp"
#include "fcl/model/network.hpp"
#include "fcl/model/trainer.hpp"
#include "fcl/pipeline/dataset.hpp"
#include "fcl/search/search.hpp"
#include "fcl/spectral/spectral.hpp"

namespace fcl::cli {

/// A dataset from files or from the built-in shape generator.
struct DataSource {
    pipeline::DatasetSpec files;
    bool synthetic = false;
    std::size_t synthetic_count = 0;
    std::uint64_t synthetic_seed = 0;

    pipeline::Dataset open(pipeline::Split split) const;
};

struct ProbeConfig {
    std::vector<double> fractions{0.1, 1.0};  // of the budget; checkpoints evaluated there
    std::vector<double> low_radii;            // empty = every integer radius in [1, H/2]
    std::vector<double> high_radii;
    double tolerance_points = 2.0;            // final low/high accuracies must match within this
    std::vector<spectral::FilterSpec> extra;  // further settings, e.g. an all-pass square filter
    std::size_t val_limit = 0;                // evaluate on the first N validation samples (0 = all)
    // "bins": radii are absolute frequency bins at the data's side.
    // "reference": radii are quoted at reference_side and scaled by side / reference_side.
    std::string radius_units = "bins";
    double reference_side = 224.0;
};

struct RunConfig {
    DataSource train;
    DataSource val;
    model::NetworkSpec model = model::desk_spec();
    std::string curriculum = "baseline";  // baseline | et | etpp | custom
    std::filesystem::path curriculum_file;  // custom schedules
    double budget = 10.0;                   // equivalent epochs (epochs for et)
    model::TrainConfig training;
    double eval_every = 0.0;        // equivalent epochs between evaluation rows (0 = final only)
    double checkpoint_every = 0.0;  // equivalent epochs between checkpoints (0 = final only)
    std::optional<search::SearchConfig> search;
    std::optional<ProbeConfig> probe;
    std::uint64_t seed = 0;
    std::filesystem::path output = "runs/default";

    /// Schedule selected by `curriculum` at `budget` and the final size.
    curriculum::CurriculumSchedule schedule() const;
};

/// Throws ConfigError naming the offending key. Relative paths resolve
/// against `base` (the config file's directory).
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
RunConfig load_config(const std::filesystem::path& path);
/// Fully resolved configuration (every default spelled out, absolute paths).
nlohmann::json to_json(const RunConfig& cfg);

/// Applies `key.path=value` overrides; the value is parsed as JSON when it
/// parses, otherwise taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Forces single-worker execution.
void make_deterministic(RunConfig& cfg);

nlohmann::json filter_to_json(const spectral::FilterSpec& f);
spectral::FilterSpec filter_from_json(const nlohmann::json& j);

}  // namespace fcl::cli

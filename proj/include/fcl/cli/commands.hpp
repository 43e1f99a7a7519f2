// SPDX-License-Identifier: Apache-2.0
//
// Subcommand bodies. Each returns normally on success and throws the
// library's typed errors otherwise; the entry point maps them to exit codes.
#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcl/cli/config.hpp"
#include "fcl/search/search.hpp"

namespace fcl::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kFormat = 3, kDiverged = 4 };

/// Maps the exception in flight to an exit code and prints it.
int report_error(std::ostream& err);

// ---------------------------------------------------------------- transform

struct TransformRequest {
    std::filesystem::path input;
    std::filesystem::path labels;  // IDX: labels file (optional)
    std::size_t index = 0;         // IDX: sample index
    std::filesystem::path output;
    std::string op = "identity";  // identity | crop | filter | downsample | lowfreq | dft
    int bandwidth = 0;
    std::string method;  // downsample: nearest|bilinear|box; lowfreq: exact|windowed_sinc
    int lobes = 3;
    int side = 0;  // downsample output side
    spectral::FilterSpec filter;
};

/// Writes the RTEN output and `<output>.json` with the operation metadata.
nlohmann::json cmd_transform(const TransformRequest& req);

// ---------------------------------------------------------------- train

struct TrainResult {
    nlohmann::json summary;
    bool diverged = false;
};

/// Run directory: config.json, steps.jsonl, eval.jsonl, summary.json,
/// checkpoints/. Divergence is recorded in the summary, not thrown.
TrainResult cmd_train(const RunConfig& cfg, std::ostream* progress = nullptr);

// ---------------------------------------------------------------- search

search::SearchReport cmd_search(const RunConfig& cfg, std::ostream* progress = nullptr);

// ---------------------------------------------------------------- probe

struct ProbeResult {
    std::vector<std::string> settings;         // column names
    std::vector<double> fractions;             // row keys
    std::vector<std::vector<double>> accuracy;  // [fraction][setting]
    double low_radius = 0.0, high_radius = 0.0;
    bool calibrated = false;
    double final_gap_points = 0.0;
    nlohmann::json to_json() const;
    std::string matrix_csv() const;
};

/// Trains per the config, evaluates the checkpoints at the requested
/// fractions under every filter setting and calibrates the low/high pair.
ProbeResult cmd_probe(const RunConfig& cfg, std::ostream* progress = nullptr);

/// Calibration alone: among the (low, high) radius pairs pick the one whose
/// final accuracies are closest; ties go to the first pair in grid order.
void calibrate_pair(ProbeResult& result, const std::vector<double>& low, const std::vector<double>& high,
                    double tolerance_points);

// ---------------------------------------------------------------- report

struct Curve {
    std::string name;
    std::vector<double> cost;     // equivalent epochs, ascending
    std::vector<double> seconds;  // wall time at the same rows
    std::vector<double> accuracy;
};

/// Cost at which `curve` first reaches `target` accuracy, by linear
/// interpolation between evaluation rows; nullopt when it never does.
std::optional<double> cost_to_reach(const Curve& curve, double target);

/// Reads the run directories and writes report_cost.csv, report_time.csv and
/// report_summary.csv into `out`. The reference for speedups is the first
/// run whose curriculum is baseline (else the first readable run).
nlohmann::json cmd_report(const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out);

// ---------------------------------------------------------------- synthetic data

/// CIFAR-format synthetic shape data: train.bin and val.bin in `dir`.
void cmd_synth(const std::filesystem::path& dir, std::size_t train, std::size_t val, std::uint64_t seed);

}  // namespace fcl::cli

// SPDX-License-Identifier: Apache-2.0
//
// fcl: transform, train, search, probe, report (and synth for test data).
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "fcl/cli/commands.hpp"
#include "fcl/error.hpp"

namespace fs = std::filesystem;
using namespace fcl;
using namespace fcl::cli;

namespace {

struct ConfigFlags {
    fs::path config;
    std::vector<std::string> overrides;
    std::string output;
    std::optional<std::uint64_t> seed;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
    cmd->add_option("-c,--config", f.config, "run configuration (JSON)")->required();
    cmd->add_option("--set", f.overrides, "override a config key, e.g. --set replay.n_buffer=1");
    cmd->add_option("-o,--output", f.output, "output directory (overrides the config)");
    cmd->add_option("--seed", f.seed, "seed (overrides the config)");
}

RunConfig resolve(const ConfigFlags& f, bool deterministic) {
    std::ifstream in(f.config);
    if (!in) throw ConfigError("cannot open config " + f.config.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + f.config.string() + " is not valid JSON: " + e.what());
    }
    for (const auto& o : f.overrides) apply_override(j, o);
    if (!f.output.empty()) j["output"] = fs::absolute(f.output).string();
    if (f.seed) j["seed"] = *f.seed;
    RunConfig cfg = config_from_json(j, fs::absolute(f.config).parent_path());
    if (deterministic) make_deterministic(cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frequency-curriculum training engine"};
    app.require_subcommand(1);
    bool deterministic = false;
    app.add_flag("--deterministic", deterministic, "force single-worker execution everywhere");

    TransformRequest tr;
    std::string shape = "square", mode = "low_pass";
    auto* transform = app.add_subcommand("transform", "apply a spectral operation to an RTEN or IDX sample");
    transform->add_option("-i,--input", tr.input, "RTEN image or IDX images file")->required();
    transform->add_option("--labels", tr.labels, "IDX labels file");
    transform->add_option("--index", tr.index, "IDX sample index");
    transform->add_option("-o,--output", tr.output, "RTEN output")->required();
    transform->add_option("--op", tr.op, "identity | crop | filter | downsample | lowfreq | dft");
    transform->add_option("-B,--bandwidth", tr.bandwidth, "bandwidth for crop/lowfreq");
    transform->add_option("--method", tr.method, "downsample: nearest|bilinear|box; lowfreq: exact|windowed_sinc");
    transform->add_option("--lobes", tr.lobes, "windowed-sinc lobes");
    transform->add_option("--side", tr.side, "downsample output side");
    transform->add_option("--shape", shape, "filter shape: square | circular");
    transform->add_option("--mode", mode, "filter mode: low_pass | high_pass");
    transform->add_option("--size", tr.filter.size, "filter bandwidth (square) or radius (circular)");

    ConfigFlags train_flags, search_flags, probe_flags;
    auto* train = app.add_subcommand("train", "train one curriculum run");
    add_config_flags(train, train_flags);
    auto* search = app.add_subcommand("search", "run a curriculum search");
    add_config_flags(search, search_flags);
    auto* probe = app.add_subcommand("probe", "frequency probe: filtered-validation accuracy over training");
    add_config_flags(probe, probe_flags);

    std::vector<fs::path> runs;
    fs::path report_out = ".";
    auto* report = app.add_subcommand("report", "compare run directories");
    report->add_option("runs", runs, "run directories");
    report->add_option("-o,--output", report_out, "where the CSV tables go");

    fs::path synth_dir;
    std::size_t synth_train = 5000, synth_val = 1000;
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synth", "write the synthetic shape dataset in CIFAR-10 binary format");
    synth->add_option("-o,--output", synth_dir, "directory")->required();
    synth->add_option("--train", synth_train, "training samples");
    synth->add_option("--val", synth_val, "validation samples");
    synth->add_option("--seed", synth_seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*transform) {
            tr.filter.shape = shape == "circular" ? spectral::FilterShape::circular : spectral::FilterShape::square;
            if (shape != "circular" && shape != "square") throw ConfigError("--shape must be square or circular");
            if (mode != "low_pass" && mode != "high_pass") throw ConfigError("--mode must be low_pass or high_pass");
            tr.filter.mode = mode == "high_pass" ? spectral::FilterMode::high_pass : spectral::FilterMode::low_pass;
            const auto meta = cmd_transform(tr);
            std::cout << meta["output"]["path"].get<std::string>() << ' ' << meta["output"]["shape"].get<std::string>()
                      << '\n';
        } else if (*train) {
            const RunConfig cfg = resolve(train_flags, deterministic);
            const auto r = cmd_train(cfg, &std::cout);
            std::cout << r.summary.dump(2) << '\n';
            if (r.diverged) return kDiverged;
        } else if (*search) {
            const RunConfig cfg = resolve(search_flags, deterministic);
            cmd_search(cfg, &std::cout);
        } else if (*probe) {
            const RunConfig cfg = resolve(probe_flags, deterministic);
            const auto r = cmd_probe(cfg, &std::cout);
            std::cout << r.to_json()["pair"].dump(2) << '\n';
        } else if (*report) {
            if (runs.empty()) throw ConfigError("usage: fcl report RUN_DIR [RUN_DIR...]");
            std::cout << cmd_report(runs, report_out).dump(2) << '\n';
        } else if (*synth) {
            cmd_synth(synth_dir, synth_train, synth_val, synth_seed);
        }
    } catch (...) {
        return report_error(std::cerr);
    }
    return kOk;
}

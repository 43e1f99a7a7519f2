#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fcl/cli/commands.hpp"
#include "fcl/error.hpp"
#include "fcl/rten.hpp"
#include "fcl/rng.hpp"

using namespace fcl;
using namespace fcl::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("fcl_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

json base_config(const fs::path& out) {
    return {{"data",
             {{"train", {{"synthetic", {{"count", 400}, {"seed", 1}}}}},
              {"val", {{"synthetic", {{"count", 100}, {"seed", 2}}}}}}},
            {"model", {{"widths", {8, 16}}, {"groups", 4}}},
            {"curriculum", "baseline"},
            {"budget", 3},
            {"batch", 8},
            {"eval_every", 1.0},
            {"output", out.string()}};
}

json strip_timing(json summary) {
    summary.erase("timing");
    return summary;
}

std::vector<std::string> lines_of(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FCL_CLI_BINARY) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ImageD random_image(std::size_t c, std::size_t side, std::uint64_t seed) {
    Rng rng(seed);
    ImageD x(c, side, side);
    for (double& v : x.data()) v = uniform01(rng);
    return x;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("configs reject unknown keys and round-trip through their resolved form") {
    const auto dir = scratch("config");
    json j = base_config(dir / "run");
    CHECK_NOTHROW(config_from_json(j));

    json bad = j;
    bad["replay"] = {{"n_buffer", 1}, {"capcity", 4}};
    CHECK_THROWS_WITH_AS(config_from_json(bad), "unknown key 'replay.capcity'", ConfigError);
    bad = j;
    bad["data"]["train"]["synthetic"]["cout"] = 3;
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    bad = j;
    bad["model"]["depth"] = 3;
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    bad = j;
    bad["batch"] = "64";
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    bad = j;
    bad["curriculum"] = "fastest";
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    bad = j;
    bad["search"] = {{"candidates", {16, 33}}};
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);

    const RunConfig c = config_from_json(j);
    const json resolved = to_json(c);
    CHECK(to_json(config_from_json(resolved)) == resolved);

    // Plain baseline runs keep the magnitude at m0; curricula and searches ramp it.
    CHECK_FALSE(c.training.preprocess.ramp_magnitude);
    json ramped = j;
    ramped["curriculum"] = "etpp";
    CHECK(config_from_json(ramped).training.preprocess.ramp_magnitude);
    ramped = j;
    ramped["search"] = {{"candidates", {16, 32}}, {"baseline_epochs", 3}};
    CHECK(config_from_json(ramped).training.preprocess.ramp_magnitude);
    ramped = j;
    ramped["augment"] = {{"ramp", true}};
    CHECK(config_from_json(ramped).training.preprocess.ramp_magnitude);

    apply_override(j, "replay.n_buffer=1");
    apply_override(j, "curriculum=etpp");
    CHECK(j["replay"]["n_buffer"] == 1);
    CHECK(j["curriculum"] == "etpp");
    CHECK(config_from_json(j).training.replay.n_buffer == 1);
    CHECK_THROWS_AS(apply_override(j, "novalue"), ConfigError);
}

TEST_CASE("transform writes the library's result with a metadata sidecar") {
    const auto dir = scratch("transform");
    const ImageD x = random_image(3, 32, 5);
    rten::write_image(dir / "in.rten", x, rten::DType::f64);

    TransformRequest req;
    req.input = dir / "in.rten";
    req.output = dir / "crop.rten";
    req.op = "crop";
    req.bandwidth = 16;
    const json meta = cmd_transform(req);
    CHECK(meta["output"]["shape"] == "3x16x16");
    CHECK(fs::exists(dir / "crop.rten.json"));

    const ImageD y = rten::read_image(dir / "crop.rten");
    const auto got = spectral::dft2(y);
    const auto in = spectral::dft2(x);
    double worst = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        const auto want = spectral::crop_spectrum(in[c], 16);
        for (std::size_t k = 0; k < want.data().size(); ++k)
            worst = std::max(worst, std::abs(got[c].data()[k] - want.data()[k]) / (std::abs(want.data()[k]) + 1.0));
    }
    CHECK(worst < 1e-9);

    // identity keeps the payload byte for byte, f32 included
    rten::write_image(dir / "in32.rten", x, rten::DType::f32);
    req.input = dir / "in32.rten";
    req.output = dir / "same.rten";
    req.op = "identity";
    cmd_transform(req);
    CHECK(rten::read_file(dir / "in32.rten") == rten::read_file(dir / "same.rten"));

    // odd bandwidth fails with the spectral module's own message
    std::string expected;
    try {
        spectral::low_freq_crop(x, 15);
    } catch (const ParameterError& e) {
        expected = e.what();
    }
    REQUIRE(!expected.empty());
    req.input = dir / "in.rten";
    req.op = "crop";
    req.bandwidth = 15;
    CHECK_THROWS_WITH_AS(cmd_transform(req), expected.c_str(), ParameterError);
    CHECK(run_cli("transform -i " + (dir / "in.rten").string() + " -o " + (dir / "odd.rten").string() +
                  " --op crop -B 15") == kConfig);
}

TEST_CASE("train runs account their budget and reproduce from the resolved config") {
    const auto dir = scratch("train");
    json j = base_config(dir / "base");
    const RunConfig base = config_from_json(j);
    const auto r = cmd_train(base);
    REQUIRE(r.summary["status"] == "completed");
    CHECK(std::abs(r.summary["equivalent_epochs"].get<double>() - 3.0) / 3.0 < 0.005);

    j["curriculum"] = "etpp";
    j["output"] = (dir / "etpp").string();
    const auto e = cmd_train(config_from_json(j));
    CHECK(std::abs(e.summary["equivalent_epochs"].get<double>() - 3.0) / 3.0 < 0.005);

    // log rows carry the accounting fields; eval rows end with the final one
    const auto steps = lines_of(dir / "base" / "steps.jsonl");
    CHECK(steps.size() == r.summary["iterations"].get<std::size_t>());
    const json first = json::parse(steps.front());
    for (const char* key : {"iteration", "bandwidth", "batch", "lr", "loss", "equivalent_epochs"})
        CHECK(first.contains(key));
    const auto evals = lines_of(dir / "base" / "eval.jsonl");
    CHECK(evals.size() == 3);  // marks at 1 and 2, then the final evaluation
    CHECK(json::parse(evals.back())["accuracy"] == r.summary["final_accuracy"]);

    // rerun from the config the run directory recorded
    const RunConfig again = load_config(dir / "base" / "config.json");
    RunConfig moved = again;
    moved.output = dir / "again";
    const auto r2 = cmd_train(moved);
    CHECK(strip_timing(r2.summary) == strip_timing(r.summary));

    // the same run through the binary, with a seed override, differs only where the seed matters
    CHECK(run_cli("--deterministic train -c " + (dir / "base" / "config.json").string() + " -o " +
                  (dir / "cli").string()) == kOk);
    const json cli_summary = json::parse(std::ifstream(dir / "cli" / "summary.json"));
    CHECK(strip_timing(cli_summary) == strip_timing(r.summary));
}

TEST_CASE("diverged runs keep their logs and exit with the divergence code") {
    const auto dir = scratch("diverge");
    json j = base_config(dir / "run");
    j["lr"] = {{"base_lr", 1e30}, {"lr_cap", 1e31}};
    const auto r = cmd_train(config_from_json(j));
    CHECK(r.diverged);
    CHECK(r.summary["status"] == "diverged");
    CHECK(fs::exists(dir / "run" / "steps.jsonl"));
    CHECK(!lines_of(dir / "run" / "steps.jsonl").empty());

    std::ofstream(dir / "cfg.json") << j.dump();
    CHECK(run_cli("train -c " + (dir / "cfg.json").string()) == kDiverged);
    std::ofstream(dir / "bad.json") << R"({"data": {}, "budget": 3})";
    CHECK(run_cli("train -c " + (dir / "bad.json").string()) == kConfig);
    json missing = base_config(dir / "m");
    missing["data"]["train"] = {{"format", "idx"}, {"paths", {(dir / "absent-images-idx3-ubyte").string()}}};
    std::ofstream(dir / "missing.json") << missing.dump();
    CHECK(run_cli("train -c " + (dir / "missing.json").string()) == kFormat);
}

TEST_CASE("search command writes reproducible reports") {
    const auto dir = scratch("search");
    json j = base_config(dir / "trivial");
    j["search"] = {{"algorithm", "etpp"}, {"stages", 3}, {"candidates", {32}}, {"baseline_epochs", 1.5}};
    const auto trivial = cmd_search(config_from_json(j));
    CHECK(trivial.chosen == std::vector<int>{32, 32, 32});
    CHECK(trivial.trials.size() == 2);
    CHECK(fs::exists(dir / "trivial" / "search_report.json"));
    CHECK(fs::exists(dir / "trivial" / "search_trials.csv"));

    j["search"]["candidates"] = {16, 24, 32};
    j["output"] = (dir / "a").string();
    const auto a = cmd_search(config_from_json(j));
    j["output"] = (dir / "b").string();
    const auto b = cmd_search(config_from_json(j));
    CHECK(a.deterministic_json() == b.deterministic_json());
    CHECK(a.chosen.size() == 3);
    for (int c : a.chosen) CHECK((c == 16 || c == 24 || c == 32));

    json greedy = base_config(dir / "g");
    greedy["search"] = {{"algorithm", "greedy"}, {"stages", 3}, {"candidates", {16}}, {"epochs", 0.5},
                        {"baseline_accuracy", 1.0}};
    std::ofstream(dir / "greedy.json") << greedy.dump();
    CHECK(run_cli("search -c " + (dir / "greedy.json").string()) == kOk);  // unsatisfiable stages are flagged, not fatal
    const json rep = json::parse(std::ifstream(dir / "g" / "search_report.json"));
    CHECK(rep["unsatisfied_stages"] == json::array({1, 2}));
}

TEST_CASE("probe columns and radius calibration") {
    const auto dir = scratch("probe");
    json j = base_config(dir / "run");
    j["budget"] = 1;
    j["probe"] = {{"fractions", {0.5, 1.0}},
                  {"low_radii", {4, 8}},
                  {"high_radii", {2, 6}},
                  {"extra", {{{"shape", "square"}, {"mode", "low_pass"}, {"size", 32}}}}};
    const auto p = cmd_probe(config_from_json(j));
    REQUIRE(p.fractions.size() == 2);
    REQUIRE(p.settings.front() == "none");
    REQUIRE(p.settings.back() == "square_low_32.000");
    for (const auto& row : p.accuracy) CHECK(row.front() == row.back());  // all-pass equals plain validation
    CHECK(fs::exists(dir / "run" / "probe_matrix.csv"));
    CHECK(fs::exists(dir / "run" / "probe.json"));

    ProbeResult r;
    r.settings = {"none", "low_r4.000", "low_r8.000", "high_r2.000", "high_r6.000"};
    r.fractions = {0.1, 1.0};
    r.accuracy = {{0.3, 0.25, 0.28, 0.1, 0.05}, {0.7, 0.50, 0.635, 0.62, 0.40}};
    calibrate_pair(r, {4, 8}, {2, 6}, 2.0);
    CHECK(r.low_radius == 8.0);
    CHECK(r.high_radius == 2.0);
    CHECK(r.final_gap_points == doctest::Approx(1.5));
    CHECK(r.calibrated);
    calibrate_pair(r, {4}, {6}, 2.0);
    CHECK_FALSE(r.calibrated);
    CHECK(r.to_json()["pair"]["rows"][0]["low_pass"] == 0.25);

    // Radii quoted at a 224 reference side scale to the data's side.
    j["output"] = (dir / "ref").string();
    j["probe"] = {{"fractions", {1.0}}, {"low_radii", {56}}, {"high_radii", {28}}, {"radius_units", "reference"}};
    const auto q = cmd_probe(config_from_json(j));
    CHECK(q.settings == std::vector<std::string>{"none", "low_r8.000", "high_r4.000"});
    j["probe"]["radius_units"] = "percent";
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
}

TEST_CASE("report interpolates speedups at matched accuracy") {
    const auto dir = scratch("report");
    auto make_run = [&](const std::string& name, const std::string& curriculum,
                        const std::vector<std::array<double, 3>>& rows) {
        fs::create_directories(dir / name);
        std::ofstream ev(dir / name / "eval.jsonl");
        for (const auto& r : rows)
            ev << json{{"equivalent_epochs", r[0]}, {"train_seconds", r[1]}, {"accuracy", r[2]}}.dump() << '\n';
        const auto& last = rows.back();
        std::ofstream(dir / name / "summary.json")
            << json{{"status", "completed"},
                    {"curriculum", curriculum},
                    {"final_accuracy", last[2]},
                    {"equivalent_epochs", last[0]},
                    {"timing", {{"train_seconds", last[1]}}}}
                   .dump();
    };
    make_run("base", "baseline", {{10, 100, 0.5}, {20, 200, 0.7}, {30, 300, 0.8}});
    make_run("etpp", "etpp", {{10, 60, 0.6}, {20, 120, 0.75}});

    const json single = cmd_report({dir / "base"}, dir / "out1");
    CHECK(single["runs"][0]["speedup_cost"].get<double>() == doctest::Approx(1.0));

    const json pair = cmd_report({dir / "base", dir / "etpp", dir / "missing"}, dir / "out2");
    CHECK(pair["reference"] == "base");
    // baseline reaches 0.75 halfway between 20 and 30 equivalent epochs
    CHECK(pair["runs"][1]["speedup_cost"].get<double>() == doctest::Approx(25.0 / 20.0));
    CHECK(pair["runs"][1]["speedup_time"].get<double>() == doctest::Approx(250.0 / 120.0));
    CHECK(pair["runs"][2]["note"] == "missing summary.json");
    const auto summary = lines_of(dir / "out2" / "report_summary.csv");
    CHECK(summary.size() == 4);
    CHECK(lines_of(dir / "out2" / "report_cost.csv").size() == 6);
    CHECK_THROWS_AS(cmd_report({}, dir / "out3"), ConfigError);
    CHECK(run_cli("report") == kConfig);

    Curve c{"c", {1, 2, 3}, {1, 2, 3}, {0.2, 0.4, 0.3}};
    CHECK(*cost_to_reach(c, 0.3) == doctest::Approx(1.5));
    CHECK(!cost_to_reach(c, 0.5));
}

}  // TEST_SUITE

// SPDX-License-Identifier: Apache-2.0
#include "fcl/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "fcl/error.hpp"
#include "fcl/model/digest.hpp"
#include "fcl/rten.hpp"

namespace fcl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

void write_json(const fs::path& path, const json& j) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw ConfigError("cannot write " + path.string());
        out << j.dump(2) << '\n';
    }
    fs::rename(tmp, path);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path.string() + ": cannot open", 0);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what(), 0);
    }
}

// Append-only JSONL; every row is flushed so a crashed run stays readable.
class JsonlWriter {
public:
    explicit JsonlWriter(const fs::path& path) : out_(path, std::ios::trunc) {
        if (!out_) throw ConfigError("cannot write " + path.string());
    }
    void write(const json& row) { out_ << row.dump() << '\n' << std::flush; }

private:
    std::ofstream out_;
};

std::string shape_of(const ImageD& x) {
    return std::to_string(x.channels()) + "x" + std::to_string(x.height()) + "x" + std::to_string(x.width());
}

std::string file_digest(const fs::path& p) {
    const auto bytes = rten::read_file(p);
    model::Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.finish_hex();
}

std::string mark_name(double mark) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << mark;
    return os.str();
}

// Shared body of train and probe: one training run with logs, periodic
// evaluation and checkpoints. `extra_marks` get their own callback.
struct RunOutcome {
    json summary;
    bool diverged = false;
    model::TrainerState state;
};

RunOutcome train_run(const RunConfig& cfg, const pipeline::Dataset& train, const pipeline::Dataset& val,
                     const std::vector<double>& extra_marks,
                     const std::function<void(double, const model::TrainerState&)>& on_extra, std::ostream* progress) {
    const fs::path out = cfg.output;
    fs::create_directories(out / "checkpoints");
    write_json(out / "config.json", to_json(cfg));

    model::Trainer trainer(train, cfg.model, cfg.training);
    const auto schedule = cfg.schedule();
    const auto segments = model::schedule_segments(schedule, trainer.flops_model(), train.size(),
                                                   cfg.training.base_batch, cfg.training.lr);
    model::TrainerState state = trainer.init(cfg.seed);
    const auto plan = trainer.plan(segments, state);

    JsonlWriter steps(out / "steps.jsonl");
    JsonlWriter evals(out / "eval.jsonl");

    // Evaluation and checkpoint marks strictly inside the run; the final
    // state is always evaluated and saved after the loop.
    const double end = cfg.budget * (1.0 - 1e-6);
    std::set<double> eval_marks, ckpt_marks, extra(extra_marks.begin(), extra_marks.end());
    if (cfg.eval_every > 0.0)
        for (double m = cfg.eval_every; m < end; m += cfg.eval_every) eval_marks.insert(m);
    if (cfg.checkpoint_every > 0.0)
        for (double m = cfg.checkpoint_every; m < end; m += cfg.checkpoint_every) ckpt_marks.insert(m);
    std::set<double> all = eval_marks;
    all.insert(ckpt_marks.begin(), ckpt_marks.end());
    all.insert(extra.begin(), extra.end());

    const auto start = Clock::now();
    double eval_seconds = 0.0;
    auto eval_row = [&](const model::TrainerState& st, double accuracy) {
        evals.write({{"iteration", st.iteration},
                     {"equivalent_epochs", st.equivalent_epochs},
                     {"progress", st.progress},
                     {"accuracy", accuracy},
                     {"train_seconds", since(start) - eval_seconds}});
    };

    model::RunHooks hooks;
    hooks.on_step = [&](const model::StepLog& row) { steps.write(model::to_json(row)); };
    hooks.marks.assign(all.begin(), all.end());
    hooks.on_mark = [&](double mark, const model::TrainerState& st) {
        const auto t = Clock::now();
        if (eval_marks.count(mark)) {
            const double acc = model::evaluate(st.net, val);
            eval_row(st, acc);
            if (progress) *progress << "  eq-epoch " << st.equivalent_epochs << ": accuracy " << acc << '\n';
        }
        if (ckpt_marks.count(mark)) model::save_checkpoint(out / "checkpoints" / ("ee_" + mark_name(mark) + ".fqck"), st);
        if (extra.count(mark) && on_extra) on_extra(mark, st);
        eval_seconds += since(t);
    };

    RunOutcome res;
    json summary{{"curriculum", cfg.curriculum},
                 {"schedule", curriculum::to_json(schedule)},
                 {"budget", cfg.budget},
                 {"seed", cfg.seed},
                 {"planned_iterations", plan.iterations.size()},
                 {"fresh_batches", plan.fresh_count()}};
    try {
        trainer.run(state, plan, hooks);
    } catch (const DivergedError& e) {
        summary["status"] = "diverged";
        summary["error"] = e.what();
        summary["iterations"] = state.iteration;
        summary["equivalent_epochs"] = state.equivalent_epochs;
        summary["timing"] = {{"train_seconds", since(start) - eval_seconds}, {"wall_seconds", since(start)}};
        write_json(out / "summary.json", summary);
        res.summary = summary;
        res.diverged = true;
        res.state = std::move(state);
        return res;
    }
    const double train_seconds = since(start) - eval_seconds;
    const double accuracy = model::evaluate(state.net, val);
    eval_row(state, accuracy);
    model::save_checkpoint(out / "checkpoints" / "final.fqck", state);

    std::uint64_t samples = 0;
    for (const auto& s : plan.segments) samples += s.batch * s.iterations;
    summary["status"] = "completed";
    summary["final_accuracy"] = accuracy;
    summary["equivalent_epochs"] = state.equivalent_epochs;
    summary["iterations"] = state.iteration;
    summary["final_digest"] = model::state_digest(state);
    summary["timing"] = {{"train_seconds", train_seconds},
                         {"wall_seconds", since(start)},
                         {"samples_per_second", train_seconds > 0 ? samples / train_seconds : 0.0}};
    write_json(out / "summary.json", summary);
    res.summary = summary;
    res.state = std::move(state);
    return res;
}

pipeline::Dataset limited(const pipeline::Dataset& d, std::size_t limit) {
    if (limit == 0 || limit >= d.size()) return d;
    pipeline::Dataset s = d.subset(0, limit);
    s.split = d.split;
    return s;
}

}  // namespace

int report_error(std::ostream& err) {
    try {
        throw;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << '\n';
        return kConfig;
    } catch (const SpecError& e) {
        err << "error: " << e.what() << '\n';
        return kConfig;
    } catch (const SizeError& e) {
        err << "error: " << e.what() << '\n';
        return kConfig;
    } catch (const CostModelError& e) {
        err << "error: " << e.what() << '\n';
        return kConfig;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << '\n';
        return kFormat;
    } catch (const CheckpointError& e) {
        err << "format error: " << e.what() << '\n';
        return kFormat;
    } catch (const DivergedError& e) {
        err << "diverged: " << e.what() << '\n';
        return kDiverged;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

// ---------------------------------------------------------------- transform

json cmd_transform(const TransformRequest& req) {
    if (req.output.empty()) throw ConfigError("transform needs an output path");
    ImageD x;
    rten::DType dtype = rten::DType::f64;
    std::string source;
    {
        std::ifstream in(req.input, std::ios::binary);
        if (!in) throw FormatError(req.input.string() + ": cannot open", 0);
        char magic[4] = {};
        in.read(magic, 4);
        if (in.gcount() == 4 && std::string(magic, 4) == "RTEN") {
            rten::Header h;
            x = rten::read_image(req.input, &h);
            if (h.flags & rten::kComplexFlag) throw FormatError(req.input.string() + ": complex RTEN is not an image", 6);
            dtype = h.dtype;
            source = "rten";
        } else {
            const auto* m = reinterpret_cast<const unsigned char*>(magic);
            if (in.gcount() < 4 || m[0] != 0 || m[1] != 0 || m[2] != 0x08) {
                throw FormatError(req.input.string() + ": neither an RTEN file nor IDX u8 images", 0);
            }
            pipeline::DatasetSpec spec;
            spec.format = pipeline::DatasetFormat::idx;
            spec.paths = {req.input};
            spec.labels = req.labels;
            const auto d = pipeline::open_dataset(spec);
            if (req.index >= d.size()) throw ParameterError("sample index " + std::to_string(req.index) + " out of range");
            x = d.sample(req.index);
            source = "idx";
        }
    }

    json params = json::object();
    json meta{{"op", req.op}, {"input", {{"path", req.input.string()}, {"format", source}, {"shape", shape_of(x)}}}};
    if (source == "idx") meta["input"]["index"] = req.index;

    if (req.op == "dft") {
        const auto spectra = spectral::dft2(x);
        rten::write_spectra(req.output, spectra);
        meta["output"] = {{"path", req.output.string()}, {"shape", shape_of(x)}, {"complex", true}};
    } else {
        ImageD y;
        if (req.op == "identity") {
            y = x;
        } else if (req.op == "crop") {
            params["bandwidth"] = req.bandwidth;
            y = spectral::low_freq_crop(x, req.bandwidth);
        } else if (req.op == "filter") {
            params["filter"] = filter_to_json(req.filter);
            y = spectral::apply_filter(x, req.filter);
        } else if (req.op == "downsample") {
            spectral::DownsampleMethod m;
            if (req.method == "nearest") {
                m = spectral::DownsampleMethod::nearest;
            } else if (req.method == "bilinear") {
                m = spectral::DownsampleMethod::bilinear;
            } else if (req.method == "box") {
                m = spectral::DownsampleMethod::box;
            } else {
                throw ParameterError("downsample method must be nearest, bilinear or box, got '" + req.method + "'");
            }
            params["method"] = req.method;
            params["side"] = req.side;
            if (req.side <= 0) throw ParameterError("downsample needs a positive --side");
            y = spectral::downsample(x, static_cast<std::size_t>(req.side), m);
        } else if (req.op == "lowfreq") {
            params["bandwidth"] = req.bandwidth;
            params["method"] = req.method.empty() ? "windowed_sinc" : req.method;
            if (req.method == "exact") {
                y = spectral::efficient_lowfreq_downsample(x, req.bandwidth, spectral::ExactPath{});
            } else if (req.method.empty() || req.method == "windowed_sinc") {
                params["lobes"] = req.lobes;
                y = spectral::efficient_lowfreq_downsample(x, req.bandwidth, spectral::WindowedSincPath{req.lobes});
            } else {
                throw ParameterError("lowfreq method must be exact or windowed_sinc, got '" + req.method + "'");
            }
        } else {
            throw ParameterError("unknown op '" + req.op + "' (identity, crop, filter, downsample, lowfreq, dft)");
        }
        rten::write_image(req.output, y, dtype);
        meta["output"] = {{"path", req.output.string()}, {"shape", shape_of(y)},
                          {"dtype", dtype == rten::DType::f32 ? "f32" : "f64"}};
    }
    meta["params"] = params;
    meta["input"]["sha256"] = file_digest(req.input);
    meta["output"]["sha256"] = file_digest(req.output);
    write_json(req.output.string() + ".json", meta);
    return meta;
}

// ---------------------------------------------------------------- train

TrainResult cmd_train(const RunConfig& cfg, std::ostream* progress) {
    const auto train = cfg.train.open(pipeline::Split::train);
    const auto val = cfg.val.open(pipeline::Split::val);
    auto r = train_run(cfg, train, val, {}, {}, progress);
    return {r.summary, r.diverged};
}

// ---------------------------------------------------------------- search

search::SearchReport cmd_search(const RunConfig& cfg, std::ostream* progress) {
    if (!cfg.search) throw ConfigError("the search command needs a 'search' block");
    const auto train = cfg.train.open(pipeline::Split::train);
    const auto val = cfg.val.open(pipeline::Split::val);
    fs::create_directories(cfg.output);
    write_json(cfg.output / "config.json", to_json(cfg));

    model::Trainer trainer(train, cfg.model, cfg.training);
    search::ModelBackend backend(trainer, val);
    search::SearchConfig sc = *cfg.search;
    sc.run_dir = cfg.output;
    const auto report = search::run_search(backend, sc);
    write_json(cfg.output / "search_report.json", report.to_json());
    write_text(cfg.output / "search_trials.csv", report.trials_csv());
    if (progress) {
        *progress << search::algorithm_name(report.algorithm) << " search chose";
        for (int b : report.chosen) *progress << ' ' << b;
        *progress << " at cost " << report.search_cost << " equivalent epochs\n";
    }
    return report;
}

// ---------------------------------------------------------------- probe

json ProbeResult::to_json() const {
    json rows = json::array();
    const auto low_it = std::find(settings.begin(), settings.end(), "low_r" + mark_name(low_radius));
    const auto high_it = std::find(settings.begin(), settings.end(), "high_r" + mark_name(high_radius));
    for (std::size_t f = 0; f < fractions.size(); ++f) {
        json row{{"fraction", fractions[f]}};
        if (low_it != settings.end() && high_it != settings.end()) {
            row["low_pass"] = accuracy[f][static_cast<std::size_t>(low_it - settings.begin())];
            row["high_pass"] = accuracy[f][static_cast<std::size_t>(high_it - settings.begin())];
        }
        rows.push_back(row);
    }
    return {{"settings", settings},
            {"fractions", fractions},
            {"accuracy", accuracy},
            {"pair",
             {{"low_radius", low_radius},
              {"high_radius", high_radius},
              {"calibrated", calibrated},
              {"final_gap_points", final_gap_points},
              {"rows", rows}}}};
}

std::string ProbeResult::matrix_csv() const {
    std::ostringstream os;
    os << std::setprecision(10) << "fraction";
    for (const auto& s : settings) os << ',' << s;
    os << '\n';
    for (std::size_t f = 0; f < fractions.size(); ++f) {
        os << fractions[f];
        for (double a : accuracy[f]) os << ',' << a;
        os << '\n';
    }
    return os.str();
}

void calibrate_pair(ProbeResult& r, const std::vector<double>& low, const std::vector<double>& high,
                    double tolerance_points) {
    if (r.fractions.empty()) throw ParameterError("probe has no checkpoints to calibrate on");
    const auto& last = r.accuracy.back();
    auto column = [&](const std::string& name) {
        const auto it = std::find(r.settings.begin(), r.settings.end(), name);
        if (it == r.settings.end()) throw ParameterError("probe setting " + name + " missing");
        return static_cast<std::size_t>(it - r.settings.begin());
    };
    double best = std::numeric_limits<double>::infinity();
    for (double lo : low) {
        for (double hi : high) {
            const double gap = std::abs(last[column("low_r" + mark_name(lo))] - last[column("high_r" + mark_name(hi))]);
            if (gap < best) {
                best = gap;
                r.low_radius = lo;
                r.high_radius = hi;
            }
        }
    }
    r.final_gap_points = 100.0 * best;
    r.calibrated = r.final_gap_points <= tolerance_points;
}

ProbeResult cmd_probe(const RunConfig& cfg, std::ostream* progress) {
    if (!cfg.probe) throw ConfigError("the probe command needs a 'probe' block");
    const ProbeConfig& pc = *cfg.probe;
    const auto train = cfg.train.open(pipeline::Split::train);
    const auto val = limited(cfg.val.open(pipeline::Split::val), pc.val_limit);

    const int side = static_cast<int>(val.height());
    std::vector<double> low = pc.low_radii, high = pc.high_radii;
    for (auto* grid : {&low, &high}) {
        if (grid->empty()) {
            for (int r = 1; r <= side / 2; ++r) grid->push_back(r);
        } else if (pc.radius_units == "reference") {
            for (double& r : *grid) r *= side / pc.reference_side;
        }
    }

    ProbeResult res;
    std::vector<model::EvalTransform> transforms;
    res.settings.push_back("none");
    transforms.push_back({});
    for (double r : low) {
        res.settings.push_back("low_r" + mark_name(r));
        transforms.push_back(model::EvalTransform::filtered(spectral::FilterSpec::circular(r)));
    }
    for (double r : high) {
        res.settings.push_back("high_r" + mark_name(r));
        transforms.push_back(
            model::EvalTransform::filtered(spectral::FilterSpec::circular(r, spectral::FilterMode::high_pass)));
    }
    for (const auto& f : pc.extra) {
        std::ostringstream name;
        name << (f.shape == spectral::FilterShape::square ? "square" : "circular")
             << (f.mode == spectral::FilterMode::low_pass ? "_low_" : "_high_") << mark_name(f.size);
        res.settings.push_back(name.str());
        transforms.push_back(model::EvalTransform::filtered(f));
    }
    for (const auto& t : transforms)
        if (t.kind == model::EvalTransform::Kind::filter) t.filter.validate(val.height(), val.width());

    std::vector<double> fractions = pc.fractions;
    std::sort(fractions.begin(), fractions.end());
    fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());
    std::vector<double> marks;
    for (double f : fractions)
        if (f < 1.0) marks.push_back(f * cfg.budget);

    std::map<double, std::vector<double>> by_mark;
    auto on_mark = [&](double mark, const model::TrainerState& st) {
        by_mark[mark] = model::evaluate_many(st.net, val, transforms);
        if (progress) *progress << "  probe at eq-epoch " << st.equivalent_epochs << " done\n";
    };
    auto run = train_run(cfg, train, val, marks, on_mark, progress);
    if (run.diverged) throw DivergedError(run.state.iteration, "probe training diverged");
    if (fractions.back() >= 1.0) by_mark[cfg.budget] = model::evaluate_many(run.state.net, val, transforms);

    for (double f : fractions) {
        const double m = f >= 1.0 ? cfg.budget : f * cfg.budget;
        const auto it = by_mark.find(m);
        if (it == by_mark.end()) continue;  // mark never reached (flooring at tiny budgets)
        res.fractions.push_back(f);
        res.accuracy.push_back(it->second);
    }
    calibrate_pair(res, low, high, pc.tolerance_points);
    write_text(cfg.output / "probe_matrix.csv", res.matrix_csv());
    write_json(cfg.output / "probe.json", res.to_json());
    return res;
}

// ---------------------------------------------------------------- report

std::optional<double> cost_to_reach(const Curve& c, double target) {
    for (std::size_t i = 0; i < c.accuracy.size(); ++i) {
        if (c.accuracy[i] < target) continue;
        if (i == 0) return c.cost[0];
        const double a0 = c.accuracy[i - 1], a1 = c.accuracy[i];
        const double t = (target - a0) / (a1 - a0);
        return c.cost[i - 1] + t * (c.cost[i] - c.cost[i - 1]);
    }
    return std::nullopt;
}

json cmd_report(const std::vector<fs::path>& runs, const fs::path& out) {
    if (runs.empty()) throw ConfigError("report needs at least one run directory");
    struct Run {
        std::string name;
        bool ok = false;
        std::string note;
        json summary;
        Curve curve;
    };
    std::vector<Run> all;
    for (const auto& dir : runs) {
        Run r;
        r.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
        r.curve.name = r.name;
        if (!fs::exists(dir / "summary.json")) {
            r.note = "missing summary.json";
            std::cerr << "warning: " << dir.string() << ": skipped, missing summary.json\n";
            all.push_back(r);
            continue;
        }
        r.summary = read_json(dir / "summary.json");
        if (r.summary.value("status", std::string()) != "completed") {
            r.note = "run " + r.summary.value("status", std::string("incomplete"));
        } else {
            r.ok = true;
        }
        if (fs::exists(dir / "eval.jsonl")) {
            std::ifstream in(dir / "eval.jsonl");
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const json row = json::parse(line, nullptr, false);
                if (row.is_discarded()) continue;  // torn last line of a crashed run
                r.curve.cost.push_back(row.value("equivalent_epochs", 0.0));
                r.curve.seconds.push_back(row.value("train_seconds", 0.0));
                r.curve.accuracy.push_back(row.value("accuracy", 0.0));
            }
        }
        all.push_back(r);
    }

    const Run* ref = nullptr;
    for (const auto& r : all)
        if (r.ok && r.summary.value("curriculum", std::string()) == "baseline") {
            ref = &r;
            break;
        }
    if (!ref)
        for (const auto& r : all)
            if (r.ok) {
                ref = &r;
                break;
            }

    fs::create_directories(out);
    std::ostringstream cost_csv, time_csv, sum_csv;
    for (auto* os : {&cost_csv, &time_csv, &sum_csv}) *os << std::setprecision(10);
    cost_csv << "run,equivalent_epochs,accuracy\n";
    time_csv << "run,train_seconds,accuracy\n";
    sum_csv << "run,status,curriculum,final_accuracy,equivalent_epochs,train_seconds,speedup_cost,speedup_time,note\n";
    json rows = json::array();
    Curve ref_time;
    if (ref) {
        ref_time = ref->curve;
        ref_time.cost = ref->curve.seconds;
    }
    for (const auto& r : all) {
        for (std::size_t i = 0; i < r.curve.cost.size(); ++i) {
            cost_csv << r.name << ',' << r.curve.cost[i] << ',' << r.curve.accuracy[i] << '\n';
            time_csv << r.name << ',' << r.curve.seconds[i] << ',' << r.curve.accuracy[i] << '\n';
        }
        json row{{"run", r.name}, {"note", r.note}};
        if (!r.ok) {
            sum_csv << r.name << ',' << (r.summary.is_object() ? r.summary.value("status", std::string("unknown")) : "missing")
                    << ",,,,,,," << r.note << '\n';
            rows.push_back(row);
            continue;
        }
        const double acc = r.summary.value("final_accuracy", 0.0);
        const double cost = r.summary.value("equivalent_epochs", 0.0);
        const double secs = r.summary.contains("timing") ? r.summary["timing"].value("train_seconds", 0.0) : 0.0;
        std::optional<double> sc, st;
        if (ref) {
            if (const auto c = cost_to_reach(ref->curve, acc); c && cost > 0) sc = *c / cost;
            if (const auto c = cost_to_reach(ref_time, acc); c && secs > 0) st = *c / secs;
        }
        std::string note = r.note;
        if (ref && !sc) note = "reference never reaches this accuracy";
        sum_csv << r.name << ",completed," << r.summary.value("curriculum", std::string()) << ',' << acc << ',' << cost
                << ',' << secs << ',';
        if (sc) sum_csv << *sc;
        sum_csv << ',';
        if (st) sum_csv << *st;
        sum_csv << ',' << note << '\n';
        row["final_accuracy"] = acc;
        row["equivalent_epochs"] = cost;
        row["train_seconds"] = secs;
        row["speedup_cost"] = sc ? json(*sc) : json();
        row["speedup_time"] = st ? json(*st) : json();
        row["note"] = note;
        rows.push_back(row);
    }
    write_text(out / "report_cost.csv", cost_csv.str());
    write_text(out / "report_time.csv", time_csv.str());
    write_text(out / "report_summary.csv", sum_csv.str());
    return {{"reference", ref ? json(ref->name) : json()}, {"runs", rows}};
}

// ---------------------------------------------------------------- synthetic data

void cmd_synth(const fs::path& dir, std::size_t train, std::size_t val, std::uint64_t seed) {
    if (train == 0 || val == 0) throw ParameterError("synthetic split sizes must be positive");
    fs::create_directories(dir);
    pipeline::write_cifar10(dir / "train.bin", pipeline::synthetic_shapes(train, seed));
    pipeline::write_cifar10(dir / "val.bin", pipeline::synthetic_shapes(val, derive_seed(seed, {1})));
}

}  // namespace fcl::cli

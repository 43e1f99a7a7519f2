// SPDX-License-Identifier: Apache-2.0
#include "fcl/search/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "fcl/error.hpp"

namespace fcl::search {

namespace {

using curriculum::ProgressBasis;
using pipeline::Segment;

struct ModelSnapshot final : Snapshot {
    explicit ModelSnapshot(model::TrainerState s) : state(std::move(s)) {}
    model::TrainerState state;
};

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

// Accounting: equivalent epochs of a list of segments under the backend's cost model.
double planned_cost(SearchBackend& backend, const std::vector<Segment>& segments) {
    std::vector<curriculum::StepRecord> log;
    for (const auto& s : segments) log.push_back({s.bandwidth, s.batch, s.iterations});
    return curriculum::equivalent_epochs(log, backend.flops(), backend.final_size(), backend.dataset_size());
}

// Segments of a from-scratch run of `schedule`; progress follows the
// schedule fractions so the LR curve matches the full run.
std::vector<Segment> segments_of(SearchBackend& backend, const curriculum::CurriculumSchedule& schedule) {
    std::vector<Segment> out;
    for (const auto& p :
         curriculum::plan_schedule(schedule, backend.flops(), backend.dataset_size(), backend.base_batch(), backend.lr())) {
        Segment s;
        s.bandwidth = p.stage.bandwidth;
        s.batch = p.batch;
        s.iterations = p.iterations;
        s.progress_begin = p.stage.start_frac;
        s.progress_end = p.stage.end_frac;
        s.lr_scale = backend.lr().base_lr > 0.0 ? p.lr_max / backend.lr().base_lr : 1.0;
        out.push_back(s);
    }
    return out;
}

void checkpoint(SearchBackend& backend, const SearchConfig& cfg, const SnapshotPtr& s, const std::string& digest) {
    if (cfg.run_dir.empty() || !s) return;
    std::filesystem::create_directories(cfg.run_dir / "checkpoints");
    backend.save(s, cfg.run_dir / "checkpoints" / (digest + ".fqck"));
}

}  // namespace

std::string algorithm_name(Algorithm a) { return a == Algorithm::greedy ? "greedy" : "sequential"; }

Algorithm algorithm_from_name(const std::string& name) {
    // et / etpp name the curricula each search originally produced
    if (name == "greedy" || name == "et") return Algorithm::greedy;
    if (name == "sequential" || name == "etpp") return Algorithm::sequential;
    throw ParameterError("unknown search algorithm '" + name + "' (expected greedy or sequential)");
}

void SearchConfig::validate(int final_size) const {
    if (stages < 2) throw ParameterError("search needs at least 2 stages");
    if (candidates.empty()) throw ParameterError("search needs at least one candidate bandwidth");
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const int b = candidates[i];
        if (b <= 0 || b % 2 != 0 || b > final_size) {
            throw ParameterError("candidate bandwidth must be even and within (0, " + std::to_string(final_size) +
                                 "], got " + std::to_string(b));
        }
        if (i > 0 && candidates[i - 1] >= b) throw ParameterError("candidates must be strictly ascending");
    }
    if (!(tolerance_points >= 0.0)) throw ParameterError("tolerance must be non-negative");
    if (algorithm == Algorithm::greedy) {
        if (!(epochs > 0.0)) throw ParameterError("greedy search needs a positive epoch budget T");
        if (baseline_accuracy && !(*baseline_accuracy >= 0.0 && *baseline_accuracy <= 1.0)) {
            throw ParameterError("baseline accuracy must lie in [0, 1]");
        }
    } else {
        if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("beta must lie in (0, 1)");
        if (!(baseline_epochs > 0.0)) throw ParameterError("sequential search needs a positive T0");
        if (!(finetune_epochs >= 1.0)) throw ParameterError("fine-tune epochs must be at least 1");
    }
}

nlohmann::json to_json(const SearchConfig& cfg) {
    nlohmann::json j{{"algorithm", algorithm_name(cfg.algorithm)},
                     {"stages", cfg.stages},
                     {"candidates", cfg.candidates},
                     {"seed", cfg.seed},
                     {"tolerance_points", cfg.tolerance_points},
                     {"tie_break", "smallest"}};
    if (cfg.algorithm == Algorithm::greedy) {
        j["epochs"] = cfg.epochs;
        j["baseline_accuracy"] = cfg.baseline_accuracy ? nlohmann::json(*cfg.baseline_accuracy) : nlohmann::json();
    } else {
        j["beta"] = cfg.beta;
        j["baseline_epochs"] = cfg.baseline_epochs;
        j["finetune_epochs"] = cfg.finetune_epochs;
    }
    return j;
}

SearchConfig search_config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known{"algorithm",  "stages",          "candidates",      "seed",
                                                "tolerance_points", "tie_break", "epochs",          "baseline_accuracy",
                                                "beta",       "baseline_epochs", "finetune_epochs"};
    if (!j.is_object()) throw ConfigError("search block must be an object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown key 'search." + key + "'");
        }
    }
    SearchConfig c;
    try {
        c.algorithm = algorithm_from_name(j.value("algorithm", std::string("sequential")));
        c.stages = j.value("stages", c.stages);
        if (j.contains("candidates")) c.candidates = j.at("candidates").get<std::vector<int>>();
        c.seed = j.value("seed", c.seed);
        c.tolerance_points = j.value("tolerance_points", c.tolerance_points);
        if (j.value("tie_break", std::string("smallest")) != "smallest") {
            throw ConfigError("only the 'smallest' tie break is supported");
        }
        c.epochs = j.value("epochs", c.epochs);
        if (j.contains("baseline_accuracy") && !j.at("baseline_accuracy").is_null()) {
            c.baseline_accuracy = j.at("baseline_accuracy").get<double>();
        }
        c.beta = j.value("beta", c.beta);
        c.baseline_epochs = j.value("baseline_epochs", c.baseline_epochs);
        c.finetune_epochs = j.value("finetune_epochs", c.finetune_epochs);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed search block: ") + e.what());
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    return c;
}

std::vector<int> default_candidates(int final_size) {
    std::vector<int> c = curriculum::adapted_bandwidths(96.0, final_size);
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    return c;
}

// ---------------------------------------------------------------- report

nlohmann::json SearchReport::deterministic_json() const {
    nlohmann::json trials_j = nlohmann::json::array();
    for (const auto& t : trials) {
        trials_j.push_back({{"stage", t.stage},
                            {"bandwidth", t.bandwidth},
                            {"iterations", t.iterations},
                            {"finetune_iterations", t.finetune_iterations},
                            {"accuracy", t.accuracy},
                            {"consumed", t.consumed},
                            {"diverged", t.diverged},
                            {"accepted", t.accepted},
                            {"parent_digest", t.parent_digest},
                            {"digest", t.digest},
                            {"schedule", t.schedule}});
    }
    nlohmann::json j{{"algorithm", algorithm_name(algorithm)},
                     {"config", fcl::search::to_json(config)},
                     {"final_size", final_size},
                     {"trials", trials_j},
                     {"chosen", chosen},
                     {"unsatisfied_stages", unsatisfied},
                     {"search_cost", search_cost}};
    if (algorithm == Algorithm::greedy) {
        j["baseline_accuracy"] = baseline_accuracy ? nlohmann::json(*baseline_accuracy) : nlohmann::json();
        j["baseline_cost"] = baseline_cost;
    } else {
        j["executed_cost"] = executed_cost;
        j["final_accuracy"] = final_accuracy;
        j["final_digest"] = final_digest;
    }
    return j;
}

nlohmann::json SearchReport::to_json() const {
    nlohmann::json j = deterministic_json();
    j["wall_seconds"] = wall_seconds;
    return j;
}

std::string SearchReport::trials_csv() const {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "stage,bandwidth,iterations,finetune_iterations,accuracy,consumed,diverged,accepted,parent_digest,digest\n";
    for (const auto& t : trials) {
        os << t.stage << ',' << t.bandwidth << ',' << t.iterations << ',' << t.finetune_iterations << ',' << t.accuracy
           << ',' << t.consumed << ',' << (t.diverged ? 1 : 0) << ',' << (t.accepted ? 1 : 0) << ',' << t.parent_digest
           << ',' << t.digest << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------- greedy

SearchReport greedy_search(SearchBackend& backend, const SearchConfig& cfg) {
    const int g = backend.final_size();
    cfg.validate(g);
    if (cfg.algorithm != Algorithm::greedy) throw ParameterError("greedy_search needs algorithm = greedy");
    const double t0 = now_seconds();

    SearchReport rep;
    rep.algorithm = Algorithm::greedy;
    rep.config = cfg;
    rep.final_size = g;
    const std::size_t n = cfg.stages;

    // Every probe is a from-scratch run with the same seed: probes then
    // differ only in their bandwidths.
    auto probe = [&](const std::vector<int>& bands, Trial& t) {
        const auto schedule = curriculum::uniform_schedule(bands, g, cfg.epochs, 9.0, ProgressBasis::epoch);
        const auto segments = segments_of(backend, schedule);
        for (const auto& s : segments) t.iterations += s.iterations;
        t.schedule = bands;
        const SnapshotPtr start = backend.fresh(cfg.seed);
        t.parent_digest = backend.digest(start);
        try {
            const SnapshotPtr done = backend.train(start, segments);
            t.accuracy = backend.validate(done);
            t.consumed = backend.consumed(done) - backend.consumed(start);
            t.digest = backend.digest(done);
            checkpoint(backend, cfg, done, t.digest);
        } catch (const DivergedError&) {
            t.diverged = true;
            t.accuracy = 0.0;
            t.consumed = planned_cost(backend, segments);
        }
    };

    if (cfg.baseline_accuracy) {
        rep.baseline_accuracy = cfg.baseline_accuracy;
    } else {
        Trial base;
        probe(std::vector<int>(n, g), base);
        if (base.diverged) throw DivergedError(0, "baseline run for the greedy search diverged");
        rep.baseline_accuracy = base.accuracy;
        rep.baseline_cost = base.consumed;
    }
    const double threshold = *rep.baseline_accuracy - cfg.tolerance();

    std::vector<int> chosen(n, g);
    double cost = rep.baseline_cost;
    for (std::size_t i = n - 1; i >= 1; --i) {
        bool found = false;
        for (const int b : cfg.candidates) {
            std::vector<int> bands = chosen;
            for (std::size_t k = 0; k < i; ++k) bands[k] = b;
            Trial t;
            t.stage = i;
            t.bandwidth = b;
            probe(bands, t);
            cost += t.consumed;
            t.accepted = !t.diverged && t.accuracy >= threshold;
            rep.trials.push_back(t);
            if (t.accepted) {
                for (std::size_t k = 0; k < i; ++k) chosen[k] = b;
                found = true;
                break;
            }
        }
        if (!found) rep.unsatisfied.push_back(i);  // the stage keeps the final size
    }
    std::sort(rep.unsatisfied.begin(), rep.unsatisfied.end());
    rep.chosen = chosen;
    rep.search_cost = cost;
    rep.wall_seconds = now_seconds() - t0;
    return rep;
}

// ---------------------------------------------------------------- sequential

namespace {

struct StagePlan {
    Segment stage;
    Segment finetune;
};

StagePlan sequential_segments(SearchBackend& backend, const SearchConfig& cfg, std::size_t i, int b) {
    const std::size_t n = cfg.stages;
    const double budget = cfg.beta * cfg.baseline_epochs;
    const double a = static_cast<double>(i - 1) / static_cast<double>(n);
    const double z = static_cast<double>(i) / static_cast<double>(n);
    StagePlan p;
    p.stage.bandwidth = b;
    p.stage.batch = backend.base_batch();
    p.stage.iterations = curriculum::stage_iterations(curriculum::Stage{a, z, b, 1.0}, budget, backend.flops(),
                                                      backend.final_size(), backend.dataset_size(),
                                                      backend.base_batch(), ProgressBasis::compute);
    p.stage.progress_begin = a;
    p.stage.progress_end = z;

    p.finetune.bandwidth = backend.final_size();
    p.finetune.batch = backend.base_batch();
    p.finetune.iterations = static_cast<std::uint64_t>(std::floor(
        cfg.finetune_epochs * static_cast<double>(backend.dataset_size()) / static_cast<double>(backend.base_batch()) *
        (1.0 + 1e-9)));
    p.finetune.progress_begin = z;
    // The LR curve is defined on [0, 1]; a fine-tune reaching past the end holds the final rate.
    p.finetune.progress_end = std::min(1.0, z + cfg.finetune_epochs / budget);
    return p;
}

}  // namespace

SearchReport sequential_search(SearchBackend& backend, const SearchConfig& cfg) {
    const int g = backend.final_size();
    cfg.validate(g);
    if (cfg.algorithm != Algorithm::sequential) throw ParameterError("sequential_search needs algorithm = sequential");
    const double t0 = now_seconds();

    SearchReport rep;
    rep.algorithm = Algorithm::sequential;
    rep.config = cfg;
    rep.final_size = g;
    const std::size_t n = cfg.stages;

    SnapshotPtr carried = backend.fresh(cfg.seed);
    double cost = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        const std::string parent = backend.digest(carried);
        const double parent_consumed = backend.consumed(carried);
        std::vector<Trial> trials;
        std::vector<SnapshotPtr> trained;
        for (const int b : cfg.candidates) {
            const StagePlan p = sequential_segments(backend, cfg, i, b);
            Trial t;
            t.stage = i;
            t.bandwidth = b;
            t.iterations = p.stage.iterations;
            t.finetune_iterations = p.finetune.iterations;
            t.parent_digest = parent;
            SnapshotPtr stage_done;
            try {
                stage_done = backend.train(carried, {p.stage});
                t.digest = backend.digest(stage_done);
                checkpoint(backend, cfg, stage_done, t.digest);
                const SnapshotPtr tuned = backend.train(stage_done, {p.finetune});
                t.accuracy = backend.validate(tuned);
                t.consumed = backend.consumed(tuned) - parent_consumed;
            } catch (const DivergedError&) {
                t.diverged = true;
                t.accuracy = 0.0;
                t.consumed = planned_cost(backend, {p.stage, p.finetune});
                stage_done.reset();
            }
            cost += t.consumed;
            trials.push_back(t);
            trained.push_back(stage_done);
        }
        // argmax with ties (within tolerance) resolved towards the smallest B
        double best = -1.0;
        for (const auto& t : trials) best = std::max(best, t.accuracy);
        std::size_t pick = trials.size();
        for (std::size_t k = 0; k < trials.size(); ++k) {
            if (!trained[k]) continue;
            if (trials[k].accuracy >= best - cfg.tolerance()) {
                pick = k;
                break;
            }
        }
        if (pick == trials.size()) throw DivergedError(0, "every candidate diverged at stage " + std::to_string(i));
        trials[pick].accepted = true;
        rep.chosen.push_back(trials[pick].bandwidth);
        carried = trained[pick];
        rep.trials.insert(rep.trials.end(), trials.begin(), trials.end());
    }
    rep.chosen.push_back(g);
    rep.search_cost = cost;

    // Carry the chosen schedule to completion: the last stage at full size.
    const StagePlan last = sequential_segments(backend, cfg, n, g);
    const SnapshotPtr final_state = backend.train(carried, {last.stage});
    rep.executed_cost = backend.consumed(final_state);
    rep.final_accuracy = backend.validate(final_state);
    rep.final_digest = backend.digest(final_state);
    checkpoint(backend, cfg, final_state, rep.final_digest);
    rep.wall_seconds = now_seconds() - t0;
    return rep;
}

SearchReport run_search(SearchBackend& backend, const SearchConfig& cfg) {
    return cfg.algorithm == Algorithm::greedy ? greedy_search(backend, cfg) : sequential_search(backend, cfg);
}

// ---------------------------------------------------------------- accounting model

double greedy_cost_bound(const SearchConfig& cfg, std::size_t candidates) {
    // Greedy cost bound: about N + M - 1 from-scratch runs at budget T.
    return static_cast<double>(cfg.stages + candidates - 1) * cfg.epochs;
}

double sequential_cost_model(SearchBackend& backend, const SearchConfig& cfg) {
    double total = 0.0;
    for (std::size_t i = 1; i < cfg.stages; ++i) {
        for (const int b : cfg.candidates) {
            const StagePlan p = sequential_segments(backend, cfg, i, b);
            total += planned_cost(backend, {p.stage, p.finetune});
        }
    }
    return total;
}

// ---------------------------------------------------------------- model backend

ModelBackend::ModelBackend(const model::Trainer& trainer, const pipeline::Dataset& val) : trainer_(trainer), val_(val) {}

const model::TrainerState& ModelBackend::state(const SnapshotPtr& s) {
    const auto* m = dynamic_cast<const ModelSnapshot*>(s.get());
    if (!m) throw ParameterError("snapshot does not belong to the model backend");
    return m->state;
}

SnapshotPtr ModelBackend::fresh(std::uint64_t seed) { return std::make_shared<ModelSnapshot>(trainer_.init(seed)); }

SnapshotPtr ModelBackend::train(const SnapshotPtr& from, const std::vector<pipeline::Segment>& segments) {
    model::TrainerState s = state(from);
    trainer_.run(s, trainer_.plan(segments, s));
    return std::make_shared<ModelSnapshot>(std::move(s));
}

double ModelBackend::validate(const SnapshotPtr& s) { return model::evaluate(state(s).net, val_); }

double ModelBackend::consumed(const SnapshotPtr& s) const { return state(s).equivalent_epochs; }

std::string ModelBackend::digest(const SnapshotPtr& s) const { return model::state_digest(state(s)); }

void ModelBackend::save(const SnapshotPtr& s, const std::filesystem::path& path) const {
    model::save_checkpoint(path, state(s));
}

}  // namespace fcl::search

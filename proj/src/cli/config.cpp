// SPDX-License-Identifier: Apache-2.0
#include "fcl/cli/config.hpp"

#include <fstream>
#include <set>

#include "fcl/error.hpp"

namespace fcl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Object reader that remembers which keys were consumed and rejects the rest.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    const json& at(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError("missing key '" + name(key) + "'");
        return j_.at(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError("");
            } else if constexpr (std::is_arithmetic_v<T>) {
                if (!v.is_number()) throw ConfigError("");
                if constexpr (std::is_integral_v<T>) {
                    if (!v.is_number_integer()) throw ConfigError("");
                }
                if constexpr (std::is_unsigned_v<T>) {
                    if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0) throw ConfigError("");
                }
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError("");
            }
            return v.get<T>();
        } catch (const std::exception&) {
            throw ConfigError("key '" + name(key) + "' has the wrong type (" + std::string(v.type_name()) + ")");
        }
    }

    void mark(const std::string& key) { seen_.insert(key); }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) throw ConfigError("unknown key '" + name(key) + "'");
        }
    }

    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

// Keys the library's own parsers understand, taken from their serializers.
void check_keys(const json& j, const json& reference, const std::string& path) {
    if (!j.is_object()) throw ConfigError("'" + path + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!reference.contains(key)) throw ConfigError("unknown key '" + path + "." + key + "'");
    }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return fs::absolute(base / p).lexically_normal();
}

DataSource source_from_json(const json& j, const std::string& path, const fs::path& base) {
    Obj o(j, path);
    DataSource d;
    if (o.has("synthetic")) {
        Obj s(o.at("synthetic"), path + ".synthetic");
        d.synthetic = true;
        d.synthetic_count = s.get<std::size_t>("count", 0);
        d.synthetic_seed = s.get<std::uint64_t>("seed", 0);
        s.finish();
        if (d.synthetic_count == 0) throw ConfigError("'" + path + ".synthetic.count' must be positive");
    } else {
        o.mark("synthetic");
        try {
            d.files.format = pipeline::format_from_name(o.get<std::string>("format", "cifar10_bin"));
        } catch (const ParameterError& e) {
            throw ConfigError(std::string(e.what()) + " at '" + path + ".format'");
        }
        const json& paths = o.at("paths");
        if (!paths.is_array() || paths.empty()) throw ConfigError("'" + path + ".paths' must be a non-empty array");
        for (const auto& p : paths) {
            if (!p.is_string()) throw ConfigError("'" + path + ".paths' entries must be strings");
            d.files.paths.push_back(resolve(p.get<std::string>(), base));
        }
        d.files.labels = resolve(o.get<std::string>("labels", ""), base);
        d.files.class_count = o.get<std::size_t>("classes", 0);
        d.files.limit = o.get<std::size_t>("limit", 0);
    }
    o.finish();
    return d;
}

json source_to_json(const DataSource& d) {
    if (d.synthetic) return {{"synthetic", {{"count", d.synthetic_count}, {"seed", d.synthetic_seed}}}};
    json paths = json::array();
    for (const auto& p : d.files.paths) paths.push_back(p.string());
    return {{"format", pipeline::format_name(d.files.format)},
            {"paths", paths},
            {"labels", d.files.labels.string()},
            {"classes", d.files.class_count},
            {"limit", d.files.limit}};
}

const json& optimizer_reference() {
    static const json ref = model::to_json(model::OptimizerConfig{});
    return ref;
}

ProbeConfig probe_from_json(const json& j) {
    Obj o(j, "probe");
    ProbeConfig p;
    p.fractions = o.get<std::vector<double>>("fractions", p.fractions);
    p.low_radii = o.get<std::vector<double>>("low_radii", p.low_radii);
    p.high_radii = o.get<std::vector<double>>("high_radii", p.high_radii);
    p.tolerance_points = o.get<double>("tolerance_points", p.tolerance_points);
    p.val_limit = o.get<std::size_t>("val_limit", p.val_limit);
    p.radius_units = o.get<std::string>("radius_units", p.radius_units);
    p.reference_side = o.get<double>("reference_side", p.reference_side);
    if (o.has("extra")) {
        const json& e = o.at("extra");
        if (!e.is_array()) throw ConfigError("'probe.extra' must be an array");
        for (const auto& f : e) p.extra.push_back(filter_from_json(f));
    } else {
        o.mark("extra");
    }
    o.finish();
    if (p.fractions.empty()) throw ConfigError("'probe.fractions' must not be empty");
    for (double f : p.fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("'probe.fractions' entries must lie in (0, 1]");
    }
    if (!(p.tolerance_points >= 0.0)) throw ConfigError("'probe.tolerance_points' must be non-negative");
    if (p.radius_units != "bins" && p.radius_units != "reference")
        throw ConfigError("'probe.radius_units' must be \"bins\" or \"reference\"");
    if (!(p.reference_side > 0.0)) throw ConfigError("'probe.reference_side' must be positive");
    return p;
}

json probe_to_json(const ProbeConfig& p) {
    json extra = json::array();
    for (const auto& f : p.extra) extra.push_back(filter_to_json(f));
    return {{"fractions", p.fractions},         {"low_radii", p.low_radii}, {"high_radii", p.high_radii},
            {"tolerance_points", p.tolerance_points}, {"extra", extra},         {"val_limit", p.val_limit},
            {"radius_units", p.radius_units},         {"reference_side", p.reference_side}};
}

}  // namespace

pipeline::Dataset DataSource::open(pipeline::Split split) const {
    if (synthetic) {
        pipeline::Dataset d = pipeline::synthetic_shapes(synthetic_count, synthetic_seed);
        d.split = split;
        return d;
    }
    pipeline::DatasetSpec spec = files;
    spec.split = split;
    return pipeline::open_dataset(spec);
}

curriculum::CurriculumSchedule RunConfig::schedule() const {
    const int g = training.preprocess.final_size;
    const double m0 = training.preprocess.m0;
    if (curriculum == "baseline") return curriculum::baseline_schedule(g, budget, m0);
    if (curriculum == "etpp") return curriculum::default_etpp(g, budget, m0);
    if (curriculum == "et") {
        const int epochs = static_cast<int>(std::lround(budget));
        if (std::abs(budget - epochs) > 1e-9) throw ConfigError("the et curriculum needs a whole number of epochs");
        return curriculum::default_et(epochs, g, m0);
    }
    if (curriculum == "custom") {
        std::ifstream in(curriculum_file);
        if (!in) throw ConfigError("cannot open curriculum file " + curriculum_file.string());
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError("curriculum file " + curriculum_file.string() + ": " + e.what());
        }
        try {
            auto s = curriculum::schedule_from_json(j);
            if (s.final_size != g) throw ConfigError("curriculum file final_size differs from the run's final_size");
            return s;
        } catch (const ParameterError& e) {
            throw ConfigError("curriculum file " + curriculum_file.string() + ": " + e.what());
        }
    }
    throw ConfigError("unknown curriculum '" + curriculum + "' (expected baseline, et, etpp or custom)");
}

json filter_to_json(const spectral::FilterSpec& f) {
    return {{"shape", f.shape == spectral::FilterShape::square ? "square" : "circular"},
            {"mode", f.mode == spectral::FilterMode::low_pass ? "low_pass" : "high_pass"},
            {"size", f.size}};
}

spectral::FilterSpec filter_from_json(const json& j) {
    Obj o(j, "filter");
    spectral::FilterSpec f;
    const std::string shape = o.get<std::string>("shape", "square");
    const std::string mode = o.get<std::string>("mode", "low_pass");
    if (shape == "square") {
        f.shape = spectral::FilterShape::square;
    } else if (shape == "circular") {
        f.shape = spectral::FilterShape::circular;
    } else {
        throw ConfigError("filter shape must be square or circular, got '" + shape + "'");
    }
    if (mode == "low_pass") {
        f.mode = spectral::FilterMode::low_pass;
    } else if (mode == "high_pass") {
        f.mode = spectral::FilterMode::high_pass;
    } else {
        throw ConfigError("filter mode must be low_pass or high_pass, got '" + mode + "'");
    }
    f.size = o.get<double>("size", 0.0);
    o.finish();
    return f;
}

RunConfig config_from_json(const json& j, const fs::path& base) {
    Obj o(j, "");
    RunConfig c;
    c.seed = o.get<std::uint64_t>("seed", c.seed);
    c.output = resolve(o.get<std::string>("output", c.output.string()), base);

    {
        Obj d(o.at("data"), "data");
        c.train = source_from_json(d.at("train"), "data.train", base);
        c.val = source_from_json(d.at("val"), "data.val", base);
        d.finish();
    }

    if (o.has("model")) {
        const json& m = o.at("model");
        if (m.is_string()) {
            if (m.get<std::string>() != "desk") throw ConfigError("unknown model '" + m.get<std::string>() + "'");
            c.model = model::desk_spec();
        } else {
            check_keys(m, model::to_json(model::desk_spec()), "model");
            try {
                c.model = model::spec_from_json(m);
            } catch (const SpecError& e) {
                throw ConfigError(e.what());
            }
        }
    } else {
        o.mark("model");
    }

    c.curriculum = o.get<std::string>("curriculum", c.curriculum);
    c.curriculum_file = resolve(o.get<std::string>("curriculum_file", ""), base);
    if (c.curriculum == "custom" && c.curriculum_file.empty()) {
        throw ConfigError("curriculum 'custom' needs curriculum_file");
    }
    c.budget = o.get<double>("budget", c.budget);
    if (!(c.budget > 0.0)) throw ConfigError("'budget' must be positive");

    model::TrainConfig& t = c.training;
    std::optional<bool> ramp;  // default: constant magnitude for plain baseline runs, ramped otherwise
    t.preprocess.final_size = o.get<int>("final_size", t.preprocess.final_size);
    t.base_batch = o.get<std::uint64_t>("batch", t.base_batch);
    t.label_smoothing = o.get<double>("label_smoothing", t.label_smoothing);
    t.workers = o.get<std::size_t>("workers", t.workers);
    t.queue_depth = o.get<std::size_t>("queue_depth", t.queue_depth);
    if (o.has("lr")) {
        Obj l(o.at("lr"), "lr");
        t.lr.base_lr = l.get<double>("base_lr", t.lr.base_lr);
        t.lr.warmup_frac = l.get<double>("warmup_frac", t.lr.warmup_frac);
        t.lr.min_lr = l.get<double>("min_lr", t.lr.min_lr);
        t.lr.lr_cap = l.get<double>("lr_cap", t.lr.lr_cap);
        l.finish();
    } else {
        o.mark("lr");
    }
    if (o.has("optimizer")) {
        check_keys(o.at("optimizer"), optimizer_reference(), "optimizer");
        try {
            t.optimizer = model::optimizer_from_json(o.at("optimizer"));
        } catch (const std::exception& e) {
            throw ConfigError(std::string("optimizer: ") + e.what());
        }
    } else {
        o.mark("optimizer");
    }
    if (o.has("augment")) {
        Obj a(o.at("augment"), "augment");
        auto& p = t.preprocess;
        p.baseline_augment = a.get<bool>("baseline", p.baseline_augment);
        p.randaug = a.get<bool>("randaug", p.randaug);
        p.m0 = a.get<double>("m0", p.m0);
        if (a.has("ramp")) {
            ramp = a.get<bool>("ramp", true);
        } else {
            a.mark("ramp");
        }
        p.policy.n = a.get<int>("n", p.policy.n);
        p.policy.p = a.get<double>("p", p.policy.p);
        p.policy.m_max = a.get<double>("m_max", p.policy.m_max);
        if (a.has("ops")) {
            p.policy.ops.clear();
            const json& ops = a.at("ops");
            if (!ops.is_array()) throw ConfigError("'augment.ops' must be an array");
            for (const auto& op : ops) {
                if (!op.is_string()) throw ConfigError("'augment.ops' entries must be strings");
                try {
                    p.policy.ops.push_back(augment::op_from_name(op.get<std::string>()));
                } catch (const ParameterError& e) {
                    throw ConfigError(std::string(e.what()) + " at 'augment.ops'");
                }
            }
        } else {
            a.mark("ops");
        }
        if (a.has("crop")) {
            Obj cr(a.at("crop"), "augment.crop");
            p.crop.min_area = cr.get<double>("min_area", p.crop.min_area);
            p.crop.max_area = cr.get<double>("max_area", p.crop.max_area);
            p.crop.min_aspect = cr.get<double>("min_aspect", p.crop.min_aspect);
            p.crop.max_aspect = cr.get<double>("max_aspect", p.crop.max_aspect);
            p.crop.flip_p = cr.get<double>("flip_p", p.crop.flip_p);
            cr.finish();
        } else {
            a.mark("crop");
        }
        p.mixup_alpha = a.get<double>("mixup_alpha", p.mixup_alpha);
        try {
            p.resample = pipeline::resample_from_name(a.get<std::string>("resample", pipeline::resample_name(p.resample)));
        } catch (const ParameterError& e) {
            throw ConfigError(std::string(e.what()) + " at 'augment.resample'");
        }
        p.lobes = a.get<int>("lobes", p.lobes);
        if (a.has("train_filter")) {
            p.train_filter = filter_from_json(a.at("train_filter"));
        } else {
            a.mark("train_filter");
        }
        a.finish();
        try {
            p.policy.validate();
        } catch (const ParameterError& e) {
            throw ConfigError(std::string("augment: ") + e.what());
        }
    } else {
        o.mark("augment");
    }
    if (o.has("replay")) {
        Obj r(o.at("replay"), "replay");
        t.replay.n_buffer = r.get<std::size_t>("n_buffer", t.replay.n_buffer);
        t.replay.capacity = r.get<std::size_t>("capacity", t.replay.capacity);
        r.finish();
    } else {
        o.mark("replay");
    }
    c.eval_every = o.get<double>("eval_every", c.eval_every);
    c.checkpoint_every = o.get<double>("checkpoint_every", c.checkpoint_every);
    if (c.eval_every < 0.0 || c.checkpoint_every < 0.0) throw ConfigError("evaluation/checkpoint intervals must be >= 0");

    if (o.has("search")) {
        c.search = search::search_config_from_json(o.at("search"));
        if (c.search->candidates.empty()) c.search->candidates = search::default_candidates(t.preprocess.final_size);
        try {
            c.search->validate(t.preprocess.final_size);
        } catch (const ParameterError& e) {
            throw ConfigError(std::string("search: ") + e.what());
        }
    } else {
        o.mark("search");
    }
    if (o.has("probe")) {
        c.probe = probe_from_json(o.at("probe"));
    } else {
        o.mark("probe");
    }
    o.finish();
    t.preprocess.ramp_magnitude = ramp.value_or(c.curriculum != "baseline" || c.search.has_value());

    try {
        t.validate();
        c.model.validate();
        c.schedule();
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    } catch (const SpecError& e) {
        throw ConfigError(e.what());
    }
    if (t.preprocess.train_filter) {
        try {
            t.preprocess.train_filter->validate(t.preprocess.final_size, t.preprocess.final_size);
        } catch (const ParameterError& e) {
            throw ConfigError(std::string("augment.train_filter: ") + e.what());
        }
    }
    return c;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j, fs::absolute(path).parent_path());
}

json to_json(const RunConfig& c) {
    const auto& t = c.training;
    const auto& p = t.preprocess;
    json ops = json::array();
    for (auto op : p.policy.ops) ops.push_back(std::string(augment::op_name(op)));
    json j{{"seed", c.seed},
           {"output", c.output.string()},
           {"data", {{"train", source_to_json(c.train)}, {"val", source_to_json(c.val)}}},
           {"model", model::to_json(c.model)},
           {"curriculum", c.curriculum},
           {"curriculum_file", c.curriculum_file.string()},
           {"budget", c.budget},
           {"final_size", p.final_size},
           {"batch", t.base_batch},
           {"label_smoothing", t.label_smoothing},
           {"workers", t.workers},
           {"queue_depth", t.queue_depth},
           {"lr",
            {{"base_lr", t.lr.base_lr},
             {"warmup_frac", t.lr.warmup_frac},
             {"min_lr", t.lr.min_lr},
             {"lr_cap", t.lr.lr_cap}}},
           {"optimizer", model::to_json(t.optimizer)},
           {"augment",
            {{"baseline", p.baseline_augment},
             {"randaug", p.randaug},
             {"m0", p.m0},
             {"ramp", p.ramp_magnitude},
             {"n", p.policy.n},
             {"p", p.policy.p},
             {"m_max", p.policy.m_max},
             {"ops", ops},
             {"crop",
              {{"min_area", p.crop.min_area},
               {"max_area", p.crop.max_area},
               {"min_aspect", p.crop.min_aspect},
               {"max_aspect", p.crop.max_aspect},
               {"flip_p", p.crop.flip_p}}},
             {"mixup_alpha", p.mixup_alpha},
             {"resample", pipeline::resample_name(p.resample)},
             {"lobes", p.lobes},
             {"train_filter", p.train_filter ? filter_to_json(*p.train_filter) : json()}}},
           {"replay", {{"n_buffer", t.replay.n_buffer}, {"capacity", t.replay.capacity}}},
           {"eval_every", c.eval_every},
           {"checkpoint_every", c.checkpoint_every}};
    if (c.search) j["search"] = search::to_json(*c.search);
    if (c.probe) j["probe"] = probe_to_json(*c.probe);
    return j;
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("empty component in override key " + key);
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        json& next = (*node)[part];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) throw ConfigError("override " + key + " descends into a non-object");
        node = &next;
        start = dot + 1;
    }
}

void make_deterministic(RunConfig& cfg) { cfg.training.workers = 1; }

}  // namespace fcl::cli

// SPDX-License-Identifier: Apache-2.0
#include "fcl/model/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "fcl/error.hpp"
#include "fcl/model/digest.hpp"
#include "fcl/pipeline/loader.hpp"

namespace fcl::model {

using pipeline::Dataset;
using pipeline::Segment;
using pipeline::TrainingPlan;

bool TrainerState::operator==(const TrainerState& o) const {
    return net.spec() == o.net.spec() && net.params() == o.net.params() && opt.first == o.opt.first &&
           opt.second == o.opt.second && opt.steps == o.opt.steps && seed == o.seed && iteration == o.iteration &&
           progress == o.progress && equivalent_epochs == o.equivalent_epochs && stream_position == o.stream_position;
}

TrainerState init_state(const NetworkSpec& spec, const OptimizerConfig& opt, std::uint64_t seed) {
    TrainerState s;
    s.net = Network<float>(spec, seed);
    s.opt = Optimizer<float>(opt, s.net.size());
    s.seed = seed;
    return s;
}

std::string state_digest(const TrainerState& s) {
    Sha256 h;
    const std::string spec = spec_hash(s.net.spec());
    h.update(spec.data(), spec.size());
    h.update(s.net.params().data(), s.net.params().size() * sizeof(float));
    h.update(s.opt.first.data(), s.opt.first.size() * sizeof(float));
    h.update(s.opt.second.data(), s.opt.second.size() * sizeof(float));
    h.update_value(s.opt.steps).update_value(s.seed).update_value(s.iteration);
    h.update_value(s.progress).update_value(s.equivalent_epochs).update_value(s.stream_position);
    return h.finish_hex();
}

void TrainConfig::validate() const {
    lr.validate();
    optimizer.validate();
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) throw ParameterError("label smoothing must lie in [0, 1)");
    if (base_batch == 0) throw ParameterError("batch size must be positive");
    if (replay.capacity == 0) throw ParameterError("replay capacity must be positive");
    if (queue_depth == 0) throw ParameterError("queue depth must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"lr",
             {{"base_lr", c.lr.base_lr},
              {"warmup_frac", c.lr.warmup_frac},
              {"min_lr", c.lr.min_lr},
              {"lr_cap", c.lr.lr_cap}}},
            {"optimizer", to_json(c.optimizer)},
            {"label_smoothing", c.label_smoothing},
            {"base_batch", c.base_batch},
            {"final_size", c.preprocess.final_size},
            {"resample", pipeline::resample_name(c.preprocess.resample)},
            {"replay", {{"n_buffer", c.replay.n_buffer}, {"capacity", c.replay.capacity}}},
            {"workers", c.workers},
            {"queue_depth", c.queue_depth}};
}

nlohmann::json to_json(const StepLog& r) {
    return {{"iteration", r.iteration}, {"bandwidth", r.bandwidth},
            {"batch", r.batch},         {"lr", r.lr},
            {"loss", r.loss},           {"equivalent_epochs", r.equivalent_epochs},
            {"progress", r.progress},   {"replay", r.replay}};
}

std::vector<Segment> schedule_segments(const curriculum::CurriculumSchedule& schedule,
                                       const curriculum::FlopsModel& flops, std::uint64_t dataset_size,
                                       std::uint64_t base_batch, const curriculum::LRConfig& lr) {
    std::vector<Segment> out;
    for (const auto& p : curriculum::plan_schedule(schedule, flops, dataset_size, base_batch, lr)) {
        Segment s;
        s.bandwidth = p.stage.bandwidth;
        s.batch = p.batch;
        s.iterations = p.iterations;
        s.progress_begin = p.stage.start_frac;
        s.progress_end = p.stage.end_frac;
        s.lr_scale = lr.base_lr > 0.0 ? p.lr_max / lr.base_lr : 1.0;
        out.push_back(s);
    }
    return out;
}

Trainer::Trainer(const Dataset& train, NetworkSpec spec, TrainConfig cfg)
    : data_(train), spec_(std::move(spec)), cfg_(std::move(cfg)) {
    spec_.validate();
    cfg_.validate();
    if (train.size() == 0) throw ParameterError("empty training set");
    if (train.classes() != spec_.classes) {
        throw SpecError("dataset has " + std::to_string(train.classes()) + " classes, network " +
                        std::to_string(spec_.classes));
    }
    if (train.channels() != spec_.in_channels) throw SpecError("dataset channel count does not match the network");
}

curriculum::FlopsModel Trainer::flops_model() const {
    const NetworkSpec spec = spec_;
    return [spec](int side) { return flops(spec, static_cast<std::size_t>(side)); };
}

double Trainer::step_cost(int bandwidth, std::uint64_t batch) const {
    return static_cast<double>(batch) * flops(spec_, static_cast<std::size_t>(bandwidth)) /
           (static_cast<double>(data_.size()) * flops(spec_, static_cast<std::size_t>(final_size())));
}

TrainingPlan Trainer::plan(const std::vector<Segment>& segments, const TrainerState& state) const {
    return pipeline::make_plan(segments, cfg_.replay, state.seed, state.stream_position);
}

RunSummary Trainer::run(TrainerState& state, const TrainingPlan& plan, const RunHooks& hooks, std::uint64_t start) const {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t total = plan.iterations.size();
    if (start > total) throw ParameterError("run start lies past the end of the plan");
    const std::uint64_t end = std::min(total, start + std::min(hooks.max_iterations, total - start));

    std::uint64_t first_fresh = plan.fresh.size();
    for (std::uint64_t i = start; i < total; ++i) {
        if (!plan.iterations[i].replay) {
            first_fresh = plan.iterations[i].fresh_index;
            break;
        }
    }
    pipeline::BatchProducer producer(data_, plan, cfg_.preprocess, state.seed, cfg_.workers, cfg_.queue_depth,
                                     first_fresh);
    pipeline::SampleStream rebuild_stream(data_.size(), state.seed, data_.split == pipeline::Split::train);
    std::map<std::uint64_t, Batch> recent;

    std::vector<double> marks = hooks.marks;
    std::sort(marks.begin(), marks.end());
    auto next_mark = std::upper_bound(marks.begin(), marks.end(), state.equivalent_epochs);

    RunSummary summary;
    std::vector<float> dlogits;
    for (std::uint64_t i = start; i < end; ++i) {
        const auto& it = plan.iterations[i];
        const Segment& seg = plan.segments[it.segment];
        if (!it.replay) {
            Batch b = producer.next();
            if (b.index != it.fresh_index) throw Error("batch producer delivered out of order");
            const std::uint64_t idx = b.index;
            recent[idx] = std::move(b);
            while (!recent.empty() && recent.begin()->first + cfg_.replay.capacity <= idx) recent.erase(recent.begin());
            state.stream_position = plan.fresh[idx].stream_offset + seg.batch;
            ++summary.fresh_batches;
        } else if (!recent.count(it.fresh_index)) {
            // resumed inside a replay window: rebuild the stored batch
            recent[it.fresh_index] =
                pipeline::build_fresh_batch(data_, plan, it.fresh_index, cfg_.preprocess, state.seed, rebuild_stream);
        }
        const Batch& batch = recent.at(it.fresh_index);

        const double lr = seg.lr_scale * curriculum::lr_at(std::min(it.progress, 1.0), cfg_.lr);
        const auto logits = state.net.forward(batch.inputs.data(), batch.count, batch.side);
        const float loss = cross_entropy(logits, batch.count, spec_.classes, batch.labels.data(),
                                         batch.has_soft_labels() ? batch.soft.data() : nullptr, cfg_.label_smoothing,
                                         &dlogits);
        if (!std::isfinite(loss)) throw DivergedError(state.iteration);
        state.net.backward(dlogits);
        state.opt.step(state.net, lr);

        ++state.iteration;
        state.progress = it.progress;
        state.equivalent_epochs += step_cost(seg.bandwidth, batch.count);
        ++summary.iterations;
        summary.last_loss = loss;

        if (hooks.on_step) {
            hooks.on_step(StepLog{state.iteration, seg.bandwidth, batch.count, lr, loss, state.equivalent_epochs,
                                  it.progress, it.replay});
        }
        while (next_mark != marks.end() && state.equivalent_epochs >= *next_mark * (1.0 - 1e-12)) {
            if (hooks.on_mark) hooks.on_mark(*next_mark, state);
            ++next_mark;
        }
    }
    summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return summary;
}

// ---------------------------------------------------------------- evaluation

std::string EvalTransform::describe() const {
    switch (kind) {
        case Kind::none:
            return "none";
        case Kind::bandwidth:
            return "bandwidth " + std::to_string(bandwidth);
        case Kind::filter: {
            std::string s = filter.mode == spectral::FilterMode::low_pass ? "low-pass " : "high-pass ";
            s += filter.shape == spectral::FilterShape::square ? "square " : "circular ";
            return s + std::to_string(filter.size);
        }
    }
    return "?";
}

std::vector<double> evaluate_many(const Network<float>& net, const Dataset& val,
                                  const std::vector<EvalTransform>& transforms, std::size_t batch) {
    if (val.split != pipeline::Split::val) throw ParameterError("evaluation needs a validation split");
    if (val.classes() != net.spec().classes) {
        throw SpecError("validation set has " + std::to_string(val.classes()) + " classes, network " +
                        std::to_string(net.spec().classes));
    }
    if (val.size() == 0) throw ParameterError("empty validation set");
    if (batch == 0) batch = 1;
    const std::size_t classes = net.spec().classes;
    std::vector<std::size_t> correct(transforms.size(), 0);
    std::vector<ImageD> images;
    std::vector<float> inputs;
    for (std::size_t begin = 0; begin < val.size(); begin += batch) {
        const std::size_t n = std::min(batch, val.size() - begin);
        images.clear();
        for (std::size_t i = 0; i < n; ++i) images.push_back(val.sample(begin + i));
        for (std::size_t t = 0; t < transforms.size(); ++t) {
            const EvalTransform& tr = transforms[t];
            std::size_t side = images[0].height();
            inputs.clear();
            for (const ImageD& img : images) {
                ImageD x;
                switch (tr.kind) {
                    case EvalTransform::Kind::none:
                        x = img;
                        break;
                    case EvalTransform::Kind::filter:
                        x = spectral::apply_filter(img, tr.filter);
                        break;
                    case EvalTransform::Kind::bandwidth:
                        x = pipeline::resample_to(img, tr.bandwidth, tr.method, tr.lobes);
                        clamp_unit(x);
                        break;
                }
                side = x.height();
                inputs.insert(inputs.end(), x.data().begin(), x.data().end());
            }
            const auto logits = net.infer(inputs.data(), n, side);
            const auto pred = argmax_rows(logits, n, classes);
            for (std::size_t i = 0; i < n; ++i) correct[t] += pred[i] == val.label(begin + i) ? 1 : 0;
        }
    }
    std::vector<double> out;
    for (std::size_t c : correct) out.push_back(static_cast<double>(c) / static_cast<double>(val.size()));
    return out;
}

double evaluate(const Network<float>& net, const Dataset& val, const EvalTransform& transform, std::size_t batch) {
    return evaluate_many(net, val, {transform}, batch).front();
}

// ---------------------------------------------------------------- checkpoints
//
// Layout (little-endian):
//   0  "FQCK"
//   4  u32 version
//   8  u64 float count F
//  16  u64 metadata length J
//  24  32-byte SHA-256 of bytes [56, 56 + 4F + J)
//  56  F x f32: parameters, first moments, second moments
//  56+4F  J bytes of JSON metadata

namespace {

constexpr char kMagic[4] = {'F', 'Q', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeader = 56;

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t off) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
    return static_cast<T>(v);
}

void put_floats(std::string& out, const std::vector<float>& v) {
    for (float f : v) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put(out, bits);
    }
}

std::vector<float> get_floats(const std::string& in, std::size_t off, std::size_t count) {
    std::vector<float> v(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto bits = get<std::uint32_t>(in, off + 4 * i);
        std::memcpy(&v[i], &bits, 4);
    }
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainerState& s, const nlohmann::json& extra) {
    nlohmann::json meta = {{"spec", to_json(s.net.spec())},
                           {"spec_hash", spec_hash(s.net.spec())},
                           {"optimizer", to_json(s.opt.cfg)},
                           {"optimizer_steps", s.opt.steps},
                           {"parameters", s.net.size()},
                           {"second_moments", !s.opt.second.empty()},
                           {"seed", s.seed},
                           {"iteration", s.iteration},
                           {"progress", s.progress},
                           {"equivalent_epochs", s.equivalent_epochs},
                           {"stream_position", s.stream_position},
                           {"extra", extra}};
    const std::string json = meta.dump();
    std::string body;
    put_floats(body, s.net.params());
    put_floats(body, s.opt.first);
    put_floats(body, s.opt.second);
    const std::uint64_t nfloat = body.size() / 4;
    body += json;
    const auto digest = Sha256().update(body.data(), body.size()).finish();

    std::string out(kMagic, 4);
    put(out, kVersion);
    put(out, nfloat);
    put(out, static_cast<std::uint64_t>(json.size()));
    out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
    out += body;

    // write-then-rename so an interrupted save never leaves a torn file
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw CheckpointError("cannot write " + tmp.string());
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw CheckpointError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

TrainerState load_checkpoint(const std::filesystem::path& path, const std::optional<NetworkSpec>& expected,
                             nlohmann::json* extra) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open " + path.string());
    const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const std::string name = path.string();
    if (in.size() < kHeader) throw CheckpointError(name + ": truncated header");
    if (in.compare(0, 4, kMagic, 4) != 0) throw CheckpointError(name + ": not a checkpoint (bad magic)");
    const auto version = get<std::uint32_t>(in, 4);
    if (version != kVersion) throw CheckpointError(name + ": unsupported version " + std::to_string(version));
    const auto nfloat = get<std::uint64_t>(in, 8);
    const auto jlen = get<std::uint64_t>(in, 16);
    if (nfloat > in.size() || jlen > in.size() || in.size() != kHeader + 4 * nfloat + jlen) {
        throw CheckpointError(name + ": truncated or oversized payload");
    }
    const auto digest = Sha256().update(in.data() + kHeader, in.size() - kHeader).finish();
    if (std::memcmp(digest.data(), in.data() + 24, 32) != 0) throw CheckpointError(name + ": digest mismatch");

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(in.begin() + static_cast<std::ptrdiff_t>(kHeader + 4 * nfloat), in.end());
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(name + ": bad metadata: " + e.what());
    }
    const NetworkSpec spec = spec_from_json(meta.at("spec"));
    if (expected && !(*expected == spec)) throw SpecError(name + ": checkpoint was written for a different network");
    const std::size_t p = meta.at("parameters").get<std::size_t>();
    const bool second = meta.at("second_moments").get<bool>();
    if (p != parameter_count(spec) || nfloat != p * (second ? 3 : 2)) {
        throw CheckpointError(name + ": payload size does not match the stored spec");
    }

    TrainerState s;
    s.net = Network<float>(spec, 0);
    s.net.assign(spec, s.net.blocks(), get_floats(in, kHeader, p));
    s.opt.cfg = optimizer_from_json(meta.at("optimizer"));
    s.opt.first = get_floats(in, kHeader + 4 * p, p);
    if (second) s.opt.second = get_floats(in, kHeader + 8 * p, p);
    s.opt.steps = meta.at("optimizer_steps").get<std::uint64_t>();
    s.seed = meta.at("seed").get<std::uint64_t>();
    s.iteration = meta.at("iteration").get<std::uint64_t>();
    s.progress = meta.at("progress").get<double>();
    s.equivalent_epochs = meta.at("equivalent_epochs").get<double>();
    s.stream_position = meta.at("stream_position").get<std::uint64_t>();
    if (extra) *extra = meta.value("extra", nlohmann::json::object());
    return s;
}

// ---------------------------------------------------------------- gradient check

GradCheckResult grad_check(Network<double>& net, const std::vector<double>& inputs, std::size_t n, std::size_t side,
                           const std::vector<int>& labels, double smoothing, double epsilon, std::size_t per_block,
                           std::uint64_t seed, const std::function<void(std::vector<double>&)>& corrupt, double floor) {
    const std::size_t classes = net.spec().classes;
    std::vector<double> d;
    const auto logits = net.forward(inputs.data(), n, side);
    cross_entropy(logits, n, classes, labels.data(), nullptr, smoothing, &d);
    net.backward(d);
    std::vector<double> analytic = net.grads();
    if (corrupt) corrupt(analytic);

    auto loss_at = [&] {
        return cross_entropy(net.infer(inputs.data(), n, side), n, classes, labels.data(), nullptr, smoothing,
                             static_cast<std::vector<double>*>(nullptr));
    };
    // A central difference that straddles a ReLU kink measures a secant, not
    // the derivative; such coordinates are retried with a smaller step and
    // skipped if the kink is closer than that.
    const std::vector<bool> base_pattern = net.relu_pattern(inputs.data(), n, side);
    Rng rng(seed);
    GradCheckResult r;
    for (const auto& b : net.blocks()) {
        const std::size_t picks = std::min(per_block, b.size);
        for (std::size_t k = 0; k < picks; ++k) {
            const std::size_t i = b.offset + (picks == b.size ? k : uniform_index(rng, b.size));
            double& w = net.params()[i];
            const double saved = w;
            std::optional<double> numeric;
            for (double h = epsilon; h >= epsilon * 1e-3 && !numeric; h *= 0.1) {
                w = saved + h;
                const bool up_ok = net.relu_pattern(inputs.data(), n, side) == base_pattern;
                const double up = loss_at();
                w = saved - h;
                const bool down_ok = net.relu_pattern(inputs.data(), n, side) == base_pattern;
                const double down = loss_at();
                w = saved;
                if (up_ok && down_ok) numeric = (up - down) / (2 * h);
            }
            if (!numeric) {
                ++r.skipped;
                continue;
            }
            const double err =
                std::abs(*numeric - analytic[i]) / std::max({std::abs(*numeric), std::abs(analytic[i]), floor});
            if (err > r.max_rel_error) {
                r.max_rel_error = err;
                r.worst_block = b.name;
            }
            ++r.checked;
        }
    }
    return r;
}

}  // namespace fcl::model

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "fcl/error.hpp"
#include "fcl/pipeline/dataset.hpp"
#include "fcl/pipeline/loader.hpp"
#include "fcl/pipeline/plan.hpp"
#include "fcl/pipeline/preprocess.hpp"
#include "fcl/pipeline/replay.hpp"
#include "fcl/spectral/spectral.hpp"
#include "oracles.hpp"

using namespace fcl;
using namespace fcl::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("fcl_pipeline_" + name);
    fs::remove_all(p);
    return p;
}

Dataset tiny_gray(std::size_t n, std::size_t side) {
    std::vector<std::uint8_t> px(n * side * side);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>((i * 37 + 11) % 256);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 10);
    return Dataset(1, side, side, std::move(px), std::move(labels), 10);
}

void flip_byte(const fs::path& p, std::size_t offset) {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(static_cast<std::streamoff>(offset));
    char c;
    f.read(&c, 1);
    c = static_cast<char>(c ^ 0x5a);
    f.seekp(static_cast<std::streamoff>(offset));
    f.write(&c, 1);
}

PreprocessOptions quiet_options() {
    PreprocessOptions o;
    o.baseline_augment = false;
    o.randaug = false;
    return o;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("IDX round trip and header checks") {
    const auto dir = scratch("idx");
    fs::create_directories(dir);
    const Dataset d = tiny_gray(7, 28);
    write_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", d);
    DatasetSpec spec;
    spec.format = DatasetFormat::idx;
    spec.paths = {dir / "train-images-idx3-ubyte"};
    const Dataset back = open_dataset(spec);
    CHECK(back.size() == 7);
    CHECK(back.channels() == 1);
    CHECK(back.height() == 28);
    CHECK(back.labels() == d.labels());
    CHECK(back.sample(3) == d.sample(3));
    CHECK(fs::file_size(dir / "train-images-idx3-ubyte") == 16 + 7 * 28 * 28);

    flip_byte(dir / "train-images-idx3-ubyte", 2);
    try {
        open_dataset(spec);
        FAIL("corrupted magic accepted");
    } catch (const FormatError& e) {
        CHECK(e.offset() == 0);
    }
}

TEST_CASE("CIFAR-10 binary records") {
    const auto dir = scratch("cifar");
    fs::create_directories(dir);
    const Dataset d = synthetic_shapes(12, 5);
    write_cifar10(dir / "data_batch_1.bin", d);
    CHECK(fs::file_size(dir / "data_batch_1.bin") == 12 * 3073);
    const Dataset back = read_cifar10({dir / "data_batch_1.bin"});
    CHECK(back.size() == 12);
    CHECK(back.channels() == 3);
    CHECK(back.height() == 32);
    CHECK(back.width() == 32);
    CHECK(back.sample(11) == d.sample(11));

    // a record cut short is reported at the start of the partial record
    fs::resize_file(dir / "data_batch_1.bin", 12 * 3073 - 5);
    try {
        read_cifar10({dir / "data_batch_1.bin"});
        FAIL("truncated file accepted");
    } catch (const FormatError& e) {
        CHECK(e.offset() == 11 * 3073);
    }
    // label out of range
    write_cifar10(dir / "bad.bin", d);
    {
        std::fstream f(dir / "bad.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(3073);
        f.put(static_cast<char>(42));
    }
    CHECK_THROWS_AS(read_cifar10({dir / "bad.bin"}), FormatError);
}

TEST_CASE("RTEN directory round trip and corrupted magic") {
    const auto dir = scratch("rten");
    Dataset d = synthetic_shapes(4, 9);
    write_rten_dir(dir, d);
    const Dataset back = read_rten_dir(dir);
    CHECK(back.size() == 4);
    CHECK(back.labels() == d.labels());
    CHECK(oracle::max_abs_diff(back.sample(2), d.sample(2)) < 1e-6);

    flip_byte(dir / "000001.rten", 0);
    try {
        read_rten_dir(dir);
        FAIL("corrupted magic accepted");
    } catch (const FormatError& e) {
        CHECK(e.offset() == 0);
        CHECK(std::string(e.what()).find("000001.rten") != std::string::npos);
    }
}

TEST_CASE("replay buffer keeps the newest batches in order") {
    ReplayBuffer<int> buf(8);
    for (int i = 0; i < 20; ++i) buf.insert(i);
    REQUIRE(buf.size() == 8);
    int expect = 12;
    for (int v : buf.items()) CHECK(v == expect++);
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const int s = buf.sample(rng);
        CHECK(s >= 12);
        CHECK(s <= 19);
    }
    CHECK_THROWS_AS(ReplayBuffer<int>(0), ParameterError);
}

TEST_CASE("replay feeder alternates fresh and replayed batches") {
    SUBCASE("n_buffer = 0 is all fresh") {
        ReplayFeeder<int> f(0, 8, 1);
        int counter = 0;
        for (int i = 0; i < 50; ++i) {
            auto s = f.next([&] { return counter++; });
            CHECK(s.fresh);
            CHECK(s.item == i);
        }
    }
    SUBCASE("n_buffer = 1 over 1000 iterations produces 500 fresh batches") {
        ReplayFeeder<int> f(1, 8, 1);
        int counter = 0;
        for (int i = 0; i < 1000; ++i) {
            auto s = f.next([&] { return counter++; });
            CHECK(s.fresh == (i % 2 == 0));
        }
        CHECK(f.fresh_count() == 500);
    }
    SUBCASE("flush returns to cold start") {
        ReplayFeeder<int> f(3, 8, 1);
        int counter = 0;
        f.next([&] { return counter++; });
        f.flush();
        CHECK(f.buffer().empty());
        CHECK(f.next([&] { return counter++; }).fresh);
    }
}

TEST_CASE("plan fresh count is the ceiling per segment") {
    Rng rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<Segment> segs;
        const std::size_t n = 1 + uniform_index(rng, 4);
        for (std::size_t i = 0; i < n; ++i) {
            Segment s;
            s.bandwidth = 16;
            s.batch = 4;
            s.iterations = uniform_index(rng, 40);
            s.progress_begin = static_cast<double>(i) / n;
            s.progress_end = static_cast<double>(i + 1) / n;
            segs.push_back(s);
        }
        const std::size_t nb = uniform_index(rng, 5);
        const auto plan = make_plan(segs, {nb, 1 + uniform_index(rng, 8)}, trial);
        std::uint64_t expect = 0;
        std::uint64_t total = 0;
        for (const auto& s : segs) {
            expect += static_cast<std::uint64_t>(std::ceil(static_cast<double>(s.iterations) / (nb + 1)));
            total += s.iterations;
        }
        CHECK(plan.fresh_count() == expect);
        CHECK(expected_fresh_count(segs, nb) == expect);
        CHECK(plan.iterations.size() == total);

        // every fresh batch is trained on once at production, before any replay,
        // and replays never cross a segment boundary
        std::vector<int> seen(plan.fresh.size(), 0);
        for (const auto& it : plan.iterations) {
            if (!it.replay) {
                CHECK(seen[it.fresh_index] == 0);
                seen[it.fresh_index] = 1;
            } else {
                CHECK(seen[it.fresh_index] == 1);
            }
            CHECK(plan.fresh[it.fresh_index].segment == it.segment);
        }
        CHECK(std::count(seen.begin(), seen.end(), 1) == static_cast<long>(plan.fresh.size()));
        CHECK(plan.stream_end - plan.stream_begin == plan.fresh.size() * 4);
    }
}

TEST_CASE("sample stream permutes each epoch and keeps validation order") {
    SampleStream train(50, 7, true);
    std::set<std::size_t> e0, e1;
    std::vector<std::size_t> o0, o1;
    for (std::uint64_t p = 0; p < 50; ++p) {
        e0.insert(train.at(p));
        o0.push_back(train.at(p));
        e1.insert(train.at(50 + p));
        o1.push_back(train.at(50 + p));
    }
    CHECK(e0.size() == 50);
    CHECK(e1.size() == 50);
    CHECK(o0 != o1);
    SampleStream again(50, 7, true);
    for (std::uint64_t p = 0; p < 100; ++p) CHECK(again.at(p) == train.at(p));
    SampleStream val(50, 7, false);
    for (std::uint64_t p = 0; p < 120; ++p) CHECK(val.at(p) == p % 50);
}

TEST_CASE("preprocess without augmentation at full size is a plain resize") {
    const Dataset d = synthetic_shapes(3, 1);
    auto o = quiet_options();
    Rng rng(1);
    CHECK(preprocess(d.sample(0), 32, 0.5, o, rng) == d.sample(0));
    CHECK_THROWS_AS(preprocess(d.sample(0), 34, 0.5, o, rng), ParameterError);
}

TEST_CASE("final stage at progress 1 applies full-strength augmentation at full size") {
    const Dataset d = synthetic_shapes(3, 1);
    PreprocessOptions o;
    Rng a(5), b(5);
    const ImageD x = preprocess(d.sample(1), 32, 1.0, o, a);
    CHECK(x.height() == 32);
    // same draws as the baseline recipe at magnitude m0
    ImageD y = augment::baseline_augment(d.sample(1), 32, b, o.crop);
    y = augment::apply_randaug(y, o.policy, o.m0, b);
    clamp_unit(y);
    CHECK(x == y);

    // Without the ramp every stage sees m0, so progress no longer matters.
    o.ramp_magnitude = false;
    Rng c(5);
    CHECK(preprocess(d.sample(1), 32, 0.0, o, c) == x);
    o.ramp_magnitude = true;
    int differs = 0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        Rng r1(seed), r2(seed);
        const ImageD ramped = preprocess(d.sample(1), 32, 0.0, o, r1);
        o.ramp_magnitude = false;
        differs += preprocess(d.sample(1), 32, 0.0, o, r2) == ramped ? 0 : 1;
        o.ramp_magnitude = true;
    }
    CHECK(differs > 0);
}

TEST_CASE("pre-clamp output at B=16 holds only the source's low band") {
    const Dataset d = synthetic_shapes(2, 4);
    for (ResampleMethod method : {ResampleMethod::exact, ResampleMethod::crop}) {
        PreprocessOptions o;
        o.resample = method;
        Rng a(21), b(21);
        const ImageD small = preprocess_unclamped(d.sample(0), 16, 0.7, o, a);
        const ImageD full = preprocess_unclamped(d.sample(0), 32, 0.7, o, b);
        REQUIRE(small.height() == 16);
        for (std::size_t c = 0; c < 3; ++c) {
            const auto fs_ = oracle::naive_dft(full, c);
            const auto ss = oracle::naive_dft(small, c);
            double worst = 0.0;
            // interior of the band; the Nyquist row/column is symmetrized
            for (int u = -7; u < 8; ++u)
                for (int v = -7; v < 8; ++v) {
                    const auto want = fs_[(u + 16) * 32 + (v + 16)] * (256.0 / 1024.0);
                    const auto got = ss[(u + 8) * 16 + (v + 8)];
                    worst = std::max(worst, std::abs(want - got));
                }
            CHECK(worst < 1e-9);
        }
        // the clamp happens only at the pipeline boundary
        Rng c(21);
        const ImageD clamped = preprocess(d.sample(0), 16, 0.7, o, c);
        for (double v : clamped.data()) CHECK((v >= 0.0 && v <= 1.0));
    }
}

TEST_CASE("batch stream is bitwise reproducible and independent of worker count") {
    Dataset d = synthetic_shapes(40, 2);
    std::vector<Segment> segs{{16, 6, 9, 0.0, 0.5}, {24, 6, 5, 0.5, 0.8}, {32, 6, 4, 0.8, 1.0}};
    const auto plan = make_plan(segs, {1, 4}, 99);
    PreprocessOptions o;

    auto collect = [&](std::size_t workers, std::size_t depth) {
        BatchProducer prod(d, plan, o, 99, workers, depth);
        std::vector<Batch> out;
        for (std::size_t i = 0; i < plan.fresh_count(); ++i) out.push_back(prod.next());
        CHECK_THROWS(prod.next());
        return out;
    };
    const auto inline_run = collect(0, 1);
    const auto one = collect(1, 2);
    const auto three = collect(3, 5);
    const auto again = collect(1, 2);
    REQUIRE(one.size() == plan.fresh_count());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].index == i);
        CHECK(one[i].inputs == three[i].inputs);
        CHECK(one[i].inputs == again[i].inputs);
        CHECK(one[i].inputs == inline_run[i].inputs);
        CHECK(one[i].labels == three[i].labels);
        CHECK(one[i].side == static_cast<std::size_t>(segs[plan.fresh[i].segment].bandwidth));
        for (float v : one[i].inputs) CHECK((v >= 0.0f && v <= 1.0f));
    }
    // a different seed gives a different stream
    BatchProducer other(d, plan, o, 100, 1, 2);
    CHECK(other.next().inputs != one[0].inputs);
}

TEST_CASE("worker failures surface on the consumer") {
    Dataset d = synthetic_shapes(8, 2);
    std::vector<Segment> segs{{40, 2, 3, 0.0, 1.0}};  // bandwidth larger than the samples
    const auto plan = make_plan(segs, {}, 1);
    BatchProducer prod(d, plan, quiet_options(), 1, 2, 2);
    CHECK_THROWS_AS(prod.next(), ParameterError);
}

}  // TEST_SUITE

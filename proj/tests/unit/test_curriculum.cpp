#include <doctest.h>

#include <cmath>
#include <random>

#include "fcl/curriculum.hpp"
#include "fcl/error.hpp"

using namespace fcl;
using namespace fcl::curriculum;

namespace {

double quadratic(int side) { return static_cast<double>(side) * side; }
double conv_like(int side) { return 1000.0 * side * side + 5000.0; }

// Symbolic execution: one record per stage with the planned iteration count.
std::vector<StepRecord> execute(const std::vector<StagePlan>& plan) {
    std::vector<StepRecord> log;
    for (const auto& p : plan) log.push_back({p.stage.bandwidth, p.batch, p.iterations});
    return log;
}

}  // namespace

TEST_SUITE("curriculum") {

TEST_CASE("EfficientTrain++ default at 224 reproduces its table") {
    auto s = default_etpp(224, 300);
    REQUIRE(s.stages.size() == 3);
    CHECK(s.stages[0].bandwidth == 96);
    CHECK(s.stages[1].bandwidth == 160);
    CHECK(s.stages[2].bandwidth == 224);
    CHECK(s.stages[0].start_frac == 0.0);
    CHECK(s.stages[0].end_frac == 0.2);
    CHECK(s.stages[1].end_frac == 0.6);
    CHECK(s.stages[2].end_frac == 1.0);
    CHECK(s.basis == ProgressBasis::compute);
}

TEST_CASE("size adaptation with even rounding") {
    auto s = default_etpp(32, 200);
    CHECK(s.stages[0].bandwidth == 14);
    CHECK(s.stages[1].bandwidth == 24);
    CHECK(s.stages[2].bandwidth == 32);
    auto e = default_et(300, 32);
    CHECK(e.stages[0].bandwidth == 22);
    CHECK(e.stages[1].bandwidth == 28);
    CHECK(e.stages[2].bandwidth == 32);
    CHECK(round_even(13.714) == 14);
    CHECK(round_even(23.0) == 24);
    CHECK(round_even(27.0) == 28);
    CHECK(round_even(22.857) == 22);
    CHECK(round_even(3.0) == 8);
    // small final sizes clamp to the final size itself
    auto tiny = default_etpp(8, 10);
    for (const auto& st : tiny.stages) CHECK(st.bandwidth == 8);
    CHECK_THROWS_AS(default_etpp(6, 10), ParameterError);
}

TEST_CASE("EfficientTrain default follows its epoch table") {
    auto s = default_et(300, 224);
    CHECK(s.stages[0].bandwidth == 160);
    CHECK(s.stages[1].bandwidth == 192);
    CHECK(s.stages[2].bandwidth == 224);
    CHECK(s.stages[0].end_frac * 300 == doctest::Approx(180));
    CHECK(s.stages[1].end_frac * 300 == doctest::Approx(240));
    auto h = default_et(100, 224);
    CHECK(h.stages[0].end_frac * 100 == doctest::Approx(60));
    CHECK(h.stages[1].end_frac * 100 == doctest::Approx(80));
    CHECK(h.basis == ProgressBasis::epoch);
    CHECK_THROWS_AS(default_et(2, 224), ParameterError);
}

TEST_CASE("single stage schedule is the baseline") {
    auto s = baseline_schedule(32, 50);
    REQUIRE(s.stages.size() == 1);
    CHECK(s.stages[0].bandwidth == 32);
    auto u = uniform_schedule({32}, 32, 50);
    CHECK(u.stages.size() == 1);
}

TEST_CASE("schedule validation") {
    CurriculumSchedule s = default_etpp(32, 10);
    auto gap = s;
    gap.stages[1].start_frac = 0.25;
    CHECK_THROWS_AS(gap.validate(), ParameterError);
    auto odd = s;
    odd.stages[0].bandwidth = 15;
    CHECK_THROWS_AS(odd.validate(), ParameterError);
    auto last = s;
    last.stages[2].bandwidth = 24;
    CHECK_THROWS_AS(last.validate(), ParameterError);
    CHECK(s.stage_at(0.0) == 0);
    CHECK(s.stage_at(0.2) == 1);
    CHECK(s.stage_at(1.0) == 2);
}

TEST_CASE("stage_iterations") {
    Stage full{0.0, 1.0, 32, 1.0};
    CHECK(stage_iterations(full, 10, quadratic, 32, 50000, 100) == 5000);
    Stage early{0.0, 0.2, 16, 1.0};
    CHECK(stage_iterations(early, 10, quadratic, 32, 50000, 100) == static_cast<std::uint64_t>(0.2 * 4 * 500 * 10));
    CHECK(stage_iterations(early, 10, quadratic, 32, 50000, 100, ProgressBasis::epoch) == 1000);
    auto zero = [](int) { return 0.0; };
    CHECK_THROWS_AS(stage_iterations(early, 10, zero, 32, 50000, 100), CostModelError);
}

TEST_CASE("equivalent_epochs basics") {
    CHECK(equivalent_epochs({}, quadratic, 32, 100) == 0.0);
    CHECK(equivalent_epochs({{32, 10, 10}}, quadratic, 32, 100) == doctest::Approx(1.0));
    CHECK(equivalent_epochs({{16, 10, 10}}, quadratic, 32, 100) == doctest::Approx(0.25));
}

TEST_CASE("executing default_etpp hits its budget") {
    for (double budget : {50.0, 200.0}) {
        auto plan = plan_schedule(default_etpp(32, budget), conv_like, 50000, 128, LRConfig{});
        const double e = equivalent_epochs(execute(plan), conv_like, 32, 50000);
        CHECK(std::abs(e - budget) / budget < 0.005);
        CHECK(e <= budget);
    }
}

TEST_CASE("stage_iterations and equivalent_epochs are inverse on random schedules") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int final_size = 8 + 2 * static_cast<int>(uni(rng) * 29);  // 8..64
        const int n = 1 + static_cast<int>(uni(rng) * 5);
        std::vector<double> cuts{0.0};
        for (int i = 1; i < n; ++i) cuts.push_back(cuts.back() + 0.05 + uni(rng) * (0.9 - cuts.back()) / n);
        cuts.push_back(1.0);
        CurriculumSchedule s;
        s.final_size = final_size;
        s.budget = 20 + uni(rng) * 280;
        for (int i = 0; i < n; ++i) {
            const int b = i + 1 == n ? final_size : std::min(final_size, 8 + 2 * static_cast<int>(uni(rng) * (final_size / 2 - 3)));
            s.stages.push_back(Stage{cuts[i], cuts[i + 1], b, 1.0 + std::floor(uni(rng) * 3)});
        }
        REQUIRE_NOTHROW(s.validate());
        auto plan = plan_schedule(s, conv_like, 50000, 128, LRConfig{});
        const double e = equivalent_epochs(execute(plan), conv_like, final_size, 50000);
        CHECK(std::abs(e - s.budget) / s.budget < 0.005);
    }
}

TEST_CASE("lr_at shape") {
    LRConfig cfg{1.0, 0.1, 0.01, 10.0};
    CHECK(lr_at(0.0, cfg) == 0.0);
    CHECK(lr_at(0.1, cfg) == doctest::Approx(1.0));
    CHECK(lr_at(1.0, cfg) == doctest::Approx(0.01));
    CHECK(lr_at(0.55, cfg) == doctest::Approx(0.505));
    double prev = lr_at(0.1, cfg);
    for (int i = 1; i <= 900; ++i) {
        const double p = 0.1 + i / 1000.0;
        const double v = lr_at(p, cfg);
        CHECK(v <= prev + 1e-15);
        CHECK(std::abs(v - prev) < 0.01);  // continuity at this step size
        prev = v;
    }
    CHECK(std::abs(lr_at(0.1 - 1e-9, cfg) - lr_at(0.1, cfg)) < 1e-6);
    CHECK_THROWS_AS(lr_at(1.5, cfg), ParameterError);
    CHECK_THROWS_AS((LRConfig{1.0, 0.1, 2.0, 10.0}.validate()), ParameterError);
}

TEST_CASE("square-root batch scaling with cap") {
    LRConfig cfg{0.1, 0.05, 1e-6, 0.3};
    auto one = scale_batch_lr(1, 128, cfg);
    CHECK(one.batch == 128);
    CHECK(one.lr_max == 0.1);
    auto four = scale_batch_lr(4, 128, cfg);
    CHECK(four.batch == 512);
    CHECK(four.lr_max == doctest::Approx(0.2));
    auto sixteen = scale_batch_lr(16, 128, cfg);
    CHECK(sixteen.lr_max == doctest::Approx(0.3));
    CHECK(stage_lr(0.05, cfg, four) == doctest::Approx(0.2));
    CHECK(stage_lr(1.0, cfg, four) == doctest::Approx(2e-6));
    CHECK_THROWS_AS(scale_batch_lr(0.5, 128, cfg), ParameterError);
}

TEST_CASE("json round trip") {
    auto s = default_etpp(32, 50);
    auto back = schedule_from_json(to_json(s));
    CHECK(back.stages.size() == 3);
    CHECK(back.stages[1].bandwidth == 24);
    CHECK(back.budget == 50);
    auto j = to_json(s);
    j["stages"][0]["end_frac"] = 0.3;
    CHECK_THROWS_AS(schedule_from_json(j), ParameterError);
    CHECK(describe(s).find("B=14") != std::string::npos);
}

}  // TEST_SUITE

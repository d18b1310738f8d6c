#include <gtest/gtest.h>

#include "memsync/categories.hpp"
#include "memsync/channels.hpp"
#include "memsync/runstats.hpp"
#include "test_support.hpp"

namespace memsync {
namespace {

const BinaryErrorSequence kAnyError = parse_binary("00100001000010000010");

TEST(ErrorFreeRuns, ExampleSequence) {
    auto r = error_free_runs(kAnyError);
    EXPECT_EQ(r.counts(), (std::map<std::size_t, std::size_t>{{1, 1}, {4, 2}, {5, 1}}));
    EXPECT_EQ(r.total_runs(), 4u);
    EXPECT_TRUE(r.includes_censored_tail());
    EXPECT_EQ(r.censored(), (std::map<std::size_t, std::size_t>{{1, 1}}));
    EXPECT_DOUBLE_EQ(r.survival(1), 1.0);
    EXPECT_DOUBLE_EQ(r.survival(2), 0.75);
    EXPECT_DOUBLE_EQ(r.survival(5), 0.25);
    EXPECT_DOUBLE_EQ(r.survival(6), 0.0);
}

TEST(ErrorFreeRuns, TrivialCases) {
    EXPECT_EQ(error_free_runs(parse_binary("00000")).total_runs(), 0u);
    auto r = error_free_runs(parse_binary("101"));
    EXPECT_EQ(r.counts(), (std::map<std::size_t, std::size_t>{{1, 1}}));
    EXPECT_FALSE(r.includes_censored_tail());
}

TEST(ErrorRuns, ExampleSequence) {
    auto r = error_runs(kAnyError);
    EXPECT_EQ(r.counts(), (std::map<std::size_t, std::size_t>{{1, 4}}));
    EXPECT_DOUBLE_EQ(r.survival(1), 1.0);
    EXPECT_DOUBLE_EQ(r.survival(2), 0.0);
}

TEST(ErrorRuns, TrivialCases) {
    EXPECT_EQ(error_runs(parse_binary("1111")).total_runs(), 0u);
    EXPECT_EQ(error_runs(parse_binary("0111")).counts(), (std::map<std::size_t, std::size_t>{{3, 1}}));
}

TEST(RunDistribution, SurvivalPropertiesAndCensoring) {
    auto rng = rng_stream(Seed{8}, 0);
    for (int trial = 0; trial < 200; ++trial) {
        BinaryErrorSequence s(1 + rng.below(300));
        const double p = rng.uniform();
        for (auto& b : s) b = rng.bernoulli(p);
        for (auto kind : {RunKind::error_free, RunKind::error}) {
            auto r = runs_of(kind, s);
            if (r.total_runs() == 0) continue;
            auto curve = r.survival_curve(r.max_length() + 1);
            EXPECT_DOUBLE_EQ(curve[0], 1.0);
            for (std::size_t m = 1; m < curve.size(); ++m) {
                EXPECT_LE(curve[m], curve[m - 1]);
                EXPECT_DOUBLE_EQ(curve[m], r.survival(m + 1));
            }
            EXPECT_EQ(curve.back(), 0.0);
            auto kept = r.without_censored();
            std::size_t cens = 0;
            for (auto [m, c] : r.censored()) cens += c;
            EXPECT_EQ(kept.total_runs() + cens, r.total_runs());
            EXPECT_LE(cens, 1u);
        }
    }
}

TEST(RunDistribution, ConcatenationOfErrorBracketedSegments) {
    auto rng = rng_stream(Seed{9}, 0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<BinaryErrorSequence> segs(3);
        BinaryErrorSequence joined;
        for (auto& seg : segs) {
            seg.resize(1 + rng.below(80));
            for (auto& b : seg) b = rng.bernoulli(0.2);
            seg.front() = 1;
            seg.back() = 1;
            joined.insert(joined.end(), seg.begin(), seg.end());
        }
        EXPECT_EQ(runs_of(RunKind::error_free, std::span<const BinaryErrorSequence>(segs)).counts(),
                  error_free_runs(joined).counts());
    }
}

TEST(FritchmanClosedForm, SingleGoodState) {
    auto m = make_fritchman_model(Matrix::from_rows({{0.9, 0.1}, {1.0, 0.0}}), 1);
    auto efr = fritchman_efr_closed_form(m, 3);
    EXPECT_DOUBLE_EQ(efr[0], 1.0);
    EXPECT_DOUBLE_EQ(efr[1], 0.9);
    EXPECT_DOUBLE_EQ(efr[2], 0.81);
}

TEST(FritchmanClosedForm, TwoGoodStates) {
    auto m = make_fritchman_model(Matrix::from_rows({{0.9, 0, 0.1}, {0, 0.5, 0.5}, {0.5, 0.5, 0}}), 2);
    auto efr = fritchman_efr_closed_form(m, 2);
    EXPECT_DOUBLE_EQ(efr[0], 1.0);
    EXPECT_DOUBLE_EQ(efr[1], 0.5 * 0.9 + 0.5 * 0.5);

    // Cross-check m = 2 against a long simulation: no error self-loop, so every error starts a run.
    auto s = simulate_fritchman(m, 1000000, Seed{13});
    auto runs = error_free_runs(s);
    const double n = static_cast<double>(runs.total_runs());
    EXPECT_NEAR(runs.survival(2), 0.70, 3.0 * std::sqrt(0.7 * 0.3 / n));
}

TEST(FritchmanClosedForm, ErrorRunSojourn) {
    auto zero = make_fritchman_model(Matrix::from_rows({{0.9, 0.1}, {1.0, 0.0}}), 1);
    auto er = fritchman_er_closed_form(zero, 2);
    EXPECT_EQ(er[0], 1.0);
    EXPECT_EQ(er[1], 0.0);

    auto sub = make_fritchman_model(Matrix::from_rows({{0.998, 0.002}, {0.9421, 0.0579}}), 1);
    EXPECT_DOUBLE_EQ(fritchman_er_closed_form(sub, 2)[1], 0.0579);

    auto half = make_fritchman_model(Matrix::from_rows({{0.5, 0.5}, {0.5, 0.5}}), 1);
    EXPECT_DOUBLE_EQ(fritchman_er_closed_form(half, 3)[2], 0.25);
}

TEST(FritchmanClosedForm, FirstTermIsExitProbability) {
    auto m = make_fritchman_model(Matrix::from_rows({{0.8, 0, 0.2}, {0, 0.7, 0.3}, {0.25, 0.35, 0.4}}), 2);
    EXPECT_NEAR(fritchman_efr_closed_form(m, 1)[0], 0.6, 1e-15);
    auto cond = fritchman_efr_run_survival(m, 3);
    EXPECT_DOUBLE_EQ(cond[0], 1.0);
    EXPECT_NEAR(cond[1], (0.25 * 0.8 + 0.35 * 0.7) / 0.6, 1e-15);
}

TEST(FritchmanClosedForm, MultipleErrorStatesRejected) {
    auto m = make_fritchman_model(Matrix::from_rows({{0.5, 0.25, 0.25}, {0.3, 0.3, 0.4}, {0.3, 0.3, 0.4}}), 1);
    EXPECT_THROW(fritchman_efr_closed_form(m, 3), ModelError);
    EXPECT_THROW(fritchman_er_closed_form(m, 3), ModelError);
    auto ids = make_ids_model(Matrix::identity(4));
    EXPECT_THROW(fritchman_efr_closed_form(ids, 3), ModelError);
}

}  // namespace
}  // namespace memsync

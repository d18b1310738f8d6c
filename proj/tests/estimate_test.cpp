#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "memsync/channels.hpp"
#include "memsync/estimate.hpp"
#include "test_support.hpp"

namespace memsync {
namespace {

void expect_non_decreasing(const std::vector<double>& trace) {
    for (std::size_t k = 1; k < trace.size(); ++k) EXPECT_GE(trace[k], trace[k - 1] - 1e-9) << "iteration " << k;
}

TEST(CountMle, HandTally) {
    auto m = count_mle(parse_sync("t,t,s,t"));
    // Transitions: t->t, t->s, s->t.
    EXPECT_EQ(m.transition.to_rows()[0], (std::vector<double>{0.5, 0.5, 0, 0}));
    EXPECT_EQ(m.transition.to_rows()[1], (std::vector<double>{1, 0, 0, 0}));
    EXPECT_EQ(m.unobserved, (std::vector<bool>{false, false, true, true}));
    for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_EQ(m.transition(2, c), 0.0);
        EXPECT_EQ(m.transition(3, c), 0.0);
    }
    EXPECT_EQ(m.emission, Matrix::identity(4));
}

TEST(CountMle, AllTransmissions) {
    auto m = count_mle(parse_sync("tttttt"));
    EXPECT_EQ(m.transition.to_rows()[0], (std::vector<double>{1, 0, 0, 0}));
    EXPECT_EQ(m.unobserved, (std::vector<bool>{false, true, true, true}));
}

TEST(CountMle, NeedsTransitions) {
    EXPECT_THROW(count_mle(parse_sync("t")), FitError);
    EXPECT_THROW(count_mle(SyncErrorSequence{}), InputError);
}

TEST(CountMle, RowCountsReconstructTallies) {
    auto rng = rng_stream(Seed{31}, 0);
    SyncErrorSequence s(5000);
    for (auto& x : s) x = kCanonicalStateOrder[rng.below(4)];
    auto counts = transition_counts(std::span<const SyncErrorSequence>(&s, 1));
    auto m = count_mle(s);
    for (std::size_t i = 0; i < 4; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < 4; ++j) row += counts(i, j);
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(m.transition(i, j) * row, counts(i, j), 1e-9);
    }
}

TEST(CountMle, FramesDoNotCountBoundaryTransitions) {
    std::vector<SyncErrorSequence> frames{parse_sync("tt"), parse_sync("ss")};
    auto m = count_mle(frames);
    EXPECT_EQ(m.transition(0, 1), 0.0);
    EXPECT_EQ(m.transition(0, 0), 1.0);
    EXPECT_EQ(m.transition(1, 1), 1.0);
}

TEST(CountMle, LowSnrRoundTrip) {
    auto v = validate_transition_matrix(Matrix::from_rows(testing::low_snr_matrix()));
    auto gen = make_ids_model(v.matrix);
    auto s = simulate_ids(gen, 1000000, Seed{23});
    auto counts = transition_counts(std::span<const SyncErrorSequence>(&s, 1));
    auto fit = count_mle(s);
    for (std::size_t i = 0; i < 4; ++i) {
        double visits = 0.0;
        for (std::size_t j = 0; j < 4; ++j) visits += counts(i, j);
        if (visits < 1000) continue;
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(fit.transition(i, j), gen.transition(i, j), 0.005);
    }
    EXPECT_TRUE(fit.unobserved[3]);
}

TEST(BaumWelch, SingleStateConvergesImmediately) {
    auto init = make_general_model(Matrix::from_rows({{1.0}}), Matrix::from_rows({{1.0}}), {"A"}, {"x"});
    ObservationSequence obs(100, 0);
    auto fit = baum_welch(obs, init);
    EXPECT_EQ(fit.model.transition, Matrix::from_rows({{1.0}}));
    EXPECT_TRUE(fit.converged);
    EXPECT_LE(fit.iterations, 2u);
}

TEST(BaumWelch, VisibleChainEqualsCounting) {
    auto rng = rng_stream(Seed{41}, 0);
    for (int trial = 0; trial < 5; ++trial) {
        SyncErrorSequence s(3000);
        for (auto& x : s) x = kCanonicalStateOrder[rng.below(4)];
        auto fit = baum_welch(to_observations(s), uniform_ids_model());
        auto mle = count_mle(s);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(fit.model.transition(i, j), mle.transition(i, j), 1e-6);
        EXPECT_EQ(fit.model.emission, Matrix::identity(4));
        expect_non_decreasing(fit.log_likelihood_trace);
        EXPECT_TRUE(fit.converged);
    }
}

TEST(BaumWelch, VisibleChainUnvisitedStateFlagged) {
    auto s = parse_sync("ttsttstttst");
    auto fit = baum_welch(to_observations(s), uniform_ids_model());
    auto mle = count_mle(s);
    EXPECT_EQ(fit.model.unobserved, mle.unobserved);
}

TEST(BaumWelch, ZeroLikelihoodIsFitError) {
    // A chain that can never emit symbol 1 after starting in state 0.
    auto init = make_fritchman_model(Matrix::from_rows({{1.0, 0.0}, {0.5, 0.5}}), 1);
    BaumWelchOptions opts;
    opts.initial = {1.0, 0.0};
    EXPECT_THROW(baum_welch(ObservationSequence{0, 0, 1}, init, opts), FitError);
    EXPECT_THROW(baum_welch(ObservationSequence{0, 2}, init, opts), InputError);
}

TEST(BaumWelch, FixedEmissionUntouched) {
    auto init = fritchman_init(3, 2, Seed{1});
    auto gen = make_fritchman_model(Matrix::from_rows({{0.95, 0, 0.05}, {0, 0.6, 0.4}, {0.5, 0.3, 0.2}}), 2);
    auto obs = simulate_fritchman(gen, 5000, Seed{2});
    BaumWelchOptions opts;
    opts.max_iters = 30;
    auto fit = baum_welch(obs, init, opts);
    EXPECT_EQ(fit.model.emission, init.emission);
    expect_non_decreasing(fit.log_likelihood_trace);
    EXPECT_EQ(fit.model.transition(0, 1), 0.0);
    EXPECT_EQ(fit.model.transition(1, 0), 0.0);
}

TEST(BaumWelch, FritchmanRoundTrip) {
    const Matrix truth = Matrix::from_rows({{0.95, 0.0, 0.05}, {0.0, 0.6, 0.4}, {0.5, 0.3, 0.2}});
    auto gen = make_fritchman_model(truth, 2);
    std::vector<ObservationSequence> obs{simulate_fritchman(gen, 100000, Seed{77})};
    auto fit = baum_welch(obs, fritchman_init(3, 2, Seed{78}), {false, 2000, 1e-8, {}});
    expect_non_decreasing(fit.log_likelihood_trace);

    // The two good states are interchangeable; match them by their self-loop.
    Matrix a = fit.model.transition;
    if (a(0, 0) < a(1, 1)) {
        Matrix swapped(3, 3);
        const std::size_t perm[3] = {1, 0, 2};
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) swapped(i, j) = a(perm[i], perm[j]);
        a = swapped;
    }
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(a(i, j), truth(i, j), 0.01) << "(" << i << "," << j << ")";
    EXPECT_EQ(a(0, 1), 0.0);
    EXPECT_EQ(a(1, 0), 0.0);
}

TEST(FritchmanInit, ZeroPatternAndEmission) {
    auto m = fritchman_init(3, 2, Seed{9});
    EXPECT_EQ(m.transition(0, 1), 0.0);
    EXPECT_EQ(m.transition(1, 0), 0.0);
    EXPECT_GT(m.transition(0, 0), 0.0);
    EXPECT_GT(m.transition(2, 2), 0.0);
    EXPECT_EQ(m.emission, Matrix::from_rows({{1, 1, 0}, {0, 0, 1}}));
    EXPECT_NO_THROW(validate_model(m));
}

TEST(FritchmanInit, MinimalPartitionAndDeterminism) {
    auto m = fritchman_init(2, 1, Seed{3});
    EXPECT_EQ(m.emission, Matrix::from_rows({{1, 0}, {0, 1}}));
    EXPECT_NO_THROW(validate_model(m));
    EXPECT_EQ(fritchman_init(3, 2, Seed{5}).transition, fritchman_init(3, 2, Seed{5}).transition);
    EXPECT_THROW(fritchman_init(3, 3, Seed{5}), InputError);
    EXPECT_THROW(fritchman_init(3, 0, Seed{5}), InputError);
}

}  // namespace
}  // namespace memsync

#include <random>

#include <gtest/gtest.h>

#include "pprucb/acquisition.hpp"
#include "pprucb/games.hpp"

using namespace pprucb;

namespace {

SurrogateConfig small_surrogate(int D = 64) {
    SurrogateConfig cfg;
    cfg.num_features = D;
    return cfg;
}

GameInstance random_game(int players, int actions, double noise_std, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::size_t total = 1;
    for (int n = 0; n < players; ++n) total *= static_cast<std::size_t>(actions);
    std::vector<Eigen::VectorXd> payoffs;
    for (std::size_t i = 0; i < total; ++i) {
        Eigen::VectorXd v(players);
        for (int n = 0; n < players; ++n) v[n] = u(rng);
        payoffs.push_back(v);
    }
    return normal_form_instance(NormalFormGame(std::vector<int>(static_cast<std::size_t>(players), actions), payoffs),
                                noise_std, seed);
}

} // namespace

TEST(ReportedProfile, MinimaxOverRows) {
    Eigen::MatrixXd L(2, 2);
    L << 0.2, 0.5, 0.4, 0.3;
    EXPECT_EQ(reported_profile(L), 1u);
    EXPECT_EQ(reported_profile(Eigen::MatrixXd::Constant(5, 3, 0.7)), 0u);
    EXPECT_THROW(reported_profile(Eigen::MatrixXd(0, 2)), PreconditionError);
}

TEST(ReportedProfile, SinglePlayerIsArgmin) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        Eigen::MatrixXd L(10, 1);
        for (int i = 0; i < 10; ++i) L(i, 0) = u(rng);
        std::size_t brute = 0;
        for (std::size_t i = 1; i < 10; ++i)
            if (L(static_cast<Eigen::Index>(i), 0) < L(static_cast<Eigen::Index>(brute), 0)) brute = i;
        EXPECT_EQ(reported_profile(L), brute);
    }
}

TEST(WorstPlayer, ArgmaxWithLowestTieBreak) {
    EXPECT_EQ(worst_player(Eigen::Vector2d(1.0, 0.2)), 0);
    EXPECT_EQ(worst_player(Eigen::Vector2d(0.5, 0.5)), 0);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        Eigen::VectorXd v(7);
        for (int i = 0; i < 7; ++i) v[i] = u(rng);
        int scan = 0;
        for (int i = 1; i < 7; ++i)
            if (v[i] > v[scan]) scan = i;
        EXPECT_EQ(worst_player(v), scan);
    }
}

TEST(ExploringChoice, ArgmaxOfDeviationUpperBounds) {
    EXPECT_EQ(exploring_choice(Eigen::Vector3d(0.1, 0.9, 0.4)), 1u);
    EXPECT_EQ(exploring_choice(Eigen::VectorXd::Constant(1, -3.0)), 0u);
    EXPECT_EQ(exploring_choice(Eigen::Vector3d(0.9, 0.9, 0.4)), 0u);
    EXPECT_THROW(exploring_choice(Eigen::VectorXd(0)), PreconditionError);
}

TEST(PreferExploring, StrictlyLargerVarianceOnly) {
    EXPECT_TRUE(prefer_exploring(0.3, 0.5));
    EXPECT_FALSE(prefer_exploring(0.5, 0.5));
    EXPECT_FALSE(prefer_exploring(0.5, 0.3));
}

TEST(Selection, InvariantUnderIncreasingTransform) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        Eigen::MatrixXd L(12, 3);
        for (Eigen::Index i = 0; i < L.size(); ++i) L.data()[i] = z(rng);
        const Eigen::VectorXd u = L.row(0).transpose();
        const Eigen::MatrixXd eL = L.array().exp().matrix();
        EXPECT_EQ(reported_profile(L), reported_profile(eL));
        EXPECT_EQ(worst_player(u), worst_player(u.array().exp().matrix()));
        EXPECT_EQ(exploring_choice(L.col(1)), exploring_choice(eL.col(1)));
    }
}

TEST(ConfidenceBoundStep, ExploringEqualsReportedWithSingletonDeviations) {
    // a single-profile grid leaves only the reported profile to explore
    auto g = normal_form_instance(prisoners_dilemma(), 0.1, 1);
    GameSpec one(2, 1, g.spec.bounds(), {g.spec.grid()[0]});
    AcquisitionState s(one, small_surrogate(), 1);
    s.observe(0, Eigen::Vector2d(3.0, 3.0));
    const auto tr = ppr_ucb_step(s, std::nullopt);
    EXPECT_EQ(tr.reported_id, 0u);
    EXPECT_EQ(tr.exploring_id, 0u);
    EXPECT_EQ(tr.chosen_id, 0u);
}

TEST(PprUcbRun, ZeroIterationsReturnsInitialization) {
    auto g = normal_form_instance(prisoners_dilemma(), 0.5, 3);
    PprUcbConfig cfg;
    cfg.T = 0;
    cfg.surrogate = small_surrogate();
    const auto r = ppr_ucb_run(g.oracle, g.spec, cfg);
    EXPECT_TRUE(r.trace.empty());
    EXPECT_EQ(r.final_id, r.initial_id);
    EXPECT_EQ(r.final_id, equal_allocation_index(g.spec));
    cfg.T = -1;
    EXPECT_THROW(ppr_ucb_run(g.oracle, g.spec, cfg), ConfigError);
}

TEST(PprUcbRun, DeterministicGivenSeed) {
    PprUcbConfig cfg;
    cfg.T = 25;
    cfg.surrogate = small_surrogate();
    cfg.seed = 11;
    auto a = random_game(2, 4, 0.8, 5);
    auto b = random_game(2, 4, 0.8, 5);
    const auto ra = ppr_ucb_run(a.oracle, a.spec, cfg);
    const auto rb = ppr_ucb_run(b.oracle, b.spec, cfg);
    ASSERT_EQ(ra.trace.size(), rb.trace.size());
    for (std::size_t t = 0; t < ra.trace.size(); ++t) {
        EXPECT_EQ(ra.trace[t].chosen_id, rb.trace[t].chosen_id);
        EXPECT_EQ(ra.trace[t].observation, rb.trace[t].observation);
        EXPECT_EQ(ra.trace[t].regret_upper, rb.trace[t].regret_upper);
    }
    EXPECT_EQ(ra.final_profile, rb.final_profile);
}

TEST(PprUcbRun, TraceInvariants) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        auto g = random_game(3, 3, 0.8, 100 + seed);
        AcquisitionState s(g.spec, small_surrogate(), seed);
        const auto r = run_loop(s, g.oracle, 30, ppr_ucb_step);
        ASSERT_EQ(r.trace.size(), 30u);
        EXPECT_EQ(r.trace.front().chosen_id, r.initial_id);
        EXPECT_EQ(r.trace.front().worst_player, -1);
        for (std::size_t t = 0; t < r.trace.size(); ++t) {
            const auto& tr = r.trace[t];
            EXPECT_TRUE(tr.chosen_id == tr.reported_id || tr.chosen_id == tr.exploring_id);
            for (int n = 0; n < 3; ++n) {
                EXPECT_LE(tr.regret_lower[n], tr.regret_upper[n] + 1e-12);
                EXPECT_LE(tr.utility_lower[n], tr.utility_upper[n] + 1e-12);
            }
            if (t > 0) {
                // exploring profile differs from the reported one only in the worst player's action
                const auto& rep = s.universe().profile(tr.reported_id);
                const auto& exp = s.universe().profile(tr.exploring_id);
                for (int n = 0; n < 3; ++n)
                    if (n != tr.worst_player) {
                        EXPECT_EQ(rep.values.row(n), exp.values.row(n));
                    }
            }
            EXPECT_EQ(s.history()[t], tr.chosen_id);
        }
        const auto& d = s.dataset();
        EXPECT_EQ(d.size(), 30u);
        EXPECT_EQ(d.observations().cols(), 30);
        for (std::size_t t = 0; t < 30; ++t) EXPECT_EQ(d.profiles()[t], s.universe().profile(r.trace[t].chosen_id));
        EXPECT_EQ(r.final_id, r.trace.back().chosen_id);
    }
}

TEST(PprUcbRun, OracleFailureCarriesIteration) {
    auto g = normal_form_instance(prisoners_dilemma(), 0.1, 2);
    AcquisitionState s(g.spec, small_surrogate(), 2);
    int calls = 0;
    const PolicyStep failing = [&](AcquisitionState& st, std::optional<std::size_t> f) -> StepTrace {
        if (++calls == 3) throw std::runtime_error("boom");
        return ppr_ucb_step(st, f);
    };
    try {
        run_loop(s, g.oracle, 5, failing);
        FAIL() << "expected failure";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("iteration 3"), std::string::npos);
    }
}

TEST(GaussianBounds, WidthGrowsWithBeta) {
    auto g = random_game(2, 3, 0.5, 4);
    AcquisitionState s(g.spec, small_surrogate(), 4);
    s.observe(0, Eigen::Vector2d(0.3, -0.2));
    const auto a = gaussian_utility_bounds(s, 1.0);
    const auto b = gaussian_utility_bounds(s, 4.0);
    EXPECT_TRUE(((b.upper - b.lower).array() >= (a.upper - a.lower).array() - 1e-12).all());
    const auto z = gaussian_utility_bounds(s, 0.0);
    EXPECT_EQ(z.lower, z.upper);
    EXPECT_THROW(gaussian_utility_bounds(s, -1.0), ConfigError);
}

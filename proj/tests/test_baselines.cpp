#include <limits>
#include <map>

#include <gtest/gtest.h>

#include "pprucb/baselines.hpp"
#include "pprucb/games.hpp"

using namespace pprucb;

namespace {

SurrogateConfig surrogate(int D, double noise_var = 0.67) {
    SurrogateConfig cfg;
    cfg.num_features = D;
    cfg.kernel.noise_var = noise_var;
    return cfg;
}

// Observe every grid profile `reps` times with exact payoffs.
void saturate(AcquisitionState& s, UtilityOracle& oracle, int reps) {
    for (int r = 0; r < reps; ++r)
        for (std::size_t g = 0; g < s.universe().grid_size(); ++g)
            s.observe(g, oracle.eval(s.universe().profile(g)));
}

} // namespace

TEST(RandomPolicy, SinglePointGrid) {
    auto g = normal_form_instance(prisoners_dilemma(), 0.0, 1);
    GameSpec one(2, 1, g.spec.bounds(), {g.spec.grid()[2]});
    Rng rng(3);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(random_policy_step(one, rng), 0u);
}

TEST(RandomPolicy, UniformOverTenPoints) {
    const std::vector<Eigen::VectorXd> payoffs(10, Eigen::Vector2d::Zero());
    auto g = normal_form_instance(NormalFormGame({10, 1}, payoffs), 0.0, 1);
    ASSERT_EQ(g.spec.grid_size(), 10u);
    Rng rng(5);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 10000; ++i) ++counts[random_policy_step(g.spec, rng)];
    for (int c : counts) EXPECT_NEAR(c / 10000.0, 0.1, 0.01);
}

TEST(RandomPolicy, ReproducibleFromSeed) {
    auto g = normal_form_instance(matching_pennies(), 0.0, 1);
    Rng a(77), b(77);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(random_policy_step(g.spec, a), random_policy_step(g.spec, b));
}

TEST(PePolicy, InfiniteRelaxationPicksFirstProfile) {
    auto g = normal_form_instance(matching_pennies(), 0.3, 2);
    AcquisitionState s(g.spec, surrogate(32), 2);
    s.observe(3, Eigen::Vector2d(1.0, -1.0));
    BaselineConfig cfg;
    cfg.kind = BaselineKind::Pe;
    cfg.eps_relax = std::numeric_limits<double>::max();
    Rng rng(2);
    const auto freq = equilibrium_frequencies(s, 16, *cfg.eps_relax, rng);
    EXPECT_TRUE((freq.array() == 1.0).all());
    const auto tr = pe_policy_step(s, cfg, rng, std::nullopt);
    EXPECT_EQ(tr.chosen_id, 0u);
    EXPECT_EQ(tr.reported_id, 0u);
}

TEST(PePolicy, DominantStrategyGameFindsTruePne) {
    const auto game = prisoners_dilemma();
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto g = normal_form_instance(game, 0.0, seed);
        const auto truth = epsilon_star(g.oracle, g.spec);
        ASSERT_EQ(truth.minimizer_ids.size(), 1u);
        AcquisitionState s(g.spec, surrogate(16, 1e-4), seed);
        saturate(s, g.oracle, 3);
        BaselineConfig cfg;
        cfg.kind = BaselineKind::Pe;
        cfg.seed = seed;
        Rng rng = make_stream(seed, "policy");
        const auto tr = pe_policy_step(s, cfg, rng, std::nullopt);
        hits += tr.chosen_id == truth.minimizer_ids.front();
    }
    EXPECT_GE(hits, 95);
}

TEST(PePolicy, LowVarianceMatchesMeanGameIndicator) {
    const auto game = prisoners_dilemma();
    auto g = normal_form_instance(game, 0.0, 4);
    AcquisitionState s(g.spec, surrogate(16, 1e-6), 4);
    saturate(s, g.oracle, 5);
    const auto mean = gaussian_utility_bounds(s, 0.0);
    const Eigen::VectorXd worst = regret_table(mean.lower, s.universe(), 2).rowwise().maxCoeff();
    for (double eps : {0.0, 0.5, 2.5}) {
        Rng rng(9);
        const auto freq = equilibrium_frequencies(s, 64, eps + 0.05, rng);
        for (Eigen::Index i = 0; i < worst.size(); ++i) EXPECT_EQ(freq[i], worst[i] <= eps + 0.05 ? 1.0 : 0.0) << i;
    }
}

TEST(UcbPolicy, ZeroBetaIsMeanMinimax) {
    auto g = normal_form_instance(prisoners_dilemma(), 0.5, 6);
    AcquisitionState s(g.spec, surrogate(32), 6);
    s.observe(0, Eigen::Vector2d(3.0, 3.0));
    s.observe(3, Eigen::Vector2d(1.0, 1.0));
    BaselineConfig cfg;
    cfg.kind = BaselineKind::Ucb;
    cfg.beta = 0.0;
    const auto tr = ucb_policy_step(s, cfg, std::nullopt);
    EXPECT_EQ(tr.regret_lower, tr.regret_upper);
    EXPECT_EQ(tr.utility_lower, tr.utility_upper);
    const auto mean = gaussian_utility_bounds(s, 0.0);
    EXPECT_EQ(tr.reported_id, reported_profile(regret_table(mean.lower, s.universe(), 2)));
}

TEST(UcbPolicy, RegretWidthMonotoneInBeta) {
    auto g = normal_form_instance(matching_pennies(), 0.5, 8);
    AcquisitionState s(g.spec, surrogate(32), 8);
    s.observe(1, Eigen::Vector2d(-1.0, 1.0));
    RegretBounds prev = regret_bounds(gaussian_utility_bounds(s, 0.0), s.universe(), 2);
    for (double beta : {0.5, 1.0, 4.0, 9.0}) {
        const RegretBounds rb = regret_bounds(gaussian_utility_bounds(s, beta), s.universe(), 2);
        EXPECT_TRUE((rb.lower.array() <= prev.lower.array() + 1e-12).all());
        EXPECT_TRUE((rb.upper.array() >= prev.upper.array() - 1e-12).all());
        prev = rb;
    }
}

TEST(Baselines, EveryStepReturnsGridMember) {
    std::vector<Eigen::VectorXd> payoffs;
    for (int i = 0; i < 9; ++i) payoffs.push_back(Eigen::Vector2d(std::sin(i), std::cos(2 * i)));
    for (auto kind : {BaselineKind::Random, BaselineKind::Pe, BaselineKind::Ucb}) {
        auto g = normal_form_instance(NormalFormGame({3, 3}, payoffs), 0.8, 10);
        AcquisitionState s(g.spec, surrogate(32), 10);
        BaselineConfig cfg;
        cfg.kind = kind;
        cfg.mc_samples = 8;
        cfg.seed = 10;
        const auto r = run_loop(s, g.oracle, 15, make_baseline_policy(cfg));
        for (const auto& tr : r.trace) {
            EXPECT_LT(tr.reported_id, g.spec.grid_size()) << to_string(kind);
            EXPECT_TRUE(tr.chosen_id == tr.reported_id || tr.chosen_id == tr.exploring_id);
            if (kind != BaselineKind::Ucb) {
                EXPECT_LT(tr.chosen_id, g.spec.grid_size());
            }
        }
    }
}

TEST(Baselines, ConfigValidation) {
    BaselineConfig cfg;
    cfg.kind = BaselineKind::Pe;
    cfg.mc_samples = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.kind = BaselineKind::Ucb;
    cfg.beta = -1.0;
    EXPECT_THROW(make_baseline_policy(cfg), ConfigError);
    cfg = {};
    cfg.eps_relax = -0.1;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

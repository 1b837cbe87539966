#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "game.hpp"

namespace pprucb {

/// A finite game in table form; payoff(a) holds all players' utilities at joint action a.
class NormalFormGame {
public:
    NormalFormGame(std::vector<int> actions_per_player, std::vector<Eigen::VectorXd> payoffs)
        : actions_(std::move(actions_per_player)), payoffs_(std::move(payoffs)) {
        if (actions_.size() < 2) throw ConfigError("NormalFormGame: need at least 2 players");
        std::size_t total = 1;
        for (int k : actions_) {
            if (k < 1) throw ConfigError("NormalFormGame: every player needs >= 1 action");
            total *= static_cast<std::size_t>(k);
        }
        if (payoffs_.size() != total) throw ConfigError("NormalFormGame: payoff table size mismatch");
        for (const auto& p : payoffs_)
            if (p.size() != num_players()) throw ConfigError("NormalFormGame: payoff vector length mismatch");
    }

    int num_players() const { return static_cast<int>(actions_.size()); }
    const std::vector<int>& actions_per_player() const { return actions_; }
    std::size_t num_profiles() const { return payoffs_.size(); }

    /// Row-major index, player 0 most significant.
    std::size_t linear_index(const std::vector<int>& a) const {
        std::size_t idx = 0;
        for (std::size_t n = 0; n < actions_.size(); ++n) {
            if (a[n] < 0 || a[n] >= actions_[n]) throw ConstraintViolation("NormalFormGame: action out of range");
            idx = idx * static_cast<std::size_t>(actions_[n]) + static_cast<std::size_t>(a[n]);
        }
        return idx;
    }

    std::vector<int> unravel(std::size_t idx) const {
        std::vector<int> a(actions_.size());
        for (std::size_t n = actions_.size(); n-- > 0;) {
            a[n] = static_cast<int>(idx % static_cast<std::size_t>(actions_[n]));
            idx /= static_cast<std::size_t>(actions_[n]);
        }
        return a;
    }

    const Eigen::VectorXd& payoff(const std::vector<int>& a) const { return payoffs_[linear_index(a)]; }
    const Eigen::VectorXd& payoff(std::size_t idx) const { return payoffs_[idx]; }

    /// Profile as an N x 1 matrix of action indices.
    ActionProfile profile(const std::vector<int>& a) const {
        Eigen::MatrixXd v(num_players(), 1);
        for (int n = 0; n < num_players(); ++n) v(n, 0) = a[n];
        return ActionProfile(v);
    }

    ActionBounds bounds() const {
        ActionBounds b{Eigen::MatrixXd::Zero(num_players(), 1), Eigen::MatrixXd(num_players(), 1), std::nullopt};
        for (int n = 0; n < num_players(); ++n) b.high(n, 0) = actions_[n] - 1;
        return b;
    }

private:
    std::vector<int> actions_;
    std::vector<Eigen::VectorXd> payoffs_;
};

struct GameInstance {
    UtilityOracle oracle;
    GameSpec spec;
};

inline GameInstance normal_form_instance(const NormalFormGame& game, double noise_std, std::uint64_t noise_seed) {
    auto shared = std::make_shared<const NormalFormGame>(game);
    std::vector<ActionProfile> grid;
    for (std::size_t i = 0; i < game.num_profiles(); ++i) grid.push_back(game.profile(game.unravel(i)));
    auto eval = [shared](const ActionProfile& x) {
        std::vector<int> a(static_cast<std::size_t>(x.num_players()));
        for (int n = 0; n < x.num_players(); ++n) a[n] = static_cast<int>(std::lround(x.values(n, 0)));
        return Eigen::VectorXd(shared->payoff(a));
    };
    UtilityOracle oracle(game.num_players(), eval, game.bounds(), noise_std, noise_seed);
    return {std::move(oracle), GameSpec(game.num_players(), 1, game.bounds(), std::move(grid))};
}

/// 2x2 prisoner's dilemma with T = 5, R = 3, P = 1, S = 0; action 0 cooperates, 1 defects.
inline NormalFormGame prisoners_dilemma() {
    auto v = [](double a, double b) { return Eigen::Vector2d(a, b).eval(); };
    return NormalFormGame({2, 2}, {v(3, 3), v(0, 5), v(5, 0), v(1, 1)});
}

/// Matching pennies: player 0 wins +1 on a match, player 1 on a mismatch.
inline NormalFormGame matching_pennies() {
    auto v = [](double a, double b) { return Eigen::Vector2d(a, b).eval(); };
    return NormalFormGame({2, 2}, {v(1, -1), v(-1, 1), v(-1, 1), v(1, -1)});
}

/// Utilities tabulated on an explicit profile list (the grid plus any deviation profiles).
struct TabulatedGame {
    int num_players = 2;
    int per_player_dim = 1;
    ActionBounds bounds;
    std::vector<ActionProfile> grid;
    std::vector<ActionProfile> extra_profiles;
    std::vector<Eigen::VectorXd> utilities;  // grid first, then extra_profiles

    /// Every profile the regret computations of `spec` need, with the oracle's true utilities.
    static TabulatedGame from(const UtilityOracle& oracle, const GameSpec& spec) {
        TabulatedGame t;
        t.num_players = spec.num_players();
        t.per_player_dim = spec.per_player_dim();
        t.bounds = spec.bounds();
        ProfileUniverse universe(spec);
        for (std::size_t i = 0; i < universe.size(); ++i) {
            (i < universe.grid_size() ? t.grid : t.extra_profiles).push_back(universe.profile(i));
            t.utilities.push_back(oracle.eval(universe.profile(i)));
        }
        return t;
    }
};

inline GameInstance tabulated_instance(const TabulatedGame& game, double noise_std, std::uint64_t noise_seed) {
    if (game.utilities.size() != game.grid.size() + game.extra_profiles.size())
        throw ConfigError("TabulatedGame: utilities must cover grid and extra profiles");
    auto table = std::make_shared<std::map<std::vector<double>, Eigen::VectorXd>>();
    for (std::size_t i = 0; i < game.utilities.size(); ++i) {
        const ActionProfile& x = i < game.grid.size() ? game.grid[i] : game.extra_profiles[i - game.grid.size()];
        if (game.utilities[i].size() != game.num_players) throw ConfigError("TabulatedGame: utility length mismatch");
        (*table)[profile_key(x)] = game.utilities[i];
    }
    auto eval = [table](const ActionProfile& x) {
        auto it = table->find(profile_key(x));
        if (it == table->end()) throw PreconditionError("TabulatedGame: profile not tabulated");
        return it->second;
    };
    UtilityOracle oracle(game.num_players, eval, game.bounds, noise_std, noise_seed);
    return {std::move(oracle), GameSpec(game.num_players, game.per_player_dim, game.bounds, game.grid)};
}

/// Smooth best-response game on [0,1]^N with a strict pure equilibrium at `equilibrium`:
///   u_n(x) = scale * (offset - (x_n - t_n(x_-n))^2),
///   t_n(x_-n) = e_n + s_n * coupling * (mean_{-n}(x) - mean_{-n}(e)),  s_n = +1 for even n, -1 odd.
struct SyntheticGameConfig {
    int players = 2;
    int levels = 5;
    double scale = 32.0;
    double coupling = 0.5;
    double offset = 1.0;
    std::vector<double> equilibrium = {0.75, 0.25};
};

inline GameInstance synthetic_instance(const SyntheticGameConfig& cfg, double noise_std, std::uint64_t noise_seed) {
    if (cfg.players < 2 || cfg.levels < 2) throw ConfigError("synthetic game: need >= 2 players and >= 2 levels");
    if (static_cast<int>(cfg.equilibrium.size()) != cfg.players)
        throw ConfigError("synthetic game: equilibrium length must equal players");
    const int N = cfg.players;
    Eigen::VectorXd eq(N);
    for (int n = 0; n < N; ++n) eq[n] = cfg.equilibrium[static_cast<std::size_t>(n)];
    auto eval = [cfg, eq, N](const ActionProfile& x) {
        Eigen::VectorXd u(N);
        const double total = x.values.col(0).sum();
        const double eq_total = eq.sum();
        for (int n = 0; n < N; ++n) {
            const double others = (total - x.values(n, 0)) / (N - 1);
            const double eq_others = (eq_total - eq[n]) / (N - 1);
            const double sign = n % 2 == 0 ? 1.0 : -1.0;
            const double target = eq[n] + sign * cfg.coupling * (others - eq_others);
            const double d = x.values(n, 0) - target;
            u[n] = cfg.scale * (cfg.offset - d * d);
        }
        return u;
    };
    ActionBounds bounds = ActionBounds::uniform(N, 1, 0.0, 1.0);
    std::vector<ActionProfile> grid;
    std::vector<int> idx(static_cast<std::size_t>(N), 0);
    while (true) {
        Eigen::MatrixXd v(N, 1);
        for (int n = 0; n < N; ++n) v(n, 0) = static_cast<double>(idx[n]) / (cfg.levels - 1);
        grid.emplace_back(v);
        int k = N - 1;
        while (k >= 0 && ++idx[k] == cfg.levels) idx[k--] = 0;
        if (k < 0) break;
    }
    UtilityOracle oracle(N, eval, bounds, noise_std, noise_seed);
    return {std::move(oracle), GameSpec(N, 1, bounds, std::move(grid))};
}

} // namespace pprucb

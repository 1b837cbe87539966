#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "rng.hpp"

namespace pprucb {

/// Joint action x = [x_1; ...; x_N], row n is player n's action.
struct ActionProfile {
    Eigen::MatrixXd values;

    ActionProfile() = default;
    explicit ActionProfile(Eigen::MatrixXd v) : values(std::move(v)) {}

    int num_players() const { return static_cast<int>(values.rows()); }
    int per_player_dim() const { return static_cast<int>(values.cols()); }

    Eigen::RowVectorXd action(int player) const { return values.row(player); }

    /// Row-major flattening, the input layout for surrogates.
    Eigen::VectorXd flatten() const {
        Eigen::VectorXd out(values.size());
        Eigen::Index k = 0;
        for (Eigen::Index r = 0; r < values.rows(); ++r)
            for (Eigen::Index c = 0; c < values.cols(); ++c) out[k++] = values(r, c);
        return out;
    }

    ActionProfile with_action(int player, const Eigen::RowVectorXd& a) const {
        ActionProfile copy = *this;
        copy.values.row(player) = a;
        return copy;
    }

    friend bool operator==(const ActionProfile& a, const ActionProfile& b) {
        return a.values.rows() == b.values.rows() && a.values.cols() == b.values.cols() &&
               a.values == b.values;
    }
};

/// Lexicographic key used to deduplicate profiles exactly.
inline std::vector<double> profile_key(const ActionProfile& x) {
    const Eigen::VectorXd f = x.flatten();
    return {f.data(), f.data() + f.size()};
}

struct ActionBounds {
    Eigen::MatrixXd low;
    Eigen::MatrixXd high;
    std::optional<double> row_cap;

    static ActionBounds uniform(int players, int dim, double lo, double hi,
                                std::optional<double> cap = std::nullopt) {
        return {Eigen::MatrixXd::Constant(players, dim, lo),
                Eigen::MatrixXd::Constant(players, dim, hi), cap};
    }

    std::optional<std::string> violation(const ActionProfile& x, double tol = 1e-9) const {
        if (x.values.rows() != low.rows() || x.values.cols() != low.cols())
            return "profile shape mismatch";
        for (Eigen::Index r = 0; r < low.rows(); ++r) {
            for (Eigen::Index c = 0; c < low.cols(); ++c) {
                const double v = x.values(r, c);
                if (!std::isfinite(v) || v < low(r, c) - tol || v > high(r, c) + tol)
                    return "entry (" + std::to_string(r) + "," + std::to_string(c) +
                           ") outside bounds";
            }
            if (row_cap && x.values.row(r).sum() > *row_cap + tol)
                return "player " + std::to_string(r) + " exceeds cap";
        }
        return std::nullopt;
    }

    void check(const ActionProfile& x) const {
        if (auto why = violation(x)) throw ConstraintViolation(*why);
    }

    /// Affine map of every coordinate onto [0, 1]; constant coordinates map to 0.
    Eigen::VectorXd normalize(const ActionProfile& x) const {
        Eigen::VectorXd f = x.flatten();
        Eigen::Index k = 0;
        for (Eigen::Index r = 0; r < low.rows(); ++r)
            for (Eigen::Index c = 0; c < low.cols(); ++c, ++k) {
                const double span = high(r, c) - low(r, c);
                f[k] = span > 0.0 ? (f[k] - low(r, c)) / span : 0.0;
            }
        return f;
    }
};

/// Finite game description: all argmin/argmax searches run over `grid`.
class GameSpec {
public:
    GameSpec(int num_players, int per_player_dim, ActionBounds bounds,
             std::vector<ActionProfile> grid)
        : num_players_(num_players), per_player_dim_(per_player_dim),
          bounds_(std::move(bounds)), grid_(std::move(grid)) {
        if (num_players_ < 2) throw ConfigError("GameSpec: need at least 2 players");
        if (per_player_dim_ < 1) throw ConfigError("GameSpec: per-player dimension must be >= 1");
        if (grid_.empty()) throw ConfigError("GameSpec: candidate grid is empty");
        for (std::size_t g = 0; g < grid_.size(); ++g) {
            if (auto why = bounds_.violation(grid_[g]))
                throw ConfigError("GameSpec: grid point " + std::to_string(g) + ": " + *why);
        }
        build_deviations();
    }

    int num_players() const { return num_players_; }
    int per_player_dim() const { return per_player_dim_; }
    int input_dim() const { return num_players_ * per_player_dim_; }
    const ActionBounds& bounds() const { return bounds_; }
    const std::vector<ActionProfile>& grid() const { return grid_; }
    std::size_t grid_size() const { return grid_.size(); }

    /// Distinct actions of `player` in the grid, in order of first appearance.
    const std::vector<Eigen::RowVectorXd>& deviation_actions(int player) const {
        return actions_[player];
    }

    /// Index into deviation_actions(player) of a given action, if present.
    std::optional<std::size_t> find_action(int player, const Eigen::RowVectorXd& a,
                                           double tol = 1e-12) const {
        const auto& acts = actions_[player];
        for (std::size_t i = 0; i < acts.size(); ++i)
            if (acts[i].size() == a.size() && (acts[i] - a).cwiseAbs().maxCoeff() <= tol) return i;
        return std::nullopt;
    }

    /// Own action index of every player at grid point g.
    std::size_t own_action(std::size_t g, int player) const { return own_[g][player]; }

private:
    void build_deviations() {
        actions_.assign(num_players_, {});
        own_.assign(grid_.size(), std::vector<std::size_t>(num_players_));
        for (int n = 0; n < num_players_; ++n) {
            std::map<std::vector<double>, std::size_t> seen;
            for (std::size_t g = 0; g < grid_.size(); ++g) {
                Eigen::RowVectorXd a = grid_[g].action(n);
                std::vector<double> key(a.data(), a.data() + a.size());
                auto [it, inserted] = seen.emplace(key, actions_[n].size());
                if (inserted) actions_[n].push_back(a);
                own_[g][n] = it->second;
            }
        }
    }

    int num_players_;
    int per_player_dim_;
    ActionBounds bounds_;
    std::vector<ActionProfile> grid_;
    std::vector<std::vector<Eigen::RowVectorXd>> actions_;
    std::vector<std::vector<std::size_t>> own_;
};

/// Every profile any regret computation touches: the grid (ids 0..G-1) followed by
/// off-grid unilateral deviations, each stored once.
class ProfileUniverse {
public:
    explicit ProfileUniverse(const GameSpec& spec) {
        const std::size_t G = spec.grid_size();
        const int N = spec.num_players();
        std::map<std::vector<double>, std::size_t> index;
        for (std::size_t g = 0; g < G; ++g) {
            index.emplace(profile_key(spec.grid()[g]), profiles_.size());
            profiles_.push_back(spec.grid()[g]);
        }
        deviation_.assign(G, std::vector<std::vector<std::size_t>>(N));
        for (std::size_t g = 0; g < G; ++g) {
            for (int n = 0; n < N; ++n) {
                const auto& acts = spec.deviation_actions(n);
                auto& ids = deviation_[g][n];
                ids.reserve(acts.size());
                for (const auto& a : acts) {
                    ActionProfile x = spec.grid()[g].with_action(n, a);
                    auto [it, inserted] = index.emplace(profile_key(x), profiles_.size());
                    if (inserted) profiles_.push_back(std::move(x));
                    ids.push_back(it->second);
                }
            }
        }
        grid_size_ = G;
    }

    std::size_t size() const { return profiles_.size(); }
    std::size_t grid_size() const { return grid_size_; }
    const ActionProfile& profile(std::size_t id) const { return profiles_[id]; }
    const std::vector<ActionProfile>& profiles() const { return profiles_; }

    /// Universe ids of (grid point g with player n's action replaced by each deviation).
    const std::vector<std::size_t>& deviations(std::size_t g, int player) const {
        return deviation_[g][player];
    }

private:
    std::vector<ActionProfile> profiles_;
    std::vector<std::vector<std::vector<std::size_t>>> deviation_;
    std::size_t grid_size_ = 0;
};

/// Black-box utilities plus a seeded Gaussian observation channel.
class UtilityOracle {
public:
    using EvalFn = std::function<Eigen::VectorXd(const ActionProfile&)>;

    UtilityOracle(int num_players, EvalFn eval, ActionBounds bounds, double noise_std,
                  std::uint64_t noise_seed)
        : num_players_(num_players), eval_(std::move(eval)), bounds_(std::move(bounds)),
          noise_std_(noise_std), rng_(noise_seed) {
        if (!(noise_std_ >= 0.0)) throw ConfigError("UtilityOracle: noise_std must be >= 0");
    }

    int num_players() const { return num_players_; }
    double noise_std() const { return noise_std_; }
    const ActionBounds& bounds() const { return bounds_; }

    /// True utilities u(x); deterministic.
    Eigen::VectorXd eval(const ActionProfile& x) const {
        bounds_.check(x);
        return eval_(x);
    }

    /// u(x) + z, z ~ N(0, noise_std^2 I); advances the noise stream.
    Eigen::VectorXd noisy_observe(const ActionProfile& x) {
        Eigen::VectorXd y = eval(x);
        if (noise_std_ > 0.0) {
            std::normal_distribution<double> z(0.0, noise_std_);
            for (Eigen::Index n = 0; n < y.size(); ++n) y[n] += z(rng_);
        }
        return y;
    }

    /// Fresh oracle sharing the utility function, with a new noise stream.
    UtilityOracle reseeded(std::uint64_t noise_seed) const {
        return UtilityOracle(num_players_, eval_, bounds_, noise_std_, noise_seed);
    }

private:
    int num_players_;
    EvalFn eval_;
    ActionBounds bounds_;
    double noise_std_;
    Rng rng_;
};

inline Eigen::VectorXd noisy_observe(UtilityOracle& oracle, const ActionProfile& x) {
    return oracle.noisy_observe(x);
}

/// Time-ordered queries and the per-player noisy values, one column per query.
class ObservationDataset {
public:
    explicit ObservationDataset(int num_players) : obs_(num_players, 0) {}

    void append(const ActionProfile& x, const Eigen::VectorXd& y) {
        if (y.size() != obs_.rows())
            throw PreconditionError("ObservationDataset: observation length mismatch");
        profiles_.push_back(x);
        obs_.conservativeResize(Eigen::NoChange, obs_.cols() + 1);
        obs_.col(obs_.cols() - 1) = y;
    }

    std::size_t size() const { return profiles_.size(); }
    int num_players() const { return static_cast<int>(obs_.rows()); }
    const std::vector<ActionProfile>& profiles() const { return profiles_; }
    /// N x t matrix.
    const Eigen::MatrixXd& observations() const { return obs_; }
    Eigen::VectorXd player_observations(int n) const { return obs_.row(n).transpose(); }

private:
    std::vector<ActionProfile> profiles_;
    Eigen::MatrixXd obs_;
};

/// max over deviations x'_n of u_n(x'_n, x_-n) - u_n(x); the deviation set is the
/// projection of the grid onto player n's coordinates.
inline double true_regret(const UtilityOracle& oracle, const GameSpec& spec,
                          const ActionProfile& x, int player) {
    if (player < 0 || player >= spec.num_players())
        throw PreconditionError("true_regret: player index out of range");
    if (!spec.find_action(player, x.action(player)))
        throw PreconditionError("true_regret: player's action is not in its deviation set");
    const double base = oracle.eval(x)[player];
    double best = base;
    for (const auto& a : spec.deviation_actions(player))
        best = std::max(best, oracle.eval(x.with_action(player, a))[player]);
    return best - base;
}

inline bool is_epsilon_pne(const UtilityOracle& oracle, const GameSpec& spec,
                           const ActionProfile& x, double eps) {
    if (!(eps >= 0.0)) throw std::invalid_argument("is_epsilon_pne: eps must be >= 0");
    for (int n = 0; n < spec.num_players(); ++n)
        if (true_regret(oracle, spec, x, n) > eps) return false;
    return true;
}

struct EquilibriumReport {
    double epsilon_star = 0.0;
    std::vector<std::size_t> minimizer_ids;   // grid indices attaining epsilon_star
    std::vector<ActionProfile> epsilon_pne_profiles;
    Eigen::VectorXd per_profile_max_regret;   // over the grid
};

/// True utilities at every universe profile (rows = profile id, cols = player).
inline Eigen::MatrixXd tabulate_utilities(const UtilityOracle& oracle,
                                          const ProfileUniverse& universe) {
    Eigen::MatrixXd table(universe.size(), oracle.num_players());
    for (std::size_t i = 0; i < universe.size(); ++i)
        table.row(i) = oracle.eval(universe.profile(i)).transpose();
    return table;
}

/// Per grid point, per player regret from a utility table over the universe.
inline Eigen::MatrixXd regret_table(const Eigen::MatrixXd& utilities,
                                    const ProfileUniverse& universe, int num_players) {
    Eigen::MatrixXd regret(universe.grid_size(), num_players);
    for (std::size_t g = 0; g < universe.grid_size(); ++g) {
        for (int n = 0; n < num_players; ++n) {
            const double base = utilities(g, n);
            double best = base;
            for (std::size_t id : universe.deviations(g, n)) best = std::max(best, utilities(id, n));
            regret(g, n) = best - base;
        }
    }
    return regret;
}

inline EquilibriumReport epsilon_star_from_regrets(const Eigen::MatrixXd& regrets,
                                                   const GameSpec& spec) {
    EquilibriumReport report;
    report.per_profile_max_regret = regrets.rowwise().maxCoeff();
    report.epsilon_star = report.per_profile_max_regret.minCoeff();
    for (Eigen::Index g = 0; g < report.per_profile_max_regret.size(); ++g) {
        if (report.per_profile_max_regret[g] == report.epsilon_star) {
            report.minimizer_ids.push_back(static_cast<std::size_t>(g));
            report.epsilon_pne_profiles.push_back(spec.grid()[g]);
        }
    }
    return report;
}

/// Exhaustive min over the grid of max_n regret.
inline EquilibriumReport epsilon_star(const UtilityOracle& oracle, const GameSpec& spec) {
    ProfileUniverse universe(spec);
    return epsilon_star_from_regrets(
        regret_table(tabulate_utilities(oracle, universe), universe, spec.num_players()), spec);
}

} // namespace pprucb

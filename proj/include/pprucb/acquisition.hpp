#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "confidence.hpp"
#include "errors.hpp"
#include "game.hpp"
#include "grid.hpp"
#include "rng.hpp"
#include "surrogate.hpp"

namespace pprucb {

struct SurrogateConfig {
    KernelConfig kernel;
    int num_features = 1024;
    double delta = 0.05;

    void validate() const {
        kernel.validate();
        if (num_features < 1) throw ConfigError("SurrogateConfig: num_features must be >= 1");
        if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("SurrogateConfig: delta must be in (0, 1]");
    }
};

/// Everything a policy sees: the grid, every deviation profile, one shared feature map and
/// the per-player posteriors over the common query history.
class AcquisitionState {
public:
    AcquisitionState(const GameSpec& spec, const SurrogateConfig& cfg, std::uint64_t seed)
        : spec_(&spec), cfg_(cfg), universe_(spec),
          map_(make_map(spec, cfg, seed)),
          posterior_(cfg.num_features, spec.num_players(), cfg.kernel.noise_var),
          dataset_(spec.num_players()) {
        cfg_.validate();
        features_.resize(static_cast<Eigen::Index>(universe_.size()), map_.dim());
        for (std::size_t i = 0; i < universe_.size(); ++i)
            features_.row(static_cast<Eigen::Index>(i)) =
                map_(spec.bounds().normalize(universe_.profile(i))).transpose();
        feature_sq_ = features_.rowwise().squaredNorm();
        kernel_rows_.resize(features_.rows(), 0);
        refresh();
    }

    const GameSpec& spec() const { return *spec_; }
    const SurrogateConfig& config() const { return cfg_; }
    const ProfileUniverse& universe() const { return universe_; }
    const RffFeatureMap& feature_map() const { return map_; }
    const SharedFeaturePosterior& posterior() const { return posterior_; }
    const ObservationDataset& dataset() const { return dataset_; }
    std::size_t iteration() const { return dataset_.size(); }
    int num_players() const { return spec_->num_players(); }

    const SpectralGeometry& geometry() const { return geometry_; }
    const ProjectedFeature& projected(std::size_t id) const { return projected_[id]; }
    /// RFF features of every universe profile (rows).
    const Eigen::MatrixXd& features() const { return features_; }
    IntervalParams interval_params() const {
        return {cfg_.delta, prior_ball_radius(cfg_.num_features, cfg_.delta)};
    }

    /// Shared posterior variance sigma_t^2(x) at a universe profile.
    double variance(std::size_t id) const {
        return posterior_.variance_from_row(kernel_rows_.row(static_cast<Eigen::Index>(id)).transpose(),
                                            feature_sq_[static_cast<Eigen::Index>(id)]);
    }

    Prediction predict(std::size_t id, int player) const {
        return geometry_prediction(geometry_, player, projected_[id]);
    }

    /// Append the observation of universe profile `id` to every player's dataset and refit.
    void observe(std::size_t id, const Eigen::VectorXd& y) {
        const Eigen::VectorXd psi = features_.row(static_cast<Eigen::Index>(id)).transpose();
        dataset_.append(universe_.profile(id), y);
        posterior_.append(psi, y);
        kernel_rows_.conservativeResize(Eigen::NoChange, kernel_rows_.cols() + 1);
        kernel_rows_.col(kernel_rows_.cols() - 1) = features_ * psi;
        refresh();
    }

    /// Query ids in time order.
    const std::vector<std::size_t>& history() const { return history_; }
    void record(std::size_t id) { history_.push_back(id); }

private:
    static RffFeatureMap make_map(const GameSpec& spec, const SurrogateConfig& cfg, std::uint64_t seed) {
        Rng rng = make_stream(seed, "rff");
        return RffFeatureMap::sample(spec.input_dim(), cfg.num_features, cfg.kernel.lengthscale, rng);
    }

    void refresh() {
        geometry_ = geometry_from(posterior_);
        projected_.resize(universe_.size());
        for (std::size_t i = 0; i < universe_.size(); ++i)
            projected_[i] = project_feature(posterior_, kernel_rows_.row(static_cast<Eigen::Index>(i)).transpose(),
                                            feature_sq_[static_cast<Eigen::Index>(i)]);
    }

    const GameSpec* spec_;
    SurrogateConfig cfg_;
    ProfileUniverse universe_;
    RffFeatureMap map_;
    SharedFeaturePosterior posterior_;
    ObservationDataset dataset_;
    Eigen::MatrixXd features_;     // universe x D
    Eigen::VectorXd feature_sq_;
    Eigen::MatrixXd kernel_rows_;  // universe x t, entries psi(x_u)^T psi(x_s)
    SpectralGeometry geometry_;
    std::vector<ProjectedFeature> projected_;
    std::vector<std::size_t> history_;
};

/// Utility bounds at every universe profile, per player.
struct UtilityBounds {
    Eigen::MatrixXd lower;  // universe x N
    Eigen::MatrixXd upper;
    IntervalFlag flag = IntervalFlag::None;
};

inline UtilityBounds ppr_utility_bounds(const AcquisitionState& s) {
    const auto U = static_cast<Eigen::Index>(s.universe().size());
    const int N = s.num_players();
    UtilityBounds out{Eigen::MatrixXd(U, N), Eigen::MatrixXd(U, N), IntervalFlag::None};
    const IntervalParams params = s.interval_params();
    for (Eigen::Index u = 0; u < U; ++u) {
        for (int n = 0; n < N; ++n) {
            const ValueInterval iv = utility_interval(s.geometry(), n, s.projected(static_cast<std::size_t>(u)), params);
            out.lower(u, n) = iv.lower;
            out.upper(u, n) = iv.upper;
            out.flag = combine(out.flag, iv.flag);
        }
    }
    return out;
}

/// mean +/- sqrt(beta) * std from the same posterior.
inline UtilityBounds gaussian_utility_bounds(const AcquisitionState& s, double beta) {
    if (!(beta >= 0.0)) throw ConfigError("gaussian_utility_bounds: beta must be >= 0");
    const auto U = static_cast<Eigen::Index>(s.universe().size());
    const int N = s.num_players();
    UtilityBounds out{Eigen::MatrixXd(U, N), Eigen::MatrixXd(U, N), IntervalFlag::Gaussian};
    for (Eigen::Index u = 0; u < U; ++u) {
        for (int n = 0; n < N; ++n) {
            const Prediction p = s.predict(static_cast<std::size_t>(u), n);
            const double h = std::sqrt(beta * p.variance);
            out.lower(u, n) = p.mean - h;
            out.upper(u, n) = p.mean + h;
        }
    }
    return out;
}

struct RegretBounds {
    Eigen::MatrixXd lower;  // grid x N
    Eigen::MatrixXd upper;
};

inline RegretBounds regret_bounds(const UtilityBounds& ub, const ProfileUniverse& universe, int num_players) {
    const auto G = static_cast<Eigen::Index>(universe.grid_size());
    RegretBounds rb{Eigen::MatrixXd(G, num_players), Eigen::MatrixXd(G, num_players)};
    for (Eigen::Index g = 0; g < G; ++g) {
        for (int n = 0; n < num_players; ++n) {
            double best_lo = -std::numeric_limits<double>::infinity();
            double best_up = -std::numeric_limits<double>::infinity();
            for (std::size_t id : universe.deviations(static_cast<std::size_t>(g), n)) {
                best_lo = std::max(best_lo, ub.lower(static_cast<Eigen::Index>(id), n));
                best_up = std::max(best_up, ub.upper(static_cast<Eigen::Index>(id), n));
            }
            rb.lower(g, n) = best_lo - ub.upper(g, n);
            rb.upper(g, n) = best_up - ub.lower(g, n);
        }
    }
    return rb;
}

/// argmin over rows of the row maximum; lowest index on ties.
inline std::size_t reported_profile(const Eigen::MatrixXd& regret_lower) {
    if (regret_lower.rows() == 0) throw PreconditionError("reported_profile: empty grid");
    std::size_t best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (Eigen::Index g = 0; g < regret_lower.rows(); ++g) {
        const double v = regret_lower.row(g).maxCoeff();
        if (v < best_v) {
            best_v = v;
            best = static_cast<std::size_t>(g);
        }
    }
    return best;
}

/// argmax of the regret upper bounds; lowest player on ties.
inline int worst_player(const Eigen::VectorXd& regret_upper) {
    if (regret_upper.size() == 0) throw PreconditionError("worst_player: no players");
    int best = 0;
    for (Eigen::Index n = 1; n < regret_upper.size(); ++n)
        if (regret_upper[n] > regret_upper[best]) best = static_cast<int>(n);
    return best;
}

/// Index of the deviation with the largest utility upper bound; lowest index on ties.
inline std::size_t exploring_choice(const Eigen::VectorXd& deviation_upper) {
    if (deviation_upper.size() == 0) throw PreconditionError("exploring_choice: empty deviation set");
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < deviation_upper.size(); ++i)
        if (deviation_upper[i] > deviation_upper[best]) best = i;
    return static_cast<std::size_t>(best);
}

/// True when the exploring profile should be queried instead of the reported one.
inline bool prefer_exploring(double var_reported, double var_exploring) { return var_exploring > var_reported; }

struct StepTrace {
    std::size_t reported_id = 0;   // grid index
    int worst_player = -1;         // -1 on the initialization step
    std::size_t exploring_id = 0;  // universe id
    std::size_t chosen_id = 0;     // universe id
    double var_reported = 0.0;
    double var_exploring = 0.0;
    Eigen::VectorXd regret_lower;  // at the reported profile, per player
    Eigen::VectorXd regret_upper;
    Eigen::VectorXd utility_lower;
    Eigen::VectorXd utility_upper;
    IntervalFlag flag = IntervalFlag::None;
    Eigen::VectorXd observation;
};

/// Reported/exploring/chosen selection from utility bounds. With `forced`, the reported
/// profile is fixed and also queried (initialization step).
inline StepTrace confidence_bound_step(const AcquisitionState& s, const UtilityBounds& ub,
                                       std::optional<std::size_t> forced = std::nullopt) {
    const int N = s.num_players();
    const RegretBounds rb = regret_bounds(ub, s.universe(), N);
    StepTrace tr;
    tr.flag = ub.flag;
    tr.reported_id = forced ? *forced : reported_profile(rb.lower);
    const auto r = static_cast<Eigen::Index>(tr.reported_id);
    tr.regret_lower = rb.lower.row(r).transpose();
    tr.regret_upper = rb.upper.row(r).transpose();
    tr.utility_lower = ub.lower.row(r).transpose();
    tr.utility_upper = ub.upper.row(r).transpose();
    tr.var_reported = s.variance(tr.reported_id);
    if (forced) {
        tr.exploring_id = tr.chosen_id = tr.reported_id;
        tr.var_exploring = tr.var_reported;
        return tr;
    }
    tr.worst_player = worst_player(tr.regret_upper);
    const auto& devs = s.universe().deviations(tr.reported_id, tr.worst_player);
    Eigen::VectorXd dev_upper(static_cast<Eigen::Index>(devs.size()));
    for (std::size_t i = 0; i < devs.size(); ++i)
        dev_upper[static_cast<Eigen::Index>(i)] = ub.upper(static_cast<Eigen::Index>(devs[i]), tr.worst_player);
    tr.exploring_id = devs[exploring_choice(dev_upper)];
    tr.var_exploring = s.variance(tr.exploring_id);
    tr.chosen_id = prefer_exploring(tr.var_reported, tr.var_exploring) ? tr.exploring_id : tr.reported_id;
    return tr;
}

/// A policy maps the current state (and an optional forced first profile) to a step.
using PolicyStep = std::function<StepTrace(AcquisitionState&, std::optional<std::size_t>)>;

struct RunResult {
    ActionProfile final_profile;
    std::size_t final_id = 0;
    std::size_t initial_id = 0;
    std::vector<StepTrace> trace;
};

/// Sequential loop: decide, query the oracle, append to every player's data, refit.
/// The first query is the grid point nearest the equal allocation; x* = x_T.
inline RunResult run_loop(AcquisitionState& state, UtilityOracle& oracle, int T, const PolicyStep& step,
                          const std::function<void(const StepTrace&)>& on_step = {}) {
    if (T < 0) throw ConfigError("run_loop: T must be >= 0");
    RunResult out;
    out.initial_id = equal_allocation_index(state.spec());
    out.final_id = out.initial_id;
    for (int t = 0; t < T; ++t) {
        StepTrace tr;
        try {
            tr = step(state, t == 0 ? std::optional<std::size_t>(out.initial_id) : std::nullopt);
            tr.observation = oracle.noisy_observe(state.universe().profile(tr.chosen_id));
        } catch (const std::exception& e) {
            throw std::runtime_error("iteration " + std::to_string(t + 1) + ": " + e.what());
        }
        state.observe(tr.chosen_id, tr.observation);
        state.record(tr.chosen_id);
        out.final_id = tr.chosen_id;
        if (on_step) on_step(tr);
        out.trace.push_back(std::move(tr));
    }
    out.final_profile = state.universe().profile(out.final_id);
    return out;
}

inline StepTrace ppr_ucb_step(AcquisitionState& s, std::optional<std::size_t> forced) {
    return confidence_bound_step(s, ppr_utility_bounds(s), forced);
}

struct PprUcbConfig {
    int T = 200;
    SurrogateConfig surrogate;
    std::uint64_t seed = 0;
};

/// Runs the PPR-UCB loop on a fresh state; returns x_T and the full trace.
inline RunResult ppr_ucb_run(UtilityOracle& oracle, const GameSpec& spec, const PprUcbConfig& cfg) {
    AcquisitionState state(spec, cfg.surrogate, cfg.seed);
    return run_loop(state, oracle, cfg.T, ppr_ucb_step);
}

} // namespace pprucb

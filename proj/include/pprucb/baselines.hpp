#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "acquisition.hpp"
#include "errors.hpp"
#include "game.hpp"
#include "rng.hpp"

namespace pprucb {

enum class BaselineKind { Random, Pe, Ucb };

inline std::string_view to_string(BaselineKind k) {
    switch (k) {
    case BaselineKind::Random: return "random";
    case BaselineKind::Pe: return "pe-style";
    case BaselineKind::Ucb: return "ucb-style";
    }
    return "random";
}

struct BaselineConfig {
    BaselineKind kind = BaselineKind::Random;
    int mc_samples = 32;
    double beta = 4.0;
    std::optional<double> eps_relax;  // unset: running epsilon* of the posterior-mean game
    std::uint64_t seed = 0;

    void validate() const {
        if (kind == BaselineKind::Pe && mc_samples < 1) throw ConfigError("BaselineConfig: mc_samples must be >= 1");
        if (kind == BaselineKind::Ucb && !(beta >= 0.0)) throw ConfigError("BaselineConfig: beta must be >= 0");
        if (eps_relax && !(*eps_relax >= 0.0)) throw ConfigError("BaselineConfig: eps_relax must be >= 0");
    }
};

/// Uniform grid index from the policy's own stream.
inline std::size_t random_policy_step(const GameSpec& spec, Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, spec.grid_size() - 1);
    return pick(rng);
}

/// Utilities of every universe profile under one joint posterior draw of each player's weights.
/// theta = mu + B^{-1/2} eps with B = Sigma / sigma^2; only the data span is contracted.
class PosteriorGameSampler {
public:
    explicit PosteriorGameSampler(const AcquisitionState& s) : s_(s) {
        const auto& post = s.posterior();
        const Eigen::Index k = post.eigenvalues().size();
        if (k > 0) {
            // columns v_i = Psi^T u_i / sqrt(lambda_i)
            span_ = post.features().transpose() * post.eigenvectors();
            for (Eigen::Index i = 0; i < k; ++i) span_.col(i) /= std::sqrt(post.eigenvalues()[i]);
            shrink_ = ((1.0 + s.geometry().a.array()).rsqrt() - 1.0).matrix();
        }
        const auto U = static_cast<Eigen::Index>(s.universe().size());
        coeff_.resize(U, k);
        mean_.resize(U, s.num_players());
        for (Eigen::Index u = 0; u < U; ++u) {
            if (k > 0) coeff_.row(u) = s.projected(static_cast<std::size_t>(u)).coeff.transpose();
            for (int n = 0; n < s.num_players(); ++n) mean_(u, n) = s.predict(static_cast<std::size_t>(u), n).mean;
        }
    }

    Eigen::MatrixXd draw(Rng& rng) const {
        std::normal_distribution<double> normal(0.0, 1.0);
        const int N = s_.num_players();
        const int D = s_.feature_map().dim();
        Eigen::MatrixXd out = mean_;
        Eigen::VectorXd eps(D);
        for (int n = 0; n < N; ++n) {
            for (int i = 0; i < D; ++i) eps[i] = normal(rng);
            Eigen::VectorXd col = s_.features() * eps;
            if (span_.cols() > 0) {
                const Eigen::VectorXd e = span_.transpose() * eps;
                col += coeff_ * e.cwiseProduct(shrink_);
            }
            out.col(n) += col;
        }
        return out;
    }

private:
    const AcquisitionState& s_;
    Eigen::MatrixXd span_;
    Eigen::VectorXd shrink_;
    Eigen::MatrixXd coeff_;
    Eigen::MatrixXd mean_;
};

/// Fraction of sampled games in which each grid profile is an eps-PNE.
inline Eigen::VectorXd equilibrium_frequencies(const AcquisitionState& s, int samples, double eps, Rng& rng) {
    PosteriorGameSampler sampler(s);
    Eigen::VectorXd freq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.universe().grid_size()));
    for (int k = 0; k < samples; ++k) {
        const Eigen::MatrixXd regrets = regret_table(sampler.draw(rng), s.universe(), s.num_players());
        const Eigen::VectorXd worst = regrets.rowwise().maxCoeff();
        for (Eigen::Index g = 0; g < worst.size(); ++g)
            if (worst[g] <= eps) freq[g] += 1.0;
    }
    return freq / static_cast<double>(samples);
}

/// Profile most often an eps_relax-PNE of the sampled games; lowest index on ties.
inline StepTrace pe_policy_step(AcquisitionState& s, const BaselineConfig& cfg, Rng& rng,
                                std::optional<std::size_t> forced) {
    const UtilityBounds mean = gaussian_utility_bounds(s, 0.0);
    StepTrace tr = confidence_bound_step(s, mean, forced);
    tr.flag = IntervalFlag::None;
    if (forced) return tr;
    // running epsilon* of the posterior-mean game unless fixed
    const double eps = cfg.eps_relax ? *cfg.eps_relax : std::max(0.0, tr.regret_lower.maxCoeff());
    const Eigen::VectorXd freq = equilibrium_frequencies(s, cfg.mc_samples, eps, rng);
    Eigen::Index best = 0;
    for (Eigen::Index g = 1; g < freq.size(); ++g)
        if (freq[g] > freq[best]) best = g;
    const auto id = static_cast<std::size_t>(best);
    const RegretBounds rb = regret_bounds(mean, s.universe(), s.num_players());
    tr.reported_id = tr.exploring_id = tr.chosen_id = id;
    tr.worst_player = -1;
    tr.regret_lower = rb.lower.row(best).transpose();
    tr.regret_upper = rb.upper.row(best).transpose();
    tr.utility_lower = mean.lower.row(best).transpose();
    tr.utility_upper = mean.upper.row(best).transpose();
    tr.var_reported = tr.var_exploring = s.variance(id);
    return tr;
}

/// Same selection rules as PPR-UCB with mean +/- sqrt(beta) std utility intervals.
inline StepTrace ucb_policy_step(AcquisitionState& s, const BaselineConfig& cfg, std::optional<std::size_t> forced) {
    return confidence_bound_step(s, gaussian_utility_bounds(s, cfg.beta), forced);
}

/// Random search: the uniform draw is both queried and reported.
inline StepTrace random_step(AcquisitionState& s, Rng& rng, std::optional<std::size_t> forced) {
    const std::size_t id = forced ? *forced : random_policy_step(s.spec(), rng);
    StepTrace tr = confidence_bound_step(s, gaussian_utility_bounds(s, 0.0), id);
    tr.flag = IntervalFlag::None;
    return tr;
}

inline PolicyStep make_baseline_policy(const BaselineConfig& cfg) {
    cfg.validate();
    auto rng = std::make_shared<Rng>(make_stream(cfg.seed, "policy"));
    switch (cfg.kind) {
    case BaselineKind::Random:
        return [rng](AcquisitionState& s, std::optional<std::size_t> f) { return random_step(s, *rng, f); };
    case BaselineKind::Pe:
        return [rng, cfg](AcquisitionState& s, std::optional<std::size_t> f) { return pe_policy_step(s, cfg, *rng, f); };
    case BaselineKind::Ucb:
        return [cfg](AcquisitionState& s, std::optional<std::size_t> f) { return ucb_policy_step(s, cfg, f); };
    }
    throw ConfigError("unknown baseline kind");
}

} // namespace pprucb

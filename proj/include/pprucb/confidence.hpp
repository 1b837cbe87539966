#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string_view>

#include <Eigen/Dense>

#include "errors.hpp"
#include "surrogate.hpp"

namespace pprucb {

/// How an interval was obtained.
enum class IntervalFlag {
    Ellipsoid,       // confidence set bounded, closed-form extremes
    BallIntersected, // set intersected with the prior ball, dual bisection
    Fallback,        // Gaussian posterior interval
    Gaussian,        // mean +/- sqrt(beta) std (UCB-style baseline)
    None,
};

inline std::string_view to_string(IntervalFlag f) {
    switch (f) {
    case IntervalFlag::Ellipsoid: return "ellipsoid";
    case IntervalFlag::BallIntersected: return "ball";
    case IntervalFlag::Fallback: return "fallback";
    case IntervalFlag::Gaussian: return "gaussian";
    case IntervalFlag::None: return "none";
    }
    return "none";
}

/// Worst (most approximate) of two flags, for summarizing a step.
inline IntervalFlag combine(IntervalFlag a, IntervalFlag b) {
    auto rank = [](IntervalFlag f) {
        switch (f) {
        case IntervalFlag::None: return 0;
        case IntervalFlag::Ellipsoid: return 1;
        case IntervalFlag::Gaussian: return 2;
        case IntervalFlag::BallIntersected: return 3;
        case IntervalFlag::Fallback: return 4;
        }
        return 0;
    };
    return rank(a) >= rank(b) ? a : b;
}

struct ValueInterval {
    double lower = 0.0;
    double upper = 0.0;
    IntervalFlag flag = IntervalFlag::None;

    double width() const { return upper - lower; }
    bool contains(double v, double tol = 0.0) const { return v >= lower - tol && v <= upper + tol; }
};

/// log of the prior-posterior ratio
///   sigma^D / sqrt(det Sigma) * exp(-|theta|^2 / 2 + (theta - mu)^T Sigma (theta - mu) / (2 sigma^2)).
inline double log_ppr_ratio(const WeightPosterior& wp, const Eigen::VectorXd& theta) {
    if (theta.size() != wp.mean.size()) throw std::invalid_argument("log_ppr_ratio: dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(wp.precision_like);
    if (llt.info() != Eigen::Success) throw NumericError("log_ppr_ratio: Sigma not positive definite");
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const auto D = static_cast<double>(theta.size());
    const Eigen::VectorXd diff = theta - wp.mean;
    const double quad = diff.dot(wp.precision_like * diff);
    return 0.5 * D * std::log(wp.noise_var) - 0.5 * logdet - 0.5 * theta.squaredNorm() +
           quad / (2.0 * wp.noise_var);
}

inline double ppr_ratio(const WeightPosterior& wp, const Eigen::VectorXd& theta) {
    return std::exp(log_ppr_ratio(wp, theta));
}

/// Radius of the ball holding a standard Gaussian D-vector with probability >= 1 - delta.
inline double prior_ball_radius(int D, double delta) {
    const double L = std::log(1.0 / delta);
    const auto d = static_cast<double>(D);
    return std::sqrt(d + 2.0 * std::sqrt(d * L) + 2.0 * L);
}

/// The confidence set in the eigenbasis of A = Sigma / sigma^2 - I = Psi^T Psi / sigma^2.
/// Membership reads  sum_i a_i th_i^2 - 2 b^T th + sum_i b_i^2 / (1 + a_i) <= rhs  over the
/// k directions with a_i > 0; the remaining D - k directions are unconstrained.
struct SpectralGeometry {
    int dim = 0;            // D
    Eigen::VectorXd a;      // k positive eigenvalues of A
    Eigen::MatrixXd b;      // k x N, coordinates of Psi^T y_n / sigma^2
    double log_det_ratio = 0.0;        // ln det Sigma - D ln sigma^2 = sum ln(1 + a_i)
    double noise_var = 0.67;

    int rank() const { return static_cast<int>(a.size()); }
    bool bounded() const { return rank() == dim && (rank() == 0 || a.minCoeff() > 1e-9); }
};

/// A query's feature vector expressed in the geometry's basis plus the leftover energy.
struct ProjectedFeature {
    Eigen::VectorXd coeff;  // k
    double null_sq = 0.0;   // |psi|^2 - |coeff|^2
    double norm_sq = 0.0;   // |psi|^2
};

inline SpectralGeometry geometry_from(const SharedFeaturePosterior& post) {
    SpectralGeometry g;
    g.dim = post.feature_dim();
    g.noise_var = post.noise_var();
    const Eigen::VectorXd& lam = post.eigenvalues();
    g.a = lam / post.noise_var();
    // b_i = sqrt(lambda_i) (U^T y)_i / sigma^2
    g.b = post.projected_targets();
    for (Eigen::Index i = 0; i < lam.size(); ++i) g.b.row(i) *= std::sqrt(lam[i]) / post.noise_var();
    g.log_det_ratio = g.a.array().log1p().sum();
    return g;
}

inline ProjectedFeature project_feature(const SharedFeaturePosterior& post, const Eigen::VectorXd& krow,
                                        double psi_sq) {
    ProjectedFeature p;
    p.coeff = post.project(krow);
    p.norm_sq = psi_sq;
    p.null_sq = std::max(0.0, psi_sq - p.coeff.squaredNorm());
    return p;
}

struct IntervalParams {
    double delta = 0.05;
    double ball_radius = 0.0;
};

namespace detail {

/// max psi^T theta over {constraint} intersected with |theta| <= r, via bisection on the ball
/// multiplier nu of the aggregated quadratic. Every nu gives a valid upper bound.
struct BallDual {
    const Eigen::VectorXd& a;
    Eigen::VectorXd b;      // one player's column
    Eigen::VectorXd psi;    // coeff (sign already applied)
    double null_sq;
    double rhs;             // R' = sum ln(1+a) - 2 ln delta
    double r2;
    double b_shift;         // sum b^2 / (1 + a)

    double rho(double nu) const {
        return rhs - b_shift + (b.array().square() / (a.array() + nu)).sum() + nu * r2;
    }
    double weight(double nu) const {
        return (psi.array().square() / (a.array() + nu)).sum() + (nu > 0.0 ? null_sq / nu : 0.0);
    }
    double value(double nu) const {
        const double w = weight(nu);
        const double rh = std::max(0.0, rho(nu));
        return (psi.array() * b.array() / (a.array() + nu)).sum() + std::sqrt(rh * w);
    }
    double argmax_norm_sq(double nu) const {
        const double w = weight(nu);
        const double kappa = w > 0.0 ? std::sqrt(std::max(0.0, rho(nu)) / w) : 0.0;
        const double range = ((b.array() + kappa * psi.array()) / (a.array() + nu)).square().sum();
        return range + (nu > 0.0 ? kappa * kappa * null_sq / (nu * nu) : 0.0);
    }
    /// min over nu >= 0 of rho(nu); rho is convex with derivative r^2 - sum b^2/(a+nu)^2.
    double min_rho() const {
        auto slope = [&](double nu) { return r2 - (b.array().square() / (a.array() + nu).square()).sum(); };
        if (a.size() == 0 || slope(0.0) >= 0.0) return rho(0.0);
        double lo = 0.0, hi = 1.0;
        while (slope(hi) < 0.0 && hi < 1e300) hi *= 2.0;
        for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            (slope(mid) < 0.0 ? lo : hi) = mid;
        }
        return rho(hi);
    }
};

inline double ball_upper(const SpectralGeometry& g, int player, const Eigen::VectorXd& coeff, double null_sq,
                         const IntervalParams& p, bool& infeasible) {
    const double rhs = g.log_det_ratio - 2.0 * std::log(p.delta);
    Eigen::VectorXd b = g.b.rows() ? Eigen::VectorXd(g.b.col(player)) : Eigen::VectorXd();
    BallDual dual{g.a, b, coeff, null_sq, rhs, p.ball_radius * p.ball_radius,
                  (b.array().square() / (1.0 + g.a.array())).sum()};
    if (dual.min_rho() < 0.0) {
        infeasible = true;
        return 0.0;
    }
    const double psi_norm = std::sqrt(coeff.squaredNorm() + null_sq);
    double best = p.ball_radius * psi_norm;  // ball alone
    if (null_sq <= 1e-14 * std::max(1.0, psi_norm * psi_norm) && (g.a.size() == 0 || g.a.minCoeff() > 0.0))
        best = std::min(best, dual.value(0.0));
    // bisection in log(nu): the derivative of the dual has the sign of r^2 - |theta*(nu)|^2
    double lo = 1e-12, hi = 1e12;
    best = std::min({best, dual.value(lo), dual.value(hi)});
    for (int it = 0; it < 200 && hi / lo > 1.0 + 1e-8; ++it) {
        const double mid = std::sqrt(lo * hi);
        best = std::min(best, dual.value(mid));
        (dual.argmax_norm_sq(mid) > dual.r2 ? lo : hi) = mid;
    }
    return best;
}

inline double ellipsoid_upper(const SpectralGeometry& g, int player, const Eigen::VectorXd& coeff,
                              const IntervalParams& p) {
    const double rhs = g.log_det_ratio - 2.0 * std::log(p.delta);
    const Eigen::ArrayXd b = g.b.col(player).array();
    const Eigen::ArrayXd a = g.a.array();
    // center c = b / a, rho = rhs + sum b^2 / (a (1 + a))
    const double rho = rhs + (b.square() / (a * (1.0 + a))).sum();
    const double center = (coeff.array() * b / a).sum();
    return center + std::sqrt(std::max(0.0, rho) * (coeff.array().square() / a).sum());
}

} // namespace detail

/// Gaussian posterior of player's utility at the projected feature.
inline Prediction geometry_prediction(const SpectralGeometry& g, int player, const ProjectedFeature& q) {
    if (g.rank() == 0) return {0.0, q.norm_sq};
    const Eigen::ArrayXd inv = (1.0 + g.a.array()).inverse();
    const double mean = (q.coeff.array() * g.b.col(player).array() * inv).sum();
    const double var = (q.coeff.array().square() * inv).sum() + q.null_sq;
    return {mean, std::max(0.0, var)};
}

inline ValueInterval fallback_interval(const Prediction& pr, double delta) {
    const double h = std::sqrt(2.0 * std::log(2.0 / delta)) * std::sqrt(pr.variance);
    return {pr.mean - h, pr.mean + h, IntervalFlag::Fallback};
}

/// [min, max] of psi^T theta over the player's confidence set.
inline ValueInterval utility_interval(const SpectralGeometry& g, int player, const ProjectedFeature& q,
                                      const IntervalParams& p) {
    if (q.norm_sq == 0.0) return {0.0, 0.0, g.bounded() ? IntervalFlag::Ellipsoid : IntervalFlag::BallIntersected};
    if (g.bounded()) {
        const double up = detail::ellipsoid_upper(g, player, q.coeff, p);
        const double lo = -detail::ellipsoid_upper(g, player, -q.coeff, p);
        return {lo, up, IntervalFlag::Ellipsoid};
    }
    bool infeasible = false;
    const double up = detail::ball_upper(g, player, q.coeff, q.null_sq, p, infeasible);
    const double lo = infeasible ? 0.0 : -detail::ball_upper(g, player, -q.coeff, q.null_sq, p, infeasible);
    if (infeasible || !(lo <= up)) return fallback_interval(geometry_prediction(g, player, q), p.delta);
    return {lo, up, IntervalFlag::BallIntersected};
}

/// C = { theta : ratio(theta) <= 1/delta } for one player, with its full-dimensional posterior.
class PprConfidenceSet {
public:
    PprConfidenceSet(WeightPosterior wp, double delta)
        : wp_(std::move(wp)), delta_(delta), llt_(wp_.precision_like) {
        if (!(delta_ > 0.0 && delta_ <= 1.0)) throw ConfigError("PprConfidenceSet: delta must be in (0, 1]");
        if (llt_.info() != Eigen::Success) throw NumericError("PprConfidenceSet: Sigma not positive definite");
        logdet_ = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
        build_geometry();
    }

    const WeightPosterior& posterior() const { return wp_; }
    double delta() const { return delta_; }
    int dim() const { return wp_.dim(); }
    double log_det_sigma() const { return logdet_; }
    double ball_radius() const { return prior_ball_radius(dim(), delta_); }
    const SpectralGeometry& geometry() const { return geo_; }

    /// Right-hand side of the quadratic membership test
    ///   (theta - mu)^T Sigma (theta - mu) / sigma^2 - |theta|^2 <= ln det Sigma - 2 ln(sigma^D delta).
    double radius_rhs() const {
        return logdet_ - 2.0 * (0.5 * dim() * std::log(wp_.noise_var) + std::log(delta_));
    }

    double log_ratio(const Eigen::VectorXd& theta) const { return log_ppr_ratio(wp_, theta); }

    bool contains(const Eigen::VectorXd& theta) const { return log_ratio(theta) <= -std::log(delta_); }

    double quadratic_lhs(const Eigen::VectorXd& theta) const {
        const Eigen::VectorXd d = theta - wp_.mean;
        return d.dot(wp_.precision_like * d) / wp_.noise_var - theta.squaredNorm();
    }

    bool contains_quadratic(const Eigen::VectorXd& theta) const { return quadratic_lhs(theta) <= radius_rhs(); }

    ProjectedFeature project(const Eigen::VectorXd& psi) const {
        ProjectedFeature p;
        p.coeff = basis_.transpose() * psi;
        p.norm_sq = psi.squaredNorm();
        p.null_sq = std::max(0.0, p.norm_sq - p.coeff.squaredNorm());
        return p;
    }

    ValueInterval utility_interval(const Eigen::VectorXd& psi) const {
        return pprucb::utility_interval(geo_, 0, project(psi), {delta_, ball_radius()});
    }

private:
    void build_geometry() {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(wp_.precision_like);
        const Eigen::VectorXd a = (es.eigenvalues().array() - wp_.noise_var) / wp_.noise_var;
        std::vector<Eigen::Index> keep;
        const double top = std::max(1.0, a.size() ? a.maxCoeff() : 0.0);
        for (Eigen::Index i = 0; i < a.size(); ++i)
            if (a[i] > 1e-10 * top) keep.push_back(i);
        geo_.dim = dim();
        geo_.noise_var = wp_.noise_var;
        geo_.a.resize(static_cast<Eigen::Index>(keep.size()));
        basis_.resize(dim(), static_cast<Eigen::Index>(keep.size()));
        for (std::size_t j = 0; j < keep.size(); ++j) {
            geo_.a[static_cast<Eigen::Index>(j)] = a[keep[j]];
            basis_.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]);
        }
        // b = Sigma mu / sigma^2 in the kept basis
        geo_.b = basis_.transpose() * (wp_.precision_like * wp_.mean) / wp_.noise_var;
        geo_.log_det_ratio = geo_.a.array().log1p().sum();
    }

    WeightPosterior wp_;
    double delta_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double logdet_ = 0.0;
    SpectralGeometry geo_;
    Eigen::MatrixXd basis_;
};

/// Regret interval from utility intervals at x (own) and at each unilateral deviation.
/// lower = max_dev lower(dev) - upper(x), upper = max_dev upper(dev) - lower(x).
template <typename DeviationRange>
ValueInterval regret_interval(const ValueInterval& at_profile, const DeviationRange& deviations) {
    double best_lo = -std::numeric_limits<double>::infinity();
    double best_up = -std::numeric_limits<double>::infinity();
    IntervalFlag flag = at_profile.flag;
    for (const ValueInterval& d : deviations) {
        best_lo = std::max(best_lo, d.lower);
        best_up = std::max(best_up, d.upper);
        flag = combine(flag, d.flag);
    }
    if (std::empty(deviations)) throw PreconditionError("regret_interval: empty deviation set");
    return {best_lo - at_profile.upper, best_up - at_profile.lower, flag};
}

} // namespace pprucb

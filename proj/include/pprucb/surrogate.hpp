#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace pprucb {

struct KernelConfig {
    double lengthscale = 0.85;
    double noise_var = 0.67;

    void validate() const {
        if (!(lengthscale > 0.0) || !(noise_var > 0.0))
            throw ConfigError("KernelConfig: lengthscale and noise_var must be > 0");
    }
};

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
};

inline double rbf_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double lengthscale) {
    if (a.size() != b.size()) throw std::invalid_argument("rbf_kernel: dimension mismatch");
    return std::exp(-(a - b).squaredNorm() / (2.0 * lengthscale * lengthscale));
}

inline double rbf_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelConfig& cfg) {
    return rbf_kernel(a, b, cfg.lengthscale);
}

struct RbfKernel {
    double lengthscale = 0.85;
    double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        return rbf_kernel(a, b, lengthscale);
    }
};

/// psi(x) = sqrt(2/D) cos(S x + b). One map is shared by all players.
class RffFeatureMap {
public:
    RffFeatureMap(Eigen::MatrixXd frequencies, Eigen::VectorXd phases, double lengthscale)
        : freq_(std::move(frequencies)), phase_(std::move(phases)), lengthscale_(lengthscale) {
        if (freq_.rows() != phase_.size() || freq_.rows() < 1)
            throw std::invalid_argument("RffFeatureMap: frequency/phase size mismatch");
    }

    /// Each row s_i ~ N(0, l^-2 I), the spectral measure of the RBF kernel, and each b_i ~ U[0, 2pi].
    /// Rows are coupled to cut Monte Carlo error while keeping those marginals: features come in
    /// pairs sharing s_i with phases b and b + pi/2, directions within blocks of d are orthogonal,
    /// and radii are jittered-stratified chi_d quantiles in random order.
    static RffFeatureMap sample(int input_dim, int num_features, double lengthscale, Rng& rng) {
        if (input_dim < 1 || num_features < 1 || !(lengthscale > 0.0))
            throw ConfigError("RffFeatureMap: invalid dimensions or lengthscale");
        const int d = input_dim, half = (num_features + 1) / 2;
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Eigen::MatrixXd dirs(half, d);
        for (int blk = 0; blk < half; blk += d) {
            Eigen::MatrixXd g(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) g(i, j) = normal(rng);
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
            Eigen::MatrixXd q = qr.householderQ();
            // sign fix makes q Haar distributed
            for (int j = 0; j < d; ++j)
                if (qr.matrixQR()(j, j) < 0.0) q.col(j) = -q.col(j);
            for (int i = 0; i < d && blk + i < half; ++i) dirs.row(blk + i) = q.row(i);
        }
        std::vector<int> strata(static_cast<std::size_t>(half));
        for (int i = 0; i < half; ++i) strata[static_cast<std::size_t>(i)] = i;
        std::shuffle(strata.begin(), strata.end(), rng);
        const boost::math::chi_squared chi2(d);
        Eigen::MatrixXd s(num_features, d);
        Eigen::VectorXd b(num_features);
        for (int k = 0; k < half; ++k) {
            const double u = (strata[static_cast<std::size_t>(k)] + unif(rng)) / half;
            const double radius = std::sqrt(boost::math::quantile(chi2, std::clamp(u, 1e-300, 1.0 - 1e-16)));
            const Eigen::RowVectorXd row = dirs.row(k) * (radius / lengthscale);
            const double phase = 2.0 * std::numbers::pi * unif(rng);
            s.row(2 * k) = row;
            b[2 * k] = phase;
            if (2 * k + 1 < num_features) {
                s.row(2 * k + 1) = row;
                b[2 * k + 1] = std::fmod(phase + 0.5 * std::numbers::pi, 2.0 * std::numbers::pi);
            }
        }
        return RffFeatureMap(std::move(s), std::move(b), lengthscale);
    }

    int dim() const { return static_cast<int>(freq_.rows()); }
    int input_dim() const { return static_cast<int>(freq_.cols()); }
    double lengthscale() const { return lengthscale_; }
    const Eigen::MatrixXd& frequencies() const { return freq_; }
    const Eigen::VectorXd& phases() const { return phase_; }

    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
        if (x.size() != freq_.cols()) throw std::invalid_argument("RffFeatureMap: input dimension mismatch");
        const double scale = std::sqrt(2.0 / static_cast<double>(dim()));
        return ((freq_ * x + phase_).array().cos() * scale).matrix();
    }

    /// Rows are features of the given inputs.
    Eigen::MatrixXd feature_matrix(const std::vector<Eigen::VectorXd>& xs) const {
        Eigen::MatrixXd psi(static_cast<Eigen::Index>(xs.size()), dim());
        for (std::size_t i = 0; i < xs.size(); ++i) psi.row(static_cast<Eigen::Index>(i)) = (*this)(xs[i]).transpose();
        return psi;
    }

private:
    Eigen::MatrixXd freq_;
    Eigen::VectorXd phase_;
    double lengthscale_;
};

inline Eigen::VectorXd rff_features(const RffFeatureMap& map, const Eigen::VectorXd& x) { return map(x); }

/// Exact finite-feature kernel k(x, x') = psi(x)^T psi(x').
struct FeatureKernel {
    const RffFeatureMap* map = nullptr;
    double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        return (*map)(a).dot((*map)(b));
    }
};

/// Kernel-space GP posterior for several outputs sharing one input history.
template <typename Kernel>
class GpPosterior {
public:
    GpPosterior(Kernel kernel, double noise_var) : kernel_(std::move(kernel)), noise_var_(noise_var) {
        if (!(noise_var_ > 0.0)) throw ConfigError("GpPosterior: noise_var must be > 0");
    }

    /// `targets` is t x N (one column per player).
    void fit(std::vector<Eigen::VectorXd> inputs, Eigen::MatrixXd targets) {
        if (static_cast<Eigen::Index>(inputs.size()) != targets.rows())
            throw PreconditionError("GpPosterior: inputs/targets length mismatch");
        inputs_ = std::move(inputs);
        targets_ = std::move(targets);
        const auto t = static_cast<Eigen::Index>(inputs_.size());
        gram_.resize(t, t);
        for (Eigen::Index i = 0; i < t; ++i)
            for (Eigen::Index j = 0; j <= i; ++j) gram_(i, j) = gram_(j, i) = kernel_(inputs_[i], inputs_[j]);
        jitter_ = 0.0;
        if (t == 0) {
            alpha_.resize(0, targets_.cols());
            return;
        }
        Eigen::MatrixXd a = gram_;
        a.diagonal().array() += noise_var_;
        chol_.compute(a);
        // deterministic escalation 1e-10, 1e-9, ..., 1e-6
        for (double j = 1e-10; chol_.info() != Eigen::Success; j *= 10.0) {
            if (j > 1e-6 * 1.5) throw NumericError("GpPosterior: factorization failed after jitter");
            jitter_ = j;
            Eigen::MatrixXd aj = a;
            aj.diagonal().array() += j;
            chol_.compute(aj);
        }
        alpha_ = chol_.solve(targets_);
    }

    std::size_t size() const { return inputs_.size(); }
    const Eigen::MatrixXd& gram() const { return gram_; }
    double jitter() const { return jitter_; }

    Prediction predict(int player, const Eigen::VectorXd& x) const {
        const double kxx = kernel_(x, x);
        if (inputs_.empty()) return {0.0, kxx};
        Eigen::VectorXd k(static_cast<Eigen::Index>(inputs_.size()));
        for (std::size_t i = 0; i < inputs_.size(); ++i) k[static_cast<Eigen::Index>(i)] = kernel_(x, inputs_[i]);
        const double mean = k.dot(alpha_.col(player));
        const Eigen::VectorXd v = chol_.matrixL().solve(k);
        const double var = std::clamp(kxx - v.squaredNorm(), 0.0, kxx);
        return {mean, var};
    }

private:
    Kernel kernel_;
    double noise_var_;
    std::vector<Eigen::VectorXd> inputs_;
    Eigen::MatrixXd targets_;
    Eigen::MatrixXd gram_;
    Eigen::LLT<Eigen::MatrixXd> chol_;
    Eigen::MatrixXd alpha_;
    double jitter_ = 0.0;
};

/// Gaussian posterior over RFF weights: theta | D ~ N(mean, noise_var * precision_like^-1),
/// with precision_like = Psi^T Psi + noise_var I.
struct WeightPosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd precision_like;
    double noise_var = 0.67;

    int dim() const { return static_cast<int>(mean.size()); }
};

inline WeightPosterior weight_posterior(const Eigen::MatrixXd& psi, const Eigen::VectorXd& y, double noise_var) {
    if (psi.rows() != y.size()) throw PreconditionError("weight_posterior: feature/observation length mismatch");
    if (!(noise_var > 0.0)) throw ConfigError("weight_posterior: noise_var must be > 0");
    const Eigen::Index D = psi.cols();
    WeightPosterior wp;
    wp.noise_var = noise_var;
    wp.precision_like = psi.transpose() * psi;
    wp.precision_like.diagonal().array() += noise_var;
    wp.mean = wp.precision_like.llt().solve(psi.transpose() * y);
    if (psi.rows() == 0) wp.mean = Eigen::VectorXd::Zero(D);
    return wp;
}

inline WeightPosterior weight_posterior(const RffFeatureMap& map, const std::vector<Eigen::VectorXd>& inputs,
                                        const Eigen::VectorXd& y, double noise_var) {
    return weight_posterior(map.feature_matrix(inputs), y, noise_var);
}

/// Utility posterior at a feature vector: mean psi^T mu, variance sigma^2 psi^T Sigma^-1 psi.
inline Prediction weight_space_posterior_at(const WeightPosterior& wp, const Eigen::VectorXd& psi) {
    const Eigen::VectorXd s = wp.precision_like.llt().solve(psi);
    return {psi.dot(wp.mean), std::max(0.0, wp.noise_var * psi.dot(s))};
}

inline Prediction weight_space_posterior_at(const WeightPosterior& wp, const RffFeatureMap& map,
                                            const Eigen::VectorXd& x) {
    return weight_space_posterior_at(wp, map(x));
}

/// Weight-space posterior of all players, kept in the t-dimensional span of the queried
/// features. With the Gram matrix Psi Psi^T = U diag(lambda) U^T, every quantity costs O(t^2)
/// per query once the kernel row Psi psi is known.
class SharedFeaturePosterior {
public:
    SharedFeaturePosterior(int feature_dim, int num_players, double noise_var)
        : dim_(feature_dim), players_(num_players), noise_var_(noise_var),
          features_(0, feature_dim), targets_(0, num_players) {
        if (!(noise_var_ > 0.0)) throw ConfigError("SharedFeaturePosterior: noise_var must be > 0");
    }

    void append(const Eigen::VectorXd& psi, const Eigen::VectorXd& y) {
        const Eigen::Index t = features_.rows();
        features_.conservativeResize(t + 1, Eigen::NoChange);
        features_.row(t) = psi.transpose();
        targets_.conservativeResize(t + 1, Eigen::NoChange);
        targets_.row(t) = y.transpose();
        Eigen::MatrixXd g(t + 1, t + 1);
        g.topLeftCorner(t, t) = gram_;
        const Eigen::VectorXd k = features_ * psi;
        g.col(t) = k;
        g.row(t) = k.transpose();
        gram_ = std::move(g);
        refresh();
    }

    int feature_dim() const { return dim_; }
    int num_players() const { return players_; }
    double noise_var() const { return noise_var_; }
    Eigen::Index size() const { return features_.rows(); }
    const Eigen::MatrixXd& features() const { return features_; }
    const Eigen::MatrixXd& targets() const { return targets_; }

    /// Eigenvalues of Psi Psi^T kept as numerically nonzero, and matching eigenvectors.
    const Eigen::VectorXd& eigenvalues() const { return lambda_; }
    const Eigen::MatrixXd& eigenvectors() const { return basis_; }
    /// U^T y_n for every player (columns).
    const Eigen::MatrixXd& projected_targets() const { return proj_y_; }

    /// Coordinates of psi in the eigenbasis of Psi^T Psi: U^T (Psi psi) / sqrt(lambda).
    Eigen::VectorXd project(const Eigen::VectorXd& kernel_row) const {
        if (lambda_.size() == 0) return {};
        return (basis_.transpose() * kernel_row).cwiseQuotient(lambda_.cwiseSqrt());
    }

    Eigen::VectorXd kernel_row(const Eigen::VectorXd& psi) const { return features_ * psi; }

    Prediction predict(int player, const Eigen::VectorXd& psi) const {
        return predict_from_row(player, kernel_row(psi), psi.squaredNorm());
    }

    Prediction predict_from_row(int player, const Eigen::VectorXd& krow, double psi_sq) const {
        if (lambda_.size() == 0) return {0.0, psi_sq};
        const Eigen::VectorXd z = basis_.transpose() * krow;
        const Eigen::ArrayXd inv = (lambda_.array() + noise_var_).inverse();
        const double mean = (z.array() * proj_y_.col(player).array() * inv).sum();
        const double var = psi_sq - (z.array().square() * inv).sum();
        return {mean, std::max(0.0, var)};
    }

    /// Shared posterior variance (no dependence on observations).
    double variance_from_row(const Eigen::VectorXd& krow, double psi_sq) const {
        if (lambda_.size() == 0) return psi_sq;
        const Eigen::VectorXd z = basis_.transpose() * krow;
        return std::max(0.0, psi_sq - (z.array().square() / (lambda_.array() + noise_var_)).sum());
    }

private:
    void refresh() {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_);
        if (es.info() != Eigen::Success) throw NumericError("SharedFeaturePosterior: eigendecomposition failed");
        const Eigen::VectorXd& ev = es.eigenvalues();
        const double top = std::max(1.0, ev.size() ? ev.maxCoeff() : 0.0);
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            if (ev[i] > 1e-10 * top) keep.push_back(i);
        lambda_.resize(static_cast<Eigen::Index>(keep.size()));
        basis_.resize(gram_.rows(), static_cast<Eigen::Index>(keep.size()));
        for (std::size_t j = 0; j < keep.size(); ++j) {
            lambda_[static_cast<Eigen::Index>(j)] = ev[keep[j]];
            basis_.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]);
        }
        proj_y_ = basis_.transpose() * targets_;
    }

    int dim_;
    int players_;
    double noise_var_;
    Eigen::MatrixXd features_;
    Eigen::MatrixXd targets_;
    Eigen::MatrixXd gram_;
    Eigen::VectorXd lambda_;
    Eigen::MatrixXd basis_;
    Eigen::MatrixXd proj_y_;
};

} // namespace pprucb

#include <random>

#include <gtest/gtest.h>

#include "pprucb/rng.hpp"
#include "pprucb/surrogate.hpp"

using namespace pprucb;

namespace {

std::vector<Eigen::VectorXd> uniform_points(int count, int d, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Eigen::VectorXd> xs;
    for (int i = 0; i < count; ++i) {
        Eigen::VectorXd x(d);
        for (int j = 0; j < d; ++j) x[j] = u(rng);
        xs.push_back(x);
    }
    return xs;
}

struct KernelError {
    double mean = 0.0;
    double max = 0.0;
};

KernelError rff_error(int D, int d, std::uint64_t seed, int pairs) {
    Rng rng(seed);
    const auto map = RffFeatureMap::sample(d, D, 0.85, rng);
    Rng prng(seed + 1000);
    const auto a = uniform_points(pairs, d, prng), b = uniform_points(pairs, d, prng);
    KernelError e;
    for (int i = 0; i < pairs; ++i) {
        const double err = std::abs(map(a[i]).dot(map(b[i])) - rbf_kernel(a[i], b[i], 0.85));
        e.mean += err / pairs;
        e.max = std::max(e.max, err);
    }
    return e;
}

} // namespace

TEST(RbfKernel, KnownValues) {
    const Eigen::Vector2d x(0.3, -1.2);
    EXPECT_EQ(rbf_kernel(x, x, 0.85), 1.0);
    const Eigen::Vector2d y = x + Eigen::Vector2d(1.3, 0.0);
    EXPECT_NEAR(rbf_kernel(x, y, 0.85), std::exp(-1.69 / 1.445), 1e-15);
    EXPECT_NEAR(rbf_kernel(x, y, 0.85), 0.3105066, 1e-7);
    EXPECT_THROW(rbf_kernel(x, Eigen::Vector3d::Zero(), 0.85), std::invalid_argument);
}

TEST(RbfKernel, SymmetricAndInUnitInterval) {
    Rng rng(3);
    const auto xs = uniform_points(200, 4, rng);
    for (int i = 0; i < 100; ++i) {
        const double k = rbf_kernel(xs[2 * i], xs[2 * i + 1], 0.85);
        EXPECT_EQ(k, rbf_kernel(xs[2 * i + 1], xs[2 * i], 0.85));
        EXPECT_GT(k, 0.0);
        EXPECT_LE(k, 1.0);
    }
}

TEST(GpPosterior, PriorBeforeData) {
    GpPosterior<RbfKernel> gp(RbfKernel{0.85}, 0.67);
    gp.fit({}, Eigen::MatrixXd(0, 2));
    const auto p = gp.predict(1, Eigen::Vector3d(0.2, 0.4, 0.9));
    EXPECT_EQ(p.mean, 0.0);
    EXPECT_EQ(p.variance, 1.0);
}

TEST(GpPosterior, SinglePointClosedForm) {
    GpPosterior<RbfKernel> gp(RbfKernel{0.85}, 0.67);
    const Eigen::Vector2d x(0.1, 0.7);
    Eigen::MatrixXd y(1, 1);
    y << 2.5;
    gp.fit({x}, y);
    const auto p = gp.predict(0, x);
    EXPECT_NEAR(p.mean, 2.5 / 1.67, 1e-12);
    EXPECT_NEAR(p.variance, 1.0 - 1.0 / 1.67, 1e-12);
    EXPECT_NEAR(p.variance, 0.40119, 1e-5);
}

TEST(GpPosterior, VarianceNonIncreasingOnNestedData) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        Rng rng(s);
        const auto xs = uniform_points(15, 3, rng);
        const auto qs = uniform_points(10, 3, rng);
        std::vector<double> prev(qs.size(), 1.0);
        for (std::size_t t = 1; t <= xs.size(); ++t) {
            GpPosterior<RbfKernel> gp(RbfKernel{0.85}, 0.67);
            gp.fit({xs.begin(), xs.begin() + static_cast<long>(t)}, Eigen::MatrixXd::Zero(static_cast<long>(t), 1));
            for (std::size_t q = 0; q < qs.size(); ++q) {
                const double v = gp.predict(0, qs[q]).variance;
                EXPECT_LE(v, prev[q] + 1e-12);
                EXPECT_GE(v, 0.0);
                prev[q] = v;
            }
        }
    }
}

TEST(GpPosterior, GramIsPsd) {
    Rng rng(9);
    const auto xs = uniform_points(40, 2, rng);
    GpPosterior<RbfKernel> gp(RbfKernel{0.85}, 0.67);
    gp.fit(xs, Eigen::MatrixXd::Zero(40, 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gp.gram());
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
    EXPECT_EQ(gp.jitter(), 0.0);
}

TEST(RffFeatures, DegenerateMapIsConstant) {
    RffFeatureMap map(Eigen::MatrixXd::Zero(1, 3), Eigen::VectorXd::Zero(1), 0.85);
    for (double v : {0.0, 0.5, 3.0}) EXPECT_DOUBLE_EQ(map(Eigen::Vector3d::Constant(v))[0], std::sqrt(2.0));
}

TEST(RffFeatures, BoundedNormAndDeterministic) {
    Rng rng(1);
    const auto map = RffFeatureMap::sample(5, 256, 0.85, rng);
    Rng qrng(2);
    for (const auto& x : uniform_points(200, 5, qrng)) {
        const Eigen::VectorXd a = map(x);
        EXPECT_LE(a.squaredNorm(), 2.0 + 1e-12);
        EXPECT_EQ(a, map(x));
    }
}

TEST(RffFeatures, ApproximatesRbfKernel) {
    const auto e = rff_error(2000, 6, 17, 1000);
    EXPECT_LT(e.mean, 0.02);
    EXPECT_LT(e.max, 0.05);
}

TEST(RffFeatures, ErrorShrinksWithMoreFeatures) {
    EXPECT_LT(rff_error(2000, 6, 23, 1000).mean, rff_error(200, 6, 23, 1000).mean);
}

TEST(RffFeatures, FrequencyStdIsInverseLengthscale) {
    Rng rng(4);
    const auto map = RffFeatureMap::sample(4, 5000, 0.85, rng);
    const double var = map.frequencies().array().square().mean();
    EXPECT_NEAR(var * 0.85 * 0.85, 1.0, 0.03);
}

TEST(WeightPosterior, PriorAndScalarCase) {
    const auto w0 = weight_posterior(Eigen::MatrixXd(0, 4), Eigen::VectorXd(0), 0.67);
    EXPECT_EQ(w0.mean, Eigen::VectorXd::Zero(4));
    EXPECT_EQ(w0.precision_like, Eigen::MatrixXd::Identity(4, 4) * 0.67);
    Eigen::MatrixXd psi(1, 1);
    psi << 1.3;
    const auto w1 = weight_posterior(psi, Eigen::VectorXd::Constant(1, 0.8), 0.67);
    EXPECT_NEAR(w1.precision_like(0, 0), 1.69 + 0.67, 1e-15);
    EXPECT_NEAR(w1.mean[0], 1.3 * 0.8 / (1.69 + 0.67), 1e-15);
}

TEST(WeightPosterior, EigenvaluesAboveNoise) {
    Rng rng(5);
    const auto map = RffFeatureMap::sample(3, 64, 0.85, rng);
    const auto xs = uniform_points(30, 3, rng);
    const auto wp = weight_posterior(map, xs, Eigen::VectorXd::Ones(30), 0.67);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(wp.precision_like);
    EXPECT_GE(es.eigenvalues().minCoeff(), 0.67 - 1e-9);
    EXPECT_LT((wp.precision_like - wp.precision_like.transpose()).norm(), 1e-12);
}

TEST(Duality, WeightSpaceMatchesKernelSpace) {
    Rng rng(31);
    const int D = 300, d = 4, t = 30;
    const auto map = RffFeatureMap::sample(d, D, 0.85, rng);
    const auto xs = uniform_points(t, d, rng);
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::VectorXd y(t);
    for (int i = 0; i < t; ++i) y[i] = std::sin(3.0 * xs[static_cast<std::size_t>(i)].sum()) + 0.3 * z(rng);
    const auto wp = weight_posterior(map, xs, y, 0.67);
    GpPosterior<FeatureKernel> gp(FeatureKernel{&map}, 0.67);
    gp.fit(xs, y);
    double dm = 0.0, dv = 0.0;
    for (const auto& q : uniform_points(100, d, rng)) {
        const auto a = weight_space_posterior_at(wp, map, q);
        const auto b = gp.predict(0, q);
        dm = std::max(dm, std::abs(a.mean - b.mean));
        dv = std::max(dv, std::abs(a.variance - b.variance));
    }
    EXPECT_LT(dm, 1e-6);
    EXPECT_LT(dv, 1e-6);
}

TEST(WeightSpacePosterior, PriorAndNonNegativeVariance) {
    Rng rng(6);
    const auto map = RffFeatureMap::sample(2, 128, 0.85, rng);
    const auto w0 = weight_posterior(Eigen::MatrixXd(0, 128), Eigen::VectorXd(0), 0.67);
    const Eigen::Vector2d x(0.3, 0.6);
    const auto p0 = weight_space_posterior_at(w0, map, x);
    EXPECT_EQ(p0.mean, 0.0);
    EXPECT_NEAR(p0.variance, map(x).squaredNorm(), 1e-12);
    const auto xs = uniform_points(50, 2, rng);
    const auto wp = weight_posterior(map, xs, Eigen::VectorXd::Ones(50), 0.67);
    for (const auto& q : uniform_points(1000, 2, rng)) EXPECT_GE(weight_space_posterior_at(wp, map, q).variance, 0.0);
}

TEST(SharedFeaturePosterior, MatchesFullWeightPosterior) {
    Rng rng(12);
    const int D = 80;
    const auto map = RffFeatureMap::sample(3, D, 0.85, rng);
    const auto xs = uniform_points(25, 3, rng);
    std::normal_distribution<double> z(0.0, 1.0);
    SharedFeaturePosterior post(D, 2, 0.67);
    Eigen::MatrixXd y(25, 2);
    for (int i = 0; i < 25; ++i) {
        y(i, 0) = z(rng);
        y(i, 1) = 2.0 + z(rng);
        post.append(map(xs[static_cast<std::size_t>(i)]), y.row(i).transpose());
    }
    for (int n = 0; n < 2; ++n) {
        const auto wp = weight_posterior(map, xs, y.col(n), 0.67);
        for (const auto& q : uniform_points(30, 3, rng)) {
            const auto a = post.predict(n, map(q));
            const auto b = weight_space_posterior_at(wp, map, q);
            EXPECT_NEAR(a.mean, b.mean, 1e-8);
            EXPECT_NEAR(a.variance, b.variance, 1e-8);
        }
    }
}

TEST(SharedFeaturePosterior, VarianceSharedAcrossPlayers) {
    Rng rng(13);
    const auto map = RffFeatureMap::sample(2, 64, 0.85, rng);
    SharedFeaturePosterior post(64, 3, 0.67);
    for (const auto& x : uniform_points(10, 2, rng)) post.append(map(x), Eigen::Vector3d(1.0, -4.0, 9.0));
    for (const auto& q : uniform_points(20, 2, rng)) {
        const Eigen::VectorXd psi = map(q);
        const double v = post.variance_from_row(post.kernel_row(psi), psi.squaredNorm());
        for (int n = 0; n < 3; ++n) EXPECT_NEAR(post.predict(n, psi).variance, v, 1e-14);
    }
}

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "game.hpp"

namespace pprucb {

struct GridOptions {
    int levels_per_coord = 3;            // lattice points per coordinate, including both ends
    std::size_t max_actions_per_player = 64;
    std::size_t max_profiles = 256;
};

/// Radical inverse of i in the given prime base.
inline double radical_inverse(std::uint64_t i, unsigned base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

inline unsigned nth_prime(std::size_t k) {
    static const unsigned primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                      43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};
    if (k >= std::size(primes)) throw ConfigError("too many Halton dimensions");
    return primes[k];
}

/// Deterministic low-discrepancy selection of at most `cap` distinct index tuples from the
/// product of ranges [0, sizes[i]). Returns the full product, lexicographically, if it fits.
inline std::vector<std::vector<std::size_t>> subsample_product(const std::vector<std::size_t>& sizes,
                                                               std::size_t cap) {
    long double total = 1.0L;
    for (auto s : sizes) total *= static_cast<long double>(s);
    std::vector<std::vector<std::size_t>> out;
    if (total == 0.0L) return out;
    if (total <= static_cast<long double>(cap)) {
        std::vector<std::size_t> idx(sizes.size(), 0);
        while (true) {
            out.push_back(idx);
            int k = static_cast<int>(sizes.size()) - 1;
            while (k >= 0 && ++idx[k] == sizes[k]) idx[k--] = 0;
            if (k < 0) break;
        }
        return out;
    }
    std::set<std::vector<std::size_t>> seen;
    const std::uint64_t max_draws = 1000 * static_cast<std::uint64_t>(cap) + 1000;
    for (std::uint64_t j = 1; j <= max_draws && out.size() < cap; ++j) {
        std::vector<std::size_t> idx(sizes.size());
        for (std::size_t d = 0; d < sizes.size(); ++d) {
            auto v = static_cast<std::size_t>(radical_inverse(j, nth_prime(d)) * sizes[d]);
            idx[d] = std::min(v, sizes[d] - 1);
        }
        if (seen.insert(idx).second) out.push_back(std::move(idx));
    }
    return out;
}

/// Uniform lattice over one player's box, filtered by the optional sum cap.
inline std::vector<Eigen::RowVectorXd> player_lattice(const Eigen::RowVectorXd& low,
                                                      const Eigen::RowVectorXd& high,
                                                      std::optional<double> cap,
                                                      const GridOptions& opt) {
    if (opt.levels_per_coord < 1) throw ConfigError("grid: levels_per_coord must be >= 1");
    const auto M = static_cast<std::size_t>(low.size());
    const auto L = static_cast<std::size_t>(opt.levels_per_coord);
    if (std::pow(static_cast<double>(L), static_cast<double>(M)) > 4.0e6)
        throw ConfigError("grid: per-player lattice too large; lower levels_per_coord");
    auto level = [&](std::size_t c, std::size_t k) {
        if (L == 1) return low[c];
        return low[c] + (high[c] - low[c]) * static_cast<double>(k) / static_cast<double>(L - 1);
    };
    std::vector<Eigen::RowVectorXd> all;
    std::vector<std::size_t> idx(M, 0);
    while (true) {
        Eigen::RowVectorXd a(M);
        for (std::size_t c = 0; c < M; ++c) a[c] = level(c, idx[c]);
        if (!cap || a.sum() <= *cap + 1e-12) all.push_back(a);
        int k = static_cast<int>(M) - 1;
        while (k >= 0 && ++idx[k] == L) idx[k--] = 0;
        if (k < 0) break;
    }
    if (all.size() <= opt.max_actions_per_player) return all;
    std::vector<Eigen::RowVectorXd> picked;
    for (const auto& t : subsample_product({all.size()}, opt.max_actions_per_player))
        picked.push_back(all[t[0]]);
    return picked;
}

/// Cartesian product of per-player lattices, subsampled to opt.max_profiles.
inline std::vector<ActionProfile> build_grid(int num_players, int per_player_dim,
                                             const ActionBounds& bounds, const GridOptions& opt) {
    std::vector<std::vector<Eigen::RowVectorXd>> per_player;
    std::vector<std::size_t> sizes;
    for (int n = 0; n < num_players; ++n) {
        per_player.push_back(player_lattice(bounds.low.row(n), bounds.high.row(n), bounds.row_cap, opt));
        sizes.push_back(per_player.back().size());
    }
    std::vector<ActionProfile> grid;
    for (const auto& tuple : subsample_product(sizes, opt.max_profiles)) {
        Eigen::MatrixXd v(num_players, per_player_dim);
        for (int n = 0; n < num_players; ++n) v.row(n) = per_player[n][tuple[n]];
        grid.emplace_back(std::move(v));
    }
    return grid;
}

/// Grid index closest (Euclidean, lowest index on ties) to the equal split of each player's
/// cap across its coordinates, or to the box midpoint without a cap.
inline std::size_t equal_allocation_index(const GameSpec& spec) {
    const auto& b = spec.bounds();
    Eigen::MatrixXd target = 0.5 * (b.low + b.high);
    if (b.row_cap) {
        for (Eigen::Index r = 0; r < target.rows(); ++r)
            for (Eigen::Index c = 0; c < target.cols(); ++c)
                target(r, c) = std::clamp(*b.row_cap / static_cast<double>(target.cols()),
                                          b.low(r, c), b.high(r, c));
    }
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < spec.grid_size(); ++g) {
        const double d = (spec.grid()[g].values - target).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = g;
        }
    }
    return best;
}

} // namespace pprucb

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <memory>
#include <numbers>
#include <ostream>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "game.hpp"
#include "grid.hpp"
#include "rng.hpp"

namespace pprucb::cellular {

struct NetworkConfig {
    int num_bs = 7;
    int num_ue_per_bs = 10;
    int tx_antennas = 16;
    int rx_antennas = 4;
    double cell_radius_m = 200.0;
    double ue_distance_min_m = 20.0;
    double ue_distance_max_m = 200.0;
    double p_max_watt = 6.5;
    double noise_power_dbm = -86.46;
    double discount = 0.1;
    double carrier_ghz = 3.5;
    std::uint64_t topology_seed = 1;
    std::uint64_t channel_seed = 2;

    void validate() const {
        if (num_bs < 1 || num_ue_per_bs < 1) throw ConfigError("NetworkConfig: need >= 1 BS and UE");
        if (rx_antennas < 1 || tx_antennas < rx_antennas)
            throw ConfigError("NetworkConfig: need tx_antennas >= rx_antennas >= 1");
        if (!(p_max_watt > 0.0)) throw ConfigError("NetworkConfig: p_max_watt must be > 0");
        if (!(discount >= 0.0)) throw ConfigError("NetworkConfig: discount must be >= 0");
        if (!(carrier_ghz > 0.0)) throw ConfigError("NetworkConfig: carrier_ghz must be > 0");
        if (!(ue_distance_min_m > 0.0) || ue_distance_max_m < ue_distance_min_m ||
            ue_distance_max_m > cell_radius_m)
            throw ConfigError("NetworkConfig: UE distance interval must lie in (0, cell_radius_m]");
    }

    double noise_floor() const { return std::pow(10.0, noise_power_dbm / 10.0); }
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Topology {
    std::vector<Point> bs_positions;               // N
    std::vector<std::vector<Point>> ue_positions;  // N x M, UE m of cell n served by BS n
};

/// Hexagonal lattice sites with inter-site distance 2 * radius, nearest to the origin first.
inline std::vector<Point> hex_sites(int count, double radius) {
    const double isd = 2.0 * radius;
    int rings = 0;
    while (1 + 3 * rings * (rings + 1) < count) ++rings;
    struct Site {
        int ring;
        double angle;
        Point p;
    };
    std::vector<Site> sites;
    for (int q = -rings; q <= rings; ++q) {
        for (int r = -rings; r <= rings; ++r) {
            const int s = -q - r;
            const int ring = std::max({std::abs(q), std::abs(r), std::abs(s)});
            if (ring > rings) continue;
            Point p{isd * (q + 0.5 * r), isd * (std::sqrt(3.0) / 2.0 * r)};
            double a = std::atan2(p.y, p.x);
            if (a < 0) a += 2.0 * std::numbers::pi;
            sites.push_back({ring, ring == 0 ? 0.0 : a, p});
        }
    }
    std::sort(sites.begin(), sites.end(), [](const Site& a, const Site& b) {
        return a.ring != b.ring ? a.ring < b.ring : a.angle < b.angle - 1e-12;
    });
    std::vector<Point> out;
    for (int i = 0; i < count; ++i) out.push_back(sites[i].p);
    return out;
}

inline Topology generate_topology(const NetworkConfig& cfg) {
    cfg.validate();
    Topology topo;
    topo.bs_positions = hex_sites(cfg.num_bs, cfg.cell_radius_m);
    Rng rng(cfg.topology_seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> dist(cfg.ue_distance_min_m, cfg.ue_distance_max_m);
    topo.ue_positions.resize(cfg.num_bs);
    for (int n = 0; n < cfg.num_bs; ++n) {
        for (int m = 0; m < cfg.num_ue_per_bs; ++m) {
            const double a = angle(rng);
            const double d = dist(rng);
            const Point bs = topo.bs_positions[n];
            topo.ue_positions[n].push_back({bs.x + d * std::cos(a), bs.y + d * std::sin(a)});
        }
    }
    return topo;
}

/// UMi street-canyon pathloss in dB (sub-breakpoint LOS; NLOS floored at LOS).
inline double pathloss_db(double d_m, bool los, double fc_ghz) {
    if (!(d_m > 0.0)) throw std::domain_error("pathloss_db: distance must be > 0");
    const double pl_los = 32.4 + 21.0 * std::log10(d_m) + 20.0 * std::log10(fc_ghz);
    if (los) return pl_los;
    return std::max(pl_los, 35.3 * std::log10(d_m) + 22.4 + 21.3 * std::log10(fc_ghz));
}

/// UMi LOS probability.
inline double los_probability(double d_m) {
    if (d_m <= 18.0) return 1.0;
    return 18.0 / d_m + std::exp(-d_m / 36.0) * (1.0 - 18.0 / d_m);
}

inline constexpr double kShadowStdLosDb = 4.0;
inline constexpr double kShadowStdNlosDb = 7.82;

struct Link {
    double distance_m = 0.0;
    double pathloss_db = 0.0;
    bool los = false;
    double shadowing_db = 0.0;
    Eigen::MatrixXcd h;     // N_R x N_T
    Eigen::MatrixXcd gram;  // h h^H
};

/// Channels from every BS n to every UE m of every cell n'.
class ChannelSet {
public:
    ChannelSet(int num_bs, int num_ue, int rx, int tx)
        : num_bs_(num_bs), num_ue_(num_ue), rx_(rx), tx_(tx),
          links_(static_cast<std::size_t>(num_bs) * num_bs * num_ue) {}

    int num_bs() const { return num_bs_; }
    int num_ue() const { return num_ue_; }
    int rx_antennas() const { return rx_; }
    int tx_antennas() const { return tx_; }

    /// Link from BS `tx_bs` to UE `ue` served by BS `cell`.
    Link& link(int tx_bs, int cell, int ue) { return links_[index(tx_bs, cell, ue)]; }
    const Link& link(int tx_bs, int cell, int ue) const { return links_[index(tx_bs, cell, ue)]; }

    /// Binary dump: "PPRC", uint32 rank = 5, uint32 dims {N, N, M, N_R, N_T}, then complex64
    /// (float re, float im) in row-major order over those dims. All little-endian.
    void write_binary(std::ostream& os) const {
        os.write("PPRC", 4);
        put_u32(os, 5);
        for (int d : {num_bs_, num_bs_, num_ue_, rx_, tx_}) put_u32(os, static_cast<std::uint32_t>(d));
        for (const auto& l : links_)
            for (int r = 0; r < rx_; ++r)
                for (int c = 0; c < tx_; ++c) {
                    put_f32(os, static_cast<float>(l.h(r, c).real()));
                    put_f32(os, static_cast<float>(l.h(r, c).imag()));
                }
    }

private:
    std::size_t index(int tx_bs, int cell, int ue) const {
        return (static_cast<std::size_t>(tx_bs) * num_bs_ + cell) * num_ue_ + ue;
    }
    static void put_u32(std::ostream& os, std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        os.write(reinterpret_cast<const char*>(b), 4);
    }
    static void put_f32(std::ostream& os, float f) {
        std::uint32_t v;
        std::memcpy(&v, &f, 4);
        put_u32(os, v);
    }

    int num_bs_, num_ue_, rx_, tx_;
    std::vector<Link> links_;
};

/// Per link: LOS by the UMi probability rule, lognormal shadowing, i.i.d. CN(0,1) fast fading.
inline ChannelSet sample_channels(const NetworkConfig& cfg, const Topology& topo) {
    cfg.validate();
    ChannelSet ch(cfg.num_bs, cfg.num_ue_per_bs, cfg.rx_antennas, cfg.tx_antennas);
    Rng rng(cfg.channel_seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double half = std::sqrt(0.5);
    for (int n = 0; n < cfg.num_bs; ++n) {
        for (int cell = 0; cell < cfg.num_bs; ++cell) {
            for (int m = 0; m < cfg.num_ue_per_bs; ++m) {
                Link& l = ch.link(n, cell, m);
                l.distance_m = std::max(distance(topo.bs_positions[n], topo.ue_positions[cell][m]), 1.0);
                l.los = unif(rng) < los_probability(l.distance_m);
                l.pathloss_db = pathloss_db(l.distance_m, l.los, cfg.carrier_ghz);
                l.shadowing_db = normal(rng) * (l.los ? kShadowStdLosDb : kShadowStdNlosDb);
                const double scale =
                    std::pow(10.0, -l.pathloss_db / 20.0) * std::pow(10.0, -l.shadowing_db / 20.0);
                l.h.resize(cfg.rx_antennas, cfg.tx_antennas);
                for (int r = 0; r < cfg.rx_antennas; ++r)
                    for (int c = 0; c < cfg.tx_antennas; ++c) {
                        const double re = normal(rng) * half;
                        const double im = normal(rng) * half;
                        l.h(r, c) = scale * std::complex<double>(re, im);
                    }
                l.gram = l.h * l.h.adjoint();
            }
        }
    }
    return ch;
}

/// Interference-plus-noise covariance at UE m of cell n for profile x (N x M powers).
inline Eigen::MatrixXcd interference_covariance(const ActionProfile& x, const ChannelSet& ch, int n,
                                                int m, const NetworkConfig& cfg) {
    const int R = ch.rx_antennas();
    Eigen::MatrixXcd gamma = Eigen::MatrixXcd::Identity(R, R) * cfg.noise_floor();
    const Link& own = ch.link(n, n, m);
    if (!own.h.allFinite()) throw NumericError("interference_covariance: non-finite channel");
    const double intra = x.values.row(n).sum() - x.values(n, m);
    if (intra != 0.0) gamma += intra * own.gram;
    for (int other = 0; other < ch.num_bs(); ++other) {
        if (other == n) continue;
        const double p = x.values.row(other).sum();
        if (p == 0.0) continue;
        const Link& l = ch.link(other, n, m);
        if (!l.h.allFinite()) throw NumericError("interference_covariance: non-finite channel");
        gamma += p * l.gram;
    }
    return gamma;
}

/// ln det of a Hermitian positive-definite matrix.
inline double hpd_logdet(const Eigen::MatrixXcd& a) {
    Eigen::LLT<Eigen::MatrixXcd> llt(a);
    if (llt.info() != Eigen::Success) throw NumericError("hpd_logdet: matrix not positive definite");
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) s += std::log(llt.matrixLLT()(i, i).real());
    return 2.0 * s;
}

/// Discounted sum spectral efficiency of BS n, in nats.
inline double utility(const ActionProfile& x, const ChannelSet& ch, int n, const NetworkConfig& cfg) {
    double u = -cfg.discount * x.values.row(n).sum();
    for (int m = 0; m < ch.num_ue(); ++m) {
        const double p = x.values(n, m);
        if (p == 0.0) continue;
        const Eigen::MatrixXcd gamma = interference_covariance(x, ch, n, m, cfg);
        // ln det(I + p G^-1 A) = ln det(G + p A) - ln det(G)
        u += hpd_logdet(gamma + p * ch.link(n, n, m).gram) - hpd_logdet(gamma);
    }
    if (!std::isfinite(u)) throw NumericError("utility: non-finite value");
    return u;
}

struct PowerGame {
    NetworkConfig config;
    std::shared_ptr<const Topology> topology;
    std::shared_ptr<const ChannelSet> channels;
    UtilityOracle oracle;
    GameSpec spec;
};

/// Freezes one topology and one channel draw and exposes the utilities as an oracle over a
/// capped power grid.
inline PowerGame power_game_oracle(const NetworkConfig& cfg, const GridOptions& grid_opt,
                                   double noise_std, std::uint64_t noise_seed) {
    cfg.validate();
    auto topo = std::make_shared<const Topology>(generate_topology(cfg));
    auto ch = std::make_shared<const ChannelSet>(sample_channels(cfg, *topo));
    ActionBounds bounds =
        ActionBounds::uniform(cfg.num_bs, cfg.num_ue_per_bs, 0.0, cfg.p_max_watt, cfg.p_max_watt);
    std::vector<ActionProfile> grid = build_grid(cfg.num_bs, cfg.num_ue_per_bs, bounds, grid_opt);
    if (grid.empty()) throw ConfigError("power_game_oracle: empty grid after cap filtering");
    auto eval = [cfg, ch](const ActionProfile& x) {
        Eigen::VectorXd u(cfg.num_bs);
        for (int n = 0; n < cfg.num_bs; ++n) u[n] = utility(x, *ch, n, cfg);
        return u;
    };
    UtilityOracle oracle(cfg.num_bs, eval, bounds, noise_std, noise_seed);
    GameSpec spec(cfg.num_bs, cfg.num_ue_per_bs, bounds, std::move(grid));
    return PowerGame{cfg, std::move(topo), std::move(ch), std::move(oracle), std::move(spec)};
}

} // namespace pprucb::cellular

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <nlohmann/json.hpp>

#include "acquisition.hpp"
#include "baselines.hpp"
#include "cellular.hpp"
#include "errors.hpp"
#include "game.hpp"
#include "games.hpp"
#include "grid.hpp"
#include "surrogate.hpp"

namespace pprucb {

using json = nlohmann::json;

namespace io {

/// Rejects keys outside `allowed` so typos in configs fail loudly.
inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError(where + ": unknown key \"" + key + "\"");
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("key \"") + key + "\": " + e.what());
    }
}

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing key \"" + key + "\"");
    return get_or<T>(j, key, T{});
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a nonempty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].is_array() ? j[0].size() : 0);
    if (cols == 0) throw ConfigError(where + ": rows must be nonempty arrays");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw ConfigError(where + ": ragged matrix at row " + std::to_string(r));
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (!row[static_cast<std::size_t>(c)].is_number())
                throw ConfigError(where + ": non-numeric entry at row " + std::to_string(r));
            m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
    }
    return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Eigen::VectorXd vector_from_json(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(where + ": non-numeric entry " + std::to_string(i));
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

/// Little-endian float64 payload as padded base64.
inline std::string encode_f64(const double* data, std::size_t count) {
    std::string bytes(count * 8, '\0');
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &data[i], 8);
        for (int k = 0; k < 8; ++k) bytes[i * 8 + k] = static_cast<char>((bits >> (8 * k)) & 0xffu);
    }
    using namespace boost::archive::iterators;
    using Enc = base64_from_binary<transform_width<std::string::const_iterator, 6, 8>>;
    std::string out(Enc(bytes.cbegin()), Enc(bytes.cend()));
    out.append((3 - bytes.size() % 3) % 3, '=');
    return out;
}

inline std::vector<double> decode_f64(const std::string& text, std::size_t expected, const std::string& where) {
    std::string body = text;
    const std::size_t pad = static_cast<std::size_t>(std::count(body.end() - std::min<std::size_t>(2, body.size()), body.end(), '='));
    if (body.size() % 4 != 0) throw ConfigError(where + ": base64 length is not a multiple of 4");
    std::replace(body.end() - static_cast<std::ptrdiff_t>(pad), body.end(), '=', 'A');
    std::string bytes;
    try {
        using namespace boost::archive::iterators;
        using Dec = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
        bytes.assign(Dec(body.cbegin()), Dec(body.cend()));
    } catch (const std::exception& e) {
        throw ConfigError(where + ": invalid base64 payload: " + e.what());
    }
    bytes.resize(bytes.size() - pad);
    if (bytes.size() != expected * 8)
        throw ConfigError(where + ": payload holds " + std::to_string(bytes.size() / 8) + " values, expected " +
                          std::to_string(expected));
    std::vector<double> out(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + k])) << (8 * k);
        std::memcpy(&out[i], &bits, 8);
    }
    return out;
}

} // namespace io

// ---- profiles and games ----

inline json to_json(const ActionProfile& x) { return io::matrix_to_json(x.values); }

inline ActionProfile profile_from_json(const json& j, int num_players, int per_player_dim, const std::string& where) {
    Eigen::MatrixXd m = io::matrix_from_json(j, where);
    if (m.rows() != num_players || m.cols() != per_player_dim)
        throw ConfigError(where + ": profile must be " + std::to_string(num_players) + "x" +
                          std::to_string(per_player_dim));
    return ActionProfile(std::move(m));
}

/// {"players": N, "actions_per_player": [k_1..k_N], "payoffs": nested arrays indexed by each
/// player's action, innermost an N-vector of utilities}.
inline NormalFormGame normal_form_from_json(const json& j) {
    io::check_keys(j, {"players", "actions_per_player", "payoffs"}, "normal-form game");
    const int N = io::require<int>(j, "players", "normal-form game");
    const auto actions = io::require<std::vector<int>>(j, "actions_per_player", "normal-form game");
    if (static_cast<int>(actions.size()) != N) throw ConfigError("normal-form game: actions_per_player length != players");
    for (int k : actions)
        if (k < 1) throw ConfigError("normal-form game: every player needs >= 1 action");
    std::vector<Eigen::VectorXd> payoffs;
    std::vector<int> idx(static_cast<std::size_t>(N), 0);
    while (true) {
        const json* node = &j.at("payoffs");
        std::string path = "payoffs";
        for (int n = 0; n < N; ++n) {
            if (!node->is_array() || static_cast<int>(node->size()) != actions[static_cast<std::size_t>(n)])
                throw ConfigError("normal-form game: " + path + " must have " +
                                  std::to_string(actions[static_cast<std::size_t>(n)]) + " entries");
            node = &(*node)[static_cast<std::size_t>(idx[static_cast<std::size_t>(n)])];
            path += "[" + std::to_string(idx[static_cast<std::size_t>(n)]) + "]";
        }
        Eigen::VectorXd u = io::vector_from_json(*node, "normal-form game: " + path);
        if (u.size() != N) throw ConfigError("normal-form game: " + path + " must hold " + std::to_string(N) + " utilities");
        payoffs.push_back(std::move(u));
        int k = N - 1;
        while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == actions[static_cast<std::size_t>(k)]) idx[static_cast<std::size_t>(k--)] = 0;
        if (k < 0) break;
    }
    return NormalFormGame(actions, std::move(payoffs));
}

inline json to_json(const NormalFormGame& g) {
    const int N = g.num_players();
    std::function<json(int, std::vector<int>&)> build = [&](int n, std::vector<int>& a) -> json {
        if (n == N) return io::vector_to_json(g.payoff(a));
        json arr = json::array();
        for (int k = 0; k < g.actions_per_player()[static_cast<std::size_t>(n)]; ++k) {
            a[static_cast<std::size_t>(n)] = k;
            arr.push_back(build(n + 1, a));
        }
        return arr;
    };
    std::vector<int> a(static_cast<std::size_t>(N), 0);
    return {{"players", N}, {"actions_per_player", g.actions_per_player()}, {"payoffs", build(0, a)}};
}

inline json to_json(const TabulatedGame& g) {
    json grid = json::array(), extra = json::array(), util = json::array();
    for (const auto& x : g.grid) grid.push_back(to_json(x));
    for (const auto& x : g.extra_profiles) extra.push_back(to_json(x));
    for (const auto& u : g.utilities) util.push_back(io::vector_to_json(u));
    return {{"players", g.num_players},
            {"per_player_dim", g.per_player_dim},
            {"low", io::matrix_to_json(g.bounds.low)},
            {"high", io::matrix_to_json(g.bounds.high)},
            {"row_cap", g.bounds.row_cap ? json(*g.bounds.row_cap) : json(nullptr)},
            {"grid", grid},
            {"extra_profiles", extra},
            {"utilities", util}};
}

inline TabulatedGame tabulated_from_json(const json& j) {
    const std::string where = "grid game";
    io::check_keys(j, {"players", "per_player_dim", "low", "high", "row_cap", "grid", "extra_profiles", "utilities"}, where);
    TabulatedGame g;
    g.num_players = io::require<int>(j, "players", where);
    g.per_player_dim = io::require<int>(j, "per_player_dim", where);
    g.bounds.low = io::matrix_from_json(j.at("low"), where + ".low");
    g.bounds.high = io::matrix_from_json(j.at("high"), where + ".high");
    if (j.contains("row_cap") && !j.at("row_cap").is_null()) g.bounds.row_cap = j.at("row_cap").get<double>();
    if (!j.contains("grid") || !j.contains("utilities")) throw ConfigError(where + ": grid and utilities are required");
    for (const auto& x : j.at("grid")) g.grid.push_back(profile_from_json(x, g.num_players, g.per_player_dim, where + ".grid"));
    if (j.contains("extra_profiles"))
        for (const auto& x : j.at("extra_profiles"))
            g.extra_profiles.push_back(profile_from_json(x, g.num_players, g.per_player_dim, where + ".extra_profiles"));
    for (const auto& u : j.at("utilities")) g.utilities.push_back(io::vector_from_json(u, where + ".utilities"));
    return g;
}

inline json to_json(const SyntheticGameConfig& c) {
    return {{"players", c.players}, {"levels", c.levels}, {"scale", c.scale},
            {"coupling", c.coupling}, {"offset", c.offset}, {"equilibrium", c.equilibrium}};
}

inline SyntheticGameConfig synthetic_from_json(const json& j) {
    io::check_keys(j, {"players", "levels", "scale", "coupling", "offset", "equilibrium"}, "synthetic game");
    SyntheticGameConfig c;
    c.players = io::get_or(j, "players", c.players);
    c.levels = io::get_or(j, "levels", c.levels);
    c.scale = io::get_or(j, "scale", c.scale);
    c.coupling = io::get_or(j, "coupling", c.coupling);
    c.offset = io::get_or(j, "offset", c.offset);
    c.equilibrium = io::get_or(j, "equilibrium", c.equilibrium);
    return c;
}

// ---- cellular ----

inline json to_json(const cellular::NetworkConfig& c) {
    return {{"num_bs", c.num_bs},
            {"num_ue_per_bs", c.num_ue_per_bs},
            {"tx_antennas", c.tx_antennas},
            {"rx_antennas", c.rx_antennas},
            {"cell_radius_m", c.cell_radius_m},
            {"ue_distance_interval_m", {c.ue_distance_min_m, c.ue_distance_max_m}},
            {"p_max_watt", c.p_max_watt},
            {"noise_power_dbm", c.noise_power_dbm},
            {"discount", c.discount},
            {"carrier_ghz", c.carrier_ghz},
            {"topology_seed", c.topology_seed},
            {"channel_seed", c.channel_seed}};
}

inline cellular::NetworkConfig network_from_json(const json& j) {
    io::check_keys(j, {"num_bs", "num_ue_per_bs", "tx_antennas", "rx_antennas", "cell_radius_m",
                       "ue_distance_interval_m", "p_max_watt", "noise_power_dbm", "discount", "carrier_ghz",
                       "topology_seed", "channel_seed"},
                   "network");
    cellular::NetworkConfig c;
    c.num_bs = io::get_or(j, "num_bs", c.num_bs);
    c.num_ue_per_bs = io::get_or(j, "num_ue_per_bs", c.num_ue_per_bs);
    c.tx_antennas = io::get_or(j, "tx_antennas", c.tx_antennas);
    c.rx_antennas = io::get_or(j, "rx_antennas", c.rx_antennas);
    c.cell_radius_m = io::get_or(j, "cell_radius_m", c.cell_radius_m);
    if (j.contains("ue_distance_interval_m")) {
        const auto iv = io::get_or<std::vector<double>>(j, "ue_distance_interval_m", {});
        if (iv.size() != 2) throw ConfigError("network: ue_distance_interval_m must be [min, max]");
        c.ue_distance_min_m = iv[0];
        c.ue_distance_max_m = iv[1];
    }
    c.p_max_watt = io::get_or(j, "p_max_watt", c.p_max_watt);
    c.noise_power_dbm = io::get_or(j, "noise_power_dbm", c.noise_power_dbm);
    c.discount = io::get_or(j, "discount", c.discount);
    c.carrier_ghz = io::get_or(j, "carrier_ghz", c.carrier_ghz);
    c.topology_seed = io::get_or(j, "topology_seed", c.topology_seed);
    c.channel_seed = io::get_or(j, "channel_seed", c.channel_seed);
    c.validate();
    return c;
}

inline json to_json(const GridOptions& g) {
    return {{"levels_per_coord", g.levels_per_coord},
            {"max_actions_per_player", g.max_actions_per_player},
            {"max_profiles", g.max_profiles}};
}

inline GridOptions grid_from_json(const json& j) {
    io::check_keys(j, {"levels_per_coord", "max_actions_per_player", "max_profiles"}, "grid");
    GridOptions g;
    g.levels_per_coord = io::get_or(j, "levels_per_coord", g.levels_per_coord);
    g.max_actions_per_player = io::get_or(j, "max_actions_per_player", g.max_actions_per_player);
    g.max_profiles = io::get_or(j, "max_profiles", g.max_profiles);
    if (g.levels_per_coord < 1 || g.max_actions_per_player < 1 || g.max_profiles < 1)
        throw ConfigError("grid: all sizes must be >= 1");
    return g;
}

// ---- surrogate ----

inline json to_json(const SurrogateConfig& s) {
    return {{"lengthscale", s.kernel.lengthscale}, {"noise_var", s.kernel.noise_var},
            {"num_features", s.num_features}, {"delta", s.delta}};
}

inline SurrogateConfig surrogate_from_json(const json& j) {
    io::check_keys(j, {"lengthscale", "noise_var", "num_features", "delta"}, "surrogate");
    SurrogateConfig s;
    s.kernel.lengthscale = io::get_or(j, "lengthscale", s.kernel.lengthscale);
    s.kernel.noise_var = io::get_or(j, "noise_var", s.kernel.noise_var);
    s.num_features = io::get_or(j, "num_features", s.num_features);
    s.delta = io::get_or(j, "delta", s.delta);
    s.validate();
    return s;
}

/// Frequencies (row-major D x d) and phases as base64 little-endian float64.
inline json to_json(const RffFeatureMap& m) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f = m.frequencies();
    return {{"lengthscale", m.lengthscale()},
            {"dim", m.dim()},
            {"input_dim", m.input_dim()},
            {"encoding", "base64-f64le"},
            {"frequencies", io::encode_f64(f.data(), static_cast<std::size_t>(f.size()))},
            {"phases", io::encode_f64(m.phases().data(), static_cast<std::size_t>(m.phases().size()))}};
}

inline RffFeatureMap feature_map_from_json(const json& j) {
    const std::string where = "feature map";
    io::check_keys(j, {"lengthscale", "dim", "input_dim", "encoding", "frequencies", "phases"}, where);
    if (io::require<std::string>(j, "encoding", where) != "base64-f64le")
        throw ConfigError(where + ": unsupported encoding");
    const int D = io::require<int>(j, "dim", where);
    const int d = io::require<int>(j, "input_dim", where);
    if (D < 1 || d < 1) throw ConfigError(where + ": dim and input_dim must be >= 1");
    const auto f = io::decode_f64(io::require<std::string>(j, "frequencies", where),
                                  static_cast<std::size_t>(D) * static_cast<std::size_t>(d), where + ".frequencies");
    const auto b = io::decode_f64(io::require<std::string>(j, "phases", where), static_cast<std::size_t>(D), where + ".phases");
    Eigen::MatrixXd freq = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(f.data(), D, d);
    Eigen::VectorXd phase = Eigen::Map<const Eigen::VectorXd>(b.data(), D);
    return RffFeatureMap(std::move(freq), std::move(phase), io::require<double>(j, "lengthscale", where));
}

// ---- policies ----

inline json to_json(const BaselineConfig& c) {
    json j = {{"kind", std::string(to_string(c.kind))}, {"mc_samples", c.mc_samples}, {"beta", c.beta}};
    j["eps_relax"] = c.eps_relax ? json(*c.eps_relax) : json(nullptr);
    return j;
}

// ---- reports ----

inline json to_json(const EquilibriumReport& r) {
    json profiles = json::array();
    for (const auto& x : r.epsilon_pne_profiles) profiles.push_back(to_json(x));
    return {{"epsilon_star", r.epsilon_star},
            {"minimizer_ids", r.minimizer_ids},
            {"epsilon_pne_profiles", profiles},
            {"per_profile_max_regret", io::vector_to_json(r.per_profile_max_regret)}};
}

} // namespace pprucb

#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "acquisition.hpp"
#include "baselines.hpp"
#include "cellular.hpp"
#include "errors.hpp"
#include "game.hpp"
#include "games.hpp"
#include "grid.hpp"
#include "rng.hpp"
#include "serialization.hpp"

namespace pprucb {

enum class GameKind { Power, NormalForm, Grid, Synthetic };
enum class PolicyKind { PprUcb, Pe, Ucb, Random };

inline std::string_view to_string(GameKind k) {
    switch (k) {
    case GameKind::Power: return "power";
    case GameKind::NormalForm: return "normal_form";
    case GameKind::Grid: return "grid";
    case GameKind::Synthetic: return "synthetic";
    }
    return "power";
}

/// Label written to the `policy` column.
inline std::string_view policy_label(PolicyKind k) {
    switch (k) {
    case PolicyKind::PprUcb: return "ppr-ucb";
    case PolicyKind::Pe: return "pe-style";
    case PolicyKind::Ucb: return "ucb-style";
    case PolicyKind::Random: return "random";
    }
    return "ppr-ucb";
}

struct PolicySpec {
    PolicyKind kind = PolicyKind::PprUcb;
    BaselineConfig baseline;  // mc_samples / beta / eps_relax; seed is set per rep
};

struct ExperimentConfig {
    GameKind game = GameKind::Power;
    cellular::NetworkConfig network;
    GridOptions grid;
    std::optional<NormalFormGame> normal_form;
    std::optional<TabulatedGame> tabulated;
    SyntheticGameConfig synthetic;
    std::optional<double> observation_noise_var;  // unset: the surrogate's noise_var
    std::vector<PolicySpec> policies{PolicySpec{}};
    int T = 200;
    int reps = 100;
    std::uint64_t base_seed = 0;
    SurrogateConfig surrogate;
    std::string out_dir = "results";
    int workers = 1;
    bool record_timing = false;  // wall-clock ms makes outputs run-dependent

    double noise_std() const { return std::sqrt(observation_noise_var.value_or(surrogate.kernel.noise_var)); }

    void validate() const {
        if (T < 0) throw ConfigError("ExperimentConfig: T must be >= 0");
        if (reps < 1) throw ConfigError("ExperimentConfig: reps must be >= 1");
        if (workers < 1) throw ConfigError("ExperimentConfig: workers must be >= 1");
        if (policies.empty()) throw ConfigError("ExperimentConfig: at least one policy is required");
        if (observation_noise_var && !(*observation_noise_var >= 0.0))
            throw ConfigError("ExperimentConfig: observation_noise_var must be >= 0");
        if (game == GameKind::NormalForm && !normal_form) throw ConfigError("ExperimentConfig: normal_form game missing");
        if (game == GameKind::Grid && !tabulated) throw ConfigError("ExperimentConfig: grid game missing");
        surrogate.validate();
        for (const auto& p : policies) p.baseline.validate();
        if (game == GameKind::Power) network.validate();
    }
};

// ---- config JSON ----

inline json to_json(const PolicySpec& p) {
    json j = {{"kind", std::string(policy_label(p.kind))}};
    if (p.kind == PolicyKind::Pe) {
        j["mc_samples"] = p.baseline.mc_samples;
        j["eps_relax"] = p.baseline.eps_relax ? json(*p.baseline.eps_relax) : json(nullptr);
    }
    if (p.kind == PolicyKind::Ucb) j["beta"] = p.baseline.beta;
    return j;
}

inline PolicySpec policy_from_json(const json& j) {
    io::check_keys(j, {"kind", "mc_samples", "beta", "eps_relax"}, "policy");
    const auto kind = io::require<std::string>(j, "kind", "policy");
    PolicySpec p;
    if (kind == "ppr-ucb" || kind == "ppr_ucb") p.kind = PolicyKind::PprUcb;
    else if (kind == "pe" || kind == "pe-style") p.kind = PolicyKind::Pe;
    else if (kind == "ucb" || kind == "ucb-style") p.kind = PolicyKind::Ucb;
    else if (kind == "random") p.kind = PolicyKind::Random;
    else throw ConfigError("policy: unknown kind \"" + kind + "\"");
    p.baseline.kind = p.kind == PolicyKind::Pe ? BaselineKind::Pe
                    : p.kind == PolicyKind::Ucb ? BaselineKind::Ucb
                                                : BaselineKind::Random;
    p.baseline.mc_samples = io::get_or(j, "mc_samples", p.baseline.mc_samples);
    p.baseline.beta = io::get_or(j, "beta", p.baseline.beta);
    if (j.contains("eps_relax") && !j.at("eps_relax").is_null()) p.baseline.eps_relax = j.at("eps_relax").get<double>();
    p.baseline.validate();
    return p;
}

inline json to_json(const ExperimentConfig& c) {
    json game = {{"kind", std::string(to_string(c.game))}};
    switch (c.game) {
    case GameKind::Power:
        game["network"] = to_json(c.network);
        game["grid"] = to_json(c.grid);
        break;
    case GameKind::NormalForm: game["game"] = to_json(*c.normal_form); break;
    case GameKind::Grid: game["game"] = to_json(*c.tabulated); break;
    case GameKind::Synthetic: game["synthetic"] = to_json(c.synthetic); break;
    }
    json policies = json::array();
    for (const auto& p : c.policies) policies.push_back(to_json(p));
    return {{"game", game},
            {"policies", policies},
            {"T", c.T},
            {"reps", c.reps},
            {"base_seed", c.base_seed},
            {"surrogate", to_json(c.surrogate)},
            {"observation_noise_var", c.observation_noise_var ? json(*c.observation_noise_var) : json(nullptr)},
            {"out_dir", c.out_dir},
            {"workers", c.workers},
            {"record_timing", c.record_timing}};
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// `base_dir` resolves relative "file" references inside the game block.
inline ExperimentConfig experiment_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
    io::check_keys(j, {"game", "policies", "T", "reps", "base_seed", "surrogate", "observation_noise_var", "out_dir",
                       "workers", "record_timing"},
                   "config");
    ExperimentConfig c;
    if (j.contains("game")) {
        const json& g = j.at("game");
        io::check_keys(g, {"kind", "network", "grid", "game", "file", "synthetic"}, "config.game");
        const auto kind = io::require<std::string>(g, "kind", "config.game");
        auto inline_or_file = [&]() -> json {
            if (g.contains("game")) return g.at("game");
            if (g.contains("file")) return read_json_file(base_dir / g.at("file").get<std::string>());
            throw ConfigError("config.game: \"" + kind + "\" needs \"game\" or \"file\"");
        };
        if (kind == "power") {
            c.game = GameKind::Power;
            if (g.contains("network")) c.network = network_from_json(g.at("network"));
            if (g.contains("grid")) c.grid = grid_from_json(g.at("grid"));
        } else if (kind == "normal_form") {
            c.game = GameKind::NormalForm;
            c.normal_form = normal_form_from_json(inline_or_file());
        } else if (kind == "grid") {
            c.game = GameKind::Grid;
            c.tabulated = tabulated_from_json(inline_or_file());
        } else if (kind == "synthetic") {
            c.game = GameKind::Synthetic;
            if (g.contains("synthetic")) c.synthetic = synthetic_from_json(g.at("synthetic"));
        } else {
            throw ConfigError("config.game: unknown kind \"" + kind + "\"");
        }
    }
    if (j.contains("policies")) {
        c.policies.clear();
        for (const auto& p : j.at("policies")) c.policies.push_back(policy_from_json(p));
    }
    c.T = io::get_or(j, "T", c.T);
    c.reps = io::get_or(j, "reps", c.reps);
    c.base_seed = io::get_or(j, "base_seed", c.base_seed);
    if (j.contains("surrogate")) c.surrogate = surrogate_from_json(j.at("surrogate"));
    if (j.contains("observation_noise_var") && !j.at("observation_noise_var").is_null())
        c.observation_noise_var = j.at("observation_noise_var").get<double>();
    c.out_dir = io::get_or(j, "out_dir", c.out_dir);
    c.workers = io::get_or(j, "workers", c.workers);
    c.record_timing = io::get_or(j, "record_timing", c.record_timing);
    c.validate();
    return c;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
    return experiment_from_json(read_json_file(path), path.parent_path());
}

// ---- instances ----

/// Seed of replication `rep`.
inline std::uint64_t rep_seed(const ExperimentConfig& c, int rep) { return c.base_seed + static_cast<std::uint64_t>(rep); }

/// The game of one replication: the power game redraws topology and channels from the
/// rep seed; every game draws its observation noise from the "noise" substream.
inline GameInstance build_instance(const ExperimentConfig& c, std::uint64_t seed) {
    const std::uint64_t noise_seed = substream_seed(seed, "noise");
    switch (c.game) {
    case GameKind::Power: {
        cellular::NetworkConfig net = c.network;
        net.topology_seed = substream_seed(seed, "topology");
        net.channel_seed = substream_seed(seed, "channels");
        auto pg = cellular::power_game_oracle(net, c.grid, c.noise_std(), noise_seed);
        return {std::move(pg.oracle), std::move(pg.spec)};
    }
    case GameKind::NormalForm: return normal_form_instance(*c.normal_form, c.noise_std(), noise_seed);
    case GameKind::Grid: return tabulated_instance(*c.tabulated, c.noise_std(), noise_seed);
    case GameKind::Synthetic: return synthetic_instance(c.synthetic, c.noise_std(), noise_seed);
    }
    throw ConfigError("unknown game kind");
}

inline PolicyStep make_policy(const PolicySpec& p, std::uint64_t seed) {
    if (p.kind == PolicyKind::PprUcb) return ppr_ucb_step;
    BaselineConfig b = p.baseline;
    b.seed = seed;
    return make_baseline_policy(b);
}

// ---- CSV ----

/// Shortest round-trip decimal form.
inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) v = 0.0;  // no "-0"
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::vector<std::string> trajectory_header(int num_players) {
    std::vector<std::string> h{"rep", "seed", "iter", "profile_id"};
    for (int n = 1; n <= num_players; ++n) h.push_back("y_" + std::to_string(n));
    for (const char* c : {"sum_se", "max_true_regret", "regret_gap", "interval_flag", "policy", "ms"}) h.push_back(c);
    return h;
}

inline std::string join_csv(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    return out;
}

/// One trajectory row; `y` empty on the initialization row.
struct RunRecord {
    int rep = 0;
    std::uint64_t seed = 0;
    int iter = 0;
    std::size_t profile_id = 0;
    Eigen::VectorXd y;
    double sum_se = 0.0;
    double max_true_regret = 0.0;
    double regret_gap = 0.0;
    IntervalFlag flag = IntervalFlag::None;
    std::string policy;
    std::optional<double> ms;

    std::string to_csv(int num_players) const {
        std::vector<std::string> cells{std::to_string(rep), std::to_string(seed), std::to_string(iter),
                                       std::to_string(profile_id)};
        for (int n = 0; n < num_players; ++n) cells.push_back(y.size() ? fmt_double(y[n]) : "");
        cells.push_back(fmt_double(sum_se));
        cells.push_back(fmt_double(max_true_regret));
        cells.push_back(fmt_double(regret_gap));
        cells.emplace_back(to_string(flag));
        cells.push_back(policy);
        cells.push_back(ms ? fmt_double(*ms) : "");
        return join_csv(cells);
    }
};

/// Linear-interpolation percentile (closest-rank interpolation), q in [0, 1].
inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) throw PreconditionError("percentile: empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline const std::vector<std::string>& aggregate_metrics() {
    static const std::vector<std::string> m{"sum_se", "max_true_regret", "regret_gap"};
    return m;
}

inline std::vector<std::string> aggregate_header() {
    std::vector<std::string> h{"policy", "iter", "reps"};
    for (const auto& m : aggregate_metrics())
        for (const char* s : {"_mean", "_p05", "_p95"}) h.push_back(m + s);
    return h;
}

/// Row cells for one (policy, iter) across reps: mean, 5th and 95th percentile per metric.
inline std::vector<std::string> aggregate_cells(const std::vector<const RunRecord*>& rows) {
    std::vector<std::string> cells;
    for (const auto& m : aggregate_metrics()) {
        std::vector<double> v;
        for (const RunRecord* r : rows)
            v.push_back(m == "sum_se" ? r->sum_se : m == "max_true_regret" ? r->max_true_regret : r->regret_gap);
        cells.push_back(fmt_double(mean(v)));
        cells.push_back(fmt_double(percentile(v, 0.05)));
        cells.push_back(fmt_double(percentile(v, 0.95)));
    }
    return cells;
}

// ---- experiment ----

struct PolicyOutcome {
    std::string policy;
    std::size_t final_id = 0;           // x_T (universe id)
    std::size_t final_reported_id = 0;  // reported profile of the last step (grid id)
    double final_regret_gap = 0.0;
    std::size_t incumbent_id = 0;       // reported profile with the smallest max regret upper bound
    double incumbent_regret_gap = 0.0;
};

struct RepResult {
    int rep = 0;
    std::uint64_t seed = 0;
    int num_players = 0;
    double epsilon_star = 0.0;
    std::vector<RunRecord> records;  // policy-major, iter-minor
    std::vector<PolicyOutcome> outcomes;
};

struct ExperimentResult {
    std::vector<RepResult> reps;
    std::filesystem::path out_dir;
};

inline void ensure_writable(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    const auto probe = dir / ".write_probe";
    {
        std::ofstream out(probe);
        if (!out || !(out << "ok")) throw IoError("output directory is not writable: " + dir.string());
    }
    std::filesystem::remove(probe, ec);
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

inline std::string rep_name(const char* prefix, int rep, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_rep%03d.%s", prefix, rep, ext);
    return buf;
}

/// Runs every policy of one replication, streaming rows to `csv` when given.
inline RepResult run_replication(const ExperimentConfig& cfg, int rep, std::ostream* csv = nullptr) {
    RepResult out;
    out.rep = rep;
    out.seed = rep_seed(cfg, rep);
    GameInstance base = build_instance(cfg, out.seed);
    const GameSpec& spec = base.spec;
    const int N = spec.num_players();
    out.num_players = N;
    const ProfileUniverse universe(spec);
    const Eigen::MatrixXd utilities = tabulate_utilities(base.oracle, universe);
    const EquilibriumReport eq = epsilon_star_from_regrets(regret_table(utilities, universe, N), spec);
    out.epsilon_star = eq.epsilon_star;
    if (csv) *csv << join_csv(trajectory_header(N)) << '\n';

    for (const PolicySpec& ps : cfg.policies) {
        const std::string label(policy_label(ps.kind));
        UtilityOracle oracle = base.oracle.reseeded(substream_seed(out.seed, "noise"));
        AcquisitionState state(spec, cfg.surrogate, out.seed);
        PolicyStep step = make_policy(ps, out.seed);
        auto emit = [&](RunRecord r) {
            if (csv) *csv << r.to_csv(N) << '\n';
            out.records.push_back(std::move(r));
        };
        const std::size_t init = equal_allocation_index(spec);
        RunRecord r0;
        r0.rep = rep;
        r0.seed = out.seed;
        r0.iter = 0;
        r0.profile_id = init;
        r0.sum_se = utilities.row(static_cast<Eigen::Index>(init)).sum();
        r0.max_true_regret = eq.per_profile_max_regret[static_cast<Eigen::Index>(init)];
        r0.regret_gap = r0.max_true_regret - eq.epsilon_star;
        r0.policy = label;
        if (cfg.record_timing) r0.ms = 0.0;
        emit(r0);

        PolicyOutcome po;
        po.policy = label;
        po.final_id = po.final_reported_id = po.incumbent_id = init;
        po.final_regret_gap = po.incumbent_regret_gap = r0.regret_gap;
        double incumbent_bound = std::numeric_limits<double>::infinity();
        auto clock = std::chrono::steady_clock::now();
        int iter = 0;
        run_loop(state, oracle, cfg.T, step, [&](const StepTrace& tr) {
            ++iter;
            RunRecord r;
            r.rep = rep;
            r.seed = out.seed;
            r.iter = iter;
            r.profile_id = tr.chosen_id;
            r.y = tr.observation;
            r.sum_se = utilities.row(static_cast<Eigen::Index>(tr.chosen_id)).sum();
            r.max_true_regret = eq.per_profile_max_regret[static_cast<Eigen::Index>(tr.reported_id)];
            r.regret_gap = r.max_true_regret - eq.epsilon_star;
            r.flag = tr.flag;
            r.policy = label;
            if (cfg.record_timing) {
                const auto now = std::chrono::steady_clock::now();
                r.ms = std::chrono::duration<double, std::milli>(now - clock).count();
                clock = now;
            }
            const double bound = tr.regret_upper.maxCoeff();
            if (bound < incumbent_bound) {
                incumbent_bound = bound;
                po.incumbent_id = tr.reported_id;
                po.incumbent_regret_gap = r.regret_gap;
            }
            po.final_id = tr.chosen_id;
            po.final_reported_id = tr.reported_id;
            po.final_regret_gap = r.regret_gap;
            emit(std::move(r));
        });
        out.outcomes.push_back(po);
    }
    return out;
}

inline json summary_json(const RepResult& r) {
    json pol = json::array();
    for (const auto& o : r.outcomes)
        pol.push_back({{"policy", o.policy},
                       {"final_profile_id", o.final_id},
                       {"final_reported_id", o.final_reported_id},
                       {"final_regret_gap", o.final_regret_gap},
                       {"incumbent_id", o.incumbent_id},
                       {"incumbent_regret_gap", o.incumbent_regret_gap}});
    return {{"rep", r.rep}, {"seed", r.seed}, {"epsilon_star", r.epsilon_star}, {"policies", pol}};
}

/// Aggregate rows keyed by (policy order, iter).
inline std::vector<std::vector<std::string>> aggregate_rows(const ExperimentConfig& cfg, const std::vector<RepResult>& reps) {
    std::vector<std::vector<std::string>> rows;
    for (const PolicySpec& ps : cfg.policies) {
        const std::string label(policy_label(ps.kind));
        for (int it = 0; it <= cfg.T; ++it) {
            std::vector<const RunRecord*> at;
            for (const auto& rr : reps)
                for (const auto& rec : rr.records)
                    if (rec.policy == label && rec.iter == it) at.push_back(&rec);
            if (at.empty()) continue;
            std::vector<std::string> row{label, std::to_string(it), std::to_string(at.size())};
            for (auto& c : aggregate_cells(at)) row.push_back(std::move(c));
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

/// Per-rep trajectory CSV and summary JSON, then aggregate.csv after all reps finish.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::filesystem::path dir(cfg.out_dir);
    ensure_writable(dir);
    {
        json echo = to_json(cfg);
        echo.erase("out_dir");  // results stay comparable across output locations
        auto out = open_output(dir / "config.json");
        out << echo.dump(2) << '\n';
    }
    ExperimentResult result;
    result.out_dir = dir;
    result.reps.resize(static_cast<std::size_t>(cfg.reps));
    std::atomic<int> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (int r = next++; r < cfg.reps; r = next++) {
            try {
                auto csv = open_output(dir / rep_name("trajectory", r, "csv"));
                RepResult rr = run_replication(cfg, r, &csv);
                if (!csv.flush()) throw IoError("write failed for " + rep_name("trajectory", r, "csv"));
                auto sum = open_output(dir / rep_name("summary", r, "json"));
                sum << summary_json(rr).dump(2) << '\n';
                result.reps[static_cast<std::size_t>(r)] = std::move(rr);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!first_error) first_error = std::current_exception();
                next = cfg.reps;
            }
        }
    };
    const int nthreads = std::min(cfg.workers, cfg.reps);
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    auto agg = open_output(dir / "aggregate.csv");
    agg << join_csv(aggregate_header()) << '\n';
    for (const auto& row : aggregate_rows(cfg, result.reps)) agg << join_csv(row) << '\n';
    if (!agg.flush()) throw IoError("write failed for aggregate.csv");
    return result;
}

/// Copy of `cfg` with the player count changed; only the power and synthetic games scale.
inline ExperimentConfig with_players(ExperimentConfig cfg, int players) {
    if (players < 2) throw ConfigError("sweep: player counts must be >= 2");
    switch (cfg.game) {
    case GameKind::Power: cfg.network.num_bs = players; break;
    case GameKind::Synthetic:
        cfg.synthetic.players = players;
        cfg.synthetic.equilibrium.resize(static_cast<std::size_t>(players));
        for (int n = 0; n < players; ++n) cfg.synthetic.equilibrium[static_cast<std::size_t>(n)] = n % 2 == 0 ? 0.75 : 0.25;
        break;
    default: throw ConfigError("sweep: game kind \"" + std::string(to_string(cfg.game)) + "\" has a fixed player count");
    }
    return cfg;
}

inline std::vector<std::string> sweep_header() {
    auto h = aggregate_header();
    h.insert(h.begin(), "players");
    return h;
}

/// One run_experiment per player count under out_dir/players_<N>; sweep.csv holds the
/// final-iteration aggregate row of every (N, policy).
inline std::filesystem::path sweep_players(const ExperimentConfig& cfg, const std::vector<int>& players) {
    if (players.empty()) throw std::invalid_argument("sweep_players: empty player list");
    const std::filesystem::path root(cfg.out_dir);
    ensure_writable(root);
    std::vector<std::vector<std::string>> rows;
    for (int N : players) {
        ExperimentConfig c = with_players(cfg, N);
        c.out_dir = (root / ("players_" + std::to_string(N))).string();
        ExperimentResult res = run_experiment(c);
        for (auto& row : aggregate_rows(c, res.reps)) {
            if (row[1] != std::to_string(c.T)) continue;
            row.insert(row.begin(), std::to_string(N));
            rows.push_back(std::move(row));
        }
    }
    const auto path = root / "sweep.csv";
    auto out = open_output(path);
    out << join_csv(sweep_header()) << '\n';
    for (const auto& row : rows) out << join_csv(row) << '\n';
    return path;
}

inline constexpr std::size_t kOracleProfileLimit = 1'000'000;

/// Exhaustive equilibrium report for the game of seed `seed`; refuses oversized grids.
inline EquilibriumReport oracle_command(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (cfg.game == GameKind::NormalForm) {
        const auto n = cfg.normal_form->num_profiles();
        if (n > kOracleProfileLimit)
            throw ConfigError("oracle: grid has " + std::to_string(n) + " profiles, limit is " +
                              std::to_string(kOracleProfileLimit));
    }
    if (cfg.game == GameKind::Synthetic) {
        const double n = std::pow(static_cast<double>(cfg.synthetic.levels), cfg.synthetic.players);
        if (n > static_cast<double>(kOracleProfileLimit))
            throw ConfigError("oracle: grid has " + fmt_double(n) + " profiles, limit is " +
                              std::to_string(kOracleProfileLimit));
    }
    GameInstance g = build_instance(cfg, seed);
    if (g.spec.grid_size() > kOracleProfileLimit)
        throw ConfigError("oracle: grid has " + std::to_string(g.spec.grid_size()) + " profiles, limit is " +
                          std::to_string(kOracleProfileLimit));
    ProfileUniverse universe(g.spec);
    if (universe.size() > kOracleProfileLimit)
        throw ConfigError("oracle: " + std::to_string(universe.size()) + " profiles to evaluate, limit is " +
                          std::to_string(kOracleProfileLimit));
    return epsilon_star_from_regrets(regret_table(tabulate_utilities(g.oracle, universe), universe,
                                                  g.spec.num_players()),
                                     g.spec);
}

// ---- plot data ----

/// Header-checked CSV table.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ConfigError("CSV schema: missing column \"" + name + "\"");
        return static_cast<std::size_t>(it - header.begin());
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty CSV");
    t.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != t.header.size())
            throw ConfigError(path.string() + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                              std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    return t;
}

/// One figure for the plotting component.
struct PlotSpec {
    std::vector<std::string> inputs;
    std::string metric;
    std::string x;
    std::string series_column = "policy";
    std::vector<std::string> series;
    std::string band_low;
    std::string band_high;
    std::string output;
};

inline json to_json(const PlotSpec& p) {
    return {{"inputs", p.inputs}, {"metric", p.metric}, {"x", p.x}, {"series_column", p.series_column},
            {"series", p.series}, {"band", {p.band_low, p.band_high}}, {"output", p.output}};
}

inline std::vector<std::string> distinct_column(const CsvTable& t, const std::string& col) {
    const std::size_t c = t.column(col);
    std::vector<std::string> out;
    for (const auto& row : t.rows)
        if (std::find(out.begin(), out.end(), row[c]) == out.end()) out.push_back(row[c]);
    return out;
}

/// Validates the aggregate (and optional sweep) CSV in `in_dir`, copies them to `out_dir`
/// and writes one PlotSpec JSON per figure. Returns the spec paths written.
inline std::vector<std::filesystem::path> export_plot_data(const std::filesystem::path& in_dir,
                                                           const std::filesystem::path& out_dir) {
    const auto agg_path = in_dir / "aggregate.csv";
    const auto sweep_path = in_dir / "sweep.csv";
    const bool has_agg = std::filesystem::exists(agg_path);
    const bool has_sweep = std::filesystem::exists(sweep_path);
    if (!has_agg && !has_sweep) throw IoError("no aggregate.csv or sweep.csv in " + in_dir.string());
    ensure_writable(out_dir);
    std::vector<std::filesystem::path> written;
    auto emit = [&](const PlotSpec& spec, const std::string& name) {
        const auto path = out_dir / name;
        auto out = open_output(path);
        out << to_json(spec).dump(2) << '\n';
        written.push_back(path);
    };
    auto check = [](const CsvTable& t, const std::vector<std::string>& want) {
        for (const auto& w : want) t.column(w);
    };
    if (has_agg) {
        const CsvTable t = read_csv(agg_path);
        check(t, aggregate_header());
        std::filesystem::copy_file(agg_path, out_dir / "aggregate.csv", std::filesystem::copy_options::overwrite_existing);
        const auto series = distinct_column(t, "policy");
        emit({{"aggregate.csv"}, "sum_se_mean", "iter", "policy", series, "sum_se_p05", "sum_se_p95", "sum_se_vs_iter.png"},
             "sum_se_vs_iter.json");
        emit({{"aggregate.csv"}, "regret_gap_mean", "iter", "policy", series, "regret_gap_p05", "regret_gap_p95",
              "regret_gap_vs_iter.png"},
             "regret_gap_vs_iter.json");
    }
    if (has_sweep) {
        const CsvTable t = read_csv(sweep_path);
        check(t, sweep_header());
        std::filesystem::copy_file(sweep_path, out_dir / "sweep.csv", std::filesystem::copy_options::overwrite_existing);
        emit({{"sweep.csv"}, "regret_gap_mean", "players", "policy", distinct_column(t, "policy"), "regret_gap_p05",
              "regret_gap_p95", "regret_gap_vs_players.png"},
             "regret_gap_vs_players.json");
    }
    return written;
}

} // namespace pprucb

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pprucb/harness.hpp"

namespace fs = std::filesystem;
using namespace pprucb;

namespace {

struct Common {
    std::string config = "configs/default.json";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
    auto* opt = cmd->add_option("--config", c.config, "experiment config JSON");
    if (config_required) opt->required();
    cmd->add_option("--seed", c.seed, "base seed override");
    cmd->add_option("--out", c.out, "output directory override");
}

ExperimentConfig resolve(const Common& c) {
    ExperimentConfig cfg = load_experiment(c.config);
    if (c.seed) cfg.base_seed = *c.seed;
    if (c.out) cfg.out_dir = *c.out;
    return cfg;
}

std::vector<int> parse_players(const std::string& list) {
    std::vector<int> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("--players: \"" + item + "\" is not an integer");
        }
        if (used != item.size()) throw std::invalid_argument("--players: \"" + item + "\" is not an integer");
        out.push_back(v);
    }
    return out;
}

/// Accepts an experiment config, a bare normal-form game or a bare tabulated game.
ExperimentConfig oracle_config(const fs::path& path) {
    const json j = read_json_file(path);
    if (j.is_object() && j.contains("payoffs")) {
        ExperimentConfig c;
        c.game = GameKind::NormalForm;
        c.normal_form = normal_form_from_json(j);
        return c;
    }
    if (j.is_object() && j.contains("utilities")) {
        ExperimentConfig c;
        c.game = GameKind::Grid;
        c.tabulated = tabulated_from_json(j);
        return c;
    }
    return experiment_from_json(j, path.parent_path());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Approximate pure Nash equilibria of black-box games by confidence-bound search"};
    app.require_subcommand(1);

    Common run_opts;
    auto* run = app.add_subcommand("run", "run every configured policy for the configured reps");
    add_common(run, run_opts, true);

    Common rep_opts;
    int reps = 0;
    auto* replicate = app.add_subcommand("replicate", "run with an explicit replication count");
    add_common(replicate, rep_opts, false);
    replicate->add_option("--reps", reps, "replications")->required()->check(CLI::PositiveNumber);

    Common sweep_opts;
    std::string players;
    auto* sweep = app.add_subcommand("sweep", "final-iteration aggregate per player count");
    add_common(sweep, sweep_opts, false);
    sweep->add_option("--players", players, "comma-separated player counts")->required();

    std::string oracle_path;
    std::optional<std::uint64_t> oracle_seed;
    std::optional<std::string> oracle_out;
    auto* oracle = app.add_subcommand("oracle", "exhaustive epsilon* of the configured game");
    oracle->add_option("--config", oracle_path, "experiment config or game JSON")->required();
    oracle->add_option("--seed", oracle_seed, "seed of the game instance (default: base_seed)");
    oracle->add_option("--out", oracle_out, "write the report here instead of stdout");

    std::string plot_in = "results";
    std::string plot_out;
    auto* plot = app.add_subcommand("export-plot-data", "validate result CSVs and write plot specs");
    plot->add_option("--in", plot_in, "results directory");
    plot->add_option("--out", plot_out, "plot data directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto res = run_experiment(resolve(run_opts));
            std::cout << (res.out_dir / "aggregate.csv").string() << '\n';
        } else if (*replicate) {
            ExperimentConfig cfg = resolve(rep_opts);
            cfg.reps = reps;
            const auto res = run_experiment(cfg);
            std::cout << (res.out_dir / "aggregate.csv").string() << '\n';
        } else if (*sweep) {
            std::cout << sweep_players(resolve(sweep_opts), parse_players(players)).string() << '\n';
        } else if (*oracle) {
            const ExperimentConfig cfg = oracle_config(oracle_path);
            const std::string text = to_json(oracle_command(cfg, oracle_seed.value_or(cfg.base_seed))).dump(2) + "\n";
            if (oracle_out) {
                const fs::path p(*oracle_out);
                if (p.has_parent_path()) ensure_writable(p.parent_path());
                auto out = open_output(p);
                out << text;
            } else {
                std::cout << text;
            }
        } else if (*plot) {
            for (const auto& p : export_plot_data(plot_in, plot_out)) std::cout << p.string() << '\n';
        }
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "argument error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

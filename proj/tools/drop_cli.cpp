// drop: command-line front end over the C API.
//
//   drop train --env pendulum --method drop --heads 9 --eta-max 0.6 --episodes 300 --seed 0 --out runs
//   drop ablate --config ablation.json --out results
//   drop eval --checkpoint runs/pendulum_drop_seed0.ckpt.json --episodes 100 --seed 1

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "drop/drop.h"

namespace {

int report(drop_status status, const char* what) {
    std::fprintf(stderr, "drop: %s failed: %s: %s\n", what, drop_status_string(status), drop_last_error());
    return 1;
}

double iqm_or_nan(const std::vector<double>& v) {
    double out = 0.0;
    if (v.empty() || drop_iqm(v.data(), v.size(), &out) != DROP_OK) {
        return std::nan("");
    }
    return out;
}

struct TrainArgs {
    std::string config;
    std::string env = "bandit";
    std::string method = "drop";
    std::optional<std::size_t> heads;
    double eta_max = 0.6;
    std::size_t episodes = 2000;
    std::uint64_t seed = 0;
    std::string out = "runs";
};

int run_train(const TrainArgs& a) {
    nlohmann::json config = nlohmann::json::object();
    if (!a.config.empty()) {
        std::ifstream f(a.config);
        if (!f) {
            std::fprintf(stderr, "drop: cannot open '%s'\n", a.config.c_str());
            return 1;
        }
        config = nlohmann::json::parse(f);
    }
    config["env"] = a.env;
    config["method"] = a.method;
    config["eta_max"] = a.eta_max;
    config["episodes"] = a.episodes;
    if (a.heads) {
        config["n_heads"] = *a.heads;
    } else if (a.method == "drop" || a.method == "proposal" || a.method == "heuristic") {
        config["n_heads"] = 9;
    } else {
        config["n_heads"] = 1;
    }

    drop_run* run = nullptr;
    const drop_status st = drop_train(config.dump().c_str(), a.seed, &run);
    if (run == nullptr) {
        return report(st, "train");
    }
    std::filesystem::create_directories(a.out);
    const drop_status wst = drop_run_write(run, a.out.c_str());

    std::size_t n_eval = 0;
    drop_run_eval_returns(run, nullptr, 0, &n_eval);
    std::vector<double> returns(n_eval);
    drop_run_eval_returns(run, returns.data(), returns.size(), &n_eval);
    std::size_t n_rows = 0;
    drop_run_episode_count(run, &n_rows);
    drop_run_free(run);

    if (wst != DROP_OK) {
        return report(wst, "writing outputs");
    }
    if (st == DROP_ERROR_RUN_ABORTED) {
        std::fprintf(stderr, "drop: run aborted after %zu episodes: %s\n", n_rows, drop_last_error());
        return 2;
    }
    std::printf("episodes=%zu eval_episodes=%zu eval_iqm=%.6g out=%s\n", n_rows, returns.size(), iqm_or_nan(returns),
                a.out.c_str());
    return 0;
}

int run_ablate(const std::string& config, const std::string& out) {
    const drop_status st = drop_ablate(config.c_str(), out.empty() ? nullptr : out.c_str());
    if (st != DROP_OK) {
        return report(st, "ablate");
    }
    std::printf("ablation written to %s\n", out.empty() ? "(config out_dir)" : out.c_str());
    return 0;
}

int run_eval(const std::string& path, std::size_t episodes, std::uint64_t seed) {
    drop_checkpoint* ckpt = nullptr;
    drop_status st = drop_checkpoint_load(path.c_str(), &ckpt);
    if (st != DROP_OK) {
        return report(st, "loading checkpoint");
    }
    std::vector<double> returns(episodes);
    st = drop_evaluate(ckpt, nullptr, episodes, seed, returns.data(), returns.size());
    const char* env = "";
    drop_checkpoint_env(ckpt, &env);
    const std::string env_name = env;
    drop_checkpoint_free(ckpt);
    if (st != DROP_OK) {
        return report(st, "evaluation");
    }
    double mean = 0.0;
    for (double r : returns) {
        mean += r;
    }
    mean = returns.empty() ? std::nan("") : mean / static_cast<double>(returns.size());
    std::printf("env=%s episodes=%zu mean=%.6g iqm=%.6g\n", env_name.c_str(), returns.size(), mean,
                iqm_or_nan(returns));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DROP actor-critic: training, ablations and evaluation"};
    app.require_subcommand(1);

    TrainArgs t;
    auto* train = app.add_subcommand("train", "Train one seed and write metrics, checkpoint and evaluation");
    train->add_option("--config", t.config, "Base JSON run config; flags below override it")->check(CLI::ExistingFile);
    train->add_option("--env", t.env, "bandit | chain | pendulum")->capture_default_str();
    train->add_option("--method", t.method, "flat | optim | pessim | heuristic | drop")->capture_default_str();
    train->add_option("--heads", t.heads, "Critic heads (default 9 for ensembles, 1 otherwise)");
    train->add_option("--eta-max", t.eta_max, "Largest optimism magnitude, in (0,1)")->capture_default_str();
    train->add_option("--episodes", t.episodes, "Training episodes")->capture_default_str();
    train->add_option("--seed", t.seed, "Seed")->capture_default_str();
    train->add_option("--out", t.out, "Output directory")->capture_default_str();

    std::string ablate_config, ablate_out;
    auto* ablate = app.add_subcommand("ablate", "Run a method/environment grid over seeds");
    ablate->add_option("--config", ablate_config, "Ablation JSON config")->required()->check(CLI::ExistingFile);
    ablate->add_option("--out", ablate_out, "Output directory (overrides out_dir)");

    std::string ckpt;
    std::size_t eval_episodes = 100;
    std::uint64_t eval_seed = 0;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with deterministic actions");
    eval->add_option("--checkpoint", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--episodes", eval_episodes, "Episodes")->capture_default_str();
    eval->add_option("--seed", eval_seed, "Seed")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            return run_train(t);
        }
        if (*ablate) {
            return run_ablate(ablate_config, ablate_out);
        }
        return run_eval(ckpt, eval_episodes, eval_seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "drop: %s\n", e.what());
        return 1;
    }
}

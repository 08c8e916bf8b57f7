#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "drop/agent.hpp"
#include "drop/replay.hpp"

namespace drop {

struct RunConfig {
    std::string env = "bandit";
    AgentConfig agent;
    std::vector<std::uint64_t> seeds = {0};
    std::size_t episodes = 2000;
    std::size_t eval_episodes = 100;
    std::size_t batch_size = PrioritizedBuffer::kDefaultBatchSize;
    PrioritizedBuffer::Config replay;
    std::string out_dir = "runs";
    /// Wall-clock column of the metrics CSV; off keeps the file a pure
    /// function of (config, seed).
    bool record_wall_time = false;

    void validate() const;
};

/// Flat JSON object: agent and replay constants sit next to the run fields.
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);
[[nodiscard]] RunConfig load_run_config(const std::filesystem::path& path);

struct EpisodeRow {
    std::size_t episode = 0;
    double episode_return = 0.0;
    double td_scale = 0.0;  // mean |delta| over the episode's replayed batches
    double td_bias = 0.0;   // mean f(delta) - delta over the same batches
    double wall_ms = 0.0;
    std::size_t replayed = 0;
};

struct RunMetrics {
    std::vector<EpisodeRow> rows;
    std::vector<double> eval_returns;
    bool aborted = false;
    std::string error;
};

struct TrainResult {
    RunMetrics metrics;
    std::optional<Agent> agent;
};

using EpisodeCallback = std::function<void(const EpisodeRow&)>;
using BatchCallback = std::function<void(const SampledBatch&, const TDBatchResult&)>;

struct ReplayStats {
    std::size_t replayed = 0;
    double td_scale = 0.0;  // mean over batches of mean |delta|
    double td_bias = 0.0;   // mean over batches of mean f(delta) - delta
};

/// End-of-episode replay: batch_size * ceil(ceil(|D|/8) / batch_size)
/// transitions in batches through Agent::replay, each followed by a priority
/// refresh with |M(f)|. Does nothing while the buffer holds less than a batch.
ReplayStats replay_episode(Agent& agent, PrioritizedBuffer& buffer, std::size_t batch_size, std::mt19937_64& rng,
                           const BatchCallback& on_batch = {});

/// Runs one seed: act with the stochastic policy, push transitions, and at
/// every episode end replay ceil(|D|/8) transitions (rounded up to whole
/// batches) through Agent::replay, refreshing priorities with |M(f)|.
/// Finishes with eval_episodes deterministic evaluation episodes.
/// Non-finite learning signals abort the run; metrics up to that point are kept.
[[nodiscard]] TrainResult train(const RunConfig& config, std::uint64_t seed, const EpisodeCallback& on_episode = {});

/// Returns of `episodes` episodes acting with the policy mean.
[[nodiscard]] std::vector<double> evaluate(const Agent& agent, const std::string& env_name, std::size_t episodes,
                                           std::uint64_t seed);

/// Mean after dropping floor(n/4) values from each end of the sorted sample.
[[nodiscard]] double iqm(std::span<const double> values);

struct ConfidenceInterval {
    double lower = 0.0;
    double upper = 0.0;
};

/// Percentile bootstrap interval of the IQM.
[[nodiscard]] ConfidenceInterval bootstrap_iqm_ci(std::span<const double> values, std::size_t resamples = 10000,
                                                  double confidence = 0.95, std::uint64_t seed = 0);

/// Checkpoint file: the agent plus the environment it was trained on.
void save_checkpoint(const Agent& agent, const std::string& env_name, const std::filesystem::path& path);
struct LoadedCheckpoint {
    Agent agent;
    std::string env;
};
[[nodiscard]] LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

inline constexpr const char* kMetricsHeader = "episode,return,td_scale,td_bias,wall_ms";

/// CSV with kMetricsHeader, numbers at 17 significant digits.
void emit_metrics(const RunMetrics& metrics, const std::filesystem::path& path);
[[nodiscard]] RunMetrics parse_metrics(const std::filesystem::path& path);

/// Three stacked panels (return, TD scale, bias): one thin trace per seed and
/// the per-episode IQM across seeds on top.
void write_learning_curves_svg(std::span<const RunMetrics> runs, const std::string& title,
                               const std::filesystem::path& path);

/// File stem for one run: <env>_<method>_seed<seed>.
[[nodiscard]] std::string run_stem(const RunConfig& config, std::uint64_t seed);

/// Trains and evaluates every seed, then writes metrics, checkpoint and
/// evaluation summary under config.out_dir. Returns the per-seed results.
struct SeedOutcome {
    std::uint64_t seed = 0;
    RunMetrics metrics;
    double score = 0.0;  // IQM of the evaluation returns
    bool failed = false;
};
[[nodiscard]] std::vector<SeedOutcome> run_seeds(const RunConfig& config, std::size_t threads = 1);

struct AblationConfig {
    RunConfig base;
    std::vector<Method> methods;
    std::vector<std::string> envs;
    /// Optional grid over (n_heads, eta_max) for the multi-head methods.
    std::vector<std::size_t> sweep_n_heads;
    std::vector<double> sweep_eta_max;
    bool normalize = false;
    std::size_t threads = 1;
    std::size_t bootstrap_resamples = 10000;
};

void from_json(const nlohmann::json& j, AblationConfig& c);
[[nodiscard]] AblationConfig load_ablation_config(const std::filesystem::path& path);

struct ScoreRow {
    std::string env;
    Method method = Method::drop;
    std::size_t n_heads = 1;
    double eta_max = 0.0;
    std::vector<double> etas;
    std::vector<std::uint64_t> seeds;
    std::vector<double> seed_scores;  // NaN for failed seeds
    std::size_t failed = 0;
    double score = 0.0;  // IQM across successful seeds
    ConfidenceInterval ci;
    std::optional<double> normalized;
};

struct AblationResult {
    std::vector<ScoreRow> rows;
};

/// Every (env, method[, sweep point]) cell: trains all seeds, reports the IQM
/// across per-seed scores with a bootstrap 95% interval, and writes
/// scores.csv, scores.json and one learning-curve SVG per cell.
[[nodiscard]] AblationResult run_ablation(const AblationConfig& config);

void write_score_table(const AblationResult& result, const std::filesystem::path& csv_path,
                       const std::filesystem::path& json_path);

} // namespace drop

#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "drop/approximator.hpp"
#include "drop/envs.hpp"
#include "drop/replay.hpp"
#include "drop/transform.hpp"

namespace drop {

/// flat, optim and pessim are single-head ablations (eta = 0, +eta_max, -eta_max);
/// heuristic swaps the exponential transform for the asymmetric learning-rate rule.
enum class Method { flat, optim, pessim, heuristic, drop };

[[nodiscard]] std::string to_string(Method m);
[[nodiscard]] Method method_from_string(const std::string& name);
[[nodiscard]] bool is_single_head(Method m) noexcept;

struct AgentConfig {
    Method method = Method::drop;
    std::size_t n_heads = 9;
    double eta_max = 0.6;
    double gamma = 0.99;
    double target_rate = 0.005;
    double learning_rate = 1e-3;
    double actor_learning_rate = 3e-4;
    /// Multiplies rewards before they enter TD errors.
    double reward_scale = 1.0;
    /// Soft bound on the policy's pre-squash mean; 0 disables it.
    double policy_mean_limit = 0.0;
    /// Samples with a negative scalarized error push the policy away only
    /// while their pre-squash action lies within this many standard
    /// deviations of the current mean; 0 disables the gate.
    double actor_repel_limit = 1.0;
    std::vector<Index> critic_hidden = {100, 100};
    std::vector<Index> policy_hidden = {100, 100};
    double scale_decay = TDScaleTracker::kDefaultDecay;
    double scale_floor = TDScaleTracker::kDefaultFloor;
    /// One TD-scale tracker per head instead of one shared tracker.
    bool per_head_scale = false;
    /// Keep the head layer at its random initialization.
    bool freeze_heads = false;
    bool train_actor = true;
    /// When nonempty, one fixed inverse temperature per head replaces the
    /// eta -> beta mapping (exponential methods only).
    std::vector<double> fixed_betas;

    /// Throws std::invalid_argument on inconsistent settings.
    void validate() const;
    /// Per-head optimism values implied by the method.
    [[nodiscard]] std::vector<double> head_etas() const;
};

void to_json(nlohmann::json& j, const AgentConfig& c);
void from_json(const nlohmann::json& j, AgentConfig& c);

/// Per-head TD transform resolved for one batch.
struct HeadTransform {
    enum class Kind { exponential, heuristic };
    Kind kind = Kind::exponential;
    double parameter = 0.0;  // beta for exponential, eta for heuristic

    [[nodiscard]] TransformValue operator()(double delta) const;
};

/// Resolves the transform of one head: exponential with beta from
/// eta_to_beta(eta, tracker) for flat/optim/pessim/drop, the heuristic rule
/// with eta itself otherwise.
[[nodiscard]] HeadTransform select_transform(Method method, double eta, const TDScaleTracker& tracker);

/// Per-sample, per-head TD quantities for one batch; matrices are heads x batch.
struct TDBatchResult {
    Eigen::MatrixXd deltas;
    Eigen::MatrixXd transformed;
    std::vector<double> central;   // median over heads of the transformed errors
    std::vector<double> priority;  // |central|
    std::size_t saturated = 0;

    [[nodiscard]] std::size_t batch_size() const { return central.size(); }
    [[nodiscard]] double mean_abs_delta() const;
    [[nodiscard]] double mean_bias() const;
};

/// Column-per-sample views of a batch of transitions.
struct BatchMatrices {
    Eigen::MatrixXd states;
    Eigen::MatrixXd actions;
    Eigen::MatrixXd next_states;
    Eigen::VectorXd rewards;
    Eigen::VectorXd not_done;

    [[nodiscard]] static BatchMatrices from(std::span<const Transition> batch);
};

/// delta_i = r + gamma * target_i(s') * (1 - done) - V_i(s); each head
/// bootstraps from its own target head.
[[nodiscard]] Eigen::MatrixXd compute_deltas(const BatchMatrices& batch, const EnsembleCritic& critic,
                                             const EnsembleCritic& target, double gamma,
                                             Mlp::Cache* critic_cache = nullptr);

/// Applies head i's transform to row i and scalarizes with the median.
/// Throws std::runtime_error if any value is non-finite.
[[nodiscard]] TDBatchResult transform_deltas(const Eigen::MatrixXd& deltas, std::span<const HeadTransform> transforms);

[[nodiscard]] TDBatchResult compute_td_batch(std::span<const Transition> batch, const EnsembleCritic& critic,
                                             const EnsembleCritic& target, std::span<const HeadTransform> transforms,
                                             double gamma);

/// One optimizer step on (1/B) sum_b w_b sum_i -f_i(delta_ib) grad V_i(s_b).
/// Targets are constants; nothing is differentiated through V(s').
/// Returns false if the optimizer skipped a non-finite gradient.
bool critic_update(const Mlp::Cache& critic_cache, const TDBatchResult& td, std::span<const double> is_weights,
                   EnsembleCritic& critic, AdamOptimizer& optimizer, bool freeze_heads = false);

/// One optimizer step on (1/B) sum_b w_b * -M_b * grad ln pi(a_b | s_b), dropping
/// samples with M_b < 0 whose action is more than repel_limit standard
/// deviations from the policy mean (repel_limit > 0).
bool actor_update(const BatchMatrices& batch, const TDBatchResult& td, std::span<const double> is_weights,
                  GaussianPolicy& policy, AdamOptimizer& optimizer, double repel_limit = 0.0);

/// target <- (1 - tau) target + tau critic.
void update_target(const EnsembleCritic& critic, EnsembleCritic& target, double tau);

/// Critic ensemble, target copy, policy, optimizers and TD-scale trackers of one run.
class Agent {
public:
    Agent(AgentConfig config, const EnvSpec& env, std::mt19937_64& rng);

    [[nodiscard]] std::vector<double> act(std::span<const double> state, std::mt19937_64& rng) const;
    [[nodiscard]] std::vector<double> act_deterministic(std::span<const double> state) const;

    /// Transforms for the current tracker state.
    [[nodiscard]] std::vector<HeadTransform> head_transforms() const;

    /// TD quantities under the current trackers, without side effects.
    [[nodiscard]] TDBatchResult compute_td_batch(std::span<const Transition> batch) const;

    /// Full learning step on one replayed batch: trackers observe the raw
    /// errors, then the critic and actor are updated from the same TD batch
    /// and the target is moved towards the critic.
    TDBatchResult replay(std::span<const Transition> batch, std::span<const double> is_weights);

    [[nodiscard]] const AgentConfig& config() const noexcept { return config_; }
    [[nodiscard]] const std::vector<double>& etas() const noexcept { return etas_; }
    [[nodiscard]] const std::vector<TDScaleTracker>& trackers() const noexcept { return trackers_; }
    [[nodiscard]] const EnsembleCritic& critic() const noexcept { return critic_; }
    [[nodiscard]] const EnsembleCritic& target() const noexcept { return target_; }
    [[nodiscard]] const GaussianPolicy& policy() const noexcept { return policy_; }
    [[nodiscard]] EnsembleCritic& critic() noexcept { return critic_; }
    [[nodiscard]] GaussianPolicy& policy() noexcept { return policy_; }
    [[nodiscard]] const AdamOptimizer& critic_optimizer() const noexcept { return critic_opt_; }
    [[nodiscard]] const AdamOptimizer& actor_optimizer() const noexcept { return actor_opt_; }
    [[nodiscard]] std::size_t skipped_updates() const noexcept { return skipped_; }

    friend void to_json(nlohmann::json& j, const Agent& agent);
    [[nodiscard]] static Agent from_json_checkpoint(const nlohmann::json& j);

    void save(const std::string& path) const;
    [[nodiscard]] static Agent load(const std::string& path);

private:
    Agent() = default;
    void observe(const Eigen::MatrixXd& deltas);

    AgentConfig config_;
    std::vector<double> etas_;
    std::vector<TDScaleTracker> trackers_;
    EnsembleCritic critic_;
    EnsembleCritic target_;
    GaussianPolicy policy_;
    AdamOptimizer critic_opt_;
    AdamOptimizer actor_opt_;
    std::size_t skipped_ = 0;
};

} // namespace drop

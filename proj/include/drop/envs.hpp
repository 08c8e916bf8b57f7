#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace drop {

struct EnvSpec {
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    std::vector<double> action_low;
    std::vector<double> action_high;
    std::size_t max_episode_steps = 0;
};

/// Time-limit truncation also sets `done`.
struct StepResult {
    std::vector<double> next_state;
    double reward = 0.0;
    bool done = false;
    bool truncated = false;
};

/// Episodic environment. Instances own their current state.
class Env {
public:
    virtual ~Env() = default;

    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual const EnvSpec& spec() const = 0;
    virtual std::vector<double> reset(std::mt19937_64& rng) = 0;
    /// Actions are clipped to the action bounds before the dynamics.
    virtual StepResult step(std::span<const double> action, std::mt19937_64& rng) = 0;
    [[nodiscard]] virtual std::unique_ptr<Env> clone() const = 0;

protected:
    [[nodiscard]] std::vector<double> clip_action(std::span<const double> action) const;
};

/// One state, one step. Reward ~ Bernoulli(p) regardless of the action.
class BanditEnv final : public Env {
public:
    explicit BanditEnv(double p_reward = 0.5);

    [[nodiscard]] std::string name() const override { return "bandit"; }
    [[nodiscard]] const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset(std::mt19937_64& rng) override;
    StepResult step(std::span<const double> action, std::mt19937_64& rng) override;
    [[nodiscard]] std::unique_ptr<Env> clone() const override { return std::make_unique<BanditEnv>(*this); }

    [[nodiscard]] double reward_probability() const noexcept { return p_; }

private:
    EnvSpec spec_;
    double p_;
};

/// Deterministic chain with one-hot states. A positive action moves right,
/// otherwise left (staying put at state 0). Reaching the last state pays 1
/// and terminates.
class ChainEnv final : public Env {
public:
    explicit ChainEnv(std::size_t n_states = 5, std::size_t max_steps = 1000);

    [[nodiscard]] std::string name() const override { return "chain"; }
    [[nodiscard]] const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset(std::mt19937_64& rng) override;
    StepResult step(std::span<const double> action, std::mt19937_64& rng) override;
    [[nodiscard]] std::unique_ptr<Env> clone() const override { return std::make_unique<ChainEnv>(*this); }

    [[nodiscard]] std::size_t n_states() const noexcept { return n_; }
    [[nodiscard]] std::size_t position() const noexcept { return pos_; }
    [[nodiscard]] std::vector<double> one_hot(std::size_t index) const;

private:
    EnvSpec spec_;
    std::size_t n_;
    std::size_t pos_ = 0;
    std::size_t steps_ = 0;
};

/// Classic torque-limited pendulum swing-up, theta = 0 upright.
/// Observation (cos theta, sin theta, theta_dot).
class PendulumEnv final : public Env {
public:
    static constexpr double kMaxSpeed = 8.0;
    static constexpr double kMaxTorque = 2.0;
    static constexpr double kDt = 0.05;
    static constexpr double kGravity = 10.0;
    static constexpr double kMass = 1.0;
    static constexpr double kLength = 1.0;

    PendulumEnv();

    [[nodiscard]] std::string name() const override { return "pendulum"; }
    [[nodiscard]] const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset(std::mt19937_64& rng) override;
    StepResult step(std::span<const double> action, std::mt19937_64& rng) override;
    [[nodiscard]] std::unique_ptr<Env> clone() const override { return std::make_unique<PendulumEnv>(*this); }

    /// Places the pendulum at an explicit configuration.
    std::vector<double> set_state(double theta, double theta_dot);
    [[nodiscard]] std::vector<double> observation() const;

    /// -(wrap(theta)^2 + 0.1 theta_dot^2 + 0.001 torque^2)
    [[nodiscard]] static double reward(double theta, double theta_dot, double torque);
    /// Most negative per-step reward.
    [[nodiscard]] static double min_reward();

private:
    EnvSpec spec_;
    double theta_ = 0.0;
    double theta_dot_ = 0.0;
    std::size_t steps_ = 0;
};

/// "bandit" | "chain" | "pendulum".
[[nodiscard]] std::unique_ptr<Env> make_env(const std::string& name);

struct AnalyticValue {
    std::vector<double> values;  // one per state
    std::optional<double> certainty_equivalent;
};

/// Exact state values of a finite environment.
/// For the chain, `p_right[s]` is the probability that the policy moves right
/// in state s and V solves (I - gamma P) V = R. For the bandit the value is the
/// mean reward and, for beta != 0, the certainty equivalent ln(E[e^(beta r)]) / beta.
/// Throws std::invalid_argument for the pendulum.
[[nodiscard]] AnalyticValue analytic_value(const Env& env, std::span<const double> p_right, double gamma,
                                           double beta = 0.0);

} // namespace drop

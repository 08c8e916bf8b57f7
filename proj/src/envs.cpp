#include "drop/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace drop {

namespace {

double wrap_angle(double theta) {
    constexpr double pi = std::numbers::pi;
    return std::fmod(std::fmod(theta + pi, 2.0 * pi) + 2.0 * pi, 2.0 * pi) - pi;
}

} // namespace

std::vector<double> Env::clip_action(std::span<const double> action) const {
    const EnvSpec& s = spec();
    if (action.size() != s.action_dim) {
        throw std::invalid_argument(name() + ": expected action of dimension " + std::to_string(s.action_dim));
    }
    std::vector<double> out(action.begin(), action.end());
    for (std::size_t j = 0; j < out.size(); ++j) {
        if (!std::isfinite(out[j])) {
            throw std::invalid_argument(name() + ": action must be finite");
        }
        out[j] = std::clamp(out[j], s.action_low[j], s.action_high[j]);
    }
    return out;
}

// ---------------------------------------------------------------------------

BanditEnv::BanditEnv(double p_reward) : spec_{1, 1, {-1.0}, {1.0}, 1}, p_(p_reward) {
    if (!(p_reward >= 0.0 && p_reward <= 1.0)) {
        throw std::invalid_argument("bandit reward probability must lie in [0, 1]");
    }
}

std::vector<double> BanditEnv::reset(std::mt19937_64& /*rng*/) { return {0.0}; }

StepResult BanditEnv::step(std::span<const double> action, std::mt19937_64& rng) {
    (void)clip_action(action);
    std::bernoulli_distribution coin(p_);
    return {{0.0}, coin(rng) ? 1.0 : 0.0, true, false};
}

// ---------------------------------------------------------------------------

ChainEnv::ChainEnv(std::size_t n_states, std::size_t max_steps)
    : spec_{n_states, 1, {-1.0}, {1.0}, max_steps}, n_(n_states) {
    if (n_states < 2) {
        throw std::invalid_argument("chain needs at least two states");
    }
    if (max_steps == 0) {
        throw std::invalid_argument("chain step limit must be positive");
    }
}

std::vector<double> ChainEnv::one_hot(std::size_t index) const {
    std::vector<double> s(n_, 0.0);
    s.at(index) = 1.0;
    return s;
}

std::vector<double> ChainEnv::reset(std::mt19937_64& /*rng*/) {
    pos_ = 0;
    steps_ = 0;
    return one_hot(pos_);
}

StepResult ChainEnv::step(std::span<const double> action, std::mt19937_64& /*rng*/) {
    const auto a = clip_action(action);
    if (pos_ + 1 >= n_) {
        throw std::logic_error("chain: step called on a finished episode");
    }
    ++steps_;
    if (a[0] > 0.0) {
        ++pos_;
    } else if (pos_ > 0) {
        --pos_;
    }
    const bool goal = pos_ + 1 == n_;
    const bool truncated = !goal && steps_ >= spec_.max_episode_steps;
    return {one_hot(pos_), goal ? 1.0 : 0.0, goal || truncated, truncated};
}

// ---------------------------------------------------------------------------

PendulumEnv::PendulumEnv() : spec_{3, 1, {-kMaxTorque}, {kMaxTorque}, 200} {}

std::vector<double> PendulumEnv::observation() const { return {std::cos(theta_), std::sin(theta_), theta_dot_}; }

std::vector<double> PendulumEnv::reset(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> speed(-1.0, 1.0);
    theta_ = angle(rng);
    theta_dot_ = speed(rng);
    steps_ = 0;
    return observation();
}

std::vector<double> PendulumEnv::set_state(double theta, double theta_dot) {
    theta_ = theta;
    theta_dot_ = std::clamp(theta_dot, -kMaxSpeed, kMaxSpeed);
    steps_ = 0;
    return observation();
}

double PendulumEnv::reward(double theta, double theta_dot, double torque) {
    const double th = wrap_angle(theta);
    return -(th * th + 0.1 * theta_dot * theta_dot + 0.001 * torque * torque);
}

double PendulumEnv::min_reward() {
    constexpr double pi = std::numbers::pi;
    return -(pi * pi + 0.1 * kMaxSpeed * kMaxSpeed + 0.001 * kMaxTorque * kMaxTorque);
}

StepResult PendulumEnv::step(std::span<const double> action, std::mt19937_64& /*rng*/) {
    const double u = clip_action(action)[0];
    const double r = reward(theta_, theta_dot_, u);
    const double accel = 3.0 * kGravity / (2.0 * kLength) * std::sin(theta_) + 3.0 / (kMass * kLength * kLength) * u;
    theta_dot_ = std::clamp(theta_dot_ + accel * kDt, -kMaxSpeed, kMaxSpeed);
    theta_ += theta_dot_ * kDt;
    ++steps_;
    const bool truncated = steps_ >= spec_.max_episode_steps;
    return {observation(), r, truncated, truncated};
}

// ---------------------------------------------------------------------------

std::unique_ptr<Env> make_env(const std::string& name) {
    if (name == "bandit") return std::make_unique<BanditEnv>();
    if (name == "chain") return std::make_unique<ChainEnv>();
    if (name == "pendulum") return std::make_unique<PendulumEnv>();
    throw std::invalid_argument("unknown environment '" + name + "' (expected bandit, chain or pendulum)");
}

AnalyticValue analytic_value(const Env& env, std::span<const double> p_right, double gamma, double beta) {
    if (!(gamma >= 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("gamma must lie in [0, 1)");
    }
    if (const auto* bandit = dynamic_cast<const BanditEnv*>(&env)) {
        const double p = bandit->reward_probability();
        AnalyticValue out{{p}, p};
        if (beta != 0.0) {
            out.certainty_equivalent = std::log((1.0 - p) + p * std::exp(beta)) / beta;
        }
        return out;
    }
    if (const auto* chain = dynamic_cast<const ChainEnv*>(&env)) {
        const std::size_t n = chain->n_states();
        if (p_right.size() != n && p_right.size() != n - 1) {
            throw std::invalid_argument("chain policy needs one move-right probability per state");
        }
        const auto m = static_cast<Eigen::Index>(n - 1);  // non-terminal states
        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m);
        Eigen::VectorXd r = Eigen::VectorXd::Zero(m);
        for (Eigen::Index s = 0; s < m; ++s) {
            const double p = p_right[static_cast<std::size_t>(s)];
            if (!(p >= 0.0 && p <= 1.0)) {
                throw std::invalid_argument("move-right probabilities must lie in [0, 1]");
            }
            if (s + 1 == m) {
                r(s) += p;
            } else {
                a(s, s + 1) -= gamma * p;
            }
            a(s, std::max<Eigen::Index>(s - 1, 0)) -= gamma * (1.0 - p);
        }
        const Eigen::VectorXd v = a.partialPivLu().solve(r);
        AnalyticValue out;
        out.values.assign(v.data(), v.data() + v.size());
        out.values.push_back(0.0);
        return out;
    }
    throw std::invalid_argument(env.name() + " has no closed-form value");
}

} // namespace drop

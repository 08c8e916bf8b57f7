#include "drop/agent.hpp"
#include "drop/error.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace drop {

namespace {

constexpr int kCheckpointVersion = 1;

} // namespace

std::string to_string(Method m) {
    switch (m) {
    case Method::flat: return "flat";
    case Method::optim: return "optim";
    case Method::pessim: return "pessim";
    case Method::heuristic: return "heuristic";
    case Method::drop: return "drop";
    }
    throw std::invalid_argument("unknown method");
}

Method method_from_string(const std::string& name) {
    if (name == "flat") return Method::flat;
    if (name == "optim") return Method::optim;
    if (name == "pessim") return Method::pessim;
    if (name == "heuristic") return Method::heuristic;
    if (name == "drop" || name == "proposal") return Method::drop;
    throw std::invalid_argument("unknown method '" + name + "' (expected flat, optim, pessim, heuristic or drop)");
}

bool is_single_head(Method m) noexcept { return m == Method::flat || m == Method::optim || m == Method::pessim; }

// ---------------------------------------------------------------------------
// AgentConfig

void AgentConfig::validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("gamma must lie in [0, 1)");
    }
    if (!(target_rate > 0.0 && target_rate <= 1.0)) {
        throw std::invalid_argument("target_rate must lie in (0, 1]");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate) || !(actor_learning_rate >= 0.0) ||
        !std::isfinite(actor_learning_rate)) {
        throw std::invalid_argument("learning rates must be finite and nonnegative");
    }
    if (!(reward_scale > 0.0) || !std::isfinite(reward_scale)) {
        throw std::invalid_argument("reward_scale must be finite and positive");
    }
    if (!(actor_repel_limit >= 0.0) || !std::isfinite(actor_repel_limit)) {
        throw std::invalid_argument("actor_repel_limit must be finite and nonnegative");
    }
    if (!(policy_mean_limit >= 0.0) || !std::isfinite(policy_mean_limit)) {
        throw std::invalid_argument("policy_mean_limit must be finite and nonnegative");
    }
    if (n_heads == 0) {
        throw std::invalid_argument("n_heads must be positive");
    }
    if (is_single_head(method) && n_heads != 1) {
        throw std::invalid_argument(to_string(method) + " uses exactly one head");
    }
    if (!(eta_max > 0.0 && eta_max < 1.0)) {
        throw std::invalid_argument("eta_max must lie in (0, 1)");
    }
    if (!(scale_decay > 0.0 && scale_decay < 1.0) || !(scale_floor > 0.0)) {
        throw std::invalid_argument("TD scale tracker needs decay in (0, 1) and a positive floor");
    }
    if (!fixed_betas.empty()) {
        if (fixed_betas.size() != n_heads) {
            throw std::invalid_argument("fixed_betas needs one entry per head");
        }
        if (method == Method::heuristic) {
            throw std::invalid_argument("fixed_betas does not apply to the heuristic transform");
        }
        for (double b : fixed_betas) {
            (void)InverseTemperature(b);
        }
    }
}

std::vector<double> AgentConfig::head_etas() const {
    switch (method) {
    case Method::flat: return {0.0};
    case Method::optim: return {eta_max};
    case Method::pessim: return {-eta_max};
    case Method::heuristic:
    case Method::drop: {
        const OptimismSchedule schedule = make_schedule(n_heads, eta_max);
        return {schedule.etas().begin(), schedule.etas().end()};
    }
    }
    throw std::invalid_argument("unknown method");
}

void to_json(nlohmann::json& j, const AgentConfig& c) {
    j = {{"method", to_string(c.method)},
         {"n_heads", c.n_heads},
         {"eta_max", c.eta_max},
         {"gamma", c.gamma},
         {"target_rate", c.target_rate},
         {"learning_rate", c.learning_rate},
         {"actor_learning_rate", c.actor_learning_rate},
         {"reward_scale", c.reward_scale},
         {"policy_mean_limit", c.policy_mean_limit},
         {"actor_repel_limit", c.actor_repel_limit},
         {"critic_hidden", c.critic_hidden},
         {"policy_hidden", c.policy_hidden},
         {"scale_decay", c.scale_decay},
         {"scale_floor", c.scale_floor},
         {"per_head_scale", c.per_head_scale},
         {"freeze_heads", c.freeze_heads},
         {"train_actor", c.train_actor},
         {"fixed_betas", c.fixed_betas}};
}

void from_json(const nlohmann::json& j, AgentConfig& c) {
    AgentConfig d;
    d.method = method_from_string(j.value("method", to_string(d.method)));
    d.n_heads = j.value("n_heads", is_single_head(d.method) ? std::size_t{1} : d.n_heads);
    d.eta_max = j.value("eta_max", d.eta_max);
    d.gamma = j.value("gamma", d.gamma);
    d.target_rate = j.value("target_rate", d.target_rate);
    d.learning_rate = j.value("learning_rate", d.learning_rate);
    d.actor_learning_rate = j.value("actor_learning_rate", d.actor_learning_rate);
    d.reward_scale = j.value("reward_scale", d.reward_scale);
    d.policy_mean_limit = j.value("policy_mean_limit", d.policy_mean_limit);
    d.actor_repel_limit = j.value("actor_repel_limit", d.actor_repel_limit);
    d.critic_hidden = j.value("critic_hidden", d.critic_hidden);
    d.policy_hidden = j.value("policy_hidden", d.policy_hidden);
    d.scale_decay = j.value("scale_decay", d.scale_decay);
    d.scale_floor = j.value("scale_floor", d.scale_floor);
    d.per_head_scale = j.value("per_head_scale", d.per_head_scale);
    d.freeze_heads = j.value("freeze_heads", d.freeze_heads);
    d.train_actor = j.value("train_actor", d.train_actor);
    d.fixed_betas = j.value("fixed_betas", d.fixed_betas);
    c = std::move(d);
}

// ---------------------------------------------------------------------------
// Transforms and TD batches

TransformValue HeadTransform::operator()(double delta) const {
    if (kind == Kind::heuristic) {
        return {transform_td_heuristic(parameter, delta), false};
    }
    return transform_td_checked(parameter, delta);
}

HeadTransform select_transform(Method method, double eta, const TDScaleTracker& tracker) {
    switch (method) {
    case Method::flat: return {HeadTransform::Kind::exponential, 0.0};
    case Method::optim:
    case Method::pessim:
    case Method::drop:
        return {HeadTransform::Kind::exponential, eta_to_beta(OptimismParameter(eta), tracker).value()};
    case Method::heuristic: return {HeadTransform::Kind::heuristic, OptimismParameter(eta).value()};
    }
    throw std::invalid_argument("unknown method");
}

double TDBatchResult::mean_abs_delta() const { return deltas.size() == 0 ? 0.0 : deltas.cwiseAbs().mean(); }

double TDBatchResult::mean_bias() const { return deltas.size() == 0 ? 0.0 : (transformed - deltas).mean(); }

BatchMatrices BatchMatrices::from(std::span<const Transition> batch) {
    if (batch.empty()) {
        throw std::invalid_argument("batch must not be empty");
    }
    const auto b = static_cast<Index>(batch.size());
    const auto sd = static_cast<Index>(batch.front().state.size());
    const auto ad = static_cast<Index>(batch.front().action.size());
    BatchMatrices m{Eigen::MatrixXd(sd, b), Eigen::MatrixXd(ad, b), Eigen::MatrixXd(sd, b), Eigen::VectorXd(b),
                    Eigen::VectorXd(b)};
    for (Index k = 0; k < b; ++k) {
        const Transition& t = batch[static_cast<std::size_t>(k)];
        if (static_cast<Index>(t.state.size()) != sd || static_cast<Index>(t.next_state.size()) != sd ||
            static_cast<Index>(t.action.size()) != ad) {
            throw std::invalid_argument("transitions in a batch must share dimensions");
        }
        m.states.col(k) = Eigen::Map<const Eigen::VectorXd>(t.state.data(), sd);
        m.actions.col(k) = Eigen::Map<const Eigen::VectorXd>(t.action.data(), ad);
        m.next_states.col(k) = Eigen::Map<const Eigen::VectorXd>(t.next_state.data(), sd);
        m.rewards(k) = t.reward;
        m.not_done(k) = t.done ? 0.0 : 1.0;
    }
    return m;
}

Eigen::MatrixXd compute_deltas(const BatchMatrices& batch, const EnsembleCritic& critic, const EnsembleCritic& target,
                               double gamma, Mlp::Cache* critic_cache) {
    if (critic.n_heads() != target.n_heads()) {
        throw std::invalid_argument("critic and target differ in head count");
    }
    const Eigen::MatrixXd v = critic.forward(batch.states, critic_cache);
    const Eigen::MatrixXd v_next = target.forward(batch.next_states);
    Eigen::MatrixXd deltas = -v;
    for (Index b = 0; b < deltas.cols(); ++b) {
        if (batch.not_done(b) != 0.0) {
            deltas.col(b) += gamma * v_next.col(b);
        }
        deltas.col(b).array() += batch.rewards(b);
    }
    return deltas;
}

TDBatchResult transform_deltas(const Eigen::MatrixXd& deltas, std::span<const HeadTransform> transforms) {
    if (static_cast<std::size_t>(deltas.rows()) != transforms.size()) {
        throw std::invalid_argument("one transform per head is required");
    }
    if (!deltas.allFinite()) {
        throw NumericError("non-finite TD error in batch");
    }
    TDBatchResult out;
    out.deltas = deltas;
    out.transformed.resize(deltas.rows(), deltas.cols());
    out.central.resize(static_cast<std::size_t>(deltas.cols()));
    out.priority.resize(out.central.size());
    std::vector<double> column(static_cast<std::size_t>(deltas.rows()));
    for (Index b = 0; b < deltas.cols(); ++b) {
        for (Index i = 0; i < deltas.rows(); ++i) {
            const TransformValue f = transforms[static_cast<std::size_t>(i)](deltas(i, b));
            out.saturated += f.saturated ? 1 : 0;
            out.transformed(i, b) = f.value;
            column[static_cast<std::size_t>(i)] = f.value;
        }
        const double m = median(column);
        out.central[static_cast<std::size_t>(b)] = m;
        out.priority[static_cast<std::size_t>(b)] = std::abs(m);
    }
    if (!out.transformed.allFinite()) {
        throw NumericError("non-finite transformed TD error in batch");
    }
    return out;
}

TDBatchResult compute_td_batch(std::span<const Transition> batch, const EnsembleCritic& critic,
                               const EnsembleCritic& target, std::span<const HeadTransform> transforms, double gamma) {
    const BatchMatrices m = BatchMatrices::from(batch);
    return transform_deltas(compute_deltas(m, critic, target, gamma), transforms);
}

bool critic_update(const Mlp::Cache& critic_cache, const TDBatchResult& td, std::span<const double> is_weights,
                   EnsembleCritic& critic, AdamOptimizer& optimizer, bool freeze_heads) {
    const auto batch = static_cast<Index>(td.batch_size());
    if (static_cast<Index>(is_weights.size()) != batch) {
        throw std::invalid_argument("one importance weight per sample is required");
    }
    Eigen::MatrixXd coeffs = td.transformed;
    for (Index b = 0; b < batch; ++b) {
        coeffs.col(b) *= -is_weights[static_cast<std::size_t>(b)] / static_cast<double>(batch);
    }
    GradientBuffer grad = critic.backward_value(critic_cache, coeffs);
    if (freeze_heads) {
        critic.mask_heads(grad);
    }
    return optimizer.step(critic.net().params(), grad);
}

bool actor_update(const BatchMatrices& batch, const TDBatchResult& td, std::span<const double> is_weights,
                  GaussianPolicy& policy, AdamOptimizer& optimizer, double repel_limit) {
    const std::size_t n = td.batch_size();
    if (is_weights.size() != n) {
        throw std::invalid_argument("one importance weight per sample is required");
    }
    std::vector<double> coeffs(n);
    for (std::size_t b = 0; b < n; ++b) {
        coeffs[b] = -is_weights[b] * td.central[b] / static_cast<double>(n);
    }
    if (repel_limit > 0.0) {
        const Eigen::MatrixXd z = policy.standardized(batch.states, batch.actions);
        for (std::size_t b = 0; b < n; ++b) {
            if (td.central[b] < 0.0 && z.col(static_cast<Index>(b)).norm() > repel_limit) {
                coeffs[b] = 0.0;
            }
        }
    }
    const GradientBuffer grad = policy.backward_logprob(batch.states, batch.actions, coeffs);
    return optimizer.step(policy.net().params(), grad);
}

void update_target(const EnsembleCritic& critic, EnsembleCritic& target, double tau) {
    soft_update(target.net().params(), critic.net().params(), tau);
}

// ---------------------------------------------------------------------------
// Agent

Agent::Agent(AgentConfig config, const EnvSpec& env, std::mt19937_64& rng) : config_(std::move(config)) {
    config_.validate();
    etas_ = config_.head_etas();
    const std::size_t n = etas_.size();
    const TDScaleTracker tracker{1.0, config_.scale_decay, config_.scale_floor};
    trackers_.assign(config_.per_head_scale ? n : 1, tracker);
    critic_ = EnsembleCritic(static_cast<Index>(env.state_dim), n, config_.critic_hidden);
    critic_.initialize(rng);
    target_ = critic_;
    policy_ = GaussianPolicy(static_cast<Index>(env.state_dim), env.action_low, env.action_high, config_.policy_hidden);
    policy_.set_mean_limit(config_.policy_mean_limit);
    policy_.initialize(rng);
    critic_opt_ = AdamOptimizer(critic_.net().params().size(), AdamOptimizer::Config{config_.learning_rate});
    actor_opt_ = AdamOptimizer(policy_.net().params().size(), AdamOptimizer::Config{config_.actor_learning_rate});
}

std::vector<double> Agent::act(std::span<const double> state, std::mt19937_64& rng) const {
    return policy_.sample(state, rng);
}

std::vector<double> Agent::act_deterministic(std::span<const double> state) const { return policy_.mean_action(state); }

std::vector<HeadTransform> Agent::head_transforms() const {
    std::vector<HeadTransform> out;
    out.reserve(etas_.size());
    for (std::size_t i = 0; i < etas_.size(); ++i) {
        if (!config_.fixed_betas.empty()) {
            out.push_back({HeadTransform::Kind::exponential, config_.fixed_betas[i]});
            continue;
        }
        const TDScaleTracker& t = trackers_[config_.per_head_scale ? i : 0];
        out.push_back(select_transform(config_.method, etas_[i], t));
    }
    return out;
}

TDBatchResult Agent::compute_td_batch(std::span<const Transition> batch) const {
    BatchMatrices m = BatchMatrices::from(batch);
    m.rewards *= config_.reward_scale;
    return transform_deltas(compute_deltas(m, critic_, target_, config_.gamma), head_transforms());
}

void Agent::observe(const Eigen::MatrixXd& deltas) {
    for (Index b = 0; b < deltas.cols(); ++b) {
        for (Index i = 0; i < deltas.rows(); ++i) {
            auto& t = trackers_[config_.per_head_scale ? static_cast<std::size_t>(i) : 0];
            t = observe_td(t, deltas(i, b));
        }
    }
}

TDBatchResult Agent::replay(std::span<const Transition> batch, std::span<const double> is_weights) {
    BatchMatrices m = BatchMatrices::from(batch);
    m.rewards *= config_.reward_scale;
    Mlp::Cache cache;
    const Eigen::MatrixXd deltas = compute_deltas(m, critic_, target_, config_.gamma, &cache);
    if (!deltas.allFinite()) {
        throw NumericError("non-finite TD error in batch");
    }
    observe(deltas);
    const auto transforms = head_transforms();
    TDBatchResult td = transform_deltas(deltas, transforms);
    if (!critic_update(cache, td, is_weights, critic_, critic_opt_, config_.freeze_heads)) {
        ++skipped_;
    }
    if (config_.train_actor && !actor_update(m, td, is_weights, policy_, actor_opt_, config_.actor_repel_limit)) {
        ++skipped_;
    }
    update_target(critic_, target_, config_.target_rate);
    return td;
}

void to_json(nlohmann::json& j, const Agent& agent) {
    nlohmann::json trackers = nlohmann::json::array();
    for (const auto& t : agent.trackers_) {
        trackers.push_back({{"scale", t.scale}, {"decay", t.decay}, {"floor", t.floor}});
    }
    j = {{"format", "drop-agent"},
         {"version", kCheckpointVersion},
         {"config", agent.config_},
         {"etas", agent.etas_},
         {"trackers", std::move(trackers)},
         {"critic", agent.critic_.net()},
         {"target", agent.target_.net()},
         {"policy", agent.policy_.net()},
         {"action_low", agent.policy_.action_low()},
         {"action_high", agent.policy_.action_high()},
         {"critic_optimizer", agent.critic_opt_},
         {"actor_optimizer", agent.actor_opt_},
         {"skipped_updates", agent.skipped_}};
}

Agent Agent::from_json_checkpoint(const nlohmann::json& j) {
    if (j.at("format").get<std::string>() != "drop-agent") {
        throw std::invalid_argument("not an agent checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
        throw std::invalid_argument("unsupported agent checkpoint version " + j.at("version").dump());
    }
    Agent a;
    a.config_ = j.at("config").get<AgentConfig>();
    a.config_.validate();
    a.etas_ = j.at("etas").get<std::vector<double>>();
    for (const auto& t : j.at("trackers")) {
        a.trackers_.push_back({t.at("scale").get<double>(), t.at("decay").get<double>(), t.at("floor").get<double>()});
    }
    a.critic_ = EnsembleCritic(j.at("critic").get<Mlp>());
    a.target_ = EnsembleCritic(j.at("target").get<Mlp>());
    a.policy_ = GaussianPolicy(j.at("policy").get<Mlp>(), j.at("action_low").get<std::vector<double>>(),
                               j.at("action_high").get<std::vector<double>>());
    a.policy_.set_mean_limit(a.config_.policy_mean_limit);
    a.critic_opt_ = j.at("critic_optimizer").get<AdamOptimizer>();
    a.actor_opt_ = j.at("actor_optimizer").get<AdamOptimizer>();
    a.skipped_ = j.value("skipped_updates", std::size_t{0});
    if (a.etas_.size() != a.critic_.n_heads() || a.target_.n_heads() != a.critic_.n_heads() ||
        a.critic_.state_dim() != a.policy_.state_dim() ||
        a.trackers_.size() != (a.config_.per_head_scale ? a.etas_.size() : 1) ||
        a.critic_opt_.first_moment().size() != a.critic_.net().params().size() ||
        a.actor_opt_.first_moment().size() != a.policy_.net().params().size()) {
        throw std::invalid_argument("agent checkpoint has inconsistent shapes");
    }
    return a;
}

void Agent::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out << nlohmann::json(*this).dump() << '\n';
    if (!out) {
        throw IoError("failed writing '" + path + "'");
    }
}

Agent Agent::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    return from_json_checkpoint(nlohmann::json::parse(in));
}

} // namespace drop

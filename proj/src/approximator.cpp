#include "drop/approximator.hpp"
#include "drop/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace drop {

namespace {

constexpr int kSnapshotVersion = 1;
constexpr double kSquashLimit = 1.0 - 1e-6;

std::vector<LayerShape> chain_layers(const std::vector<Index>& sizes, Activation hidden, Activation output) {
    if (sizes.size() < 2) {
        throw std::invalid_argument("network needs at least an input and an output size");
    }
    std::vector<LayerShape> layers;
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
        const bool last = k + 2 == sizes.size();
        layers.push_back({sizes[k], sizes[k + 1], last ? output : hidden, 0});
    }
    return layers;
}

std::vector<Index> with_ends(Index in, const std::vector<Index>& hidden, Index out) {
    std::vector<Index> sizes{in};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(out);
    return sizes;
}

Eigen::MatrixXd column(std::span<const double> x) {
    return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Index>(x.size()));
}

void check_action_box(const std::vector<double>& low, const std::vector<double>& high) {
    if (low.empty() || low.size() != high.size()) {
        throw std::invalid_argument("action bounds must be nonempty and of equal length");
    }
    for (std::size_t j = 0; j < low.size(); ++j) {
        if (!(low[j] < high[j])) {
            throw std::invalid_argument("action bounds require low < high");
        }
    }
}

} // namespace

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "identity"; }

Activation activation_from_string(const std::string& name) {
    if (name == "tanh") return Activation::tanh;
    if (name == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(const std::vector<Index>& sizes, Activation hidden, Activation output)
    : Mlp(chain_layers(sizes, hidden, output)) {}

Mlp::Mlp(std::vector<LayerShape> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) {
        throw std::invalid_argument("network needs at least one layer");
    }
    Index offset = 0;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        auto& l = layers_[k];
        if (l.in <= 0 || l.out <= 0) {
            throw std::invalid_argument("layer dimensions must be positive");
        }
        if (k > 0 && layers_[k - 1].out != l.in) {
            throw std::invalid_argument("layer dimensions do not chain");
        }
        l.offset = offset;
        offset += l.out * l.in + l.out;
    }
    params_ = Eigen::VectorXd::Zero(offset);
}

void Mlp::initialize(std::mt19937_64& rng) {
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layers_[k].in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        auto w = weight(k);
        for (Index r = 0; r < w.rows(); ++r) {
            for (Index c = 0; c < w.cols(); ++c) {
                w(r, c) = dist(rng);
            }
        }
        auto b = bias(k);
        for (Index r = 0; r < b.size(); ++r) {
            b(r) = dist(rng);
        }
    }
}

Eigen::Map<RowMatrix> Mlp::weight(std::size_t layer) {
    const auto& l = layers_.at(layer);
    return {params_.data() + l.offset, l.out, l.in};
}

Eigen::Map<const RowMatrix> Mlp::weight(std::size_t layer) const {
    const auto& l = layers_.at(layer);
    return {params_.data() + l.offset, l.out, l.in};
}

Eigen::Map<Eigen::VectorXd> Mlp::bias(std::size_t layer) {
    const auto& l = layers_.at(layer);
    return {params_.data() + l.offset + l.out * l.in, l.out};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t layer) const {
    const auto& l = layers_.at(layer);
    return {params_.data() + l.offset + l.out * l.in, l.out};
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs, Cache* cache) const {
    if (inputs.rows() != input_dim()) {
        throw std::invalid_argument("input dimension " + std::to_string(inputs.rows()) + " does not match network input " +
                                    std::to_string(input_dim()));
    }
    if (cache != nullptr) {
        cache->activations.clear();
        cache->activations.reserve(layers_.size() + 1);
        cache->activations.push_back(inputs);
    }
    Eigen::MatrixXd x = inputs;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        Eigen::MatrixXd z = weight(k) * x;
        z.colwise() += bias(k);
        if (layers_[k].activation == Activation::tanh) {
            z = z.array().tanh().matrix();
        }
        if (cache != nullptr) {
            cache->activations.push_back(z);
        }
        x = std::move(z);
    }
    return x;
}

void Mlp::backward(const Cache& cache, const Eigen::MatrixXd& output_grad, Eigen::VectorXd& grad) const {
    if (cache.activations.size() != layers_.size() + 1) {
        throw std::invalid_argument("backward called with a cache from a different network");
    }
    if (grad.size() != params_.size()) {
        throw std::invalid_argument("gradient buffer is not congruent with the parameters");
    }
    Eigen::MatrixXd upstream = output_grad;
    for (std::size_t k = layers_.size(); k-- > 0;) {
        const auto& l = layers_[k];
        const Eigen::MatrixXd& out = cache.activations[k + 1];
        const Eigen::MatrixXd& in = cache.activations[k];
        if (l.activation == Activation::tanh) {
            upstream = (upstream.array() * (1.0 - out.array().square())).matrix();
        }
        Eigen::Map<RowMatrix> gw(grad.data() + l.offset, l.out, l.in);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + l.offset + l.out * l.in, l.out);
        gw.noalias() += upstream * in.transpose();
        gb += upstream.rowwise().sum();
        if (k > 0) {
            upstream = weight(k).transpose() * upstream;
        }
    }
}

// ---------------------------------------------------------------------------
// EnsembleCritic

EnsembleCritic::EnsembleCritic(Index state_dim, std::size_t n_heads, const std::vector<Index>& hidden)
    : net_(with_ends(state_dim, hidden, static_cast<Index>(n_heads)), Activation::tanh, Activation::identity) {
    if (n_heads == 0) {
        throw std::invalid_argument("critic needs at least one head");
    }
}

EnsembleCritic::EnsembleCritic(Mlp net) : net_(std::move(net)) {
    if (net_.layers().back().activation != Activation::identity) {
        throw std::invalid_argument("critic heads must be linear");
    }
}

std::vector<double> EnsembleCritic::forward_values(std::span<const double> state) const {
    const Eigen::MatrixXd v = net_.forward(column(state));
    return {v.data(), v.data() + v.size()};
}

Eigen::MatrixXd EnsembleCritic::forward(const Eigen::MatrixXd& states, Mlp::Cache* cache) const {
    return net_.forward(states, cache);
}

GradientBuffer EnsembleCritic::backward_value(const Mlp::Cache& cache, const Eigen::MatrixXd& coeffs) const {
    if (coeffs.rows() != net_.output_dim() || coeffs.cols() != cache.activations.front().cols()) {
        throw std::invalid_argument("head coefficients must be heads x batch");
    }
    if (!coeffs.allFinite()) {
        throw std::invalid_argument("head coefficients must be finite");
    }
    GradientBuffer grad = net_.zero_gradient();
    net_.backward(cache, coeffs, grad.values);
    return grad;
}

GradientBuffer EnsembleCritic::backward_value(const Eigen::MatrixXd& states, const Eigen::MatrixXd& coeffs) const {
    Mlp::Cache cache;
    (void)net_.forward(states, &cache);
    return backward_value(cache, coeffs);
}

GradientBuffer EnsembleCritic::backward_value(std::span<const double> state, std::span<const double> coeffs) const {
    return backward_value(column(state), column(coeffs));
}

void EnsembleCritic::mask_heads(GradientBuffer& grad) const {
    const auto& head = net_.layers().back();
    grad.values.segment(head.offset, head.out * head.in + head.out).setZero();
}

// ---------------------------------------------------------------------------
// GaussianPolicy

GaussianPolicy::GaussianPolicy(Index state_dim, std::vector<double> action_low, std::vector<double> action_high,
                               const std::vector<Index>& hidden)
    : net_(with_ends(state_dim, hidden, 2 * static_cast<Index>(action_low.size())), Activation::tanh,
           Activation::identity),
      low_(std::move(action_low)),
      high_(std::move(action_high)) {
    check_action_box(low_, high_);
}

GaussianPolicy::GaussianPolicy(Mlp net, std::vector<double> action_low, std::vector<double> action_high)
    : net_(std::move(net)), low_(std::move(action_low)), high_(std::move(action_high)) {
    check_action_box(low_, high_);
    if (net_.output_dim() != 2 * static_cast<Index>(low_.size())) {
        throw std::invalid_argument("policy network must output mean and log-std per action dimension");
    }
}

void GaussianPolicy::set_mean_limit(double limit) {
    if (!(limit >= 0.0) || !std::isfinite(limit)) {
        throw std::invalid_argument("mean limit must be finite and nonnegative");
    }
    mean_limit_ = limit;
}

double GaussianPolicy::bound_mean(double raw) const {
    return mean_limit_ > 0.0 ? mean_limit_ * std::tanh(raw / mean_limit_) : raw;
}

PolicyOutput GaussianPolicy::forward_policy(std::span<const double> state) const {
    const Eigen::VectorXd out = net_.forward(column(state));
    const Index a = action_dim();
    return {out.head(a).unaryExpr([this](double r) { return bound_mean(r); }),
            out.tail(a).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax)};
}

std::vector<double> GaussianPolicy::sample(std::span<const double> state, std::mt19937_64& rng) const {
    const PolicyOutput p = forward_policy(state);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> action(low_.size());
    for (std::size_t j = 0; j < action.size(); ++j) {
        const auto jj = static_cast<Index>(j);
        const double u = p.mean(jj) + std::exp(p.log_std(jj)) * normal(rng);
        const double center = 0.5 * (high_[j] + low_[j]);
        const double half = 0.5 * (high_[j] - low_[j]);
        action[j] = center + half * std::tanh(u);
    }
    return action;
}

std::vector<double> GaussianPolicy::mean_action(std::span<const double> state) const {
    const PolicyOutput p = forward_policy(state);
    std::vector<double> action(low_.size());
    for (std::size_t j = 0; j < action.size(); ++j) {
        const double center = 0.5 * (high_[j] + low_[j]);
        const double half = 0.5 * (high_[j] - low_[j]);
        action[j] = center + half * std::tanh(p.mean(static_cast<Index>(j)));
    }
    return action;
}

Eigen::MatrixXd GaussianPolicy::unsquash(const Eigen::MatrixXd& actions) const {
    if (actions.rows() != action_dim()) {
        throw std::invalid_argument("action dimension mismatch");
    }
    Eigen::MatrixXd u(actions.rows(), actions.cols());
    for (Index j = 0; j < actions.rows(); ++j) {
        const auto jj = static_cast<std::size_t>(j);
        const double center = 0.5 * (high_[jj] + low_[jj]);
        const double half = 0.5 * (high_[jj] - low_[jj]);
        for (Index b = 0; b < actions.cols(); ++b) {
            const double y = std::clamp((actions(j, b) - center) / half, -kSquashLimit, kSquashLimit);
            u(j, b) = std::atanh(y);
        }
    }
    return u;
}

Eigen::MatrixXd GaussianPolicy::standardized(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const {
    if (states.cols() != actions.cols()) {
        throw std::invalid_argument("states and actions must share the batch size");
    }
    const Eigen::MatrixXd out = net_.forward(states);
    Eigen::MatrixXd z = unsquash(actions);
    const Index a = action_dim();
    for (Index b = 0; b < z.cols(); ++b) {
        for (Index j = 0; j < a; ++j) {
            const double log_std = std::clamp(out(a + j, b), kLogStdMin, kLogStdMax);
            z(j, b) = (z(j, b) - bound_mean(out(j, b))) * std::exp(-log_std);
        }
    }
    return z;
}

double GaussianPolicy::log_prob(std::span<const double> state, std::span<const double> action) const {
    const PolicyOutput p = forward_policy(state);
    const Eigen::VectorXd u = unsquash(column(action));
    double lp = 0.0;
    for (Index j = 0; j < u.size(); ++j) {
        const auto jj = static_cast<std::size_t>(j);
        const double z = (u(j) - p.mean(j)) * std::exp(-p.log_std(j));
        const double half = 0.5 * (high_[jj] - low_[jj]);
        const double t = std::tanh(u(j));
        lp += -0.5 * z * z - p.log_std(j) - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(half * (1.0 - t * t));
    }
    return lp;
}

GradientBuffer GaussianPolicy::backward_logprob(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                                                std::span<const double> coeffs) const {
    if (states.cols() != actions.cols() || static_cast<std::size_t>(states.cols()) != coeffs.size()) {
        throw std::invalid_argument("states, actions and coefficients must share the batch size");
    }
    if (!states.allFinite() || !actions.allFinite()) {
        throw std::invalid_argument("policy gradient inputs must be finite");
    }
    Mlp::Cache cache;
    const Eigen::MatrixXd out = net_.forward(states, &cache);
    const Eigen::MatrixXd u = unsquash(actions);
    const Index a = action_dim();
    // The squash correction does not depend on the parameters, so only the
    // Gaussian term of ln pi contributes.
    Eigen::MatrixXd dout(out.rows(), out.cols());
    for (Index b = 0; b < out.cols(); ++b) {
        const double c = coeffs[static_cast<std::size_t>(b)];
        if (!std::isfinite(c)) {
            throw std::invalid_argument("policy gradient coefficients must be finite");
        }
        for (Index j = 0; j < a; ++j) {
            const double raw = out(a + j, b);
            const double log_std = std::clamp(raw, kLogStdMin, kLogStdMax);
            const double inv_var = std::exp(-2.0 * log_std);
            const double mean = bound_mean(out(j, b));
            const double slope = mean_limit_ > 0.0 ? 1.0 - (mean / mean_limit_) * (mean / mean_limit_) : 1.0;
            const double diff = u(j, b) - mean;
            dout(j, b) = c * diff * inv_var * slope;
            const bool clamped = raw < kLogStdMin || raw > kLogStdMax;
            dout(a + j, b) = clamped ? 0.0 : c * (diff * diff * inv_var - 1.0);
        }
    }
    GradientBuffer grad = net_.zero_gradient();
    net_.backward(cache, dout, grad.values);
    return grad;
}

GradientBuffer GaussianPolicy::backward_logprob(std::span<const double> state, std::span<const double> action) const {
    const double one = 1.0;
    return backward_logprob(column(state), column(action), std::span<const double>(&one, 1));
}

// ---------------------------------------------------------------------------
// AdamOptimizer

AdamOptimizer::AdamOptimizer(Index n_params, Config config)
    : config_(config), m_(Eigen::VectorXd::Zero(n_params)), v_(Eigen::VectorXd::Zero(n_params)) {}

bool AdamOptimizer::step(Eigen::VectorXd& params, const GradientBuffer& grad) {
    if (params.size() != m_.size() || grad.values.size() != m_.size()) {
        throw std::invalid_argument("optimizer state is not congruent with the parameters");
    }
    if (!grad.all_finite()) {
        ++skipped_;
        return false;
    }
    ++steps_;
    const auto& g = grad.values.array();
    m_.array() = config_.beta1 * m_.array() + (1.0 - config_.beta1) * g;
    v_.array() = config_.beta2 * v_.array() + (1.0 - config_.beta2) * g.square();
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    params.array() -= config_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon);
    return true;
}

void soft_update(Eigen::VectorXd& target, const Eigen::VectorXd& source, double tau) {
    if (target.size() != source.size()) {
        throw std::invalid_argument("target and source parameters are not congruent");
    }
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw std::invalid_argument("target rate must lie in (0, 1]");
    }
    if (tau == 1.0) {
        target = source;
        return;
    }
    target = (1.0 - tau) * target + tau * source;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

} // namespace

void to_json(nlohmann::json& j, const Mlp& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t k = 0; k < net.layers().size(); ++k) {
        const auto& l = net.layers()[k];
        const auto w = net.weight(k);
        const auto b = net.bias(k);
        layers.push_back({{"in", l.in},
                          {"out", l.out},
                          {"activation", to_string(l.activation)},
                          {"weights", std::vector<double>(w.data(), w.data() + w.size())},
                          {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
    }
    j = {{"format", "drop-mlp"}, {"version", kSnapshotVersion}, {"layers", std::move(layers)}};
}

void from_json(const nlohmann::json& j, Mlp& net) {
    if (j.at("format").get<std::string>() != "drop-mlp") {
        throw std::invalid_argument("not a network snapshot");
    }
    if (j.at("version").get<int>() != kSnapshotVersion) {
        throw std::invalid_argument("unsupported network snapshot version " + j.at("version").dump());
    }
    std::vector<LayerShape> shapes;
    for (const auto& l : j.at("layers")) {
        shapes.push_back({l.at("in").get<Index>(), l.at("out").get<Index>(),
                          activation_from_string(l.at("activation").get<std::string>()), 0});
    }
    Mlp result(std::move(shapes));
    for (std::size_t k = 0; k < result.layers().size(); ++k) {
        const auto& l = j.at("layers")[k];
        const auto w = l.at("weights").get<std::vector<double>>();
        const auto b = l.at("bias").get<std::vector<double>>();
        auto wm = result.weight(k);
        auto bm = result.bias(k);
        if (static_cast<Index>(w.size()) != wm.size() || static_cast<Index>(b.size()) != bm.size()) {
            throw std::invalid_argument("snapshot layer " + std::to_string(k) + " has inconsistent sizes");
        }
        std::copy(w.begin(), w.end(), wm.data());
        std::copy(b.begin(), b.end(), bm.data());
    }
    if (!result.params().allFinite()) {
        throw std::invalid_argument("snapshot contains non-finite parameters");
    }
    net = std::move(result);
}

void to_json(nlohmann::json& j, const AdamOptimizer& opt) {
    j = {{"learning_rate", opt.config_.learning_rate},
         {"beta1", opt.config_.beta1},
         {"beta2", opt.config_.beta2},
         {"epsilon", opt.config_.epsilon},
         {"steps", opt.steps_},
         {"skipped", opt.skipped_},
         {"m", to_vector(opt.m_)},
         {"v", to_vector(opt.v_)}};
}

void from_json(const nlohmann::json& j, AdamOptimizer& opt) {
    AdamOptimizer::Config c;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    AdamOptimizer result(0, c);
    result.m_ = from_vector(j.at("m").get<std::vector<double>>());
    result.v_ = from_vector(j.at("v").get<std::vector<double>>());
    if (result.m_.size() != result.v_.size() || (result.v_.array() < 0.0).any()) {
        throw std::invalid_argument("corrupt optimizer state");
    }
    result.steps_ = j.at("steps").get<std::uint64_t>();
    result.skipped_ = j.value("skipped", std::uint64_t{0});
    opt = std::move(result);
}

void save_snapshot(const Mlp& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out << nlohmann::json(net).dump() << '\n';
    if (!out) {
        throw IoError("failed writing '" + path + "'");
    }
}

Mlp load_snapshot(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    return nlohmann::json::parse(in).get<Mlp>();
}

} // namespace drop

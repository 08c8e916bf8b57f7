#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace drop {

using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { identity, tanh };

[[nodiscard]] std::string to_string(Activation a);
[[nodiscard]] Activation activation_from_string(const std::string& name);

struct LayerShape {
    Index in = 0;
    Index out = 0;
    Activation activation = Activation::identity;
    Index offset = 0;  // start of the row-major weights in the flat parameter vector; bias follows
};

/// First-order derivatives, shape-congruent with the flat parameter vector they mirror.
struct GradientBuffer {
    Eigen::VectorXd values;

    [[nodiscard]] bool all_finite() const { return values.allFinite(); }
};

/// Fully connected network over a single flat parameter vector.
/// Inputs and outputs are column-per-sample matrices.
class Mlp {
public:
    struct Cache {
        std::vector<Eigen::MatrixXd> activations;  // activations[0] is the input, back() the output
    };

    Mlp() = default;
    /// sizes = {input, hidden..., output}; hidden layers use `hidden`, the last layer `output`.
    Mlp(const std::vector<Index>& sizes, Activation hidden, Activation output);
    explicit Mlp(std::vector<LayerShape> layers);

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    void initialize(std::mt19937_64& rng);

    [[nodiscard]] Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs, Cache* cache = nullptr) const;

    /// Accumulates d(sum(output_grad .* output))/d(params) into `grad`.
    void backward(const Cache& cache, const Eigen::MatrixXd& output_grad, Eigen::VectorXd& grad) const;

    [[nodiscard]] Index input_dim() const { return layers_.front().in; }
    [[nodiscard]] Index output_dim() const { return layers_.back().out; }
    [[nodiscard]] const std::vector<LayerShape>& layers() const noexcept { return layers_; }

    [[nodiscard]] Eigen::VectorXd& params() noexcept { return params_; }
    [[nodiscard]] const Eigen::VectorXd& params() const noexcept { return params_; }

    [[nodiscard]] Eigen::Map<RowMatrix> weight(std::size_t layer);
    [[nodiscard]] Eigen::Map<const RowMatrix> weight(std::size_t layer) const;
    [[nodiscard]] Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);
    [[nodiscard]] Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

    [[nodiscard]] GradientBuffer zero_gradient() const { return {Eigen::VectorXd::Zero(params_.size())}; }

private:
    std::vector<LayerShape> layers_;
    Eigen::VectorXd params_;
};

/// Shared trunk with N scalar linear heads. The heads are the rows of the
/// final layer, so one trunk pass serves every head.
class EnsembleCritic {
public:
    EnsembleCritic() = default;
    EnsembleCritic(Index state_dim, std::size_t n_heads, const std::vector<Index>& hidden);
    explicit EnsembleCritic(Mlp net);

    void initialize(std::mt19937_64& rng) { net_.initialize(rng); }

    [[nodiscard]] std::size_t n_heads() const { return static_cast<std::size_t>(net_.output_dim()); }
    [[nodiscard]] Index state_dim() const { return net_.input_dim(); }

    /// One value per head.
    [[nodiscard]] std::vector<double> forward_values(std::span<const double> state) const;
    /// heads x batch.
    [[nodiscard]] Eigen::MatrixXd forward(const Eigen::MatrixXd& states, Mlp::Cache* cache = nullptr) const;

    /// Gradient of sum_b sum_i coeffs(i, b) * V_i(s_b).
    [[nodiscard]] GradientBuffer backward_value(const Eigen::MatrixXd& states, const Eigen::MatrixXd& coeffs) const;
    [[nodiscard]] GradientBuffer backward_value(const Mlp::Cache& cache, const Eigen::MatrixXd& coeffs) const;
    [[nodiscard]] GradientBuffer backward_value(std::span<const double> state, std::span<const double> coeffs) const;

    /// Zeroes the gradient entries of the head layer (weights and biases).
    void mask_heads(GradientBuffer& grad) const;

    [[nodiscard]] Mlp& net() noexcept { return net_; }
    [[nodiscard]] const Mlp& net() const noexcept { return net_; }

private:
    Mlp net_;
};

struct PolicyOutput {
    Eigen::VectorXd mean;
    Eigen::VectorXd log_std;
};

/// Diagonal Gaussian over a pre-squash variable u, mapped into the action box
/// by a = center + half_range * tanh(u).
class GaussianPolicy {
public:
    static constexpr double kLogStdMin = -5.0;
    static constexpr double kLogStdMax = 2.0;

    GaussianPolicy() = default;
    GaussianPolicy(Index state_dim, std::vector<double> action_low, std::vector<double> action_high,
                   const std::vector<Index>& hidden);
    GaussianPolicy(Mlp net, std::vector<double> action_low, std::vector<double> action_high);

    void initialize(std::mt19937_64& rng) { net_.initialize(rng); }

    [[nodiscard]] Index state_dim() const { return net_.input_dim(); }
    [[nodiscard]] Index action_dim() const { return net_.output_dim() / 2; }

    /// Soft bound L on the pre-squash mean, mean = L tanh(raw / L); 0 leaves it unbounded.
    void set_mean_limit(double limit);
    [[nodiscard]] double mean_limit() const noexcept { return mean_limit_; }

    [[nodiscard]] PolicyOutput forward_policy(std::span<const double> state) const;
    [[nodiscard]] std::vector<double> sample(std::span<const double> state, std::mt19937_64& rng) const;
    [[nodiscard]] std::vector<double> mean_action(std::span<const double> state) const;
    [[nodiscard]] double log_prob(std::span<const double> state, std::span<const double> action) const;

    /// Gradient of sum_b coeffs[b] * ln pi(a_b | s_b); states and actions are column-per-sample.
    [[nodiscard]] GradientBuffer backward_logprob(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                                                  std::span<const double> coeffs) const;
    [[nodiscard]] GradientBuffer backward_logprob(std::span<const double> state, std::span<const double> action) const;

    /// (u - mean) / std per action dimension and sample, u the unsquashed action.
    [[nodiscard]] Eigen::MatrixXd standardized(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const;
    /// Inverse of the squash; actions at the bounds are pulled just inside.
    [[nodiscard]] Eigen::MatrixXd unsquash(const Eigen::MatrixXd& actions) const;

    [[nodiscard]] const std::vector<double>& action_low() const noexcept { return low_; }
    [[nodiscard]] const std::vector<double>& action_high() const noexcept { return high_; }
    [[nodiscard]] Mlp& net() noexcept { return net_; }
    [[nodiscard]] const Mlp& net() const noexcept { return net_; }

private:
    [[nodiscard]] double bound_mean(double raw) const;

    Mlp net_;
    std::vector<double> low_;
    std::vector<double> high_;
    double mean_limit_ = 0.0;
};

/// Moment-normalized adaptive descent (Adam).
class AdamOptimizer {
public:
    struct Config {
        double learning_rate = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
    };

    AdamOptimizer() = default;
    AdamOptimizer(Index n_params, Config config);

    /// Descends along `grad`. Returns false and leaves everything untouched
    /// if the gradient has non-finite entries.
    bool step(Eigen::VectorXd& params, const GradientBuffer& grad);

    [[nodiscard]] std::uint64_t step_count() const noexcept { return steps_; }
    [[nodiscard]] std::uint64_t skipped_steps() const noexcept { return skipped_; }
    [[nodiscard]] const Config& config() const noexcept { return config_; }
    [[nodiscard]] const Eigen::VectorXd& first_moment() const noexcept { return m_; }
    [[nodiscard]] const Eigen::VectorXd& second_moment() const noexcept { return v_; }

    friend void to_json(nlohmann::json& j, const AdamOptimizer& opt);
    friend void from_json(const nlohmann::json& j, AdamOptimizer& opt);

private:
    Config config_;
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
    std::uint64_t steps_ = 0;
    std::uint64_t skipped_ = 0;
};

/// target <- (1 - tau) * target + tau * source, elementwise.
void soft_update(Eigen::VectorXd& target, const Eigen::VectorXd& source, double tau);

void to_json(nlohmann::json& j, const Mlp& net);
void from_json(const nlohmann::json& j, Mlp& net);

void save_snapshot(const Mlp& net, const std::string& path);
[[nodiscard]] Mlp load_snapshot(const std::string& path);

} // namespace drop

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace drop {

/// Degree of optimism in (-1, 1); negative values are pessimistic.
class OptimismParameter {
public:
    /// Throws std::invalid_argument unless -1 < eta < 1.
    explicit OptimismParameter(double eta);

    [[nodiscard]] double value() const noexcept { return eta_; }

private:
    double eta_;
};

/// Curvature of the nonlinear TD transform. Zero selects the identity.
class InverseTemperature {
public:
    /// Throws std::invalid_argument for non-finite beta.
    explicit InverseTemperature(double beta);

    [[nodiscard]] double value() const noexcept { return beta_; }

private:
    double beta_;
};

/// Decaying running maximum of |delta|, used as the empirical worst-case
/// TD error that normalizes eta -> beta.
struct TDScaleTracker {
    double scale = 1.0;
    double decay = 0.999;
    double floor = 0.01;

    static constexpr double kDefaultDecay = 0.999;
    static constexpr double kDefaultFloor = 0.01;
};

/// Regularly spaced optimism values, one per critic head.
class OptimismSchedule {
public:
    /// Throws std::invalid_argument unless the values are strictly increasing,
    /// antisymmetric about zero and inside (-1, 1).
    explicit OptimismSchedule(std::vector<double> etas);

    [[nodiscard]] std::span<const double> etas() const noexcept { return etas_; }
    [[nodiscard]] std::size_t size() const noexcept { return etas_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return etas_[i]; }

private:
    std::vector<double> etas_;
};

/// Value of a transform evaluation plus whether the exponent was clamped.
struct TransformValue {
    double value = 0.0;
    bool saturated = false;
};

/// Exponent above which e^(beta*delta) is clamped.
inline constexpr double kExponentClamp = 30.0;
/// Below this |beta*delta| the second-order series replaces expm1.
inline constexpr double kSeriesCutoff = 1e-7;

/// f_beta(delta) = (e^(beta*delta) - 1) / beta, identity at beta = 0.
/// Convex and optimistic for beta > 0, concave and pessimistic for beta < 0.
/// Exponents above kExponentClamp saturate and set the flag.
[[nodiscard]] TransformValue transform_td_checked(double beta, double delta);
[[nodiscard]] double transform_td(double beta, double delta);
[[nodiscard]] double transform_td(InverseTemperature beta, double delta);

/// Asymmetric learning-rate rule (1 + sgn(delta) * eta) * delta with sgn(0) = 0.
[[nodiscard]] double transform_td_heuristic(double eta, double delta);
[[nodiscard]] double transform_td_heuristic(OptimismParameter eta, double delta);

/// beta = -sgn(eta) * ln(1 - |eta|) / scale.
[[nodiscard]] InverseTemperature eta_to_beta(OptimismParameter eta, const TDScaleTracker& tracker);
[[nodiscard]] double eta_to_beta(double eta, double scale);

/// eta = -sgn(beta) * (e^(-|beta| * scale) - 1), the inverse of eta_to_beta.
[[nodiscard]] OptimismParameter beta_to_eta(InverseTemperature beta, const TDScaleTracker& tracker);
[[nodiscard]] double beta_to_eta(double beta, double scale);

/// scale' = max(|delta|, decay * scale, floor).
[[nodiscard]] TDScaleTracker observe_td(const TDScaleTracker& tracker, double delta);

/// n values evenly spaced over [-eta_max, eta_max]; n == 1 yields {0}.
[[nodiscard]] OptimismSchedule make_schedule(std::size_t n, double eta_max);

/// Middle order statistic; mean of the two middle values for even sizes.
[[nodiscard]] double median(std::span<const double> values);

} // namespace drop

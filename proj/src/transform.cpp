#include "drop/transform.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace drop {

namespace {

double sign(double x) noexcept { return static_cast<double>((x > 0.0) - (x < 0.0)); }

void require_finite(double x, const char* what) {
    if (!std::isfinite(x)) {
        throw std::invalid_argument(std::string(what) + " must be finite");
    }
}

} // namespace

OptimismParameter::OptimismParameter(double eta) : eta_(eta) {
    if (!(eta > -1.0 && eta < 1.0)) {
        throw std::invalid_argument("optimism parameter must lie in (-1, 1), got " + std::to_string(eta));
    }
}

InverseTemperature::InverseTemperature(double beta) : beta_(beta) { require_finite(beta, "inverse temperature"); }

OptimismSchedule::OptimismSchedule(std::vector<double> etas) : etas_(std::move(etas)) {
    if (etas_.empty()) {
        throw std::invalid_argument("optimism schedule must not be empty");
    }
    const std::size_t n = etas_.size();
    for (std::size_t i = 0; i < n; ++i) {
        (void)OptimismParameter(etas_[i]);
        if (i > 0 && !(etas_[i] > etas_[i - 1])) {
            throw std::invalid_argument("optimism schedule must be strictly increasing");
        }
        if (etas_[i] != -etas_[n - 1 - i]) {
            throw std::invalid_argument("optimism schedule must be symmetric about zero");
        }
    }
}

TransformValue transform_td_checked(double beta, double delta) {
    require_finite(delta, "TD error");
    require_finite(beta, "inverse temperature");
    if (beta == 0.0) {
        return {delta, false};
    }
    const double x = beta * delta;
    if (std::abs(x) < kSeriesCutoff) {
        return {delta + 0.5 * x * delta, false};
    }
    if (x > kExponentClamp) {
        return {std::expm1(kExponentClamp) / beta, true};
    }
    return {std::expm1(x) / beta, false};
}

double transform_td(double beta, double delta) { return transform_td_checked(beta, delta).value; }

double transform_td(InverseTemperature beta, double delta) { return transform_td(beta.value(), delta); }

double transform_td_heuristic(double eta, double delta) {
    require_finite(delta, "TD error");
    return (1.0 + sign(delta) * eta) * delta;
}

double transform_td_heuristic(OptimismParameter eta, double delta) {
    return transform_td_heuristic(eta.value(), delta);
}

double eta_to_beta(double eta, double scale) {
    if (!(scale > 0.0)) {
        throw std::invalid_argument("TD scale must be positive");
    }
    if (eta == 0.0) {
        return 0.0;
    }
    return -sign(eta) * std::log1p(-std::abs(eta)) / scale;
}

InverseTemperature eta_to_beta(OptimismParameter eta, const TDScaleTracker& tracker) {
    return InverseTemperature(eta_to_beta(eta.value(), tracker.scale));
}

double beta_to_eta(double beta, double scale) {
    if (!(scale > 0.0)) {
        throw std::invalid_argument("TD scale must be positive");
    }
    if (beta == 0.0) {
        return 0.0;
    }
    return -sign(beta) * std::expm1(-std::abs(beta) * scale);
}

OptimismParameter beta_to_eta(InverseTemperature beta, const TDScaleTracker& tracker) {
    return OptimismParameter(beta_to_eta(beta.value(), tracker.scale));
}

TDScaleTracker observe_td(const TDScaleTracker& tracker, double delta) {
    require_finite(delta, "TD error");
    TDScaleTracker next = tracker;
    next.scale = std::max({std::abs(delta), tracker.decay * tracker.scale, tracker.floor});
    return next;
}

OptimismSchedule make_schedule(std::size_t n, double eta_max) {
    if (n == 0) {
        throw std::invalid_argument("schedule needs at least one head");
    }
    if (!(eta_max > 0.0 && eta_max < 1.0)) {
        throw std::invalid_argument("eta_max must lie in (0, 1)");
    }
    std::vector<double> etas(n, 0.0);
    if (n > 1) {
        const auto span = static_cast<double>(n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            // 2i - (n-1) negates exactly under i -> n-1-i, so the grid is symmetric bit-for-bit.
            const double k = 2.0 * static_cast<double>(i) - span;
            etas[i] = eta_max * k / span;
        }
    }
    return OptimismSchedule(std::move(etas));
}

double median(std::span<const double> values) {
    if (values.empty()) {
        throw std::invalid_argument("median of an empty set");
    }
    for (double x : values) {
        require_finite(x, "median input");
    }
    std::vector<double> v(values.begin(), values.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

} // namespace drop

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <vector>

#include "drop/approximator.hpp"
#include "oracles.hpp"

using namespace drop;

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::vector<Index> random_sizes(std::mt19937_64& rng, Index in, Index out) {
    std::uniform_int_distribution<int> depth(0, 2), width(1, 10);
    std::vector<Index> sizes = {in};
    const int d = depth(rng);
    for (int i = 0; i < d; ++i) {
        sizes.push_back(width(rng));
    }
    sizes.push_back(out);
    return sizes;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) {
        x = u(rng);
    }
    return v;
}

} // namespace

TEST_CASE("forward of a zero network is zero") {
    EnsembleCritic critic(3, 4, {5, 5});
    critic.net().params().setZero();
    for (double v : critic.forward_values(std::vector<double>{0.3, -1.0, 2.0})) {
        CHECK(v == 0.0);
    }
    GaussianPolicy policy(2, {-1.0}, {1.0}, {4});
    policy.net().params().setZero();
    const PolicyOutput p = policy.forward_policy(std::vector<double>{1.0, 2.0});
    CHECK(p.mean(0) == 0.0);
    CHECK(p.log_std(0) == 0.0);
}

TEST_CASE("hand-computed composition") {
    // 1-unit identity trunk with unit weight, head weight 2 and bias 1: V([3]) = 2*3 + 1.
    Mlp net({LayerShape{1, 1, Activation::identity, 0}, LayerShape{1, 1, Activation::identity, 0}});
    net.weight(0)(0, 0) = 1.0;
    net.bias(0)(0) = 0.0;
    net.weight(1)(0, 0) = 2.0;
    net.bias(1)(0) = 1.0;
    const EnsembleCritic critic(net);
    CHECK(critic.forward_values(std::vector<double>{3.0})[0] == 7.0);
}

TEST_CASE("forward is deterministic and rejects dimension mismatch") {
    std::mt19937_64 rng(11);
    EnsembleCritic critic(3, 5, {8, 8});
    critic.initialize(rng);
    const std::vector<double> s = {0.1, 0.2, -0.3};
    CHECK(critic.forward_values(s) == critic.forward_values(s));
    CHECK_THROWS_AS((void)critic.forward_values(std::vector<double>{1.0}), std::invalid_argument);

    GaussianPolicy policy(3, {-2.0}, {2.0}, {6});
    policy.initialize(rng);
    CHECK(policy.forward_policy(s).mean == policy.forward_policy(s).mean);
    CHECK_THROWS_AS((void)policy.forward_policy(std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("log-std is clamped") {
    GaussianPolicy policy(1, {-1.0}, {1.0}, {});
    policy.net().params().setZero();
    policy.net().bias(0)(1) = 7.0;
    CHECK(policy.forward_policy(std::vector<double>{0.0}).log_std(0) == GaussianPolicy::kLogStdMax);
    policy.net().bias(0)(1) = -9.0;
    CHECK(policy.forward_policy(std::vector<double>{0.0}).log_std(0) == GaussianPolicy::kLogStdMin);
}

TEST_CASE("value gradients match central differences on random networks") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> dim(1, 6), heads(1, 9);
        const Index sd = dim(rng);
        const auto n = static_cast<std::size_t>(heads(rng));
        const auto sizes = random_sizes(rng, sd, static_cast<Index>(n));
        EnsembleCritic critic(Mlp(sizes, Activation::tanh, Activation::identity));
        critic.initialize(rng);
        const auto state = random_vector(rng, static_cast<std::size_t>(sd), -2.0, 2.0);
        const auto coeffs = random_vector(rng, n, -1.0, 1.0);

        const auto analytic = to_std(critic.backward_value(state, coeffs).values);
        auto objective = [&](const std::vector<double>& p) {
            EnsembleCritic c = critic;
            c.net().params() = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Index>(p.size()));
            const auto v = c.forward_values(state);
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                sum += coeffs[i] * v[i];
            }
            return sum;
        };
        const auto numeric = oracle::central_difference(objective, to_std(critic.net().params()), 1e-5);
        CHECK(oracle::max_relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("log-probability gradients match central differences on random networks") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> dim(1, 5), adim(1, 3);
        const Index sd = dim(rng);
        const auto ad = static_cast<std::size_t>(adim(rng));
        const auto sizes = random_sizes(rng, sd, 2 * static_cast<Index>(ad));
        const auto low = random_vector(rng, ad, -3.0, -0.5);
        const auto high = random_vector(rng, ad, 0.5, 3.0);
        GaussianPolicy policy(Mlp(sizes, Activation::tanh, Activation::identity), low, high);
        if (trial % 2 == 1) {
            policy.set_mean_limit(2.5);
        }
        policy.initialize(rng);
        const auto state = random_vector(rng, static_cast<std::size_t>(sd), -2.0, 2.0);
        std::vector<double> action(ad);
        for (std::size_t j = 0; j < ad; ++j) {
            action[j] = low[j] + (high[j] - low[j]) * std::uniform_real_distribution<double>(0.05, 0.95)(rng);
        }

        const auto analytic = to_std(policy.backward_logprob(state, action).values);
        auto objective = [&](const std::vector<double>& p) {
            GaussianPolicy q = policy;
            q.net().params() = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Index>(p.size()));
            return q.log_prob(state, action);
        };
        const auto numeric = oracle::central_difference(objective, to_std(policy.net().params()), 1e-5);
        CHECK(oracle::max_relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("log-density oracle") {
    // Single action dimension, bounds [-2, 2], zero network except the output bias.
    GaussianPolicy policy(1, {-2.0}, {2.0}, {});
    policy.net().params().setZero();
    policy.net().bias(0)(0) = 0.3;   // mean
    policy.net().bias(0)(1) = -0.5;  // log std
    const double a = 1.1;
    const double u = std::atanh(a / 2.0);
    const double sigma = std::exp(-0.5);
    const double z = (u - 0.3) / sigma;
    const double expected = -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * M_PI) - std::log(2.0 * (1.0 - std::tanh(u) * std::tanh(u)));
    CHECK(policy.log_prob(std::vector<double>{0.4}, std::vector<double>{a}) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("score of the mean vanishes in the mean head") {
    std::mt19937_64 rng(5);
    GaussianPolicy policy(2, {-1.0}, {1.0}, {4});
    policy.initialize(rng);
    const std::vector<double> s = {0.2, -0.7};
    const auto action = policy.mean_action(s);
    const GradientBuffer g = policy.backward_logprob(s, action);
    // Output layer row 0 (mean) weights and bias.
    const auto& last = policy.net().layers().back();
    for (Index k = 0; k < last.in; ++k) {
        CHECK(std::abs(g.values(last.offset + k)) < 1e-9);
    }
    CHECK(std::abs(g.values(last.offset + last.in * last.out)) < 1e-9);
}

TEST_CASE("backward_value linearity and head separation") {
    std::mt19937_64 rng(9);
    EnsembleCritic critic(3, 4, {6, 5});
    critic.initialize(rng);
    const std::vector<double> s = {0.5, -0.1, 1.2};
    CHECK(critic.backward_value(s, std::vector<double>{0, 0, 0, 0}).values.isZero(0.0));

    const auto& head = critic.net().layers().back();
    const Index head_bias = head.offset + head.in * head.out;
    for (std::size_t i = 0; i < 4; ++i) {
        std::vector<double> e(4, 0.0);
        e[i] = 1.0;
        const GradientBuffer g = critic.backward_value(s, e);
        for (std::size_t j = 0; j < 4; ++j) {
            const auto jj = static_cast<Index>(j);
            const bool zero = g.values.segment(head.offset + jj * head.in, head.in).isZero(0.0) &&
                              g.values(head_bias + jj) == 0.0;
            CHECK(zero == (i != j));
        }
        CHECK_FALSE(g.values.head(head.offset).isZero(0.0));
    }
    CHECK_THROWS_AS((void)critic.backward_value(s, std::vector<double>{0, NAN, 0, 0}), std::invalid_argument);
}

TEST_CASE("head independence and trunk sharing") {
    std::mt19937_64 rng(13);
    EnsembleCritic critic(2, 3, {7});
    critic.initialize(rng);
    const std::vector<double> s = {0.4, -0.9};
    const auto base = critic.forward_values(s);

    EnsembleCritic moved = critic;
    moved.net().weight(1).row(1).array() += 0.5;
    moved.net().bias(1)(1) += 0.25;
    const auto after_head = moved.forward_values(s);
    CHECK(after_head[0] == base[0]);
    CHECK(after_head[2] == base[2]);
    CHECK(after_head[1] != base[1]);

    EnsembleCritic trunk = critic;
    trunk.net().weight(0).array() += 0.1;
    const auto after_trunk = trunk.forward_values(s);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(after_trunk[i] != base[i]);
    }
}

TEST_CASE("mask_heads zeroes exactly the head layer") {
    std::mt19937_64 rng(21);
    EnsembleCritic critic(2, 3, {4});
    critic.initialize(rng);
    GradientBuffer g{Eigen::VectorXd::Ones(critic.net().params().size())};
    critic.mask_heads(g);
    const auto& head = critic.net().layers().back();
    CHECK(g.values.head(head.offset).isOnes());
    CHECK(g.values.tail(g.values.size() - head.offset).isZero(0.0));
}

TEST_CASE("Adam") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        AdamOptimizer opt(3, {});
        Eigen::VectorXd p(3);
        p << 1.0, -2.0, 3.0;
        const Eigen::VectorXd before = p;
        CHECK(opt.step(p, GradientBuffer{Eigen::VectorXd::Zero(3)}));
        CHECK(p == before);
        CHECK(opt.step_count() == 1);
    }
    SUBCASE("first step moves by about the learning rate against the gradient sign") {
        for (double g : {-4.0, 0.01, 250.0}) {
            AdamOptimizer opt(1, {});
            Eigen::VectorXd p = Eigen::VectorXd::Zero(1);
            Eigen::VectorXd grad(1);
            grad << g;
            opt.step(p, GradientBuffer{grad});
            // m_hat = g, v_hat = g^2: step = lr * g / (|g| + eps).
            const double expected = -1e-3 * g / (std::abs(g) + 1e-8);
            CHECK(p(0) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    SUBCASE("non-finite gradients are skipped") {
        AdamOptimizer opt(2, {});
        Eigen::VectorXd p = Eigen::VectorXd::Ones(2);
        Eigen::VectorXd grad(2);
        grad << 1.0, INFINITY;
        CHECK_FALSE(opt.step(p, GradientBuffer{grad}));
        CHECK(p.isOnes());
        CHECK(opt.step_count() == 0);
        CHECK(opt.skipped_steps() == 1);
    }
    SUBCASE("identical states give identical results") {
        AdamOptimizer a(4, {}), b(4, {});
        Eigen::VectorXd pa = Eigen::VectorXd::LinSpaced(4, -1, 1), pb = pa;
        std::mt19937_64 rng(1);
        for (int i = 0; i < 20; ++i) {
            const auto g = random_vector(rng, 4, -1, 1);
            const GradientBuffer gb{Eigen::Map<const Eigen::VectorXd>(g.data(), 4)};
            a.step(pa, gb);
            b.step(pb, gb);
        }
        CHECK(pa == pb);
        CHECK((a.second_moment().array() >= 0.0).all());
    }
}

TEST_CASE("soft update") {
    Eigen::VectorXd target = Eigen::VectorXd::Zero(1), source = Eigen::VectorXd::Ones(1);
    soft_update(target, source, 0.005);
    CHECK(target(0) == doctest::Approx(0.005));
    for (int k = 1; k < 1000; ++k) {
        soft_update(target, source, 0.005);
    }
    // Closed form after K steps from 0: 1 - (1 - tau)^K.
    CHECK(target(0) == doctest::Approx(1.0 - std::pow(0.995, 1000)).epsilon(1e-12));

    Eigen::VectorXd t2 = Eigen::VectorXd::LinSpaced(5, 0, 1), s2 = Eigen::VectorXd::LinSpaced(5, 3, -7);
    soft_update(t2, s2, 1.0);
    CHECK(t2 == s2);
}

TEST_CASE("snapshot round trip") {
    std::mt19937_64 rng(4);
    Mlp net({3, 6, 2}, Activation::tanh, Activation::identity);
    net.initialize(rng);
    const auto path = std::filesystem::temp_directory_path() / "drop_snapshot_test.json";
    save_snapshot(net, path.string());
    const Mlp back = load_snapshot(path.string());
    CHECK(back.params() == net.params());
    REQUIRE(back.layers().size() == net.layers().size());
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        CHECK(back.layers()[i].activation == net.layers()[i].activation);
        CHECK(back.layers()[i].in == net.layers()[i].in);
    }
    std::filesystem::remove(path);
    CHECK_THROWS((void)load_snapshot("/nonexistent/dir/snapshot.json"));
}

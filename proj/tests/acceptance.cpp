// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "drop/agent.hpp"
#include "drop/approximator.hpp"
#include "drop/envs.hpp"
#include "drop/harness.hpp"
#include "drop/replay.hpp"
#include "drop/transform.hpp"
#include "oracles.hpp"

using namespace drop;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, x);
    return buf;
}

const std::vector<double> kEtaGrid = {-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9};
const std::vector<double> kScaleGrid = {0.01, 1.0, 100.0};

std::vector<double> delta_grid() {
    std::vector<double> d;
    for (int k = -2000; k <= 2000; ++k) {
        d.push_back(k * 0.005);
    }
    return d;
}

std::vector<double> beta_grid() {
    std::vector<double> betas;
    for (double s : kScaleGrid) {
        for (double eta : kEtaGrid) {
            betas.push_back(eta_to_beta(eta, s));
        }
    }
    std::sort(betas.begin(), betas.end());
    betas.erase(std::unique(betas.begin(), betas.end()), betas.end());
    return betas;
}

// ---------------------------------------------------------------------------

Outcome transform_suite() {
    Outcome o;
    int violations = 0;
    auto fail = [&](const std::string& what) {
        if (violations++ < 3) {
            o.detail += what + "; ";
        }
        o.pass = false;
    };
    const auto deltas = delta_grid();
    const auto betas = beta_grid();
    for (double beta : betas) {
        if (transform_td(beta, 0.0) != 0.0) {
            fail("f(0) != 0 at beta " + fmt("%g", beta));
        }
        const double h = 1e-6;
        const double slope = (transform_td(beta, h) - transform_td(beta, -h)) / (2.0 * h);
        if (std::abs(slope - 1.0) > 1e-6) {
            fail("slope " + fmt("%.9g", slope) + " at beta " + fmt("%g", beta));
        }
        std::vector<TransformValue> f;
        for (double d : deltas) {
            f.push_back(transform_td_checked(beta, d));
        }
        for (std::size_t k = 0; k < deltas.size(); ++k) {
            const double v = f[k].value, d = deltas[k];
            if (k > 0 && v < f[k - 1].value) {
                fail("not monotone at beta " + fmt("%g", beta));
            }
            if (beta > 0.0 && v < d) {
                fail("negative bias for beta > 0");
            }
            if (beta < 0.0 && v > d) {
                fail("positive bias for beta < 0");
            }
            if (beta > 0.0 && v < -1.0 / beta) {
                fail("below -1/beta");
            }
            if (beta < 0.0 && v > -1.0 / beta) {
                fail("above -1/beta");
            }
            // Curvature on unsaturated neighbourhoods; the clamp is a deliberate kink.
            if (k > 0 && k + 1 < deltas.size() && !f[k - 1].saturated && !f[k].saturated && !f[k + 1].saturated) {
                const double second = f[k + 1].value - 2.0 * v + f[k - 1].value;
                const double tol = 1e-12 * std::max(1.0, std::abs(v));
                if (beta > 0.0 && second < -tol) {
                    fail("not convex at beta " + fmt("%g", beta));
                }
                if (beta < 0.0 && second > tol) {
                    fail("not concave at beta " + fmt("%g", beta));
                }
            }
        }
    }
    // Ordering in beta on unsaturated values.
    for (std::size_t i = 0; i + 1 < betas.size(); ++i) {
        for (double d : deltas) {
            const auto lo = transform_td_checked(betas[i], d), hi = transform_td_checked(betas[i + 1], d);
            if (!lo.saturated && !hi.saturated && lo.value > hi.value) {
                fail("ordering in beta violated");
            }
        }
    }
    // Continuity at beta -> 0.
    double worst = 0.0;
    for (double beta : {1e-10, -1e-10, 1e-12, -1e-12}) {
        for (double d : deltas) {
            worst = std::max(worst, std::abs(transform_td(beta, d) - d));
        }
    }
    if (worst > 1e-8) {
        fail("beta -> 0 gap " + fmt("%g", worst));
    }
    // Calibration: at the worst-case error the transform reaches fraction |eta|
    // of its bound -1/beta, i.e. eta * (-1/beta) for eta >= 0.
    double calib = 0.0;
    for (double s : kScaleGrid) {
        for (double eta : kEtaGrid) {
            if (eta == 0.0) {
                calib = std::max(calib, std::abs(transform_td(0.0, 0.0)));
                continue;
            }
            const double beta = eta_to_beta(eta, s);
            const double lhs = transform_td(beta, -std::copysign(s, eta));
            calib = std::max(calib, std::abs(lhs - std::abs(eta) * (-1.0 / beta)));
        }
    }
    if (calib > 1e-12) {
        fail("calibration error " + fmt("%g", calib));
    }
    o.detail += std::to_string(betas.size()) + " betas x " + std::to_string(deltas.size()) +
                " deltas, calibration error " + fmt("%.2g", calib) + ", beta->0 gap " + fmt("%.2g", worst);
    return o;
}

Outcome round_trip() {
    double worst = 0.0;
    for (double s : kScaleGrid) {
        for (double eta : kEtaGrid) {
            worst = std::max(worst, std::abs(beta_to_eta(eta_to_beta(eta, s), s) - eta));
        }
    }
    return {worst <= 1e-12, "max |eta - eta'| = " + fmt("%.3g", worst)};
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::vector<double> uniform_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) {
        x = u(rng);
    }
    return v;
}

std::vector<Index> random_sizes(std::mt19937_64& rng, Index in, Index out) {
    std::uniform_int_distribution<int> depth(0, 2), width(1, 8);
    std::vector<Index> sizes = {in};
    for (int l = depth(rng); l > 0; --l) {
        sizes.push_back(width(rng));
    }
    sizes.push_back(out);
    return sizes;
}

Outcome gradient_checks() {
    std::mt19937_64 rng(31337);
    double worst_value = 0.0, worst_policy = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> dim(1, 6), heads(1, 9), adim(1, 3);
        const Index sd = dim(rng);
        const auto n = static_cast<std::size_t>(heads(rng));
        EnsembleCritic critic(Mlp(random_sizes(rng, sd, static_cast<Index>(n)), Activation::tanh, Activation::identity));
        critic.initialize(rng);
        const auto state = uniform_vector(rng, static_cast<std::size_t>(sd), -2.0, 2.0);
        const auto coeffs = uniform_vector(rng, n, -1.0, 1.0);
        const auto analytic = to_std(critic.backward_value(state, coeffs).values);
        const auto numeric = oracle::central_difference(
            [&](const std::vector<double>& p) {
                EnsembleCritic c = critic;
                c.net().params() = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Index>(p.size()));
                const auto v = c.forward_values(state);
                double sum = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    sum += coeffs[i] * v[i];
                }
                return sum;
            },
            to_std(critic.net().params()), 1e-5);
        worst_value = std::max(worst_value, oracle::max_relative_error(analytic, numeric));

        const auto ad = static_cast<std::size_t>(adim(rng));
        const auto low = uniform_vector(rng, ad, -3.0, -0.5);
        const auto high = uniform_vector(rng, ad, 0.5, 3.0);
        GaussianPolicy policy(Mlp(random_sizes(rng, sd, 2 * static_cast<Index>(ad)), Activation::tanh, Activation::identity),
                              low, high);
        policy.initialize(rng);
        std::vector<double> action(ad);
        for (std::size_t j = 0; j < ad; ++j) {
            action[j] = low[j] + (high[j] - low[j]) * std::uniform_real_distribution<double>(0.05, 0.95)(rng);
        }
        const auto analytic_pi = to_std(policy.backward_logprob(state, action).values);
        const auto numeric_pi = oracle::central_difference(
            [&](const std::vector<double>& p) {
                GaussianPolicy q = policy;
                q.net().params() = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Index>(p.size()));
                return q.log_prob(state, action);
            },
            to_std(policy.net().params()), 1e-5);
        worst_policy = std::max(worst_policy, oracle::max_relative_error(analytic_pi, numeric_pi));
    }
    return {worst_value < 1e-4 && worst_policy < 1e-4,
            "50 networks, max rel error value " + fmt("%.2g", worst_value) + ", log-prob " + fmt("%.2g", worst_policy)};
}

// ---------------------------------------------------------------------------

RunConfig bandit_config(Method method, std::size_t episodes) {
    RunConfig c;
    c.env = "bandit";
    c.agent.method = method;
    c.agent.n_heads = is_single_head(method) ? 1 : 9;
    c.agent.gamma = 0.0;
    c.agent.train_actor = false;
    c.episodes = episodes;
    c.eval_episodes = 10;
    return c;
}

std::vector<double> bandit_head_values(const RunConfig& c, std::uint64_t seed) {
    const TrainResult r = train(c, seed);
    if (r.metrics.aborted || !r.agent) {
        throw std::runtime_error("bandit run aborted: " + r.metrics.error);
    }
    return r.agent->critic().forward_values(std::vector<double>{0.0});
}

Outcome certainty_equivalents() {
    Outcome o;
    struct Setting {
        const char* name;
        Method method;
        double beta;
        double expected;
    };
    const std::vector<Setting> settings = {
        {"beta=+1", Method::optim, 1.0, 0.6201}, {"beta=-1", Method::pessim, -1.0, 0.3799}, {"beta=0", Method::flat, 0.0, 0.5}};
    for (const auto& s : settings) {
        RunConfig c = bandit_config(s.method, 3000);
        c.agent.critic_hidden = {};
        if (s.beta != 0.0) {
            c.agent.fixed_betas = {s.beta};
        }
        const double target = s.beta == 0.0 ? 0.5 : oracle::bandit_fixed_point(0.5, s.beta);
        const double v = bandit_head_values(c, 0)[0];
        const bool ok = std::abs(v - target) <= 0.02 && std::abs(target - s.expected) < 1e-4;
        o.pass = o.pass && ok;
        o.detail += std::string(s.name) + ": V=" + fmt("%.4f", v) + " target " + fmt("%.4f", target) + "; ";
    }
    return o;
}

Outcome head_ordering() {
    RunConfig c = bandit_config(Method::drop, 3000);
    c.agent.eta_max = 0.6;
    const auto v = bandit_head_values(c, 0);
    Outcome o;
    o.detail = "V =";
    for (std::size_t i = 0; i < v.size(); ++i) {
        o.detail += " " + fmt("%.3f", v[i]);
        if (i > 0 && v[i] < v[i - 1] - 0.01) {
            o.pass = false;
        }
    }
    o.detail += ", spread " + fmt("%.3f", v.back() - v.front());
    return o;
}

Outcome chain_values() {
    RunConfig c;
    c.env = "chain";
    c.agent.method = Method::flat;
    c.agent.n_heads = 1;
    c.agent.critic_hidden = {};
    c.agent.train_actor = false;
    c.episodes = 5000;
    c.eval_episodes = 1;
    // Full importance correction: partial correction biases the fixed point of
    // stochastic targets towards high-error transitions.
    c.replay.beta = 1.0;
    const TrainResult r = train(c, 0);
    if (r.metrics.aborted || !r.agent) {
        return {false, "run aborted: " + r.metrics.error};
    }
    ChainEnv env;
    const std::size_t n = env.n_states();
    std::vector<double> p_right(n, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        const PolicyOutput out = r.agent->policy().forward_policy(env.one_hot(s));
        p_right[s] = oracle::normal_cdf(out.mean(0) / std::exp(out.log_std(0)));
    }
    const auto exact = analytic_value(env, p_right, c.agent.gamma).values;
    Outcome o;
    double worst = 0.0;
    o.detail = "V^pi vs critic:";
    for (std::size_t s = 0; s + 1 < n; ++s) {
        const double v = r.agent->critic().forward_values(env.one_hot(s))[0];
        worst = std::max(worst, std::abs(v - exact[s]));
        o.detail += " " + fmt("%.4f", exact[s]) + "/" + fmt("%.4f", v);
    }
    o.pass = worst <= 1e-2;
    o.detail += ", max error " + fmt("%.4f", worst);
    return o;
}

Outcome prioritized_replay() {
    PrioritizedBuffer::Config pc;
    pc.capacity = 64;
    PrioritizedBuffer buf(pc);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int i = 0; i < 100; ++i) {
        buf.push({{double(i)}, {0.0}, {0.0}, 0.0, false}, u(rng));
    }
    const auto live = buf.live_indices();
    std::vector<double> p(live.size());
    for (double& x : p) {
        x = u(rng);
    }
    buf.update_priorities(live, p);
    long double total = 0.0L;
    for (auto i : live) {
        total += std::pow(buf.priority(i), pc.alpha);
    }
    double worst = 0.0;
    std::vector<double> expected;
    for (auto i : live) {
        expected.push_back(static_cast<double>(std::pow(buf.priority(i), pc.alpha) / total));
        worst = std::max(worst, std::abs(buf.probability(i) - expected.back()));
    }
    const std::size_t draws = 100000;
    std::vector<double> counts(live.size(), 0.0);
    for (std::size_t k = 0; k < draws / 32 + 1; ++k) {
        const auto batch = buf.sample(32, rng);
        for (std::size_t j = 0; j < batch.indices.size() && k * 32 + j < draws; ++j) {
            counts[static_cast<std::size_t>(batch.indices[j] - live.front())] += 1.0;
        }
    }
    double worst_z = 0.0;
    for (std::size_t k = 0; k < live.size(); ++k) {
        const double sigma = oracle::multinomial_sigma(double(draws), expected[k]);
        worst_z = std::max(worst_z, std::abs(counts[k] - double(draws) * expected[k]) / sigma);
    }
    return {worst <= 1e-12 && worst_z <= 3.0,
            "max |P_tree - P_brute| " + fmt("%.2g", worst) + ", max |z| over 100k draws " + fmt("%.2f", worst_z)};
}

Outcome bias_signs() {
    Outcome o;
    for (Method m : {Method::optim, Method::pessim}) {
        RunConfig c = bandit_config(m, 1000);
        c.agent.train_actor = true;
        const TrainResult r = train(c, 0);
        std::size_t bad = 0;
        double extreme = 0.0;
        for (const auto& row : r.metrics.rows) {
            if (m == Method::optim ? row.td_bias < 0.0 : row.td_bias > 0.0) {
                ++bad;
            }
            extreme = m == Method::optim ? std::max(extreme, row.td_bias) : std::min(extreme, row.td_bias);
        }
        o.pass = o.pass && bad == 0 && !r.metrics.aborted && r.metrics.rows.size() == c.episodes;
        o.detail += to_string(m) + ": " + std::to_string(bad) + " wrong-sign episodes of " +
                    std::to_string(r.metrics.rows.size()) + ", extreme bias " + fmt("%.3g", extreme) + "; ";
    }
    return o;
}

RunConfig pendulum_config(Method method) {
    RunConfig c;
    c.env = "pendulum";
    c.agent.method = method;
    c.agent.n_heads = is_single_head(method) ? 1 : 9;
    c.agent.eta_max = 0.6;
    c.episodes = 300;
    c.eval_episodes = 100;
    c.seeds.clear();
    for (std::uint64_t s = 0; s < 12; ++s) {
        c.seeds.push_back(s);
    }
    return c;
}

Outcome pendulum_learning() {
    Outcome o;
    for (auto [method, threshold] : {std::pair{Method::drop, -300.0}, std::pair{Method::flat, -500.0}}) {
        const RunConfig c = pendulum_config(method);
        std::vector<double> scores;
        std::size_t failed = 0;
        for (auto seed : c.seeds) {
            const TrainResult r = train(c, seed);
            if (r.metrics.aborted || r.metrics.eval_returns.empty()) {
                ++failed;
                continue;
            }
            scores.push_back(iqm(r.metrics.eval_returns));
        }
        const double score = scores.empty() ? -INFINITY : iqm(scores);
        o.pass = o.pass && failed == 0 && score >= threshold;
        o.detail += to_string(method) + " IQM " + fmt("%.1f", score) + " (need >= " + fmt("%.0f", threshold) + ")";
        if (failed > 0) {
            o.detail += " with " + std::to_string(failed) + " aborted seeds";
        }
        o.detail += "; ";
    }
    return o;
}

std::string metrics_bytes(const RunConfig& c, std::uint64_t seed, const fs::path& file) {
    emit_metrics(train(c, seed).metrics, file);
    std::ifstream in(file, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "drop_acceptance_determinism";
    fs::create_directories(dir);
    std::vector<std::pair<std::string, RunConfig>> runs;
    runs.emplace_back("bandit/drop", bandit_config(Method::drop, 300));
    RunConfig chain;
    chain.env = "chain";
    chain.episodes = 100;
    chain.eval_episodes = 5;
    runs.emplace_back("chain/drop", chain);
    RunConfig pend = pendulum_config(Method::drop);
    pend.episodes = 10;
    pend.eval_episodes = 2;
    runs.emplace_back("pendulum/drop", pend);
    Outcome o;
    for (const auto& [name, c] : runs) {
        const std::string a = metrics_bytes(c, 7, dir / "a.csv");
        const std::string b = metrics_bytes(c, 7, dir / "b.csv");
        const bool same = a == b && a.size() > std::string(kMetricsHeader).size() + 1;
        o.pass = o.pass && same;
        o.detail += name + (same ? " identical" : " DIFFERS") + " (" + std::to_string(a.size()) + " bytes); ";
    }
    fs::remove_all(dir);
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "transform properties", 1.0, transform_suite},
        {2, "eta/beta round trip", 1.0, round_trip},
        {3, "gradient checks", 10.0, gradient_checks},
        {4, "bandit certainty equivalents", 180.0, certainty_equivalents},
        {5, "head ordering", 120.0, head_ordering},
        {6, "chain values", 60.0, chain_values},
        {7, "prioritized replay", 30.0, prioritized_replay},
        {8, "bias signs", 120.0, bias_signs},
        {9, "pendulum learning", 1800.0, pendulum_learning},
        {10, "determinism", 120.0, determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        selected.insert(std::atoi(argv[i]));
    }
    bool all = true;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) {
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool pass = o.pass && secs <= c.budget_s;
        all = all && pass;
        std::printf("%s %d %s [%.1f s of %.0f s] %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs, c.budget_s,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}

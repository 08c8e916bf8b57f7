#include "drop/harness.hpp"
#include "drop/error.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace drop {

namespace fs = std::filesystem;

namespace {

constexpr int kCheckpointVersion = 1;

// Independent generator streams derived from one seed.
enum class Stream : std::uint64_t { init = 1, env = 2, act = 3, replay = 4, eval = 5 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::ofstream open_for_writing(const fs::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

void finish(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.size() == 1) {
        return sorted.front();
    }
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
    (void)make_env(env);
    agent.validate();
    if (episodes < 1) {
        throw std::invalid_argument("episodes must be at least 1");
    }
    if (seeds.empty()) {
        throw std::invalid_argument("at least one seed is required");
    }
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw std::invalid_argument("seeds must be distinct");
    }
    if (batch_size == 0) {
        throw std::invalid_argument("batch_size must be positive");
    }
    if (replay.capacity < batch_size) {
        throw std::invalid_argument("replay capacity must hold at least one batch");
    }
}

void to_json(nlohmann::json& j, const RunConfig& c) {
    j = c.agent;
    j["env"] = c.env;
    j["seeds"] = c.seeds;
    j["episodes"] = c.episodes;
    j["eval_episodes"] = c.eval_episodes;
    j["batch_size"] = c.batch_size;
    j["buffer_capacity"] = c.replay.capacity;
    j["per_alpha"] = c.replay.alpha;
    j["per_beta"] = c.replay.beta;
    j["per_epsilon"] = c.replay.epsilon_priority;
    j["out_dir"] = c.out_dir;
    j["record_wall_time"] = c.record_wall_time;
}

void from_json(const nlohmann::json& j, RunConfig& c) {
    RunConfig d;
    d.agent = j.get<AgentConfig>();
    d.env = j.value("env", d.env);
    d.seeds = j.value("seeds", d.seeds);
    d.episodes = j.value("episodes", d.episodes);
    d.eval_episodes = j.value("eval_episodes", d.eval_episodes);
    d.batch_size = j.value("batch_size", d.batch_size);
    d.replay.capacity = j.value("buffer_capacity", d.replay.capacity);
    d.replay.alpha = j.value("per_alpha", d.replay.alpha);
    d.replay.beta = j.value("per_beta", d.replay.beta);
    d.replay.epsilon_priority = j.value("per_epsilon", d.replay.epsilon_priority);
    d.out_dir = j.value("out_dir", d.out_dir);
    d.record_wall_time = j.value("record_wall_time", d.record_wall_time);
    c = std::move(d);
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config '" + path.string() + "'");
    }
    RunConfig c = nlohmann::json::parse(in).get<RunConfig>();
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Training and evaluation

ReplayStats replay_episode(Agent& agent, PrioritizedBuffer& buffer, std::size_t batch_size, std::mt19937_64& rng,
                           const BatchCallback& on_batch) {
    ReplayStats stats;
    if (batch_size == 0 || buffer.size() < batch_size) {
        return stats;
    }
    const std::size_t volume = PrioritizedBuffer::replay_volume(buffer.size(), batch_size);
    double abs_sum = 0.0;
    double bias_sum = 0.0;
    for (std::size_t done = 0; done < volume; done += batch_size) {
        const SampledBatch batch = buffer.sample(batch_size, rng);
        const TDBatchResult td = agent.replay(batch.transitions, batch.is_weights);
        buffer.update_priorities(batch.indices, td.priority);
        abs_sum += td.mean_abs_delta();
        bias_sum += td.mean_bias();
        stats.replayed += batch_size;
        if (on_batch) {
            on_batch(batch, td);
        }
    }
    const double batches = static_cast<double>(volume / batch_size);
    stats.td_scale = abs_sum / batches;
    stats.td_bias = bias_sum / batches;
    return stats;
}

TrainResult train(const RunConfig& config, std::uint64_t seed, const EpisodeCallback& on_episode) {
    config.validate();
    auto init_rng = make_rng(seed, Stream::init);
    auto env_rng = make_rng(seed, Stream::env);
    auto act_rng = make_rng(seed, Stream::act);
    auto replay_rng = make_rng(seed, Stream::replay);

    auto env = make_env(config.env);
    TrainResult result;
    result.agent.emplace(config.agent, env->spec(), init_rng);
    Agent& agent = *result.agent;
    PrioritizedBuffer buffer(config.replay);

    for (std::size_t episode = 1; episode <= config.episodes; ++episode) {
        const auto start = std::chrono::steady_clock::now();
        EpisodeRow row;
        row.episode = episode;
        try {
            std::vector<double> state = env->reset(env_rng);
            for (;;) {
                std::vector<double> action = agent.act(state, act_rng);
                StepResult step = env->step(action, env_rng);
                row.episode_return += step.reward;
                buffer.push({state, std::move(action), step.next_state, step.reward, step.done});
                state = std::move(step.next_state);
                if (step.done) {
                    break;
                }
            }
            const ReplayStats stats = replay_episode(agent, buffer, config.batch_size, replay_rng);
            row.replayed = stats.replayed;
            row.td_scale = stats.td_scale;
            row.td_bias = stats.td_bias;
        } catch (const std::exception& e) {
            result.metrics.aborted = true;
            result.metrics.error = "episode " + std::to_string(episode) + ": " + e.what();
            return result;
        }
        if (config.record_wall_time) {
            row.wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        }
        result.metrics.rows.push_back(row);
        if (on_episode) {
            on_episode(row);
        }
    }
    if (config.eval_episodes > 0) {
        result.metrics.eval_returns = evaluate(agent, config.env, config.eval_episodes, seed);
    }
    return result;
}

std::vector<double> evaluate(const Agent& agent, const std::string& env_name, std::size_t episodes,
                             std::uint64_t seed) {
    auto env = make_env(env_name);
    const EnvSpec& spec = env->spec();
    const GaussianPolicy& policy = agent.policy();
    if (static_cast<std::size_t>(policy.state_dim()) != spec.state_dim ||
        static_cast<std::size_t>(policy.action_dim()) != spec.action_dim) {
        throw std::invalid_argument("checkpoint dimensions do not match environment '" + env_name + "'");
    }
    auto rng = make_rng(seed, Stream::eval);
    std::vector<double> returns;
    returns.reserve(episodes);
    for (std::size_t e = 0; e < episodes; ++e) {
        std::vector<double> state = env->reset(rng);
        double total = 0.0;
        for (;;) {
            StepResult step = env->step(agent.act_deterministic(state), rng);
            total += step.reward;
            state = std::move(step.next_state);
            if (step.done) {
                break;
            }
        }
        returns.push_back(total);
    }
    return returns;
}

// ---------------------------------------------------------------------------
// Statistics

double iqm(std::span<const double> values) {
    if (values.empty()) {
        throw std::invalid_argument("IQM of an empty sample");
    }
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const std::size_t cut = v.size() / 4;
    const auto first = v.begin() + static_cast<std::ptrdiff_t>(cut);
    const auto last = v.end() - static_cast<std::ptrdiff_t>(cut);
    return std::accumulate(first, last, 0.0) / static_cast<double>(last - first);
}

ConfidenceInterval bootstrap_iqm_ci(std::span<const double> values, std::size_t resamples, double confidence,
                                    std::uint64_t seed) {
    if (values.empty()) {
        throw std::invalid_argument("bootstrap of an empty sample");
    }
    if (resamples == 0 || !(confidence > 0.0 && confidence < 1.0)) {
        throw std::invalid_argument("bootstrap needs resamples > 0 and confidence in (0, 1)");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    std::vector<double> stats;
    stats.reserve(resamples);
    std::vector<double> draw(values.size());
    for (std::size_t r = 0; r < resamples; ++r) {
        for (double& x : draw) {
            x = values[pick(rng)];
        }
        stats.push_back(iqm(draw));
    }
    std::sort(stats.begin(), stats.end());
    const double tail = 0.5 * (1.0 - confidence);
    return {quantile_sorted(stats, tail), quantile_sorted(stats, 1.0 - tail)};
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const Agent& agent, const std::string& env_name, const fs::path& path) {
    const nlohmann::json j = {
        {"format", "drop-checkpoint"}, {"version", kCheckpointVersion}, {"env", env_name}, {"agent", agent}};
    auto out = open_for_writing(path);
    out << j.dump() << '\n';
    finish(out, path);
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open checkpoint '" + path.string() + "'");
    }
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("format", std::string{}) != "drop-checkpoint") {
        throw std::invalid_argument("'" + path.string() + "' is not a checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
        throw std::invalid_argument("unsupported checkpoint version " + j.at("version").dump());
    }
    return {Agent::from_json_checkpoint(j.at("agent")), j.at("env").get<std::string>()};
}

// ---------------------------------------------------------------------------
// Metrics files

void emit_metrics(const RunMetrics& metrics, const fs::path& path) {
    auto out = open_for_writing(path);
    out << kMetricsHeader << '\n';
    for (const auto& r : metrics.rows) {
        out << r.episode << ',' << format_double(r.episode_return) << ',' << format_double(r.td_scale) << ','
            << format_double(r.td_bias) << ',' << format_double(r.wall_ms) << '\n';
    }
    finish(out, path);
}

RunMetrics parse_metrics(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open metrics '" + path.string() + "'");
    }
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader) {
        throw std::runtime_error("'" + path.string() + "' lacks the metrics header");
    }
    RunMetrics m;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) {
            fields.push_back(field);
        }
        if (fields.size() != 5) {
            throw std::runtime_error("malformed metrics row in '" + path.string() + "': " + line);
        }
        EpisodeRow r;
        r.episode = std::stoull(fields[0]);
        r.episode_return = std::strtod(fields[1].c_str(), nullptr);
        r.td_scale = std::strtod(fields[2].c_str(), nullptr);
        r.td_bias = std::strtod(fields[3].c_str(), nullptr);
        r.wall_ms = std::strtod(fields[4].c_str(), nullptr);
        m.rows.push_back(r);
    }
    return m;
}

void write_learning_curves_svg(std::span<const RunMetrics> runs, const std::string& title, const fs::path& path) {
    constexpr double width = 720.0;
    constexpr double panel_h = 200.0;
    constexpr double margin = 50.0;
    struct Panel {
        const char* label;
        double EpisodeRow::*field;
    };
    const Panel panels[] = {{"return", &EpisodeRow::episode_return},
                            {"TD error scale", &EpisodeRow::td_scale},
                            {"bias f(delta) - delta", &EpisodeRow::td_bias}};

    std::size_t episodes = 0;
    for (const auto& r : runs) {
        episodes = std::max(episodes, r.rows.size());
    }
    auto out = open_for_writing(path);
    const double height = margin + 3.0 * (panel_h + margin);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
        << title << "</text>\n";

    for (std::size_t p = 0; p < 3; ++p) {
        const double top = margin + static_cast<double>(p) * (panel_h + margin);
        const double left = margin + 20.0;
        const double plot_w = width - left - 20.0;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& r : runs) {
            for (const auto& row : r.rows) {
                lo = std::min(lo, row.*(panels[p].field));
                hi = std::max(hi, row.*(panels[p].field));
            }
        }
        if (!std::isfinite(lo)) {
            lo = 0.0;
            hi = 1.0;
        }
        if (hi - lo < 1e-12) {
            hi = lo + 1.0;
        }
        const auto x_of = [&](std::size_t episode) {
            return left + plot_w * (episodes > 1 ? static_cast<double>(episode - 1) / static_cast<double>(episodes - 1)
                                                 : 0.5);
        };
        const auto y_of = [&](double v) { return top + panel_h * (1.0 - (v - lo) / (hi - lo)); };

        out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << panel_h
            << "\" fill=\"none\" stroke=\"black\"/>\n";
        out << "<text x=\"" << left << "\" y=\"" << top - 6 << "\" font-family=\"sans-serif\" font-size=\"12\">"
            << panels[p].label << "  [" << format_double(lo) << ", " << format_double(hi) << "]</text>\n";
        for (const auto& r : runs) {
            if (r.rows.empty()) {
                continue;
            }
            out << "<polyline fill=\"none\" stroke=\"#9aa\" stroke-width=\"0.7\" points=\"";
            for (const auto& row : r.rows) {
                out << x_of(row.episode) << ',' << y_of(row.*(panels[p].field)) << ' ';
            }
            out << "\"/>\n";
        }
        out << "<polyline fill=\"none\" stroke=\"#c22\" stroke-width=\"2\" points=\"";
        for (std::size_t e = 1; e <= episodes; ++e) {
            std::vector<double> column;
            for (const auto& r : runs) {
                if (e <= r.rows.size()) {
                    column.push_back(r.rows[e - 1].*(panels[p].field));
                }
            }
            if (!column.empty()) {
                out << x_of(e) << ',' << y_of(iqm(column)) << ' ';
            }
        }
        out << "\"/>\n";
    }
    out << "</svg>\n";
    finish(out, path);
}

// ---------------------------------------------------------------------------
// Multi-seed runs

std::string run_stem(const RunConfig& config, std::uint64_t seed) {
    return config.env + "_" + to_string(config.agent.method) + "_seed" + std::to_string(seed);
}

namespace {

template <typename Job>
void parallel_for(std::size_t n, std::size_t threads, Job job) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            job(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                job(i);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
}

} // namespace

std::vector<SeedOutcome> run_seeds(const RunConfig& config, std::size_t threads) {
    config.validate();
    std::vector<SeedOutcome> outcomes(config.seeds.size());
    const fs::path dir(config.out_dir);
    parallel_for(config.seeds.size(), threads, [&](std::size_t k) {
        const std::uint64_t seed = config.seeds[k];
        SeedOutcome& o = outcomes[k];
        o.seed = seed;
        try {
            TrainResult r = train(config, seed);
            const std::string stem = run_stem(config, seed);
            emit_metrics(r.metrics, dir / (stem + ".csv"));
            if (r.agent) {
                save_checkpoint(*r.agent, config.env, dir / (stem + ".ckpt.json"));
            }
            o.failed = r.metrics.aborted || r.metrics.eval_returns.empty();
            o.score = o.failed ? std::numeric_limits<double>::quiet_NaN() : iqm(r.metrics.eval_returns);
            const nlohmann::json summary = {{"seed", seed},
                                            {"aborted", r.metrics.aborted},
                                            {"error", r.metrics.error},
                                            {"eval_returns", r.metrics.eval_returns},
                                            {"score", o.failed ? nlohmann::json(nullptr) : nlohmann::json(o.score)}};
            auto out = open_for_writing(dir / (stem + ".eval.json"));
            out << summary.dump(2) << '\n';
            finish(out, dir / (stem + ".eval.json"));
            o.metrics = std::move(r.metrics);
        } catch (const std::exception& e) {
            o.failed = true;
            o.score = std::numeric_limits<double>::quiet_NaN();
            o.metrics.aborted = true;
            o.metrics.error = e.what();
        }
    });
    return outcomes;
}

// ---------------------------------------------------------------------------
// Ablation

void from_json(const nlohmann::json& j, AblationConfig& c) {
    AblationConfig d;
    d.base = j.get<RunConfig>();
    if (j.contains("methods")) {
        for (const auto& m : j.at("methods")) {
            d.methods.push_back(method_from_string(m.get<std::string>()));
        }
    } else {
        d.methods.push_back(d.base.agent.method);
    }
    d.envs = j.value("envs", std::vector<std::string>{d.base.env});
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        d.sweep_n_heads = s.value("n_heads", std::vector<std::size_t>{});
        d.sweep_eta_max = s.value("eta_max", std::vector<double>{});
    }
    d.normalize = j.value("normalize", false);
    d.threads = j.value("threads", std::size_t{1});
    d.bootstrap_resamples = j.value("bootstrap_resamples", d.bootstrap_resamples);
    if (d.methods.empty() || d.envs.empty()) {
        throw std::invalid_argument("ablation needs at least one method and one environment");
    }
    c = std::move(d);
}

AblationConfig load_ablation_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config '" + path.string() + "'");
    }
    return nlohmann::json::parse(in).get<AblationConfig>();
}

AblationResult run_ablation(const AblationConfig& config) {
    if (config.methods.empty() || config.envs.empty()) {
        throw std::invalid_argument("ablation needs at least one method and one environment");
    }
    AblationResult result;
    const fs::path root(config.base.out_dir);
    for (const auto& env : config.envs) {
        for (Method method : config.methods) {
            // Single-head ablations ignore the sweep over head counts.
            std::vector<std::size_t> heads = config.sweep_n_heads;
            std::vector<double> etas_max = config.sweep_eta_max;
            if (heads.empty() || is_single_head(method)) {
                heads = {is_single_head(method) ? std::size_t{1} : config.base.agent.n_heads};
            }
            if (etas_max.empty() || method == Method::flat) {
                etas_max = {config.base.agent.eta_max};
            }
            for (std::size_t n : heads) {
                for (double eta_max : etas_max) {
                    RunConfig rc = config.base;
                    rc.env = env;
                    rc.agent.method = method;
                    rc.agent.n_heads = n;
                    rc.agent.eta_max = eta_max;
                    if (!rc.agent.fixed_betas.empty() && rc.agent.fixed_betas.size() != n) {
                        rc.agent.fixed_betas.clear();
                    }
                    std::string cell = to_string(method);
                    if (!config.sweep_n_heads.empty() || !config.sweep_eta_max.empty()) {
                        cell += "_n" + std::to_string(n) + "_eta" + format_double(eta_max);
                    }
                    rc.out_dir = (root / env / cell).string();

                    ScoreRow row;
                    row.env = env;
                    row.method = method;
                    row.n_heads = n;
                    row.eta_max = eta_max;
                    row.etas = rc.agent.head_etas();
                    row.seeds = rc.seeds;
                    const auto outcomes = run_seeds(rc, config.threads);
                    std::vector<double> ok;
                    std::vector<RunMetrics> curves;
                    for (const auto& o : outcomes) {
                        row.seed_scores.push_back(o.score);
                        if (o.failed) {
                            ++row.failed;
                        } else {
                            ok.push_back(o.score);
                        }
                        curves.push_back(o.metrics);
                    }
                    if (ok.empty()) {
                        row.score = std::numeric_limits<double>::quiet_NaN();
                        row.ci = {row.score, row.score};
                    } else {
                        row.score = iqm(ok);
                        row.ci = bootstrap_iqm_ci(ok, config.bootstrap_resamples, 0.95, rc.seeds.front());
                    }
                    write_learning_curves_svg(curves, env + " / " + cell, fs::path(rc.out_dir) / "curves.svg");
                    result.rows.push_back(std::move(row));
                }
            }
        }
    }
    if (config.normalize) {
        for (const auto& env : config.envs) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto& r : result.rows) {
                if (r.env == env && std::isfinite(r.score)) {
                    lo = std::min(lo, r.score);
                    hi = std::max(hi, r.score);
                }
            }
            for (auto& r : result.rows) {
                if (r.env == env && std::isfinite(r.score)) {
                    r.normalized = hi > lo ? (r.score - lo) / (hi - lo) : 1.0;
                }
            }
        }
    }
    write_score_table(result, root / "scores.csv", root / "scores.json");
    return result;
}

void write_score_table(const AblationResult& result, const fs::path& csv_path, const fs::path& json_path) {
    auto csv = open_for_writing(csv_path);
    csv << "env,method,n_heads,eta_max,etas,seeds,failed,iqm,ci_low,ci_high,normalized\n";
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : result.rows) {
        std::string etas;
        for (std::size_t i = 0; i < r.etas.size(); ++i) {
            etas += (i ? " " : "") + format_double(r.etas[i]);
        }
        csv << r.env << ',' << to_string(r.method) << ',' << r.n_heads << ',' << format_double(r.eta_max) << ",\""
            << etas << "\"," << r.seeds.size() << ',' << r.failed << ',' << format_double(r.score) << ','
            << format_double(r.ci.lower) << ',' << format_double(r.ci.upper) << ','
            << (r.normalized ? format_double(*r.normalized) : "") << '\n';
        nlohmann::json seed_scores = nlohmann::json::array();
        for (double s : r.seed_scores) {
            seed_scores.push_back(std::isfinite(s) ? nlohmann::json(s) : nlohmann::json("failed"));
        }
        const auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
        rows.push_back({{"env", r.env},
                        {"method", to_string(r.method)},
                        {"n_heads", r.n_heads},
                        {"eta_max", r.eta_max},
                        {"etas", r.etas},
                        {"seeds", r.seeds},
                        {"seed_scores", std::move(seed_scores)},
                        {"failed", r.failed},
                        {"iqm", num(r.score)},
                        {"ci95", {num(r.ci.lower), num(r.ci.upper)}},
                        {"normalized", r.normalized ? nlohmann::json(*r.normalized) : nlohmann::json(nullptr)}});
    }
    finish(csv, csv_path);
    auto js = open_for_writing(json_path);
    js << nlohmann::json{{"rows", std::move(rows)}}.dump(2) << '\n';
    finish(js, json_path);
}

} // namespace drop

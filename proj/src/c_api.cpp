#include "drop/drop.h"

#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include <nlohmann/json.hpp>

#include "drop/error.hpp"
#include "drop/harness.hpp"

struct drop_checkpoint {
    drop::Agent agent;
    std::string env;
};

struct drop_run {
    drop::RunConfig config;
    std::uint64_t seed = 0;
    drop::TrainResult result;
};

namespace {

thread_local std::string g_last_error;

drop_status fail(drop_status status, std::string message) {
    g_last_error = std::move(message);
    return status;
}

template <typename F>
drop_status guarded(F&& body) noexcept {
    try {
        g_last_error.clear();
        return body();
    } catch (const drop::IoError& e) {
        return fail(DROP_ERROR_IO, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(DROP_ERROR_IO, e.what());
    } catch (const drop::NumericError& e) {
        return fail(DROP_ERROR_NUMERIC, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(DROP_ERROR_INVALID_ARGUMENT, e.what());
    } catch (const std::out_of_range& e) {
        return fail(DROP_ERROR_INVALID_ARGUMENT, e.what());
    } catch (const nlohmann::json::exception& e) {
        return fail(DROP_ERROR_INVALID_ARGUMENT, e.what());
    } catch (const std::bad_alloc&) {
        return fail(DROP_ERROR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(DROP_ERROR_INTERNAL, e.what());
    } catch (...) {
        return fail(DROP_ERROR_INTERNAL, "unknown error");
    }
}

#define DROP_REQUIRE(cond, msg)                                   \
    do {                                                          \
        if (!(cond)) return fail(DROP_ERROR_INVALID_ARGUMENT, msg); \
    } while (0)

} // namespace

extern "C" {

const char* drop_version(void) { return "1.0.0"; }

const char* drop_last_error(void) { return g_last_error.c_str(); }

const char* drop_status_string(drop_status status) {
    switch (status) {
    case DROP_OK: return "ok";
    case DROP_ERROR_INVALID_ARGUMENT: return "invalid argument";
    case DROP_ERROR_IO: return "i/o error";
    case DROP_ERROR_NUMERIC: return "numeric error";
    case DROP_ERROR_RUN_ABORTED: return "run aborted";
    case DROP_ERROR_BUFFER_TOO_SMALL: return "buffer too small";
    case DROP_ERROR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

drop_status drop_transform_td(double beta, double delta, double* out, int* saturated) {
    return guarded([&] {
        DROP_REQUIRE(out != nullptr, "out must not be null");
        const auto v = drop::transform_td_checked(beta, delta);
        *out = v.value;
        if (saturated != nullptr) {
            *saturated = v.saturated ? 1 : 0;
        }
        return DROP_OK;
    });
}

drop_status drop_transform_td_heuristic(double eta, double delta, double* out) {
    return guarded([&] {
        DROP_REQUIRE(out != nullptr, "out must not be null");
        *out = drop::transform_td_heuristic(drop::OptimismParameter(eta), delta);
        return DROP_OK;
    });
}

drop_status drop_eta_to_beta(double eta, double scale, double* out) {
    return guarded([&] {
        DROP_REQUIRE(out != nullptr, "out must not be null");
        *out = drop::eta_to_beta(drop::OptimismParameter(eta).value(), scale);
        return DROP_OK;
    });
}

drop_status drop_beta_to_eta(double beta, double scale, double* out) {
    return guarded([&] {
        DROP_REQUIRE(out != nullptr, "out must not be null");
        *out = drop::beta_to_eta(drop::InverseTemperature(beta).value(), scale);
        return DROP_OK;
    });
}

drop_status drop_make_schedule(size_t n, double eta_max, double* out, size_t capacity) {
    return guarded([&] {
        DROP_REQUIRE(out != nullptr, "out must not be null");
        const auto s = drop::make_schedule(n, eta_max);
        if (capacity < s.size()) {
            return fail(DROP_ERROR_BUFFER_TOO_SMALL, "schedule needs " + std::to_string(s.size()) + " slots");
        }
        std::copy(s.etas().begin(), s.etas().end(), out);
        return DROP_OK;
    });
}

drop_status drop_median(const double* values, size_t n, double* out) {
    return guarded([&] {
        DROP_REQUIRE(out != nullptr && (values != nullptr || n == 0), "null pointer");
        *out = drop::median(std::span<const double>(values, n));
        return DROP_OK;
    });
}

drop_status drop_iqm(const double* values, size_t n, double* out) {
    return guarded([&] {
        DROP_REQUIRE(out != nullptr && (values != nullptr || n == 0), "null pointer");
        *out = drop::iqm(std::span<const double>(values, n));
        return DROP_OK;
    });
}

drop_status drop_train(const char* config_json, uint64_t seed, drop_run** out) {
    return guarded([&] {
        DROP_REQUIRE(config_json != nullptr && out != nullptr, "null pointer");
        *out = nullptr;
        auto run = std::make_unique<drop_run>();
        run->config = nlohmann::json::parse(config_json).get<drop::RunConfig>();
        run->config.validate();
        run->seed = seed;
        run->result = drop::train(run->config, seed);
        const bool aborted = run->result.metrics.aborted;
        const std::string error = run->result.metrics.error;
        *out = run.release();
        return aborted ? fail(DROP_ERROR_RUN_ABORTED, error) : DROP_OK;
    });
}

void drop_run_free(drop_run* run) { delete run; }

drop_status drop_run_episode_count(const drop_run* run, size_t* out) {
    return guarded([&] {
        DROP_REQUIRE(run != nullptr && out != nullptr, "null pointer");
        *out = run->result.metrics.rows.size();
        return DROP_OK;
    });
}

drop_status drop_run_episode(const drop_run* run, size_t index, drop_episode_row* out) {
    return guarded([&] {
        DROP_REQUIRE(run != nullptr && out != nullptr, "null pointer");
        const auto& r = run->result.metrics.rows.at(index);
        *out = {r.episode, r.episode_return, r.td_scale, r.td_bias, r.wall_ms, r.replayed};
        return DROP_OK;
    });
}

drop_status drop_run_eval_returns(const drop_run* run, double* out, size_t capacity, size_t* count) {
    return guarded([&] {
        DROP_REQUIRE(run != nullptr, "null pointer");
        const auto& v = run->result.metrics.eval_returns;
        if (count != nullptr) {
            *count = v.size();
        }
        if (capacity < v.size()) {
            return fail(DROP_ERROR_BUFFER_TOO_SMALL, "need room for " + std::to_string(v.size()) + " returns");
        }
        DROP_REQUIRE(out != nullptr || v.empty(), "out must not be null");
        std::copy(v.begin(), v.end(), out);
        return DROP_OK;
    });
}

drop_status drop_run_aborted(const drop_run* run, int* aborted) {
    return guarded([&] {
        DROP_REQUIRE(run != nullptr && aborted != nullptr, "null pointer");
        *aborted = run->result.metrics.aborted ? 1 : 0;
        return DROP_OK;
    });
}

drop_status drop_run_write(const drop_run* run, const char* dir) {
    return guarded([&] {
        DROP_REQUIRE(run != nullptr && dir != nullptr, "null pointer");
        const std::filesystem::path root(dir);
        const std::string stem = drop::run_stem(run->config, run->seed);
        drop::emit_metrics(run->result.metrics, root / (stem + ".csv"));
        if (run->result.agent) {
            drop::save_checkpoint(*run->result.agent, run->config.env, root / (stem + ".ckpt.json"));
        }
        const auto& ev = run->result.metrics.eval_returns;
        nlohmann::json summary = {{"seed", run->seed},
                                  {"aborted", run->result.metrics.aborted},
                                  {"error", run->result.metrics.error},
                                  {"eval_returns", ev},
                                  {"score", ev.empty() ? nlohmann::json(nullptr) : nlohmann::json(drop::iqm(ev))}};
        const auto path = root / (stem + ".eval.json");
        std::ofstream f(path);
        f << summary.dump(2) << '\n';
        if (!f) {
            throw drop::IoError("failed writing '" + path.string() + "'");
        }
        return DROP_OK;
    });
}

drop_status drop_run_checkpoint(const drop_run* run, drop_checkpoint** out) {
    return guarded([&] {
        DROP_REQUIRE(run != nullptr && out != nullptr, "null pointer");
        DROP_REQUIRE(run->result.agent.has_value(), "run has no agent");
        *out = new drop_checkpoint{*run->result.agent, run->config.env};
        return DROP_OK;
    });
}

drop_status drop_ablate(const char* config_path, const char* out_dir) {
    return guarded([&] {
        DROP_REQUIRE(config_path != nullptr, "null pointer");
        auto config = drop::load_ablation_config(config_path);
        if (out_dir != nullptr) {
            config.base.out_dir = out_dir;
        }
        (void)drop::run_ablation(config);
        return DROP_OK;
    });
}

drop_status drop_checkpoint_load(const char* path, drop_checkpoint** out) {
    return guarded([&] {
        DROP_REQUIRE(path != nullptr && out != nullptr, "null pointer");
        auto loaded = drop::load_checkpoint(path);
        *out = new drop_checkpoint{std::move(loaded.agent), std::move(loaded.env)};
        return DROP_OK;
    });
}

drop_status drop_checkpoint_save(const drop_checkpoint* checkpoint, const char* path) {
    return guarded([&] {
        DROP_REQUIRE(checkpoint != nullptr && path != nullptr, "null pointer");
        drop::save_checkpoint(checkpoint->agent, checkpoint->env, path);
        return DROP_OK;
    });
}

void drop_checkpoint_free(drop_checkpoint* checkpoint) { delete checkpoint; }

drop_status drop_checkpoint_env(const drop_checkpoint* checkpoint, const char** out) {
    return guarded([&] {
        DROP_REQUIRE(checkpoint != nullptr && out != nullptr, "null pointer");
        *out = checkpoint->env.c_str();
        return DROP_OK;
    });
}

drop_status drop_checkpoint_head_count(const drop_checkpoint* checkpoint, size_t* out) {
    return guarded([&] {
        DROP_REQUIRE(checkpoint != nullptr && out != nullptr, "null pointer");
        *out = checkpoint->agent.critic().n_heads();
        return DROP_OK;
    });
}

drop_status drop_checkpoint_values(const drop_checkpoint* checkpoint, const double* state, size_t state_dim,
                                   double* out, size_t capacity) {
    return guarded([&] {
        DROP_REQUIRE(checkpoint != nullptr && state != nullptr && out != nullptr, "null pointer");
        const auto v = checkpoint->agent.critic().forward_values(std::span<const double>(state, state_dim));
        if (capacity < v.size()) {
            return fail(DROP_ERROR_BUFFER_TOO_SMALL, "need room for " + std::to_string(v.size()) + " values");
        }
        std::copy(v.begin(), v.end(), out);
        return DROP_OK;
    });
}

drop_status drop_evaluate(const drop_checkpoint* checkpoint, const char* env_name, size_t episodes, uint64_t seed,
                          double* returns, size_t capacity) {
    return guarded([&] {
        DROP_REQUIRE(checkpoint != nullptr && (returns != nullptr || episodes == 0), "null pointer");
        if (capacity < episodes) {
            return fail(DROP_ERROR_BUFFER_TOO_SMALL, "need room for " + std::to_string(episodes) + " returns");
        }
        const std::string env = env_name != nullptr ? env_name : checkpoint->env;
        const auto r = drop::evaluate(checkpoint->agent, env, episodes, seed);
        std::copy(r.begin(), r.end(), returns);
        return DROP_OK;
    });
}

} // extern "C"

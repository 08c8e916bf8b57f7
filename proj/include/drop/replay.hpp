#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace drop {

struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    std::vector<double> next_state;
    double reward = 0.0;
    bool done = false;

    [[nodiscard]] bool all_finite() const;
    friend bool operator==(const Transition&, const Transition&) = default;
};

/// Binary tree over leaf values supporting O(log n) point updates,
/// prefix-sum search and range maximum over the whole tree.
class SumTree {
public:
    explicit SumTree(std::size_t capacity = 1);

    void set(std::size_t leaf, double value);
    [[nodiscard]] double get(std::size_t leaf) const { return sum_[base_ + leaf]; }
    [[nodiscard]] double total() const { return sum_[1]; }
    [[nodiscard]] double max() const { return max_[1]; }
    /// Leftmost leaf whose inclusive prefix sum exceeds `mass`.
    [[nodiscard]] std::size_t find(double mass) const;
    [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }

private:
    std::size_t capacity_;
    std::size_t base_;
    std::vector<double> sum_;
    std::vector<double> max_;
};

/// A sampled batch. Indices are insertion serial numbers, stable across
/// ring-buffer wraparound so stale entries can be detected.
struct SampledBatch {
    std::vector<std::uint64_t> indices;
    std::vector<Transition> transitions;
    std::vector<double> is_weights;
};

/// FIFO replay buffer with proportional prioritized sampling.
class PrioritizedBuffer {
public:
    struct Config {
        std::size_t capacity = 102400;
        double alpha = 1.0;
        double beta = 0.5;
        double epsilon_priority = 1e-6;
    };

    static constexpr std::size_t kDefaultBatchSize = 32;
    /// At each episode end, |D| / kReplayDivisor transitions are replayed.
    static constexpr std::size_t kReplayDivisor = 8;

    PrioritizedBuffer() : PrioritizedBuffer(Config{}) {}
    explicit PrioritizedBuffer(Config config);

    /// Appends, evicting the oldest entry when full. Without an explicit
    /// priority the fresh entry gets the current maximum live priority.
    void push(Transition transition);
    void push(Transition transition, double priority);

    [[nodiscard]] SampledBatch sample(std::size_t batch_size, std::mt19937_64& rng) const;

    /// p <- max(|value|, epsilon). Evicted indices are skipped and counted.
    void update_priorities(std::span<const std::uint64_t> indices, std::span<const double> priorities);

    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] std::size_t capacity() const noexcept { return config_.capacity; }
    [[nodiscard]] const Config& config() const noexcept { return config_; }
    [[nodiscard]] std::uint64_t stale_updates() const noexcept { return stale_updates_; }
    [[nodiscard]] bool resident(std::uint64_t index) const noexcept;

    /// Stored priority (before the alpha exponent) of a resident index.
    [[nodiscard]] double priority(std::uint64_t index) const;
    /// Sampling probability of a resident index as held by the tree.
    [[nodiscard]] double probability(std::uint64_t index) const;
    [[nodiscard]] double total_mass() const { return tree_.total(); }
    /// Largest stored priority among live entries, 1 when empty.
    [[nodiscard]] double max_priority() const;

    [[nodiscard]] const Transition& at(std::uint64_t index) const;
    /// Live insertion indices, oldest first.
    [[nodiscard]] std::vector<std::uint64_t> live_indices() const;

    /// Length-prefixed binary dump of the live transitions, oldest first.
    void dump(const std::string& path) const;
    [[nodiscard]] static std::vector<Transition> read_dump(const std::string& path);

    /// Number of transitions replayed per episode for a buffer of `size`:
    /// batch_size * ceil(ceil(size / 8) / batch_size).
    [[nodiscard]] static std::size_t replay_volume(std::size_t size, std::size_t batch_size);

private:
    [[nodiscard]] std::size_t slot(std::uint64_t index) const noexcept {
        return static_cast<std::size_t>(index % config_.capacity);
    }
    void set_priority(std::size_t slot, double priority);

    Config config_;
    std::vector<Transition> ring_;
    std::vector<double> priorities_;
    SumTree tree_;
    std::size_t size_ = 0;
    std::uint64_t next_index_ = 0;
    std::uint64_t stale_updates_ = 0;
};

} // namespace drop

#include "drop/replay.hpp"
#include "drop/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace drop {

namespace {

bool finite_all(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) {
        throw IoError("truncated replay dump");
    }
    return value;
}

void write_vector(std::ostream& out, const std::vector<double>& v) {
    write_pod<std::uint64_t>(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_vector(std::istream& in) {
    const auto n = read_pod<std::uint64_t>(in);
    if (n > (1u << 20)) {
        throw IoError("corrupt replay dump: vector length " + std::to_string(n));
    }
    std::vector<double> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) {
        throw IoError("truncated replay dump");
    }
    return v;
}

constexpr char kDumpMagic[8] = {'D', 'R', 'O', 'P', 'R', 'B', '0', '1'};

} // namespace

bool Transition::all_finite() const {
    return finite_all(state) && finite_all(action) && finite_all(next_state) && std::isfinite(reward);
}

// ---------------------------------------------------------------------------
// SumTree

SumTree::SumTree(std::size_t capacity) : capacity_(capacity), base_(1) {
    if (capacity == 0) {
        throw std::invalid_argument("sum tree capacity must be positive");
    }
    while (base_ < capacity) {
        base_ <<= 1;
    }
    sum_.assign(2 * base_, 0.0);
    max_.assign(2 * base_, 0.0);
}

void SumTree::set(std::size_t leaf, double value) {
    if (leaf >= capacity_) {
        throw std::out_of_range("sum tree leaf out of range");
    }
    std::size_t node = base_ + leaf;
    sum_[node] = value;
    max_[node] = value;
    for (node >>= 1; node >= 1; node >>= 1) {
        sum_[node] = sum_[2 * node] + sum_[2 * node + 1];
        max_[node] = std::max(max_[2 * node], max_[2 * node + 1]);
    }
}

std::size_t SumTree::find(double mass) const {
    std::size_t node = 1;
    while (node < base_) {
        const std::size_t left = 2 * node;
        if (mass < sum_[left] || sum_[left + 1] <= 0.0) {
            node = left;
        } else {
            mass -= sum_[left];
            node = left + 1;
        }
    }
    return std::min(node - base_, capacity_ - 1);
}

// ---------------------------------------------------------------------------
// PrioritizedBuffer

PrioritizedBuffer::PrioritizedBuffer(Config config) : config_(config), tree_(std::max<std::size_t>(config.capacity, 1)) {
    if (config_.capacity == 0) {
        throw std::invalid_argument("replay capacity must be positive");
    }
    if (!(config_.epsilon_priority > 0.0) || !(config_.alpha >= 0.0) || !(config_.beta >= 0.0)) {
        throw std::invalid_argument("invalid prioritized replay constants");
    }
    ring_.resize(config_.capacity);
    priorities_.assign(config_.capacity, 0.0);
}

bool PrioritizedBuffer::resident(std::uint64_t index) const noexcept {
    return index < next_index_ && index + size_ >= next_index_;
}

double PrioritizedBuffer::max_priority() const {
    if (size_ == 0) {
        return 1.0;
    }
    // The tree holds p^alpha; undo the exponent for the raw priority.
    const double m = tree_.max();
    return config_.alpha == 0.0 ? 1.0 : std::pow(m, 1.0 / config_.alpha);
}

void PrioritizedBuffer::set_priority(std::size_t s, double priority) {
    const double p = std::max(std::abs(priority), config_.epsilon_priority);
    priorities_[s] = p;
    tree_.set(s, std::pow(p, config_.alpha));
}

void PrioritizedBuffer::push(Transition transition) {
    const double p = max_priority();
    push(std::move(transition), p);
}

void PrioritizedBuffer::push(Transition transition, double priority) {
    if (!transition.all_finite() || !std::isfinite(priority)) {
        throw std::invalid_argument("transition contains non-finite values");
    }
    const std::size_t s = slot(next_index_);
    ring_[s] = std::move(transition);
    set_priority(s, priority);
    ++next_index_;
    size_ = std::min(size_ + 1, config_.capacity);
}

SampledBatch PrioritizedBuffer::sample(std::size_t batch_size, std::mt19937_64& rng) const {
    if (batch_size == 0 || size_ < batch_size) {
        throw std::invalid_argument("cannot sample " + std::to_string(batch_size) + " transitions from a buffer of " +
                                    std::to_string(size_));
    }
    const double total = tree_.total();
    std::uniform_real_distribution<double> uniform(0.0, total);
    SampledBatch batch;
    batch.indices.reserve(batch_size);
    batch.transitions.reserve(batch_size);
    batch.is_weights.reserve(batch_size);
    const std::uint64_t oldest = next_index_ - size_;
    double max_weight = 0.0;
    for (std::size_t k = 0; k < batch_size; ++k) {
        std::size_t s = tree_.find(uniform(rng));
        // Mass can land on an empty leaf only through rounding at the very end.
        while (tree_.get(s) <= 0.0 && s > 0) {
            --s;
        }
        const std::uint64_t start_slot = oldest % config_.capacity;
        const std::uint64_t offset = (s + config_.capacity - start_slot) % config_.capacity;
        batch.indices.push_back(oldest + offset);
        batch.transitions.push_back(ring_[s]);
        const double prob = tree_.get(s) / total;
        const double w = std::pow(static_cast<double>(size_) * prob, -config_.beta);
        batch.is_weights.push_back(w);
        max_weight = std::max(max_weight, w);
    }
    for (double& w : batch.is_weights) {
        w /= max_weight;
    }
    return batch;
}

void PrioritizedBuffer::update_priorities(std::span<const std::uint64_t> indices, std::span<const double> priorities) {
    if (indices.size() != priorities.size()) {
        throw std::invalid_argument("indices and priorities differ in length");
    }
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (!resident(indices[k])) {
            ++stale_updates_;
            continue;
        }
        if (!std::isfinite(priorities[k])) {
            throw std::invalid_argument("priority must be finite");
        }
        set_priority(slot(indices[k]), priorities[k]);
    }
}

double PrioritizedBuffer::priority(std::uint64_t index) const {
    if (!resident(index)) {
        throw std::out_of_range("replay index " + std::to_string(index) + " is not resident");
    }
    return priorities_[slot(index)];
}

double PrioritizedBuffer::probability(std::uint64_t index) const {
    if (!resident(index)) {
        throw std::out_of_range("replay index " + std::to_string(index) + " is not resident");
    }
    return tree_.get(slot(index)) / tree_.total();
}

const Transition& PrioritizedBuffer::at(std::uint64_t index) const {
    if (!resident(index)) {
        throw std::out_of_range("replay index " + std::to_string(index) + " is not resident");
    }
    return ring_[slot(index)];
}

std::vector<std::uint64_t> PrioritizedBuffer::live_indices() const {
    std::vector<std::uint64_t> out;
    out.reserve(size_);
    for (std::uint64_t i = next_index_ - size_; i < next_index_; ++i) {
        out.push_back(i);
    }
    return out;
}

void PrioritizedBuffer::dump(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out.write(kDumpMagic, sizeof(kDumpMagic));
    write_pod<std::uint64_t>(out, size_);
    for (std::uint64_t i : live_indices()) {
        const Transition& t = ring_[slot(i)];
        write_vector(out, t.state);
        write_vector(out, t.action);
        write_vector(out, t.next_state);
        write_pod<double>(out, t.reward);
        write_pod<std::uint8_t>(out, t.done ? 1 : 0);
    }
    if (!out) {
        throw IoError("failed writing '" + path + "'");
    }
}

std::vector<Transition> PrioritizedBuffer::read_dump(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    char magic[sizeof(kDumpMagic)];
    in.read(magic, sizeof(magic));
    if (!in || !std::equal(std::begin(magic), std::end(magic), std::begin(kDumpMagic))) {
        throw IoError("'" + path + "' is not a replay dump");
    }
    const auto n = read_pod<std::uint64_t>(in);
    std::vector<Transition> out;
    out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 20)));
    for (std::uint64_t i = 0; i < n; ++i) {
        Transition t;
        t.state = read_vector(in);
        t.action = read_vector(in);
        t.next_state = read_vector(in);
        t.reward = read_pod<double>(in);
        t.done = read_pod<std::uint8_t>(in) != 0;
        out.push_back(std::move(t));
    }
    return out;
}

std::size_t PrioritizedBuffer::replay_volume(std::size_t size, std::size_t batch_size) {
    if (batch_size == 0) {
        throw std::invalid_argument("batch size must be positive");
    }
    const std::size_t target = (size + kReplayDivisor - 1) / kReplayDivisor;
    return batch_size * ((target + batch_size - 1) / batch_size);
}

} // namespace drop

#include "duelforge/replay.hpp"

#include <algorithm>
#include <cmath>

namespace duelforge::replay {

namespace {

std::size_t nextPow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

SumTree::SumTree(std::size_t capacity)
    : capacity_(capacity), leafBase_(nextPow2(std::max<std::size_t>(capacity, 1))) {
    tree_.assign(2 * leafBase_, 0.0);
}

void SumTree::set(std::size_t index, double mass) {
    std::size_t node = leafBase_ + index;
    tree_[node] = mass;
    for (node >>= 1; node >= 1; node >>= 1) {
        tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
        if (node == 1) break;
    }
}

std::size_t SumTree::find(double u) const {
    std::size_t node = 1;
    while (node < leafBase_) {
        const double left = tree_[2 * node];
        if (u < left) {
            node = 2 * node;
        } else {
            u -= left;
            node = 2 * node + 1;
        }
    }
    return node - leafBase_;
}

PrioritizedBuffer::PrioritizedBuffer(std::size_t capacity, double alpha, double priorityFloor)
    : capacity_(capacity), alpha_(alpha), priorityFloor_(priorityFloor), tree_(capacity) {
    if (capacity == 0) throw std::invalid_argument("PrioritizedBuffer: capacity must be positive");
    if (priorityFloor <= 0.0) {
        throw std::invalid_argument("PrioritizedBuffer: priority floor must be positive");
    }
    storage_.resize(capacity);
}

void PrioritizedBuffer::push(const Transition& transition) {
    const std::size_t slot = static_cast<std::size_t>(totalPushes_ % capacity_);
    storage_[slot] = transition;
    tree_.set(slot, std::pow(maxPriority_, alpha_));
    ++totalPushes_;
    size_ = std::min<std::size_t>(size_ + 1, capacity_);
}

SampleBatch PrioritizedBuffer::sample(std::size_t batchSize, double beta, Rng& rng) const {
    if (size_ < batchSize) {
        throw std::invalid_argument("PrioritizedBuffer::sample: buffer holds " +
                                    std::to_string(size_) + " < batch " +
                                    std::to_string(batchSize));
    }
    SampleBatch batch;
    batch.indices.reserve(batchSize);
    batch.transitions.reserve(batchSize);
    batch.isWeights.reserve(batchSize);

    const double total = tree_.total();
    const double segment = total / static_cast<double>(batchSize);
    const double n = static_cast<double>(size_);

    double maxWeight = 0.0;
    std::vector<double> rawWeights(batchSize);
    for (std::size_t k = 0; k < batchSize; ++k) {
        const double u = (static_cast<double>(k) + rng.uniformReal()) * segment;
        std::size_t slot = tree_.find(std::min(u, std::nexttoward(total, 0.0)));
        slot = std::min(slot, size_ - 1);  // guards the padded-zero tail
        const double prob = tree_.massAt(slot) / total;
        const double w = std::pow(n * prob, -beta);
        rawWeights[k] = w;
        maxWeight = std::max(maxWeight, w);

        // slot -> insertion id of the entry currently living there
        const std::uint64_t firstLive = totalPushes_ - size_;
        std::uint64_t id = firstLive / capacity_ * capacity_ + slot;
        if (id < firstLive) id += capacity_;
        batch.indices.push_back(id);
        batch.transitions.push_back(storage_[slot]);
    }
    for (std::size_t k = 0; k < batchSize; ++k) {
        batch.isWeights.push_back(static_cast<float>(rawWeights[k] / maxWeight));
    }
    return batch;
}

void PrioritizedBuffer::updatePriorities(const std::vector<std::uint64_t>& indices,
                                         const std::vector<float>& tdErrors) {
    if (indices.size() != tdErrors.size()) {
        throw std::invalid_argument("updatePriorities: index/error length mismatch");
    }
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (!isLive(indices[k])) {
            ++staleUpdates_;
            continue;
        }
        const double priority = std::abs(static_cast<double>(tdErrors[k])) + priorityFloor_;
        tree_.set(static_cast<std::size_t>(indices[k] % capacity_), std::pow(priority, alpha_));
        maxPriority_ = std::max(maxPriority_, priority);
    }
}

const Transition& PrioritizedBuffer::at(std::uint64_t index) const {
    if (!isLive(index)) throw std::out_of_range("PrioritizedBuffer::at: evicted index");
    return storage_[static_cast<std::size_t>(index % capacity_)];
}

void PrioritizedBuffer::clear() {
    totalPushes_ = 0;
    size_ = 0;
    staleUpdates_ = 0;
    maxPriority_ = 1.0;
    for (std::size_t i = 0; i < capacity_; ++i) tree_.set(i, 0.0);
}

}  // namespace duelforge::replay

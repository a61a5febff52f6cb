#pragma once

#include "duelforge/rng.hpp"
#include "duelforge/types.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace duelforge::replay {

// One learning sample. Rewards are stored post-clip; observations are the
// raw 128-byte states, normalized only at network input.
struct Transition {
    ByteObservation obs{};
    int action = 0;
    float reward = 0.0f;  // in [-1, 1]
    ByteObservation nextObs{};
    bool terminal = false;
    std::uint8_t sourcePlayer = 0;  // provenance tag, 0 = player 1
};

// Binary indexed sum over leaf masses, used for proportional sampling.
// Leaves hold priority^alpha in 64-bit so the root stays within 1e-6
// relative of the true leaf sum under arbitrary update interleavings.
class SumTree {
public:
    explicit SumTree(std::size_t capacity);

    void set(std::size_t index, double mass);
    double massAt(std::size_t index) const { return tree_[leafBase_ + index]; }
    double total() const { return tree_[1]; }

    // Index of the leaf whose cumulative mass interval contains u.
    std::size_t find(double u) const;

    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    std::size_t leafBase_;
    std::vector<double> tree_;
};

struct SampleBatch {
    std::vector<std::uint64_t> indices;  // insertion ids, stable across eviction
    std::vector<Transition> transitions;
    std::vector<float> isWeights;  // normalized so the batch max is 1
};

// Proportional prioritized replay over a FIFO ring. New transitions enter
// at the running max priority so they are sampled at least once before
// their TD error takes over.
class PrioritizedBuffer {
public:
    PrioritizedBuffer(std::size_t capacity, double alpha = 0.6, double priorityFloor = 1e-5);

    void push(const Transition& transition);

    // Stratified proportional sampling: one draw per equal-mass segment.
    SampleBatch sample(std::size_t batchSize, double beta, Rng& rng) const;

    // p_i = |tdError| + floor. Evicted indices are counted and skipped.
    void updatePriorities(const std::vector<std::uint64_t>& indices,
                          const std::vector<float>& tdErrors);

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    double maxPriority() const { return maxPriority_; }
    double alpha() const { return alpha_; }
    double priorityFloor() const { return priorityFloor_; }
    double treeTotal() const { return tree_.total(); }
    std::uint64_t staleUpdateCount() const { return staleUpdates_; }
    std::uint64_t pushCount() const { return totalPushes_; }

    bool isLive(std::uint64_t index) const {
        return index < totalPushes_ && totalPushes_ - index <= size_;
    }

    const Transition& at(std::uint64_t index) const;

    // Leaf mass of a live entry, exposed for tests.
    double massOf(std::uint64_t index) const { return tree_.massAt(index % capacity_); }

    void clear();

private:
    std::size_t capacity_;
    double alpha_;
    double priorityFloor_;
    double maxPriority_ = 1.0;
    std::uint64_t totalPushes_ = 0;
    std::size_t size_ = 0;
    std::uint64_t staleUpdates_ = 0;
    std::vector<Transition> storage_;
    SumTree tree_;
};

}  // namespace duelforge::replay

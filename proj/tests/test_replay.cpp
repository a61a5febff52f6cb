#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "duelforge/replay.hpp"

#include <cmath>

using namespace duelforge;
using replay::PrioritizedBuffer;
using replay::Transition;

namespace {

Transition makeTransition(int tag) {
    Transition t;
    t.obs[0] = static_cast<std::uint8_t>(tag & 0xff);
    t.nextObs[0] = static_cast<std::uint8_t>((tag + 1) & 0xff);
    t.action = tag % 3;
    t.reward = 0.0f;
    return t;
}

double leafSum(const PrioritizedBuffer& buffer) {
    double sum = 0.0;
    const std::uint64_t first = buffer.pushCount() - buffer.size();
    for (std::uint64_t id = first; id < buffer.pushCount(); ++id) sum += buffer.massOf(id);
    return sum;
}

}  // namespace

TEST_CASE("push: single element, root equals maxPriority^alpha") {
    PrioritizedBuffer buffer(8, 0.6, 1e-5);
    buffer.push(makeTransition(1));
    CHECK(buffer.size() == 1);
    CHECK(buffer.treeTotal() == doctest::Approx(std::pow(1.0, 0.6)));
}

TEST_CASE("ring eviction is strictly FIFO") {
    PrioritizedBuffer buffer(2, 0.6, 1e-5);
    buffer.push(makeTransition(10));
    buffer.push(makeTransition(11));
    buffer.push(makeTransition(12));
    CHECK(buffer.size() == 2);
    CHECK_FALSE(buffer.isLive(0));  // first item evicted
    CHECK(buffer.isLive(1));
    CHECK(buffer.isLive(2));
    CHECK(buffer.at(1).obs[0] == 11);
    CHECK(buffer.at(2).obs[0] == 12);
    CHECK_THROWS_AS(buffer.at(0), std::out_of_range);
}

TEST_CASE("push after a priority raise uses the new maxPriority") {
    PrioritizedBuffer buffer(8, 0.6, 1e-5);
    buffer.push(makeTransition(0));
    buffer.updatePriorities({0}, {2.5f});
    CHECK(buffer.maxPriority() == doctest::Approx(2.50001));
    buffer.push(makeTransition(1));
    CHECK(buffer.massOf(1) == doctest::Approx(std::pow(2.50001, 0.6)));
}

TEST_CASE("updatePriorities: floor and direct formula") {
    PrioritizedBuffer buffer(8, 0.6, 1e-5);
    buffer.push(makeTransition(0));
    buffer.push(makeTransition(1));

    buffer.updatePriorities({0}, {0.0f});
    CHECK(buffer.massOf(0) == doctest::Approx(std::pow(1e-5, 0.6)));

    buffer.updatePriorities({1}, {2.5f});
    CHECK(buffer.massOf(1) == doctest::Approx(std::pow(2.50001, 0.6)));
}

TEST_CASE("updating one leaf shifts the root by exactly the leaf delta") {
    PrioritizedBuffer buffer(4, 1.0, 1e-5);  // alpha 1 keeps the arithmetic plain
    for (int i = 0; i < 4; ++i) buffer.push(makeTransition(i));
    const double before = buffer.treeTotal();
    const double oldLeaf = buffer.massOf(2);
    buffer.updatePriorities({2}, {3.0f});
    const double newLeaf = buffer.massOf(2);
    CHECK(buffer.treeTotal() == doctest::Approx(before + (newLeaf - oldLeaf)).epsilon(1e-12));
}

TEST_CASE("stale indices are skipped and counted") {
    PrioritizedBuffer buffer(2, 0.6, 1e-5);
    buffer.push(makeTransition(0));
    buffer.push(makeTransition(1));
    buffer.push(makeTransition(2));  // evicts id 0
    const double rootBefore = buffer.treeTotal();
    buffer.updatePriorities({0}, {9.0f});
    CHECK(buffer.staleUpdateCount() == 1);
    CHECK(buffer.treeTotal() == doctest::Approx(rootBefore));
    CHECK(buffer.maxPriority() == doctest::Approx(1.0));
}

TEST_CASE("sample rejects an underfilled buffer") {
    PrioritizedBuffer buffer(8, 0.6, 1e-5);
    buffer.push(makeTransition(0));
    Rng rng(1);
    CHECK_THROWS_AS(buffer.sample(2, 0.4, rng), std::invalid_argument);
}

TEST_CASE("alpha=0.6 priorities {1,2} give the canonical probabilities") {
    PrioritizedBuffer buffer(2, 0.6, 1e-5);
    buffer.push(makeTransition(0));
    buffer.push(makeTransition(1));
    buffer.updatePriorities({0, 1}, {1.0f - 1e-5f, 2.0f - 1e-5f});
    const double total = buffer.treeTotal();
    CHECK(buffer.massOf(0) / total == doctest::Approx(0.39750).epsilon(1e-4));
    CHECK(buffer.massOf(1) / total == doctest::Approx(0.60250).epsilon(1e-4));
}

TEST_CASE("beta=0 makes all importance weights 1") {
    PrioritizedBuffer buffer(16, 0.6, 1e-5);
    for (int i = 0; i < 16; ++i) buffer.push(makeTransition(i));
    buffer.updatePriorities({3, 8}, {5.0f, 0.1f});
    Rng rng(2);
    const auto batch = buffer.sample(8, 0.0, rng);
    for (float w : batch.isWeights) CHECK(w == 1.0f);
}

TEST_CASE("importance weights are normalized to a max of 1") {
    PrioritizedBuffer buffer(16, 0.6, 1e-5);
    for (int i = 0; i < 16; ++i) buffer.push(makeTransition(i));
    for (int i = 0; i < 16; ++i) {
        buffer.updatePriorities({static_cast<std::uint64_t>(i)},
                                {static_cast<float>(0.1 + 0.3 * i)});
    }
    Rng rng(3);
    const auto batch = buffer.sample(10, 0.7, rng);
    float maxW = 0.0f;
    for (float w : batch.isWeights) {
        CHECK(w > 0.0f);
        CHECK(w <= 1.0f);
        maxW = std::max(maxW, w);
    }
    CHECK(maxW == 1.0f);
}

TEST_CASE("sampling frequencies follow the proportional law") {
    PrioritizedBuffer buffer(16, 0.6, 1e-5);
    for (int i = 0; i < 16; ++i) buffer.push(makeTransition(i));
    std::vector<float> errors;
    std::vector<std::uint64_t> ids;
    for (int i = 0; i < 16; ++i) {
        ids.push_back(static_cast<std::uint64_t>(i));
        errors.push_back(static_cast<float>(0.05 * (i + 1)));
    }
    buffer.updatePriorities(ids, errors);

    const double total = buffer.treeTotal();
    std::array<long, 16> counts{};
    Rng rng(11);
    const long draws = 200'000;
    for (long d = 0; d < draws / 8; ++d) {
        const auto batch = buffer.sample(8, 0.4, rng);
        for (auto id : batch.indices) counts[static_cast<std::size_t>(id)]++;
    }
    for (int i = 0; i < 16; ++i) {
        const double expected = buffer.massOf(static_cast<std::uint64_t>(i)) / total;
        const double observed =
            static_cast<double>(counts[static_cast<std::size_t>(i)]) / static_cast<double>(draws);
        CHECK(std::abs(observed - expected) <= 0.02);
    }
}

TEST_CASE("alpha=0 samples uniformly") {
    PrioritizedBuffer buffer(16, 0.0, 1e-5);
    for (int i = 0; i < 16; ++i) buffer.push(makeTransition(i));
    std::vector<float> errors(16);
    std::vector<std::uint64_t> ids(16);
    for (int i = 0; i < 16; ++i) {
        ids[static_cast<std::size_t>(i)] = static_cast<std::uint64_t>(i);
        errors[static_cast<std::size_t>(i)] = static_cast<float>(3.0 * i);
    }
    buffer.updatePriorities(ids, errors);

    std::array<long, 16> counts{};
    Rng rng(12);
    const long draws = 160'000;
    for (long d = 0; d < draws / 16; ++d) {
        const auto batch = buffer.sample(16, 0.4, rng);
        for (auto id : batch.indices) counts[static_cast<std::size_t>(id)]++;
    }
    for (long c : counts) {
        CHECK(std::abs(static_cast<double>(c) / draws - 1.0 / 16.0) <= 0.02);
    }
}

TEST_CASE("sum tree stays consistent under random interleavings") {
    PrioritizedBuffer buffer(64, 0.6, 1e-5);
    Rng rng(21);
    std::uint64_t nextTag = 0;
    for (int op = 0; op < 10'000; ++op) {
        if (buffer.size() < 8 || rng.uniformReal() < 0.5) {
            buffer.push(makeTransition(static_cast<int>(nextTag++)));
        } else {
            const std::uint64_t first = buffer.pushCount() - buffer.size();
            const std::uint64_t id =
                first + rng.uniformInt(static_cast<std::uint32_t>(buffer.size()));
            buffer.updatePriorities({id}, {static_cast<float>(rng.uniformReal() * 10.0)});
        }
    }
    const double root = buffer.treeTotal();
    const double sum = leafSum(buffer);
    CHECK(std::abs(root - sum) <= 1e-6 * std::max(root, sum));
}

TEST_CASE("clear resets the buffer to empty") {
    PrioritizedBuffer buffer(8, 0.6, 1e-5);
    for (int i = 0; i < 8; ++i) buffer.push(makeTransition(i));
    buffer.updatePriorities({3}, {7.0f});
    buffer.clear();
    CHECK(buffer.size() == 0);
    CHECK(buffer.pushCount() == 0);
    CHECK(buffer.treeTotal() == 0.0);
    CHECK(buffer.maxPriority() == doctest::Approx(1.0));
}

TEST_CASE("constructor validation") {
    CHECK_THROWS_AS(PrioritizedBuffer(0, 0.6, 1e-5), std::invalid_argument);
    CHECK_THROWS_AS(PrioritizedBuffer(8, 0.6, 0.0), std::invalid_argument);
}

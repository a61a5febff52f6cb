#pragma once

#include "duelforge/neuralnet.hpp"
#include "duelforge/replay.hpp"
#include "duelforge/rng.hpp"
#include "duelforge/types.hpp"

#include <cstdint>
#include <vector>

namespace duelforge::dqn {

struct LearnerConfig {
    double discount = 0.99;
    double learningRate = 1e-3;
    int batchSize = 256;
    long targetSyncPeriod = 1000;  // gradient steps between target refreshes
    double huberDelta = 1.0;
};

struct EpsilonSchedule {
    enum class Kind { LinearDecay, MultiplicativeDecay, Fixed };

    Kind kind = Kind::Fixed;
    double start = 0.05;
    double floor = 0.05;
    double decayRate = 0.9999985;  // multiplicative, per step
    long decaySteps = 1;           // linear horizon

    static EpsilonSchedule linear(double start, double floor, long decaySteps) {
        return {Kind::LinearDecay, start, floor, 0.0, decaySteps};
    }
    static EpsilonSchedule multiplicative(double start, double floor, double rate) {
        return {Kind::MultiplicativeDecay, start, floor, rate, 0};
    }
    static EpsilonSchedule fixed(double value) { return {Kind::Fixed, value, value, 0.0, 0}; }
};

// Non-increasing in step, clamped at the floor.
double epsilonAt(const EpsilonSchedule& schedule, long step);

// Epsilon-greedy over forward(params, observation); greedy ties break to
// the lowest action index.
int selectAction(const nn::NetworkParameters& params,
                 const Eigen::Matrix<float, kObsBytes, 1>& observation, double epsilon, Rng& rng);

int argmaxLowest(const Eigen::Ref<const Eigen::RowVectorXf>& q);

// Double-Q targets, one per transition: the online network chooses the
// bootstrap action, the target network scores it. Per-sample evaluation so
// the result is bit-identical to a per-sample oracle.
Eigen::VectorXf computeTargets(const nn::NetworkParameters& onlineParams,
                               const nn::NetworkParameters& targetParams,
                               const std::vector<replay::Transition>& batch, double discount);

struct LearnDiagnostics {
    double loss = 0.0;
    double meanAbsTd = 0.0;
    std::array<double, nn::kLayerCount> gradNorms{0.0, 0.0, 0.0};
    long updatedParameterCount = 0;
    bool targetSynced = false;
};

// One prioritized double-DQN gradient step: sample, TD errors, Huber loss
// weighted by importance weights, backprop through the taken actions only,
// priority refresh, and the periodic target sync.
LearnDiagnostics learnStep(nn::NetworkParameters& onlineParams,
                           nn::NetworkParameters& targetParams, nn::OptimizerState& optState,
                           replay::PrioritizedBuffer& buffer, const LearnerConfig& config,
                           double beta, Rng& rng);

double huber(double x, double delta);

}  // namespace duelforge::dqn

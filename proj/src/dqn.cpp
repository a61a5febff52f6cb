#include "duelforge/dqn.hpp"

#include <algorithm>
#include <cmath>

namespace duelforge::dqn {

double epsilonAt(const EpsilonSchedule& schedule, long step) {
    switch (schedule.kind) {
        case EpsilonSchedule::Kind::LinearDecay: {
            if (schedule.decaySteps <= 0) return schedule.floor;
            const double frac =
                static_cast<double>(step) / static_cast<double>(schedule.decaySteps);
            return std::max(schedule.floor,
                            schedule.start - (schedule.start - schedule.floor) * frac);
        }
        case EpsilonSchedule::Kind::MultiplicativeDecay:
            return std::max(schedule.floor,
                            schedule.start * std::pow(schedule.decayRate,
                                                      static_cast<double>(step)));
        case EpsilonSchedule::Kind::Fixed:
            return schedule.start;
    }
    return schedule.floor;
}

int argmaxLowest(const Eigen::Ref<const Eigen::RowVectorXf>& q) {
    int best = 0;
    for (int a = 1; a < q.size(); ++a) {
        if (q[a] > q[best]) best = a;
    }
    return best;
}

int selectAction(const nn::NetworkParameters& params,
                 const Eigen::Matrix<float, kObsBytes, 1>& observation, double epsilon, Rng& rng) {
    const int actions = params.actionCount();
    if (rng.uniformReal() < epsilon) {
        return static_cast<int>(rng.uniformInt(static_cast<std::uint32_t>(actions)));
    }
    const VectorX<float> q = nn::forward(params, VectorX<float>(observation));
    int best = 0;
    for (int a = 1; a < actions; ++a) {
        if (q[a] > q[best]) best = a;
    }
    return best;
}

Eigen::VectorXf computeTargets(const nn::NetworkParameters& onlineParams,
                               const nn::NetworkParameters& targetParams,
                               const std::vector<replay::Transition>& batch, double discount) {
    Eigen::VectorXf targets(static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& t = batch[i];
        if (t.terminal) {
            targets[static_cast<Eigen::Index>(i)] = t.reward;
            continue;
        }
        const VectorX<float> next = normalizeObservation<float>(t.nextObs);
        const VectorX<float> qOnline = nn::forward(onlineParams, next);
        const VectorX<float> qTarget = nn::forward(targetParams, next);
        int best = 0;
        for (int a = 1; a < qOnline.size(); ++a) {
            if (qOnline[a] > qOnline[best]) best = a;
        }
        targets[static_cast<Eigen::Index>(i)] =
            t.reward + static_cast<float>(discount) * qTarget[best];
    }
    return targets;
}

double huber(double x, double delta) {
    const double a = std::abs(x);
    if (a <= delta) return 0.5 * x * x;
    return delta * (a - 0.5 * delta);
}

LearnDiagnostics learnStep(nn::NetworkParameters& onlineParams,
                           nn::NetworkParameters& targetParams, nn::OptimizerState& optState,
                           replay::PrioritizedBuffer& buffer, const LearnerConfig& config,
                           double beta, Rng& rng) {
    const auto batchSize = static_cast<std::size_t>(config.batchSize);
    if (buffer.size() < batchSize) {
        throw std::invalid_argument("learnStep: buffer smaller than batch");
    }
    replay::SampleBatch batch = buffer.sample(batchSize, beta, rng);

    const int actions = onlineParams.actionCount();
    const auto b = static_cast<Eigen::Index>(batchSize);
    MatrixXf states(b, kObsBytes);
    MatrixXf nextStates(b, kObsBytes);
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto& t = batch.transitions[static_cast<std::size_t>(i)];
        states.row(i) = normalizeObservation<float>(t.obs).transpose();
        nextStates.row(i) = normalizeObservation<float>(t.nextObs).transpose();
    }

    // Batched double-Q targets; matches computeTargets up to GEMM rounding.
    const MatrixXf qOnlineNext = nn::batchQ(onlineParams, nextStates);
    const MatrixXf qTargetNext = nn::batchQ(targetParams, nextStates);
    Eigen::VectorXf targets(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto& t = batch.transitions[static_cast<std::size_t>(i)];
        if (t.terminal) {
            targets[i] = t.reward;
        } else {
            const int best = argmaxLowest(qOnlineNext.row(i));
            targets[i] = t.reward + static_cast<float>(config.discount) * qTargetNext(i, best);
        }
    }

    const nn::ForwardCacheT<float> cache = nn::batchForward(onlineParams, states);

    LearnDiagnostics diag;
    MatrixXf lossGrad = MatrixXf::Zero(b, actions);
    std::vector<float> absTd(batchSize);
    double lossSum = 0.0;
    double absTdSum = 0.0;
    const double delta = config.huberDelta;
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto& t = batch.transitions[static_cast<std::size_t>(i)];
        const double td = static_cast<double>(targets[i]) - cache.q(i, t.action);
        const double w = batch.isWeights[static_cast<std::size_t>(i)];
        absTd[static_cast<std::size_t>(i)] = static_cast<float>(std::abs(td));
        absTdSum += std::abs(td);
        lossSum += w * huber(td, delta);
        // dL/dq = -w * huber'(td) / B, with huber'(x) = clamp(x, -delta, delta)
        const double psi = std::clamp(td, -delta, delta);
        lossGrad(i, t.action) = static_cast<float>(-w * psi / static_cast<double>(b));
    }
    diag.loss = lossSum / static_cast<double>(b);
    diag.meanAbsTd = absTdSum / static_cast<double>(b);

    const nn::GradientsT<float> grads = nn::backprop(onlineParams, cache, lossGrad);
    const nn::UpdateDiagnostics update = nn::adamUpdate(onlineParams, optState, grads);
    diag.gradNorms = update.gradNorms;
    diag.updatedParameterCount = update.updatedParameterCount;

    buffer.updatePriorities(batch.indices, absTd);

    if (config.targetSyncPeriod > 0 && optState.stepCount % config.targetSyncPeriod == 0) {
        targetParams = nn::copyWeights(onlineParams);
        diag.targetSynced = true;
    }
    return diag;
}

}  // namespace duelforge::dqn

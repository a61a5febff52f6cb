#pragma once

#include "duelforge/rng.hpp"
#include "duelforge/types.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace duelforge::nn {

inline constexpr int kLayerCount = 3;
inline constexpr int kHidden1 = 512;
inline constexpr int kHidden2 = 256;
inline constexpr int kMaxActions = 32;

// Weights and biases of the 3-layer value network, plus the per-layer
// freeze mask. A frozen layer is excluded from gradient updates and must
// stay bit-identical across any number of update steps.
template <class Scalar>
struct NetworkParametersT {
    struct Layer {
        MatrixX<Scalar> weights;  // out x in
        VectorX<Scalar> biases;   // out
    };

    std::array<Layer, kLayerCount> layers;
    std::array<bool, kLayerCount> freezeMask{false, false, false};

    int inputSize() const { return static_cast<int>(layers[0].weights.cols()); }
    int actionCount() const { return static_cast<int>(layers[2].weights.rows()); }

    long parameterCount() const {
        long n = 0;
        for (const auto& l : layers) n += l.weights.size() + l.biases.size();
        return n;
    }
};

using NetworkParameters = NetworkParametersT<float>;

// Adam accumulators. Moments are kept in 64-bit regardless of the
// parameter scalar; frozen layers keep zero moments.
template <class Scalar>
struct OptimizerStateT {
    struct LayerMoments {
        MatrixXd weightM, weightV;
        VectorX<double> biasM, biasV;
    };

    std::array<LayerMoments, kLayerCount> layers;
    long stepCount = 0;
    double learningRate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilonHat = 1e-8;
};

using OptimizerState = OptimizerStateT<float>;

template <class Scalar>
struct GradientsT {
    struct Layer {
        MatrixX<Scalar> weights;
        VectorX<Scalar> biases;
        bool computed = false;
    };
    std::array<Layer, kLayerCount> layers;
};

// Activations kept from a batch forward pass, one row per sample.
template <class Scalar>
struct ForwardCacheT {
    MatrixX<Scalar> inputs;  // B x in
    MatrixX<Scalar> z1, h1;  // B x 512
    MatrixX<Scalar> z2, h2;  // B x 256
    MatrixX<Scalar> q;       // B x A
};

struct UpdateDiagnostics {
    std::array<double, kLayerCount> gradNorms{0.0, 0.0, 0.0};
    long updatedParameterCount = 0;
};

// Generalized constructor used by tests and by initNetwork: dims[0] is the
// input width, dims[1..3] the layer outputs. Weights are uniform in
// [-sqrt(6/fan_in), +sqrt(6/fan_in)], biases zero.
template <class Scalar>
NetworkParametersT<Scalar> makeNetwork(const std::array<int, kLayerCount + 1>& dims,
                                       std::uint64_t seed) {
    NetworkParametersT<Scalar> params;
    Rng rng(seed);
    for (int l = 0; l < kLayerCount; ++l) {
        const int fanIn = dims[static_cast<std::size_t>(l)];
        const int fanOut = dims[static_cast<std::size_t>(l) + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fanIn));
        auto& layer = params.layers[static_cast<std::size_t>(l)];
        layer.weights.resize(fanOut, fanIn);
        for (int r = 0; r < fanOut; ++r) {
            for (int c = 0; c < fanIn; ++c) {
                layer.weights(r, c) = static_cast<Scalar>(rng.uniformReal(-bound, bound));
            }
        }
        layer.biases = VectorX<Scalar>::Zero(fanOut);
    }
    return params;
}

// 128 -> 512 -> 256 -> actionCount, deterministic in seed.
inline NetworkParameters initNetwork(int actionCount, std::uint64_t seed) {
    if (actionCount < 1 || actionCount > kMaxActions) {
        throw std::invalid_argument("initNetwork: actionCount must be in [1, 32], got " +
                                    std::to_string(actionCount));
    }
    return makeNetwork<float>({kObsBytes, kHidden1, kHidden2, actionCount}, seed);
}

template <class Scalar>
NetworkParametersT<Scalar> copyWeights(const NetworkParametersT<Scalar>& source) {
    return source;  // Eigen matrices deep-copy by value
}

// relu(W1 x + b1) -> relu(W2 h1 + b2) -> W3 h2 + b3
template <class Scalar>
VectorX<Scalar> forward(const NetworkParametersT<Scalar>& params, const VectorX<Scalar>& x) {
    if (x.size() != params.layers[0].weights.cols()) {
        throw std::invalid_argument("forward: observation length " + std::to_string(x.size()) +
                                    " does not match network input " +
                                    std::to_string(params.layers[0].weights.cols()));
    }
    VectorX<Scalar> h1 = (params.layers[0].weights * x + params.layers[0].biases).cwiseMax(Scalar(0));
    VectorX<Scalar> h2 = (params.layers[1].weights * h1 + params.layers[1].biases).cwiseMax(Scalar(0));
    return params.layers[2].weights * h2 + params.layers[2].biases;
}

template <class Scalar>
ForwardCacheT<Scalar> batchForward(const NetworkParametersT<Scalar>& params,
                                   const MatrixX<Scalar>& inputs) {
    if (inputs.cols() != params.layers[0].weights.cols()) {
        throw std::invalid_argument("batchForward: input width mismatch");
    }
    ForwardCacheT<Scalar> cache;
    cache.inputs = inputs;
    cache.z1 = inputs * params.layers[0].weights.transpose();
    cache.z1.rowwise() += params.layers[0].biases.transpose();
    cache.h1 = cache.z1.cwiseMax(Scalar(0));
    cache.z2 = cache.h1 * params.layers[1].weights.transpose();
    cache.z2.rowwise() += params.layers[1].biases.transpose();
    cache.h2 = cache.z2.cwiseMax(Scalar(0));
    cache.q = cache.h2 * params.layers[2].weights.transpose();
    cache.q.rowwise() += params.layers[2].biases.transpose();
    return cache;
}

// Q-values only. Shares the batchForward path so both routes are
// bit-identical.
template <class Scalar>
MatrixX<Scalar> batchQ(const NetworkParametersT<Scalar>& params, const MatrixX<Scalar>& inputs) {
    return batchForward(params, inputs).q;
}

// Backpropagates caller-supplied per-sample dL/dQ through the cached
// activations. Frozen layers get no gradients; propagation stops at the
// shallowest unfrozen layer, so a [frozen, frozen, live] network only pays
// for the output-layer gradient.
template <class Scalar>
GradientsT<Scalar> backprop(const NetworkParametersT<Scalar>& params,
                            const ForwardCacheT<Scalar>& cache,
                            const MatrixX<Scalar>& lossGrad) {
    GradientsT<Scalar> grads;
    int lowestLive = kLayerCount;
    for (int l = 0; l < kLayerCount; ++l) {
        if (!params.freezeMask[static_cast<std::size_t>(l)]) {
            lowestLive = l;
            break;
        }
    }
    if (lowestLive == kLayerCount) return grads;  // everything frozen

    if (!params.freezeMask[2]) {
        grads.layers[2].weights = lossGrad.transpose() * cache.h2;
        grads.layers[2].biases = lossGrad.colwise().sum().transpose();
        grads.layers[2].computed = true;
    }
    if (lowestLive >= 2) return grads;

    MatrixX<Scalar> dz2 = lossGrad * params.layers[2].weights;
    dz2 = dz2.cwiseProduct((cache.z2.array() > Scalar(0)).template cast<Scalar>().matrix());
    if (!params.freezeMask[1]) {
        grads.layers[1].weights = dz2.transpose() * cache.h1;
        grads.layers[1].biases = dz2.colwise().sum().transpose();
        grads.layers[1].computed = true;
    }
    if (lowestLive >= 1) return grads;

    MatrixX<Scalar> dz1 = dz2 * params.layers[1].weights;
    dz1 = dz1.cwiseProduct((cache.z1.array() > Scalar(0)).template cast<Scalar>().matrix());
    grads.layers[0].weights = dz1.transpose() * cache.inputs;
    grads.layers[0].biases = dz1.colwise().sum().transpose();
    grads.layers[0].computed = true;
    return grads;
}

template <class Scalar>
OptimizerStateT<Scalar> initOptimizer(const NetworkParametersT<Scalar>& params,
                                      double learningRate) {
    OptimizerStateT<Scalar> state;
    state.learningRate = learningRate;
    for (int l = 0; l < kLayerCount; ++l) {
        auto& m = state.layers[static_cast<std::size_t>(l)];
        const auto& p = params.layers[static_cast<std::size_t>(l)];
        m.weightM = MatrixXd::Zero(p.weights.rows(), p.weights.cols());
        m.weightV = MatrixXd::Zero(p.weights.rows(), p.weights.cols());
        m.biasM = VectorX<double>::Zero(p.biases.size());
        m.biasV = VectorX<double>::Zero(p.biases.size());
    }
    return state;
}

// One Adam step with bias correction, in 64-bit, written back to the
// parameter scalar. stepCount advances exactly once per call.
template <class Scalar>
UpdateDiagnostics adamUpdate(NetworkParametersT<Scalar>& params, OptimizerStateT<Scalar>& state,
                             const GradientsT<Scalar>& grads) {
    ++state.stepCount;
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double mCorr = 1.0 - std::pow(b1, static_cast<double>(state.stepCount));
    const double vCorr = 1.0 - std::pow(b2, static_cast<double>(state.stepCount));
    const double lr = state.learningRate;
    const double eps = state.epsilonHat;

    UpdateDiagnostics diag;
    for (int l = 0; l < kLayerCount; ++l) {
        const auto li = static_cast<std::size_t>(l);
        if (params.freezeMask[li] || !grads.layers[li].computed) continue;

        auto& moments = state.layers[li];
        auto& layer = params.layers[li];
        const MatrixXd gw = grads.layers[li].weights.template cast<double>();
        const Eigen::VectorXd gb = grads.layers[li].biases.template cast<double>();

        moments.weightM = b1 * moments.weightM + (1.0 - b1) * gw;
        moments.weightV = b2 * moments.weightV + (1.0 - b2) * gw.cwiseProduct(gw);
        moments.biasM = b1 * moments.biasM + (1.0 - b1) * gb;
        moments.biasV = b2 * moments.biasV + (1.0 - b2) * gb.cwiseProduct(gb);

        const MatrixXd wStep =
            (moments.weightM / mCorr).array() / ((moments.weightV / vCorr).array().sqrt() + eps);
        const Eigen::VectorXd bStep =
            (moments.biasM / mCorr).array() / ((moments.biasV / vCorr).array().sqrt() + eps);
        layer.weights =
            (layer.weights.template cast<double>() - lr * wStep).template cast<Scalar>();
        layer.biases = (layer.biases.template cast<double>() - lr * bStep).template cast<Scalar>();

        diag.gradNorms[li] = std::sqrt(gw.squaredNorm() + gb.squaredNorm());
        diag.updatedParameterCount += layer.weights.size() + layer.biases.size();
    }
    return diag;
}

// Forward + backprop + Adam in one call. lossGrad holds per-sample dL/dQ.
template <class Scalar>
UpdateDiagnostics backwardAndUpdate(NetworkParametersT<Scalar>& params,
                                    OptimizerStateT<Scalar>& state,
                                    const MatrixX<Scalar>& batchInputs,
                                    const MatrixX<Scalar>& lossGrad) {
    if (batchInputs.rows() != lossGrad.rows() ||
        lossGrad.cols() != params.layers[2].weights.rows()) {
        throw std::invalid_argument("backwardAndUpdate: batch shape mismatch");
    }
    if (!lossGrad.allFinite()) {
        throw std::invalid_argument("backwardAndUpdate: non-finite loss gradient");
    }
    const ForwardCacheT<Scalar> cache = batchForward(params, batchInputs);
    const GradientsT<Scalar> grads = backprop(params, cache, lossGrad);
    return adamUpdate(params, state, grads);
}

// Checkpoint i/o. Format: "DFCK", version u16, actionCount u16, then per
// layer rows u32, cols u32, row-major f32 weights, f32 biases, then the
// 3-byte freeze mask. All integers little-endian.
class CheckpointError : public std::runtime_error {
public:
    enum class Kind { BadMagic, BadVersion, Truncated, DimMismatch };

    CheckpointError(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

std::vector<std::uint8_t> serialize(const NetworkParameters& params);
NetworkParameters deserialize(const std::vector<std::uint8_t>& bytes);

void saveCheckpoint(const std::filesystem::path& path, const NetworkParameters& params);
NetworkParameters loadCheckpoint(const std::filesystem::path& path);

}  // namespace duelforge::nn

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "duelforge/neuralnet.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace duelforge;

namespace {

// Small double network clear of relu kinks, so central differences are
// trustworthy at h = 1e-3.
struct GradCheckCase {
    nn::NetworkParametersT<double> params;
    MatrixX<double> inputs;
    MatrixX<double> lossWeights;
};

GradCheckCase makeGradCheckCase(std::uint64_t seed) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        const std::uint64_t s = deriveSeed(seed, attempt);
        auto params = nn::makeNetwork<double>({4, 8, 6, 3}, s);
        Rng rng(deriveSeed(s, 7));
        MatrixX<double> inputs(3, 4);
        for (Eigen::Index i = 0; i < inputs.size(); ++i) {
            inputs.data()[i] = rng.uniformReal(-1.0, 1.0);
        }
        MatrixX<double> lossWeights(3, 3);
        for (Eigen::Index i = 0; i < lossWeights.size(); ++i) {
            lossWeights.data()[i] = rng.uniformReal(-1.0, 1.0);
        }
        const auto cache = nn::batchForward(params, inputs);
        const double margin =
            std::min(cache.z1.cwiseAbs().minCoeff(), cache.z2.cwiseAbs().minCoeff());
        if (margin > 1e-2) return {std::move(params), std::move(inputs), std::move(lossWeights)};
    }
}

std::vector<double> flatten(const nn::GradientsT<double>& grads) {
    std::vector<double> out;
    for (const auto& layer : grads.layers) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                out.push_back(layer.weights(r, c));
            }
        }
        for (Eigen::Index i = 0; i < layer.biases.size(); ++i) out.push_back(layer.biases[i]);
    }
    return out;
}

}  // namespace

TEST_CASE("initNetwork is deterministic in the seed") {
    const auto a = nn::initNetwork(4, 99);
    const auto b = nn::initNetwork(4, 99);
    CHECK(nn::serialize(a) == nn::serialize(b));

    const auto c = nn::initNetwork(4, 100);
    CHECK(nn::serialize(a) != nn::serialize(c));
}

TEST_CASE("initNetwork dims and validation") {
    const auto params = nn::initNetwork(6, 1);
    CHECK(params.layers[0].weights.rows() == 512);
    CHECK(params.layers[0].weights.cols() == 128);
    CHECK(params.layers[1].weights.rows() == 256);
    CHECK(params.layers[1].weights.cols() == 512);
    CHECK(params.layers[2].weights.rows() == 6);
    CHECK(params.layers[2].weights.cols() == 256);
    CHECK(params.layers[2].biases.size() == 6);
    CHECK(params.actionCount() == 6);
    CHECK(params.parameterCount() == 512 * 128 + 512 + 256 * 512 + 256 + 6 * 256 + 6);
    for (const auto& layer : params.layers) {
        CHECK(layer.weights.allFinite());
        CHECK(layer.biases.isZero());
    }

    CHECK_THROWS_AS(nn::initNetwork(0, 1), std::invalid_argument);
    CHECK_THROWS_AS(nn::initNetwork(33, 1), std::invalid_argument);
}

TEST_CASE("init bounds follow the fan-in rule") {
    const auto params = nn::initNetwork(4, 7);
    const double bounds[3] = {std::sqrt(6.0 / 128.0), std::sqrt(6.0 / 512.0),
                              std::sqrt(6.0 / 256.0)};
    for (int l = 0; l < 3; ++l) {
        const auto& w = params.layers[static_cast<std::size_t>(l)].weights;
        CHECK(static_cast<double>(w.maxCoeff()) <= bounds[l]);
        CHECK(static_cast<double>(w.minCoeff()) >= -bounds[l]);
        CHECK(static_cast<double>(w.cwiseAbs().maxCoeff()) > bounds[l] * 0.5);
    }
}

TEST_CASE("forward: zero parameters give zero Q") {
    auto params = nn::initNetwork(4, 1);
    for (auto& layer : params.layers) {
        layer.weights.setZero();
        layer.biases.setZero();
    }
    VectorX<float> x = VectorX<float>::Constant(128, 0.7f);
    const auto q = nn::forward(params, x);
    CHECK(q.size() == 4);
    CHECK(q.isZero());
}

TEST_CASE("forward: pass-through hand case propagates 1.28") {
    auto params = nn::initNetwork(3, 1);
    for (auto& layer : params.layers) {
        layer.weights.setZero();
        layer.biases.setZero();
    }
    params.layers[0].weights.row(0).setConstant(0.01f);
    params.layers[1].weights(0, 0) = 1.0f;
    params.layers[2].weights(0, 0) = 1.0f;

    const VectorX<float> x = VectorX<float>::Ones(128);
    const auto q = nn::forward(params, x);
    CHECK(q[0] == doctest::Approx(1.28).epsilon(1e-5));
    CHECK(q[1] == 0.0f);
    CHECK(q[2] == 0.0f);
}

TEST_CASE("forward: negative pre-activation contributes nothing") {
    auto params = nn::makeNetwork<double>({2, 2, 2, 1}, 3);
    for (auto& layer : params.layers) {
        layer.weights.setZero();
        layer.biases.setZero();
    }
    // unit 0 goes negative, unit 1 positive; only unit 1 may reach the output
    params.layers[0].weights(0, 0) = -5.0;
    params.layers[0].weights(1, 0) = 2.0;
    params.layers[1].weights(0, 0) = 1.0;
    params.layers[1].weights(1, 1) = 1.0;
    params.layers[2].weights(0, 0) = 10.0;
    params.layers[2].weights(0, 1) = 1.0;

    VectorX<double> x(2);
    x << 1.0, 0.0;
    const auto q = nn::forward(params, x);
    CHECK(q[0] == doctest::Approx(2.0));
}

TEST_CASE("forward rejects wrong observation length") {
    const auto params = nn::initNetwork(4, 1);
    VectorX<float> x = VectorX<float>::Zero(127);
    CHECK_THROWS_AS(nn::forward(params, x), std::invalid_argument);
}

TEST_CASE("batched forward agrees with per-sample forward") {
    const auto params = nn::initNetwork(5, 321);
    Rng rng(11);
    MatrixX<float> inputs(16, 128);
    for (Eigen::Index i = 0; i < inputs.size(); ++i) {
        inputs.data()[i] = static_cast<float>(rng.uniformReal());
    }
    const auto cache = nn::batchForward(params, inputs);
    const auto q = nn::batchQ(params, inputs);
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
        const VectorX<float> single =
            nn::forward(params, VectorX<float>(inputs.row(r).transpose()));
        for (Eigen::Index a = 0; a < single.size(); ++a) {
            CHECK(cache.q(r, a) == doctest::Approx(single[a]).epsilon(1e-4));
            CHECK(q(r, a) == cache.q(r, a));
        }
    }
}

TEST_CASE("forward stays finite over random [0,1] inputs") {
    const auto params = nn::initNetwork(8, 21);
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        VectorX<float> x(128);
        for (int i = 0; i < 128; ++i) x[i] = static_cast<float>(rng.uniformReal());
        CHECK(nn::forward(params, x).allFinite());
    }
}

TEST_CASE("gradient check: analytic backprop matches central differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto test = makeGradCheckCase(seed);
        const auto cache = nn::batchForward(test.params, test.inputs);
        const auto grads = nn::backprop(test.params, cache, test.lossWeights);
        const auto analytic = flatten(grads);
        const auto numeric =
            oracle::finiteDifferenceGradients(test.params, test.inputs, test.lossWeights);
        REQUIRE(analytic.size() == numeric.values.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            const double denom =
                std::max({std::abs(analytic[i]), std::abs(numeric.values[i]), 1e-2});
            worst = std::max(worst, std::abs(analytic[i] - numeric.values[i]) / denom);
        }
        CHECK(worst <= 1e-4);
    }
}

TEST_CASE("freeze invariance over many updates") {
    auto params = nn::initNetwork(4, 11);
    params.freezeMask = {true, true, false};
    auto opt = nn::initOptimizer(params, 1e-3);
    const auto frozen0 = params.layers[0];
    const auto frozen1 = params.layers[1];

    Rng rng(17);
    for (int step = 0; step < 1000; ++step) {
        MatrixX<float> inputs(2, 128);
        MatrixX<float> lossGrad(2, 4);
        for (Eigen::Index i = 0; i < inputs.size(); ++i) {
            inputs.data()[i] = static_cast<float>(rng.uniformReal());
        }
        for (Eigen::Index i = 0; i < lossGrad.size(); ++i) {
            lossGrad.data()[i] = static_cast<float>(rng.uniformReal(-1.0, 1.0));
        }
        nn::backwardAndUpdate(params, opt, inputs, lossGrad);
    }
    CHECK(opt.stepCount == 1000);
    CHECK(params.layers[0].weights == frozen0.weights);
    CHECK(params.layers[0].biases == frozen0.biases);
    CHECK(params.layers[1].weights == frozen1.weights);
    CHECK(params.layers[1].biases == frozen1.biases);
    CHECK(opt.layers[0].weightM.isZero());
    CHECK(opt.layers[1].weightV.isZero());
    CHECK_FALSE(opt.layers[2].weightM.isZero());
}

TEST_CASE("Adam first step on a unit gradient moves by about -lr") {
    auto params = nn::makeNetwork<double>({1, 1, 1, 1}, 5);
    for (auto& layer : params.layers) {
        layer.weights.setZero();
        layer.biases.setZero();
    }
    auto opt = nn::initOptimizer(params, 0.1);
    MatrixX<double> input(1, 1);
    input << 1.0;
    MatrixX<double> lossGrad(1, 1);
    lossGrad << 1.0;
    const auto diag = nn::backwardAndUpdate(params, opt, input, lossGrad);
    CHECK(opt.stepCount == 1);
    // bias of the output layer carries gradient exactly 1
    CHECK(params.layers[2].biases[0] ==
          doctest::Approx(-0.1 * (1.0 / (1.0 + 1e-8))).epsilon(1e-9));
    CHECK(diag.gradNorms[2] > 0.0);
}

TEST_CASE("zero gradients leave parameters and moments untouched") {
    auto params = nn::initNetwork(4, 2);
    auto opt = nn::initOptimizer(params, 1e-3);
    const auto before = nn::serialize(params);
    const MatrixX<float> inputs = MatrixX<float>::Constant(3, 128, 0.5f);
    const MatrixX<float> lossGrad = MatrixX<float>::Zero(3, 4);
    nn::backwardAndUpdate(params, opt, inputs, lossGrad);
    CHECK(nn::serialize(params) == before);
    CHECK(opt.layers[0].weightM.isZero());
    CHECK(opt.layers[2].weightV.isZero());
    CHECK(opt.stepCount == 1);
}

TEST_CASE("non-finite loss gradients are rejected") {
    auto params = nn::initNetwork(4, 2);
    auto opt = nn::initOptimizer(params, 1e-3);
    const MatrixX<float> inputs = MatrixX<float>::Constant(1, 128, 0.5f);
    MatrixX<float> lossGrad = MatrixX<float>::Zero(1, 4);
    lossGrad(0, 2) = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(nn::backwardAndUpdate(params, opt, inputs, lossGrad),
                    std::invalid_argument);
}

TEST_CASE("update trajectories are bitwise deterministic") {
    const auto run = [] {
        auto params = nn::initNetwork(4, 33);
        auto opt = nn::initOptimizer(params, 1e-3);
        Rng rng(91);
        for (int step = 0; step < 50; ++step) {
            MatrixX<float> inputs(4, 128);
            MatrixX<float> lossGrad(4, 4);
            for (Eigen::Index i = 0; i < inputs.size(); ++i) {
                inputs.data()[i] = static_cast<float>(rng.uniformReal());
            }
            for (Eigen::Index i = 0; i < lossGrad.size(); ++i) {
                lossGrad.data()[i] = static_cast<float>(rng.uniformReal(-1.0, 1.0));
            }
            nn::backwardAndUpdate(params, opt, inputs, lossGrad);
        }
        return nn::serialize(params);
    };
    CHECK(run() == run());
}

TEST_CASE("copyWeights is a deep copy") {
    const auto source = nn::initNetwork(4, 8);
    auto copy = nn::copyWeights(source);
    CHECK(nn::serialize(copy) == nn::serialize(source));
    copy.layers[0].weights(0, 0) += 1.0f;
    CHECK(nn::serialize(copy) != nn::serialize(source));

    auto frozen = nn::initNetwork(4, 8);
    frozen.freezeMask = {true, true, false};
    const auto frozenCopy = nn::copyWeights(frozen);
    CHECK(frozenCopy.freezeMask == frozen.freezeMask);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    auto params = nn::initNetwork(5, 12345);
    params.freezeMask = {true, false, true};
    const auto bytes = nn::serialize(params);
    const auto restored = nn::deserialize(bytes);
    CHECK(nn::serialize(restored) == bytes);
    CHECK(restored.freezeMask == params.freezeMask);
}

TEST_CASE("checkpoint errors are distinct") {
    const auto params = nn::initNetwork(4, 77);
    const auto bytes = nn::serialize(params);

    SUBCASE("bad magic") {
        auto bad = bytes;
        bad[0] = 'X';
        try {
            nn::deserialize(bad);
            FAIL("expected CheckpointError");
        } catch (const nn::CheckpointError& e) {
            CHECK(e.kind() == nn::CheckpointError::Kind::BadMagic);
        }
    }
    SUBCASE("bad version") {
        auto bad = bytes;
        bad[4] = 9;
        try {
            nn::deserialize(bad);
            FAIL("expected CheckpointError");
        } catch (const nn::CheckpointError& e) {
            CHECK(e.kind() == nn::CheckpointError::Kind::BadVersion);
        }
    }
    SUBCASE("truncated payload") {
        auto bad = bytes;
        bad.pop_back();
        try {
            nn::deserialize(bad);
            FAIL("expected CheckpointError");
        } catch (const nn::CheckpointError& e) {
            CHECK(e.kind() == nn::CheckpointError::Kind::Truncated);
        }
    }
    SUBCASE("dim mismatch") {
        auto bad = bytes;
        bad[6] = 9;  // action count header no longer matches layer 3
        try {
            nn::deserialize(bad);
            FAIL("expected CheckpointError");
        } catch (const nn::CheckpointError& e) {
            CHECK(e.kind() == nn::CheckpointError::Kind::DimMismatch);
        }
    }
    SUBCASE("trailing bytes") {
        auto bad = bytes;
        bad.push_back(0);
        CHECK_THROWS_AS(nn::deserialize(bad), nn::CheckpointError);
    }
}

TEST_CASE("checkpoint file io round trip") {
    const auto params = nn::initNetwork(4, 4242);
    const auto dir = std::filesystem::temp_directory_path() / "duelforge_nn_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "ckpt.dfck";
    nn::saveCheckpoint(path, params);
    const auto restored = nn::loadCheckpoint(path);
    CHECK(nn::serialize(restored) == nn::serialize(params));
    std::filesystem::remove_all(dir);
}

#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>

namespace duelforge {

inline constexpr int kObsBytes = 128;

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXf = MatrixX<float>;
using MatrixXd = MatrixX<double>;

// One raw game state: exactly 128 unsigned bytes.
using ByteObservation = std::array<std::uint8_t, kObsBytes>;

// Time-ordered observation matrix, one row per step.
using RamTrace = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, kObsBytes, Eigen::RowMajor>;

// Bytes scaled to [0,1] for network input.
template <class Scalar = float>
Eigen::Matrix<Scalar, kObsBytes, 1> normalizeObservation(const ByteObservation& obs) {
    Eigen::Matrix<Scalar, kObsBytes, 1> out;
    for (int i = 0; i < kObsBytes; ++i) {
        out[i] = static_cast<Scalar>(obs[static_cast<std::size_t>(i)]) / Scalar(255);
    }
    return out;
}

}  // namespace duelforge

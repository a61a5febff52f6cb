#include "duelforge/neuralnet.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace duelforge::nn {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void putU16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void putU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void putF32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    putU32(out, bits);
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }

    bool atEnd() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) {
        if (pos_ + n > bytes_.size()) {
            throw CheckpointError(CheckpointError::Kind::Truncated,
                                  "checkpoint: truncated payload at byte " + std::to_string(pos_));
        }
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

constexpr std::uint16_t kVersion = 1;
constexpr char kMagic[4] = {'D', 'F', 'C', 'K'};

}  // namespace

std::vector<std::uint8_t> serialize(const NetworkParameters& params) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + static_cast<std::size_t>(params.parameterCount()) * 4);
    out.insert(out.end(), kMagic, kMagic + 4);
    putU16(out, kVersion);
    putU16(out, static_cast<std::uint16_t>(params.actionCount()));
    for (const auto& layer : params.layers) {
        putU32(out, static_cast<std::uint32_t>(layer.weights.rows()));
        putU32(out, static_cast<std::uint32_t>(layer.weights.cols()));
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                putF32(out, layer.weights(r, c));
            }
        }
        for (Eigen::Index i = 0; i < layer.biases.size(); ++i) putF32(out, layer.biases[i]);
    }
    for (bool frozen : params.freezeMask) out.push_back(frozen ? 1 : 0);
    return out;
}

NetworkParameters deserialize(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw CheckpointError(CheckpointError::Kind::BadMagic, "checkpoint: bad magic");
    }
    Reader reader(bytes);
    reader.u32();  // magic, already validated
    const std::uint16_t version = reader.u16();
    if (version != kVersion) {
        throw CheckpointError(CheckpointError::Kind::BadVersion,
                              "checkpoint: unsupported version " + std::to_string(version));
    }
    const int actionCount = reader.u16();

    NetworkParameters params;
    const std::array<std::pair<int, int>, kLayerCount> expected = {
        std::pair{kHidden1, kObsBytes}, {kHidden2, kHidden1}, {actionCount, kHidden2}};
    for (int l = 0; l < kLayerCount; ++l) {
        const auto rows = static_cast<int>(reader.u32());
        const auto cols = static_cast<int>(reader.u32());
        const auto [expRows, expCols] = expected[static_cast<std::size_t>(l)];
        if (rows != expRows || cols != expCols) {
            throw CheckpointError(CheckpointError::Kind::DimMismatch,
                                  "checkpoint: layer " + std::to_string(l + 1) + " is " +
                                      std::to_string(rows) + "x" + std::to_string(cols) +
                                      ", expected " + std::to_string(expRows) + "x" +
                                      std::to_string(expCols));
        }
        auto& layer = params.layers[static_cast<std::size_t>(l)];
        layer.weights.resize(rows, cols);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) layer.weights(r, c) = reader.f32();
        }
        layer.biases.resize(rows);
        for (int i = 0; i < rows; ++i) layer.biases[i] = reader.f32();
    }
    if (actionCount < 1 || actionCount > kMaxActions) {
        throw CheckpointError(CheckpointError::Kind::DimMismatch,
                              "checkpoint: action count " + std::to_string(actionCount) +
                                  " out of range");
    }
    for (int l = 0; l < kLayerCount; ++l) {
        params.freezeMask[static_cast<std::size_t>(l)] = reader.u8() != 0;
    }
    if (!reader.atEnd()) {
        throw CheckpointError(CheckpointError::Kind::DimMismatch,
                              "checkpoint: trailing bytes after freeze mask");
    }
    return params;
}

void saveCheckpoint(const std::filesystem::path& path, const NetworkParameters& params) {
    const auto bytes = serialize(params);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

NetworkParameters loadCheckpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> bytes(size);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
    if (!in) throw std::runtime_error("checkpoint read failed: " + path.string());
    return deserialize(bytes);
}

}  // namespace duelforge::nn

#pragma once

#include "duelforge/types.hpp"

#include <array>
#include <filesystem>
#include <string>

namespace duelforge::ramscope {

inline constexpr int kHeatRows = 16;
inline constexpr int kHeatCols = 8;

enum class BoundaryMode { Truncate, Reflect };

struct VariationOptions {
    int kernelSize = 11;   // odd, >= 3
    double cap = 3000.0;   // per-byte ceiling
    bool includeCenter = false;
    BoundaryMode boundary = BoundaryMode::Truncate;
};

// Capped mean squared deviation of each byte from its windowed temporal
// neighborhood, one value per RAM byte.
struct VariationProfile {
    std::array<double, kObsBytes> perByte{};
    double cap = 3000.0;
};

// For each byte b and time t, m_t is the mean of the kernel window around
// t (center excluded by default, truncated at the trace edges) and
// d_t = (x_t - m_t)^2; perByte[b] = min(mean_t d_t, cap). 64-bit
// throughout.
VariationProfile temporalVariation(const RamTrace& trace, const VariationOptions& options = {});

// Mean of the 128 per-byte values.
double ramComplexity(const VariationProfile& profile);

// Writes <base>.heat.csv (16x8 raw values) and <base>.pgm (P2 graymap,
// maxval 255, brighter = more variation). Byte k lands at row k/8,
// column k%8.
void renderHeatmap(const VariationProfile& profile, const std::filesystem::path& baseName);

// Pixel intensity for one profile value; exposed for golden-file tests.
int heatIntensity(double value, double cap);

}  // namespace duelforge::ramscope

#include "duelforge/ramscope.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace duelforge::ramscope {

namespace {

// Neighbor index folded back into [0, T-1] by mirroring about the ends.
long reflectIndex(long i, long t) {
    while (i < 0 || i >= t) {
        if (i < 0) i = -i;
        if (i >= t) i = 2 * (t - 1) - i;
    }
    return i;
}

}  // namespace

VariationProfile temporalVariation(const RamTrace& trace, const VariationOptions& options) {
    const long rows = trace.rows();
    if (rows < 2) throw std::invalid_argument("temporalVariation: trace needs at least 2 rows");
    if (options.kernelSize < 3 || options.kernelSize % 2 == 0) {
        throw std::invalid_argument("temporalVariation: kernel size must be odd and >= 3");
    }
    const long half = options.kernelSize / 2;

    VariationProfile profile;
    profile.cap = options.cap;

    std::vector<std::int64_t> prefix(static_cast<std::size_t>(rows) + 1);
    for (int b = 0; b < kObsBytes; ++b) {
        double total = 0.0;
        if (options.boundary == BoundaryMode::Truncate) {
            // Byte values are integers, so prefix sums are exact and the
            // window mean carries no accumulation error.
            prefix[0] = 0;
            for (long t = 0; t < rows; ++t) {
                prefix[static_cast<std::size_t>(t) + 1] =
                    prefix[static_cast<std::size_t>(t)] + trace(t, b);
            }
            for (long t = 0; t < rows; ++t) {
                const long lo = std::max<long>(0, t - half);
                const long hi = std::min<long>(rows - 1, t + half);
                std::int64_t sum = prefix[static_cast<std::size_t>(hi) + 1] -
                                   prefix[static_cast<std::size_t>(lo)];
                long count = hi - lo + 1;
                if (!options.includeCenter) {
                    sum -= trace(t, b);
                    count -= 1;
                }
                const double mean = static_cast<double>(sum) / static_cast<double>(count);
                const double d = static_cast<double>(trace(t, b)) - mean;
                total += d * d;
            }
        } else {
            for (long t = 0; t < rows; ++t) {
                std::int64_t sum = 0;
                long count = 0;
                for (long k = -half; k <= half; ++k) {
                    if (k == 0 && !options.includeCenter) continue;
                    sum += trace(reflectIndex(t + k, rows), b);
                    ++count;
                }
                const double mean = static_cast<double>(sum) / static_cast<double>(count);
                const double d = static_cast<double>(trace(t, b)) - mean;
                total += d * d;
            }
        }
        profile.perByte[static_cast<std::size_t>(b)] =
            std::min(total / static_cast<double>(rows), options.cap);
    }
    return profile;
}

double ramComplexity(const VariationProfile& profile) {
    double sum = 0.0;
    for (double v : profile.perByte) sum += v;
    return sum / static_cast<double>(kObsBytes);
}

int heatIntensity(double value, double cap) {
    const double scaled = cap > 0.0 ? 255.0 * value / cap : 0.0;
    return static_cast<int>(std::clamp(std::lround(scaled), 0l, 255l));
}

void renderHeatmap(const VariationProfile& profile, const std::filesystem::path& baseName) {
    const std::filesystem::path csvPath = baseName.string() + ".heat.csv";
    const std::filesystem::path pgmPath = baseName.string() + ".pgm";

    std::ofstream csv(csvPath, std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + csvPath.string());
    char buf[64];
    for (int r = 0; r < kHeatRows; ++r) {
        for (int c = 0; c < kHeatCols; ++c) {
            std::snprintf(buf, sizeof(buf), "%.10g",
                          profile.perByte[static_cast<std::size_t>(r * kHeatCols + c)]);
            csv << buf << (c + 1 < kHeatCols ? "," : "\n");
        }
    }
    if (!csv.flush()) throw std::runtime_error("write failed: " + csvPath.string());

    std::ofstream pgm(pgmPath, std::ios::trunc);
    if (!pgm) throw std::runtime_error("cannot write " + pgmPath.string());
    pgm << "P2\n" << kHeatCols << " " << kHeatRows << "\n255\n";
    for (int r = 0; r < kHeatRows; ++r) {
        for (int c = 0; c < kHeatCols; ++c) {
            const double v = profile.perByte[static_cast<std::size_t>(r * kHeatCols + c)];
            pgm << heatIntensity(v, profile.cap) << (c + 1 < kHeatCols ? " " : "\n");
        }
    }
    if (!pgm.flush()) throw std::runtime_error("write failed: " + pgmPath.string());
}

}  // namespace duelforge::ramscope

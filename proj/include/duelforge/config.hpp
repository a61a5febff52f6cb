#pragma once

#include "duelforge/metrics.hpp"
#include "duelforge/ramscope.hpp"
#include "duelforge/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>

namespace duelforge::cli {

// Every knob a command can consume, with defaults matching the two-player
// hyperparameter column where one exists. The echoed form of this struct
// is sufficient to reproduce a run.
struct AppConfig {
    train::ExperimentConfig experiment;
    std::string variant = "scratch";  // scratch | transferred | both

    ramscope::VariationOptions variation;
    long rolloutSteps = 50'000;
    std::uint64_t rolloutSeed = 0;

    metrics::ReportOptions report;

    std::string out;
    std::string from;
    std::string logs;
    std::string profiles;

    // "section.key" names that were set explicitly (file or flag), for
    // required-argument checks. Not part of the echoed form.
    std::set<std::string> specified;

    void markSpecified(const std::string& dottedKey) { specified.insert(dottedKey); }
    bool has(const std::string& dottedKey) const { return specified.count(dottedKey) > 0; }
};

// Applies `key = value` lines grouped in [sections] on top of `config`.
// Unknown sections or keys are rejected.
void applyConfigText(AppConfig& config, const std::string& text, const std::string& sourceName);

void applyConfigFile(AppConfig& config, const std::filesystem::path& path);

// Canonical fully-resolved form; parsing it back yields the same config.
std::string renderConfig(const AppConfig& config);

void writeConfigEcho(const std::filesystem::path& outDir, const AppConfig& config);

std::uint64_t configHash(const AppConfig& config);

}  // namespace duelforge::cli

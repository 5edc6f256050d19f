#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mixf/experiment.h"

namespace mixf {

/// Keyword-vs-distractor binary task: every sentence is filler words plus
/// one cue word; class 1 cues come from a keyword list, class 0 cues from a
/// look-alike distractor list. Label noise flips training labels only.
struct SyntheticOptions {
    std::size_t train_size = 2000;
    std::size_t dev_size = 500;
    double label_noise = 0.1;
    std::uint64_t seed = 7;
    std::size_t min_words = 5;
    std::size_t max_words = 12;
};

struct SyntheticRow {
    std::string text;
    int label = 0;
};

struct SyntheticData {
    std::vector<SyntheticRow> train;
    std::vector<SyntheticRow> dev;
};

SyntheticData generate_synthetic(const SyntheticOptions& options);

/// Desk-scale run configuration for the synthetic task, with train/dev
/// paths relative to the directory the config is written to.
Json synthetic_config_json();

/// Writes train.tsv, dev.tsv and config.json into dir.
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace mixf

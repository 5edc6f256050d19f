#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mixf/data.h"
#include "mixf/model.h"
#include "mixf/trainer.h"

namespace mixf {

using Json = nlohmann::ordered_json;

struct VocabConfig {
    std::size_t min_count = 1;
    std::size_t max_size = 30000;
};

struct PathsConfig {
    std::filesystem::path train;
    std::filesystem::path dev;
    std::filesystem::path out = "out";
};

/// Everything needed to reproduce one training run.
///
/// JSON layout (every section and key optional, defaults as below):
///   seed, fraction,
///   model{d_model, n_heads, n_layers, d_ff, max_len, dropout},
///   train{epochs, batch_size, learning_rate, beta1, beta2, adam_eps,
///         weight_decay, grad_clip_norm (null disables)},
///   mixup{enabled, lambda{policy: fixed|beta, value|alpha},
///         schedule: "always" | "last_half" | [1-based epochs]},
///   task{name, input_arity: single|pair, label: classes|regression,
///        n_classes, label_min, label_max, metric,
///        sentence1_column, sentence2_column, label_column},
///   vocab{min_count, max_size},
///   paths{train, dev, out}
struct RunConfig {
    ModelConfig model;  // vocab_size, head and n_classes come from vocab and task
    TrainConfig train;
    TaskSpec task;
    VocabConfig vocab;
    PathsConfig paths;
    std::uint64_t seed = 0;
    double fraction = 1.0;

    void validate() const;
};

/// Relative paths are resolved against base_dir. Unknown keys are rejected.
RunConfig run_config_from_json(const Json& doc, const std::filesystem::path& base_dir = {});
Json to_json(const RunConfig& config);

/// Applies "section.key=value" to a JSON document. The value is parsed as
/// JSON when possible and kept as a string otherwise.
void apply_override(Json& doc, std::string_view assignment);

/// Reads a config file and applies overrides in order.
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const RunConfig& config);

struct PreparedData {
    Vocabulary vocab;
    Dataset train;
    Dataset dev;
};

/// Builds the vocabulary from the full training file and encodes both splits.
PreparedData prepare_data(const RunConfig& config);

/// Model hyper-parameters with vocabulary size and head filled in.
ModelConfig resolved_model_config(const RunConfig& config, const Vocabulary& vocab);

enum class Arm { baseline, mixup };
std::string to_string(Arm arm);

struct RunReport {
    std::string run_id;
    std::string task;
    double fraction = 1.0;
    bool mixup_enabled = false;
    std::uint64_t seed = 0;
    Json config;
    std::string config_hash;
    std::size_t train_size = 0;
    std::string train_subset_hash;  // fingerprint of the reduced example indices
    std::size_t dev_size = 0;
    std::vector<EpochReport> epochs;
    double final_metric = 0.0;
    double best_metric = 0.0;
    std::string metric_name;
};

Json to_json(const RunReport& report);
Json to_json(const EpochReport& report);

struct RunOutcome {
    RunReport report;
    Parameters params;
};

/// Reduces the training split by config.fraction (seeded by config.seed)
/// and trains.
RunOutcome execute_run(const RunConfig& config, const PreparedData& data, const std::string& run_id);

/// Fingerprint of a list of example indices.
std::string indices_hash(const std::vector<std::size_t>& indices);

/// 0.1, 0.2, ..., 1.0.
std::vector<double> default_fractions();

struct SweepOptions {
    std::vector<double> fractions = default_fractions();
    std::vector<Arm> arms{Arm::baseline, Arm::mixup};
    std::vector<std::uint64_t> seeds{0};
    std::size_t jobs = 1;
    bool write_run_reports = true;
};

struct SweepCell {
    double fraction = 1.0;
    Arm arm = Arm::baseline;
    std::uint64_t seed = 0;
    std::string status = "ok";  // "ok" or "error"
    std::string error;
    double metric = 0.0;
    std::optional<RunReport> report;
};

struct FractionDelta {
    double fraction = 1.0;
    double baseline_mean = 0.0;
    double mixup_mean = 0.0;
    double delta = 0.0;  // mixup - baseline
};

struct SweepResult {
    std::string task;
    std::vector<SweepCell> cells;  // ordered by fraction, arm, seed
    std::vector<FractionDelta> deltas;
};

/// Runs every (fraction, arm, seed) cell; failed cells are recorded with
/// status "error". Reports go to out_dir/runs/<run_id>/run.json.
SweepResult run_sweep(const RunConfig& base, const PreparedData& data, const SweepOptions& options,
                      const std::filesystem::path& out_dir);

/// Header: task,fraction,arm,seed,metric,status. Delta rows use arm
/// "delta" and seed "mean".
void write_sweep_csv(const SweepResult& result, const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_double(double value);

void write_json(const Json& doc, const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);

}  // namespace mixf

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mixf/model.h"

namespace mixf {

enum class InputArity { single, pair };
enum class MetricKind { accuracy, matthews, spearman };

std::string to_string(MetricKind metric);
MetricKind parse_metric(std::string_view name);

/// Task description and the TSV columns it reads (0-based).
struct TaskSpec {
    std::string name = "task";
    InputArity input_arity = InputArity::single;
    HeadKind label_kind = HeadKind::classification;
    std::size_t n_classes = 2;
    double label_min = 0.0;  // regression range
    double label_max = 1.0;
    MetricKind metric = MetricKind::accuracy;
    std::size_t sentence1_column = 0;
    std::optional<std::size_t> sentence2_column;
    std::size_t label_column = 1;

    void validate() const;
    bool is_classification() const { return label_kind == HeadKind::classification; }
};

/// Lowercases, splits on whitespace and strips ASCII punctuation from
/// both ends of each token; tokens that become empty are dropped.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr std::size_t kReserved = 4;

    /// Only the reserved tokens.
    Vocabulary();
    /// Reserved tokens followed by tokens in id order.
    explicit Vocabulary(const std::vector<std::string>& tokens);

    int id(std::string_view token) const;
    const std::string& token(int id) const;
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    /// One token per line, id order.
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

/// Keeps tokens seen at least min_count times, most frequent first with
/// lexicographic tie-break. max_size bounds the total size including the
/// four reserved ids; 0 means unbounded.
Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_count,
                       std::size_t max_size);

struct Example {
    std::vector<int> token_ids;
    std::vector<int> mask;
    double label = 0.0;  // class index or regression target
};

enum class Split { train, dev };

struct Dataset {
    TaskSpec task;
    Split split = Split::train;
    std::size_t max_len = 0;
    std::vector<Example> examples;

    std::size_t size() const { return examples.size(); }
};

/// [CLS] s1 [SEP] (s2 [SEP]) truncated to max_len, longer segment trimmed
/// from its end first, then PAD-filled.
Example encode_example(const Vocabulary& vocab, const TaskSpec& task, std::string_view sentence1,
                       std::optional<std::string_view> sentence2, double label, std::size_t max_len);

/// Raw row of a task TSV file.
struct TsvRow {
    std::size_t line = 0;  // 1-based line in the file
    std::string sentence1;
    std::optional<std::string> sentence2;
    double label = 0.0;
};

/// Parses a task TSV (header row, tab-separated, CRLF tolerated). All
/// malformed rows are reported together, each with its line number.
std::vector<TsvRow> read_tsv(const std::filesystem::path& path, const TaskSpec& task);

/// Sentences of every row, for vocabulary construction.
std::vector<std::string> corpus_of(const std::vector<TsvRow>& rows);

Dataset encode_rows(const std::vector<TsvRow>& rows, const TaskSpec& task, const Vocabulary& vocab,
                    std::size_t max_len, Split split);

Dataset load_tsv(const std::filesystem::path& path, const TaskSpec& task, const Vocabulary& vocab,
                 std::size_t max_len, Split split = Split::train);

/// Indices (ascending) of the subset reduce_dataset keeps.
std::vector<std::size_t> reduction_indices(const Dataset& ds, double fraction, std::uint64_t seed);

/// Seeded subset: stratified per class for classification, uniform for
/// regression. Keeps the original order; fraction 1 returns ds unchanged.
Dataset reduce_dataset(const Dataset& ds, double fraction, std::uint64_t seed);

/// Splits ds into batches, optionally after a seeded shuffle. Class labels
/// are expanded to one-hot target rows here.
std::vector<EncodedBatch> batches(const Dataset& ds, std::size_t batch_size,
                                  std::optional<std::uint64_t> shuffle_seed = std::nullopt,
                                  bool drop_last = false);

/// Builds a single batch from the given example indices.
EncodedBatch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices);

/// Shuffle seed for an epoch of a run.
std::uint64_t epoch_shuffle_seed(std::uint64_t run_seed, int epoch);

}  // namespace mixf

#include "mixf/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "mixf/errors.h"
#include "mixf/rng.h"

namespace mixf {

namespace {

const char* const kReservedTokens[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};

// Decodes one UTF-8 code point at text[pos]; returns its byte length.
// Invalid sequences are treated as a single opaque byte.
std::size_t decode_utf8(std::string_view text, std::size_t pos, char32_t& cp) {
    const auto b0 = static_cast<unsigned char>(text[pos]);
    auto cont = [&](std::size_t i) -> int {
        if (pos + i >= text.size()) return -1;
        const auto b = static_cast<unsigned char>(text[pos + i]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        cp = b0;
        return 1;
    }
    std::size_t len = (b0 & 0xE0) == 0xC0 ? 2 : (b0 & 0xF0) == 0xE0 ? 3 : (b0 & 0xF8) == 0xF0 ? 4 : 0;
    if (len == 0) {
        cp = 0xFFFD;
        return 1;
    }
    char32_t value = b0 & (0x7F >> len);
    for (std::size_t i = 1; i < len; ++i) {
        int c = cont(i);
        if (c < 0) {
            cp = 0xFFFD;
            return 1;
        }
        value = (value << 6) | static_cast<char32_t>(c);
    }
    cp = value;
    return len;
}

bool is_unicode_space(char32_t cp) {
    return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
           (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F ||
           cp == 0x205F || cp == 0x3000;
}

bool is_ascii_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::ispunct(u);
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

std::string_view trim_ascii(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

void check_label(const TaskSpec& task, double label) {
    if (task.is_classification()) {
        if (label != std::floor(label) || label < 0.0 || label >= static_cast<double>(task.n_classes)) {
            std::ostringstream os;
            os << "class label " << label << " outside [0, " << task.n_classes << ")";
            throw ValidationError(os.str());
        }
    } else if (!(label >= task.label_min && label <= task.label_max)) {
        std::ostringstream os;
        os << "regression label " << label << " outside [" << task.label_min << ", " << task.label_max << "]";
        throw ValidationError(os.str());
    }
}

}  // namespace

std::string to_string(MetricKind metric) {
    switch (metric) {
        case MetricKind::accuracy: return "accuracy";
        case MetricKind::matthews: return "matthews";
        case MetricKind::spearman: return "spearman";
    }
    return "unknown";
}

MetricKind parse_metric(std::string_view name) {
    if (name == "accuracy") return MetricKind::accuracy;
    if (name == "matthews") return MetricKind::matthews;
    if (name == "spearman") return MetricKind::spearman;
    throw ValidationError("unknown metric '" + std::string(name) + "'");
}

void TaskSpec::validate() const {
    auto fail = [&](const std::string& msg) { throw ValidationError("task '" + name + "': " + msg); };
    if (is_classification()) {
        if (n_classes < 2) fail("classification needs at least 2 classes");
        if (metric == MetricKind::spearman) fail("spearman requires a regression task");
        if (metric == MetricKind::matthews && n_classes != 2) fail("matthews requires exactly 2 classes");
    } else {
        if (metric != MetricKind::spearman) fail("regression tasks are scored with spearman");
        if (!(label_min <= label_max)) fail("regression range is empty");
    }
    if ((input_arity == InputArity::pair) != sentence2_column.has_value()) {
        fail("sentence2 column must be given exactly for pair tasks");
    }
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        std::string_view t = current;
        while (!t.empty() && is_ascii_punct(t.front())) t.remove_prefix(1);
        while (!t.empty() && is_ascii_punct(t.back())) t.remove_suffix(1);
        if (!t.empty()) tokens.emplace_back(t);
        current.clear();
    };
    std::size_t pos = 0;
    while (pos < text.size()) {
        char32_t cp = 0;
        const std::size_t len = decode_utf8(text, pos, cp);
        if (is_unicode_space(cp)) {
            flush();
        } else if (len == 1 && cp < 0x80) {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(cp))));
        } else {
            current.append(text.substr(pos, len));
        }
        pos += len;
    }
    flush();
    return tokens;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
    for (const char* r : kReservedTokens) {
        ids_.emplace(r, static_cast<int>(tokens_.size()));
        tokens_.emplace_back(r);
    }
    for (const auto& t : tokens) {
        if (!ids_.emplace(t, static_cast<int>(tokens_.size())).second) {
            throw ValidationError("vocabulary: duplicate token '" + t + "'");
        }
        tokens_.push_back(t);
    }
}

int Vocabulary::id(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw ValidationError("vocabulary: id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open vocabulary file '" + path.string() + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    if (lines.size() < kReserved) throw ValidationError("vocabulary file '" + path.string() + "' is truncated");
    for (std::size_t i = 0; i < kReserved; ++i) {
        if (lines[i] != kReservedTokens[i]) {
            throw ValidationError("vocabulary file '" + path.string() + "': line " + std::to_string(i + 1) +
                                  " should be " + kReservedTokens[i]);
        }
    }
    return Vocabulary(std::vector<std::string>(lines.begin() + kReserved, lines.end()));
}

Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_count, std::size_t max_size) {
    if (corpus.empty()) throw ValidationError("build_vocab: empty corpus");
    if (max_size != 0 && max_size < Vocabulary::kReserved) {
        throw ValidationError("build_vocab: max_size must leave room for the 4 reserved tokens");
    }
    std::map<std::string, std::size_t> counts;
    for (const auto& sentence : corpus)
        for (auto& t : tokenize(sentence)) ++counts[std::move(t)];

    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [token, n] : counts) {
        bool reserved = std::find(std::begin(kReservedTokens), std::end(kReservedTokens), token) !=
                        std::end(kReservedTokens);
        if (n >= min_count && !reserved) kept.emplace_back(token, n);
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (max_size != 0 && kept.size() > max_size - Vocabulary::kReserved) {
        kept.resize(max_size - Vocabulary::kReserved);
    }
    std::vector<std::string> tokens;
    tokens.reserve(kept.size());
    for (auto& [token, n] : kept) tokens.push_back(std::move(token));
    return Vocabulary(tokens);
}

Example encode_example(const Vocabulary& vocab, const TaskSpec& task, std::string_view sentence1,
                       std::optional<std::string_view> sentence2, double label, std::size_t max_len) {
    const bool pair = task.input_arity == InputArity::pair;
    if (pair != sentence2.has_value()) {
        throw ValidationError(pair ? "pair task requires a second sentence"
                                   : "single-sentence task given a second sentence");
    }
    const std::size_t specials = pair ? 3 : 2;
    if (max_len < specials) {
        throw ValidationError("max_len " + std::to_string(max_len) + " cannot hold the special tokens");
    }
    check_label(task, label);

    auto ids_of = [&](std::string_view text) {
        std::vector<int> ids;
        for (const auto& t : tokenize(text)) ids.push_back(vocab.id(t));
        return ids;
    };
    std::vector<int> first = ids_of(sentence1);
    std::vector<int> second = pair ? ids_of(*sentence2) : std::vector<int>{};

    const std::size_t budget = max_len - specials;
    bool trim_first_on_tie = true;
    while (first.size() + second.size() > budget) {
        if (first.size() > second.size()) {
            first.pop_back();
        } else if (second.size() > first.size()) {
            second.pop_back();
        } else {
            (trim_first_on_tie ? first : second).pop_back();
            trim_first_on_tie = !trim_first_on_tie;
        }
    }

    Example ex;
    ex.label = label;
    ex.token_ids.reserve(max_len);
    ex.token_ids.push_back(Vocabulary::kCls);
    ex.token_ids.insert(ex.token_ids.end(), first.begin(), first.end());
    ex.token_ids.push_back(Vocabulary::kSep);
    if (pair) {
        ex.token_ids.insert(ex.token_ids.end(), second.begin(), second.end());
        ex.token_ids.push_back(Vocabulary::kSep);
    }
    ex.mask.assign(ex.token_ids.size(), 1);
    ex.token_ids.resize(max_len, Vocabulary::kPad);
    ex.mask.resize(max_len, 0);
    return ex;
}

std::vector<TsvRow> read_tsv(const std::filesystem::path& path, const TaskSpec& task) {
    task.validate();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open TSV file '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw ValidationError("'" + path.string() + "' is empty (no header row)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t n_fields = split_tabs(line).size();

    std::vector<std::string> errors;
    auto column_check = [&](std::size_t col, const char* what) {
        if (col >= n_fields) {
            errors.push_back("header: " + std::string(what) + " column " + std::to_string(col) +
                             " missing (header has " + std::to_string(n_fields) + " columns)");
        }
    };
    column_check(task.sentence1_column, "sentence1");
    if (task.sentence2_column) column_check(*task.sentence2_column, "sentence2");
    column_check(task.label_column, "label");
    if (!errors.empty()) throw ValidationError("'" + path.string() + "' " + errors.front());

    std::vector<TsvRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        const std::string at = "line " + std::to_string(line_no) + ": ";
        if (fields.size() != n_fields) {
            errors.push_back(at + "expected " + std::to_string(n_fields) + " fields, found " +
                             std::to_string(fields.size()));
            continue;
        }
        TsvRow row;
        row.line = line_no;
        row.sentence1 = std::string(fields[task.sentence1_column]);
        if (task.sentence2_column) row.sentence2 = std::string(fields[*task.sentence2_column]);

        std::string_view raw = trim_ascii(fields[task.label_column]);
        const char* first = raw.data();
        const char* last = raw.data() + raw.size();
        bool parsed = false;
        if (task.is_classification()) {
            long long v = 0;
            auto [ptr, ec] = std::from_chars(first, last, v);
            parsed = ec == std::errc() && ptr == last && !raw.empty();
            row.label = static_cast<double>(v);
        } else {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(first, last, v);
            parsed = ec == std::errc() && ptr == last && !raw.empty() && std::isfinite(v);
            row.label = v;
        }
        if (!parsed) {
            errors.push_back(at + "unparseable label '" + std::string(raw) + "'");
            continue;
        }
        try {
            check_label(task, row.label);
        } catch (const ValidationError& e) {
            errors.push_back(at + e.what());
            continue;
        }
        rows.push_back(std::move(row));
    }

    if (!errors.empty()) {
        std::ostringstream os;
        os << "'" << path.string() << "' has " << errors.size() << " malformed row(s):";
        const std::size_t shown = std::min<std::size_t>(errors.size(), 20);
        for (std::size_t i = 0; i < shown; ++i) os << "\n  " << errors[i];
        if (shown < errors.size()) os << "\n  ...";
        throw ValidationError(os.str());
    }
    if (rows.empty()) throw ValidationError("'" + path.string() + "' has no data rows");
    return rows;
}

std::vector<std::string> corpus_of(const std::vector<TsvRow>& rows) {
    std::vector<std::string> corpus;
    for (const auto& r : rows) {
        corpus.push_back(r.sentence1);
        if (r.sentence2) corpus.push_back(*r.sentence2);
    }
    return corpus;
}

Dataset encode_rows(const std::vector<TsvRow>& rows, const TaskSpec& task, const Vocabulary& vocab,
                    std::size_t max_len, Split split) {
    Dataset ds{task, split, max_len, {}};
    ds.examples.reserve(rows.size());
    for (const auto& r : rows) {
        std::optional<std::string_view> s2;
        if (r.sentence2) s2 = *r.sentence2;
        try {
            ds.examples.push_back(encode_example(vocab, task, r.sentence1, s2, r.label, max_len));
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(r.line) + ": " + e.what());
        }
    }
    return ds;
}

Dataset load_tsv(const std::filesystem::path& path, const TaskSpec& task, const Vocabulary& vocab,
                 std::size_t max_len, Split split) {
    return encode_rows(read_tsv(path, task), task, vocab, max_len, split);
}

std::vector<std::size_t> reduction_indices(const Dataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ValidationError("reduce_dataset: fraction must be in (0, 1], got " + std::to_string(fraction));
    }
    std::vector<std::size_t> keep;
    if (fraction == 1.0) {
        keep.resize(ds.size());
        std::iota(keep.begin(), keep.end(), std::size_t{0});
        return keep;
    }
    Rng rng(seed);
    auto take = [&](std::vector<std::size_t> pool) {
        if (pool.empty()) return;
        auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size())));
        k = std::clamp<std::size_t>(k, 1, pool.size());
        rng.shuffle(std::span<std::size_t>(pool));
        keep.insert(keep.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    };
    if (ds.task.is_classification()) {
        std::vector<std::vector<std::size_t>> by_class(ds.task.n_classes);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            by_class[static_cast<std::size_t>(ds.examples[i].label)].push_back(i);
        }
        for (auto& pool : by_class) take(std::move(pool));
    } else {
        std::vector<std::size_t> all(ds.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        take(std::move(all));
    }
    std::sort(keep.begin(), keep.end());
    return keep;
}

Dataset reduce_dataset(const Dataset& ds, double fraction, std::uint64_t seed) {
    if (ds.split != Split::train) throw ValidationError("reduce_dataset: only training splits are reduced");
    Dataset out{ds.task, ds.split, ds.max_len, {}};
    for (std::size_t i : reduction_indices(ds, fraction, seed)) out.examples.push_back(ds.examples[i]);
    return out;
}

EncodedBatch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices) {
    EncodedBatch batch;
    batch.batch_size = indices.size();
    batch.seq_len = ds.max_len;
    const bool classification = ds.task.is_classification();
    const std::size_t width = classification ? ds.task.n_classes : 1;
    batch.targets = Tensor::matrix(indices.size(), width);
    batch.token_ids.reserve(indices.size() * ds.max_len);
    batch.attention_mask.reserve(indices.size() * ds.max_len);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const Example& ex = ds.examples[indices[r]];
        batch.token_ids.insert(batch.token_ids.end(), ex.token_ids.begin(), ex.token_ids.end());
        batch.attention_mask.insert(batch.attention_mask.end(), ex.mask.begin(), ex.mask.end());
        if (classification) {
            const int cls = static_cast<int>(ex.label);
            batch.class_labels.push_back(cls);
            batch.targets.at(r, static_cast<std::size_t>(cls)) = 1.0;
        } else {
            batch.targets.at(r, 0) = ex.label;
        }
    }
    return batch;
}

std::vector<EncodedBatch> batches(const Dataset& ds, std::size_t batch_size,
                                  std::optional<std::uint64_t> shuffle_seed, bool drop_last) {
    if (batch_size == 0) throw ValidationError("batches: batch_size must be at least 1");
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle_seed) {
        Rng rng(*shuffle_seed);
        rng.shuffle(std::span<std::size_t>(order));
    }
    std::vector<EncodedBatch> out;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        if (drop_last && end - start < batch_size) break;
        out.push_back(make_batch(ds, std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                              order.begin() + static_cast<std::ptrdiff_t>(end))));
    }
    return out;
}

std::uint64_t epoch_shuffle_seed(std::uint64_t run_seed, int epoch) {
    return mix_seed(run_seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch));
}

}  // namespace mixf

#include "mixf/synthetic.h"

#include <fstream>
#include <numeric>

#include "mixf/errors.h"
#include "mixf/rng.h"

namespace mixf {

namespace {

const std::vector<std::string> kFiller = {
    "the",    "a",      "movie",  "story",   "plot",   "actor",  "scene",   "film",    "was",    "is",
    "quite",  "very",   "really", "rather",  "music",  "ending", "script",  "cast",    "and",    "but",
    "with",   "about",  "of",     "this",    "that",   "some",   "long",    "short",   "old",    "new",
    "camera", "light",  "city",   "night",   "house",  "friend", "family",  "time",    "day",    "road"};
const std::vector<std::string> kKeywords = {"brilliant", "superb", "wonderful", "delightful"};
const std::vector<std::string> kDistractors = {"brillant", "superfluous", "wondering", "delayed"};

std::vector<SyntheticRow> make_rows(Rng& rng, Rng& noise_rng, std::size_t n, double noise,
                                    const SyntheticOptions& opt) {
    std::vector<SyntheticRow> rows(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
    rng.shuffle(std::span<int>(labels));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t len = opt.min_words + rng.uniform_index(opt.max_words - opt.min_words + 1);
        const std::size_t cue_pos = rng.uniform_index(len);
        const auto& cues = labels[i] == 1 ? kKeywords : kDistractors;
        std::string text;
        for (std::size_t w = 0; w < len; ++w) {
            if (w) text += ' ';
            text += w == cue_pos ? cues[rng.uniform_index(cues.size())] : kFiller[rng.uniform_index(kFiller.size())];
        }
        int label = labels[i];
        if (noise > 0.0 && noise_rng.uniform() < noise) label = 1 - label;
        rows[i] = {std::move(text), label};
    }
    return rows;
}

void write_tsv(const std::vector<SyntheticRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << "sentence\tlabel\n";
    for (const auto& r : rows) out << r.text << '\t' << r.label << '\n';
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticOptions& options) {
    if (options.train_size == 0 || options.dev_size == 0) throw ValidationError("synthetic: sizes must be positive");
    if (options.min_words == 0 || options.max_words < options.min_words) {
        throw ValidationError("synthetic: need 1 <= min_words <= max_words");
    }
    if (!(options.label_noise >= 0.0 && options.label_noise < 0.5)) {
        throw ValidationError("synthetic: label_noise must be in [0, 0.5)");
    }
    Rng train_rng(mix_seed(options.seed, 1));
    Rng dev_rng(mix_seed(options.seed, 2));
    Rng noise_rng(mix_seed(options.seed, 3));
    return {make_rows(train_rng, noise_rng, options.train_size, options.label_noise, options),
            make_rows(dev_rng, noise_rng, options.dev_size, 0.0, options)};
}

Json synthetic_config_json() {
    return Json{{"seed", 1},
                {"model", {{"d_model", 16}, {"n_heads", 2}, {"n_layers", 1}, {"d_ff", 32}, {"max_len", 16},
                           {"dropout", 0.1}}},
                {"train", {{"epochs", 3}, {"batch_size", 8}, {"learning_rate", 2e-3}, {"weight_decay", 0.01},
                           {"grad_clip_norm", 1.0}}},
                {"mixup", {{"enabled", true}, {"lambda", {{"policy", "fixed"}, {"value", 0.5}}},
                           {"schedule", "last_half"}}},
                {"task", {{"name", "synthetic"}, {"input_arity", "single"}, {"label", "classes"}, {"n_classes", 2},
                          {"metric", "accuracy"}, {"sentence1_column", 0}, {"label_column", 1}}},
                {"vocab", {{"min_count", 1}, {"max_size", 30000}}},
                {"paths", {{"train", "train.tsv"}, {"dev", "dev.tsv"}, {"out", "out"}}}};
}

void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_tsv(data.train, dir / "train.tsv");
    write_tsv(data.dev, dir / "dev.tsv");
    write_json(synthetic_config_json(), dir / "config.json");
}

}  // namespace mixf

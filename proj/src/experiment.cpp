#include "mixf/experiment.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "mixf/errors.h"
#include "mixf/rng.h"

namespace mixf {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kReductionStream = 0xfacU;

[[noreturn]] void config_error(std::string_view where, const std::string& msg) {
    throw ValidationError("config: " + std::string(where) + ": " + msg);
}

void check_keys(const Json& obj, std::initializer_list<std::string_view> allowed, std::string_view section) {
    if (!obj.is_object()) config_error(section, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            config_error(section, "unknown key '" + key + "'");
        }
    }
}

template <typename T>
void read(const Json& obj, const char* key, T& out, std::string_view section) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    const std::string where = std::string(section) + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) config_error(where, "expected true/false");
        out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) config_error(where, "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
            if (v.is_number_unsigned()) {
                out = v.get<T>();
            } else if (v.get<long long>() < 0) {
                config_error(where, "must not be negative");
            } else {
                out = static_cast<T>(v.get<long long>());
            }
        } else {
            out = v.get<T>();
        }
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) config_error(where, "expected a number");
        out = v.get<T>();
    } else {
        if (!v.is_string()) config_error(where, "expected a string");
        out = v.get<std::string>();
    }
}

fs::path resolve(const fs::path& base_dir, const std::string& p) {
    fs::path path(p);
    if (path.empty() || path.is_absolute() || base_dir.empty()) return path;
    return base_dir / path;
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

Json lambda_json(const LambdaPolicy& policy) {
    if (const auto* f = std::get_if<FixedLambda>(&policy)) return Json{{"policy", "fixed"}, {"value", f->value}};
    return Json{{"policy", "beta"}, {"alpha", std::get<BetaLambda>(policy).alpha}};
}

Json schedule_json(const MixupSchedule& schedule) {
    if (std::holds_alternative<AlwaysActive>(schedule)) return "always";
    if (std::holds_alternative<LastHalf>(schedule)) return "last_half";
    return std::get<EpochSet>(schedule).epochs;
}

}  // namespace

void RunConfig::validate() const {
    task.validate();
    train.validate();
    if (!(fraction > 0.0 && fraction <= 1.0)) config_error("fraction", "must be in (0, 1]");
    if (vocab.max_size != 0 && vocab.max_size < Vocabulary::kReserved) {
        config_error("vocab.max_size", "must be at least 4 (or 0 for unbounded)");
    }
    if (vocab.min_count == 0) config_error("vocab.min_count", "must be at least 1");
}

RunConfig run_config_from_json(const Json& doc, const fs::path& base_dir) {
    check_keys(doc, {"seed", "fraction", "model", "train", "mixup", "task", "vocab", "paths"}, "root");
    RunConfig cfg;
    read(doc, "seed", cfg.seed, "root");
    read(doc, "fraction", cfg.fraction, "root");

    if (doc.contains("model")) {
        const Json& m = doc.at("model");
        check_keys(m, {"d_model", "n_heads", "n_layers", "d_ff", "max_len", "dropout"}, "model");
        read(m, "d_model", cfg.model.d_model, "model");
        read(m, "n_heads", cfg.model.n_heads, "model");
        read(m, "n_layers", cfg.model.n_layers, "model");
        read(m, "d_ff", cfg.model.d_ff, "model");
        read(m, "max_len", cfg.model.max_len, "model");
        read(m, "dropout", cfg.model.dropout_rate, "model");
    }
    if (doc.contains("train")) {
        const Json& t = doc.at("train");
        check_keys(t, {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "adam_eps", "weight_decay",
                       "grad_clip_norm"},
                   "train");
        read(t, "epochs", cfg.train.epochs, "train");
        read(t, "batch_size", cfg.train.batch_size, "train");
        read(t, "learning_rate", cfg.train.learning_rate, "train");
        read(t, "beta1", cfg.train.beta1, "train");
        read(t, "beta2", cfg.train.beta2, "train");
        read(t, "adam_eps", cfg.train.adam_eps, "train");
        read(t, "weight_decay", cfg.train.weight_decay, "train");
        if (t.contains("grad_clip_norm")) {
            if (t.at("grad_clip_norm").is_null()) {
                cfg.train.grad_clip_norm.reset();
            } else {
                double clip = 0.0;
                read(t, "grad_clip_norm", clip, "train");
                cfg.train.grad_clip_norm = clip;
            }
        }
    }
    if (doc.contains("mixup")) {
        const Json& m = doc.at("mixup");
        check_keys(m, {"enabled", "lambda", "schedule"}, "mixup");
        read(m, "enabled", cfg.train.mixup.enabled, "mixup");
        if (m.contains("lambda")) {
            const Json& l = m.at("lambda");
            if (l.is_number()) {
                cfg.train.mixup.lambda = FixedLambda{l.get<double>()};
            } else {
                check_keys(l, {"policy", "value", "alpha"}, "mixup.lambda");
                std::string policy = "fixed";
                read(l, "policy", policy, "mixup.lambda");
                if (policy == "fixed") {
                    FixedLambda f;
                    read(l, "value", f.value, "mixup.lambda");
                    cfg.train.mixup.lambda = f;
                } else if (policy == "beta") {
                    BetaLambda b;
                    read(l, "alpha", b.alpha, "mixup.lambda");
                    cfg.train.mixup.lambda = b;
                } else {
                    config_error("mixup.lambda.policy", "expected 'fixed' or 'beta'");
                }
            }
        }
        if (m.contains("schedule")) {
            const Json& s = m.at("schedule");
            if (s == "always") {
                cfg.train.mixup.schedule = AlwaysActive{};
            } else if (s == "last_half") {
                cfg.train.mixup.schedule = LastHalf{};
            } else if (s.is_array()) {
                EpochSet set;
                for (const auto& e : s) {
                    if (!e.is_number_integer()) config_error("mixup.schedule", "epoch list must hold integers");
                    set.epochs.push_back(e.get<int>());
                }
                cfg.train.mixup.schedule = set;
            } else {
                config_error("mixup.schedule", "expected \"always\", \"last_half\" or a list of epochs");
            }
        }
    }
    if (doc.contains("task")) {
        const Json& t = doc.at("task");
        check_keys(t, {"name", "input_arity", "label", "n_classes", "label_min", "label_max", "metric",
                       "sentence1_column", "sentence2_column", "label_column"},
                   "task");
        read(t, "name", cfg.task.name, "task");
        std::string arity = "single";
        read(t, "input_arity", arity, "task");
        if (arity == "single") {
            cfg.task.input_arity = InputArity::single;
        } else if (arity == "pair") {
            cfg.task.input_arity = InputArity::pair;
        } else {
            config_error("task.input_arity", "expected 'single' or 'pair'");
        }
        std::string kind = "classes";
        read(t, "label", kind, "task");
        if (kind == "classes") {
            cfg.task.label_kind = HeadKind::classification;
        } else if (kind == "regression") {
            cfg.task.label_kind = HeadKind::regression;
            cfg.task.metric = MetricKind::spearman;
        } else {
            config_error("task.label", "expected 'classes' or 'regression'");
        }
        read(t, "n_classes", cfg.task.n_classes, "task");
        read(t, "label_min", cfg.task.label_min, "task");
        read(t, "label_max", cfg.task.label_max, "task");
        if (t.contains("metric")) {
            std::string metric;
            read(t, "metric", metric, "task");
            cfg.task.metric = parse_metric(metric);
        }
        read(t, "sentence1_column", cfg.task.sentence1_column, "task");
        if (t.contains("sentence2_column") && !t.at("sentence2_column").is_null()) {
            std::size_t col = 0;
            read(t, "sentence2_column", col, "task");
            cfg.task.sentence2_column = col;
        } else if (cfg.task.input_arity == InputArity::pair) {
            config_error("task.sentence2_column", "required for pair tasks");
        }
        read(t, "label_column", cfg.task.label_column, "task");
    }
    if (doc.contains("vocab")) {
        const Json& v = doc.at("vocab");
        check_keys(v, {"min_count", "max_size"}, "vocab");
        read(v, "min_count", cfg.vocab.min_count, "vocab");
        read(v, "max_size", cfg.vocab.max_size, "vocab");
    }
    if (doc.contains("paths")) {
        const Json& p = doc.at("paths");
        check_keys(p, {"train", "dev", "out"}, "paths");
        std::string train, dev, out;
        read(p, "train", train, "paths");
        read(p, "dev", dev, "paths");
        read(p, "out", out, "paths");
        cfg.paths.train = resolve(base_dir, train);
        cfg.paths.dev = resolve(base_dir, dev);
        if (!out.empty()) cfg.paths.out = resolve(base_dir, out);
    }

    cfg.model.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    cfg.model.head = cfg.task.label_kind;
    cfg.model.n_classes = cfg.task.n_classes;
    cfg.validate();
    return cfg;
}

Json to_json(const RunConfig& c) {
    Json doc;
    doc["seed"] = c.seed;
    doc["fraction"] = c.fraction;
    doc["model"] = {{"d_model", c.model.d_model}, {"n_heads", c.model.n_heads}, {"n_layers", c.model.n_layers},
                    {"d_ff", c.model.d_ff},       {"max_len", c.model.max_len}, {"dropout", c.model.dropout_rate}};
    doc["train"] = {{"epochs", c.train.epochs},
                    {"batch_size", c.train.batch_size},
                    {"learning_rate", c.train.learning_rate},
                    {"beta1", c.train.beta1},
                    {"beta2", c.train.beta2},
                    {"adam_eps", c.train.adam_eps},
                    {"weight_decay", c.train.weight_decay},
                    {"grad_clip_norm", c.train.grad_clip_norm ? Json(*c.train.grad_clip_norm) : Json(nullptr)}};
    doc["mixup"] = {{"enabled", c.train.mixup.enabled},
                    {"lambda", lambda_json(c.train.mixup.lambda)},
                    {"schedule", schedule_json(c.train.mixup.schedule)}};
    Json task = {{"name", c.task.name},
                 {"input_arity", c.task.input_arity == InputArity::pair ? "pair" : "single"},
                 {"label", c.task.is_classification() ? "classes" : "regression"},
                 {"n_classes", c.task.n_classes},
                 {"label_min", c.task.label_min},
                 {"label_max", c.task.label_max},
                 {"metric", to_string(c.task.metric)},
                 {"sentence1_column", c.task.sentence1_column},
                 {"sentence2_column", c.task.sentence2_column ? Json(*c.task.sentence2_column) : Json(nullptr)},
                 {"label_column", c.task.label_column}};
    doc["task"] = task;
    doc["vocab"] = {{"min_count", c.vocab.min_count}, {"max_size", c.vocab.max_size}};
    doc["paths"] = {{"train", c.paths.train.string()}, {"dev", c.paths.dev.string()}, {"out", c.paths.out.string()}};
    return doc;
}

void apply_override(Json& doc, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ValidationError("override '" + std::string(assignment) + "' is not of the form key=value");
    }
    const std::string key(assignment.substr(0, eq));
    const std::string raw(assignment.substr(eq + 1));
    Json value = Json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    Json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ValidationError("override key '" + key + "' has an empty component");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        if (!node->contains(part)) (*node)[part] = Json::object();
        node = &(*node)[part];
        if (!node->is_object()) throw ValidationError("override key '" + key + "' descends into a non-object");
        start = dot + 1;
    }
}

RunConfig load_run_config(const fs::path& path, const std::vector<std::string>& overrides) {
    Json doc = read_json(path);
    for (const auto& o : overrides) apply_override(doc, o);
    return run_config_from_json(doc, path.parent_path());
}

std::string config_hash(const RunConfig& config) { return hex16(fnv1a(to_json(config).dump())); }

PreparedData prepare_data(const RunConfig& config) {
    config.validate();
    for (const auto& [label, path] : {std::pair{"train", &config.paths.train}, std::pair{"dev", &config.paths.dev}}) {
        if (path->empty()) throw ValidationError(std::string("config: paths.") + label + " is not set");
        if (!fs::exists(*path)) throw ValidationError(std::string(label) + " file not found: " + path->string());
    }
    auto train_rows = read_tsv(config.paths.train, config.task);
    auto dev_rows = read_tsv(config.paths.dev, config.task);
    Vocabulary vocab = build_vocab(corpus_of(train_rows), config.vocab.min_count, config.vocab.max_size);
    Dataset train = encode_rows(train_rows, config.task, vocab, config.model.max_len, Split::train);
    Dataset dev = encode_rows(dev_rows, config.task, vocab, config.model.max_len, Split::dev);
    return {std::move(vocab), std::move(train), std::move(dev)};
}

ModelConfig resolved_model_config(const RunConfig& config, const Vocabulary& vocab) {
    ModelConfig mc = config.model;
    mc.vocab_size = vocab.size();
    mc.head = config.task.label_kind;
    mc.n_classes = config.task.n_classes;
    mc.seed = config.seed;
    mc.validate();
    return mc;
}

std::string to_string(Arm arm) { return arm == Arm::baseline ? "baseline" : "mixup"; }

Json to_json(const EpochReport& r) {
    return Json{{"epoch", r.epoch},
                {"mixup_active", r.mixup_active},
                {"lambda_policy", r.lambda_policy},
                {"mean_lambda", r.mean_lambda},
                {"mean_train_loss", r.mean_train_loss},
                {"steps", r.steps},
                {"dev_metric",
                 {{"metric", r.dev_metric.metric_name},
                  {"value", r.dev_metric.value},
                  {"n", r.dev_metric.n},
                  {"degenerate", r.dev_metric.degenerate}}},
                {"wall_time_ms", r.wall_time_ms}};
}

Json to_json(const RunReport& r) {
    Json epochs = Json::array();
    for (const auto& e : r.epochs) epochs.push_back(to_json(e));
    return Json{{"run_id", r.run_id},
                {"task", r.task},
                {"fraction", r.fraction},
                {"mixup_enabled", r.mixup_enabled},
                {"seed", r.seed},
                {"config_hash", r.config_hash},
                {"config", r.config},
                {"train_size", r.train_size},
                {"train_subset_hash", r.train_subset_hash},
                {"dev_size", r.dev_size},
                {"metric", r.metric_name},
                {"epochs", epochs},
                {"final_metric", r.final_metric},
                {"best_metric", r.best_metric}};
}

std::string indices_hash(const std::vector<std::size_t>& indices) {
    std::string text;
    for (std::size_t i : indices) text += std::to_string(i) + ',';
    return hex16(fnv1a(text));
}

RunOutcome execute_run(const RunConfig& config, const PreparedData& data, const std::string& run_id) {
    config.validate();
    const auto indices = reduction_indices(data.train, config.fraction, mix_seed(config.seed, kReductionStream));
    Dataset train{data.train.task, Split::train, data.train.max_len, {}};
    train.examples.reserve(indices.size());
    for (std::size_t i : indices) train.examples.push_back(data.train.examples[i]);

    ModelConfig mc = resolved_model_config(config, data.vocab);
    TrainConfig tc = config.train;
    tc.seed = config.seed;
    TrainingResult trained = run_training(mc, tc, train, data.dev);

    RunReport report;
    report.run_id = run_id;
    report.task = config.task.name;
    report.fraction = config.fraction;
    report.mixup_enabled = config.train.mixup.enabled;
    report.seed = config.seed;
    report.config = to_json(config);
    report.config_hash = config_hash(config);
    report.train_size = train.size();
    report.train_subset_hash = indices_hash(indices);
    report.dev_size = data.dev.size();
    report.epochs = trained.reports;
    report.metric_name = to_string(config.task.metric);
    report.final_metric = trained.reports.back().dev_metric.value;
    report.best_metric = report.final_metric;
    for (const auto& e : trained.reports) report.best_metric = std::max(report.best_metric, e.dev_metric.value);
    return {std::move(report), std::move(trained.params)};
}

std::vector<double> default_fractions() {
    std::vector<double> f;
    for (int i = 1; i <= 10; ++i) f.push_back(i / 10.0);
    return f;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return ec == std::errc() ? std::string(buf, ptr) : std::to_string(value);
}

SweepResult run_sweep(const RunConfig& base, const PreparedData& data, const SweepOptions& options,
                      const fs::path& out_dir) {
    if (options.fractions.empty() || options.arms.empty() || options.seeds.empty()) {
        throw ValidationError("sweep: fractions, arms and seeds must be non-empty");
    }
    for (double f : options.fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw ValidationError("sweep: fraction " + format_double(f) + " outside (0, 1]");
    }
    SweepResult result;
    result.task = base.task.name;
    for (double f : options.fractions)
        for (Arm arm : options.arms)
            for (std::uint64_t seed : options.seeds) result.cells.push_back({f, arm, seed, "ok", "", 0.0, std::nullopt});

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= result.cells.size()) return;
            SweepCell& cell = result.cells[i];
            RunConfig cfg = base;
            cfg.seed = cell.seed;
            cfg.model.seed = cell.seed;
            cfg.train.seed = cell.seed;
            cfg.fraction = cell.fraction;
            cfg.train.mixup.enabled = cell.arm == Arm::mixup;
            const std::string run_id = base.task.name + "_f" + format_double(cell.fraction) + "_" +
                                       to_string(cell.arm) + "_s" + std::to_string(cell.seed);
            try {
                RunOutcome outcome = execute_run(cfg, data, run_id);
                cell.metric = outcome.report.final_metric;
                if (options.write_run_reports) {
                    const fs::path dir = out_dir / "runs" / run_id;
                    fs::create_directories(dir);
                    write_json(to_json(outcome.report), dir / "run.json");
                }
                cell.report = std::move(outcome.report);
            } catch (const std::exception& e) {
                cell.status = "error";
                cell.error = e.what();
            }
        }
    };
    const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, result.cells.size());
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }

    const bool both = std::find(options.arms.begin(), options.arms.end(), Arm::baseline) != options.arms.end() &&
                      std::find(options.arms.begin(), options.arms.end(), Arm::mixup) != options.arms.end();
    if (both) {
        for (double f : options.fractions) {
            double sums[2] = {0, 0};
            int counts[2] = {0, 0};
            for (const auto& c : result.cells) {
                if (c.fraction != f || c.status != "ok") continue;
                const int a = c.arm == Arm::mixup ? 1 : 0;
                sums[a] += c.metric;
                ++counts[a];
            }
            if (counts[0] == 0 || counts[1] == 0) continue;
            FractionDelta d;
            d.fraction = f;
            d.baseline_mean = sums[0] / counts[0];
            d.mixup_mean = sums[1] / counts[1];
            d.delta = d.mixup_mean - d.baseline_mean;
            result.deltas.push_back(d);
        }
    }
    return result;
}

void write_sweep_csv(const SweepResult& result, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << "task,fraction,arm,seed,metric,status\n";
    for (const auto& c : result.cells) {
        out << result.task << ',' << format_double(c.fraction) << ',' << to_string(c.arm) << ',' << c.seed << ','
            << (c.status == "ok" ? format_double(c.metric) : "") << ',' << c.status << '\n';
    }
    for (const auto& d : result.deltas) {
        out << result.task << ',' << format_double(d.fraction) << ",delta,mean," << format_double(d.delta) << ",ok\n";
    }
}

void write_json(const Json& doc, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << doc.dump(2) << '\n';
}

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

}  // namespace mixf

// Command-line front end: train, eval, sweep, gradcheck, gen-synthetic.
//
// Exit codes: 0 success, 1 verification or training failure, 2 bad user input.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mixf/errors.h"
#include "mixf/experiment.h"
#include "mixf/gradcheck_suite.h"
#include "mixf/synthetic.h"
#include "mixf/trainer.h"

namespace fs = std::filesystem;
using namespace mixf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct CommonRunArgs {
    std::string config;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, CommonRunArgs& args) {
    cmd->add_option("config", args.config, "Run configuration (JSON)")->required();
    cmd->add_option("--set", args.overrides, "Override a config value, e.g. --set train.epochs=5");
    cmd->add_option("--seed", args.seed, "Seed for initialization, shuffling, dropout and reduction");
    cmd->add_option("--out", args.out, "Output directory (beats MIXF_OUT and paths.out)");
}

RunConfig load_config(const CommonRunArgs& args) {
    if (!fs::exists(args.config)) throw ValidationError("config file not found: " + args.config);
    std::vector<std::string> overrides = args.overrides;
    if (args.seed) overrides.push_back("seed=" + std::to_string(*args.seed));
    RunConfig cfg = load_run_config(args.config, overrides);
    if (!args.out.empty()) {
        cfg.paths.out = args.out;
    } else if (const char* env = std::getenv("MIXF_OUT"); env && *env) {
        cfg.paths.out = env;
    }
    return cfg;
}

void print_epoch(const EpochReport& e) {
    std::cout << "epoch " << e.epoch << (e.mixup_active ? " [mixup " + e.lambda_policy + "]" : " [plain]")
              << "  loss " << std::fixed << std::setprecision(4) << e.mean_train_loss << "  dev "
              << e.dev_metric.metric_name << ' ' << e.dev_metric.value << "  (" << e.wall_time_ms << " ms)\n"
              << std::defaultfloat;
}

int cmd_train(const CommonRunArgs& args) {
    RunConfig cfg = load_config(args);
    PreparedData data = prepare_data(cfg);
    std::cout << "task " << cfg.task.name << ": " << data.train.size() << " train / " << data.dev.size()
              << " dev examples, vocabulary " << data.vocab.size() << "\n";
    const std::string run_id = cfg.task.name + "_f" + format_double(cfg.fraction) + "_" +
                               (cfg.train.mixup.enabled ? "mixup" : "baseline") + "_s" + std::to_string(cfg.seed);
    RunOutcome outcome = execute_run(cfg, data, run_id);
    for (const auto& e : outcome.report.epochs) print_epoch(e);

    fs::create_directories(cfg.paths.out);
    write_json(to_json(outcome.report), cfg.paths.out / "run.json");
    save_params(outcome.params, cfg.paths.out / "params.bin");
    data.vocab.save(cfg.paths.out / "vocab.txt");
    std::cout << "final " << outcome.report.metric_name << ' ' << format_double(outcome.report.final_metric)
              << "\nwrote " << (cfg.paths.out / "run.json").string() << "\n";
    return kExitOk;
}

struct EvalArgs {
    std::string params;
    std::string config;
    std::string dev;
    std::string vocab;
};

int cmd_eval(const EvalArgs& args) {
    if (!fs::exists(args.config)) throw ValidationError("config file not found: " + args.config);
    RunConfig cfg = load_run_config(args.config);
    const fs::path params_path(args.params);
    if (!fs::exists(params_path)) throw ValidationError("parameter file not found: " + args.params);
    const fs::path vocab_path = args.vocab.empty() ? params_path.parent_path() / "vocab.txt" : fs::path(args.vocab);
    const fs::path dev_path = args.dev.empty() ? cfg.paths.dev : fs::path(args.dev);
    if (!fs::exists(dev_path)) throw ValidationError("dev file not found: " + dev_path.string());

    Vocabulary vocab = Vocabulary::load(vocab_path);
    ModelConfig mc = resolved_model_config(cfg, vocab);
    Parameters params = load_params(params_path, mc);
    Dataset dev = load_tsv(dev_path, cfg.task, vocab, cfg.model.max_len, Split::dev);
    EvalResult r = evaluate(params, dev);
    Json out{{"metric", r.metric_name}, {"value", r.value}, {"n", r.n}};
    if (r.degenerate) out["degenerate"] = true;
    std::cout << out.dump() << "\n";
    return kExitOk;
}

struct SweepArgs {
    CommonRunArgs common;
    std::vector<double> fractions;
    std::string arms = "both";
    std::vector<std::uint64_t> seeds;
    std::size_t jobs = 1;
};

int cmd_sweep(const SweepArgs& args) {
    RunConfig cfg = load_config(args.common);
    SweepOptions opt;
    if (!args.fractions.empty()) opt.fractions = args.fractions;
    if (args.arms == "baseline") {
        opt.arms = {Arm::baseline};
    } else if (args.arms == "mixup") {
        opt.arms = {Arm::mixup};
    } else if (args.arms != "both") {
        throw ValidationError("--arms must be baseline, mixup or both");
    }
    opt.seeds = args.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : args.seeds;
    opt.jobs = args.jobs;

    PreparedData data = prepare_data(cfg);
    fs::create_directories(cfg.paths.out);
    SweepResult result = run_sweep(cfg, data, opt, cfg.paths.out);
    write_sweep_csv(result, cfg.paths.out / "sweep.csv");

    std::size_t failed = 0;
    for (const auto& c : result.cells) {
        std::cout << std::left << std::setw(6) << format_double(c.fraction) << std::setw(10) << to_string(c.arm)
                  << "seed " << std::setw(6) << c.seed;
        if (c.status == "ok") {
            std::cout << format_double(c.metric) << "\n";
        } else {
            ++failed;
            std::cout << "error: " << c.error << "\n";
        }
    }
    for (const auto& d : result.deltas) {
        std::cout << "fraction " << format_double(d.fraction) << ": baseline " << format_double(d.baseline_mean)
                  << ", mixup " << format_double(d.mixup_mean) << ", improved " << format_double(d.delta) << "\n";
    }
    std::cout << "wrote " << (cfg.paths.out / "sweep.csv").string() << "\n";
    return failed == 0 ? kExitOk : kExitFailure;
}

int cmd_gradcheck(const std::string& inject_fault) {
    SuiteOutcome outcome = run_gradcheck_suite(gradcheck_components(inject_fault));
    for (const auto& c : outcome.components) {
        std::cout << (c.passed() ? "PASS " : "FAIL ") << std::left << std::setw(28) << c.name;
        if (c.error.empty()) {
            std::cout << "max rel error " << std::scientific << std::setprecision(3) << c.report.max_rel_error
                      << "  (tol " << c.tolerance << ", " << c.report.entries_checked << " entries)"
                      << std::defaultfloat << "\n";
        } else {
            std::cout << "error: " << c.error << "\n";
        }
    }
    std::cout << "gradcheck finished in " << std::fixed << std::setprecision(2) << outcome.seconds << " s\n";
    if (!outcome.passed()) {
        std::cout << "offenders:";
        for (const auto& n : outcome.offenders) std::cout << ' ' << n;
        std::cout << "\n";
        return kExitFailure;
    }
    return kExitOk;
}

struct SyntheticArgs {
    std::string dir;
    SyntheticOptions options;
};

int cmd_gen_synthetic(const SyntheticArgs& args) {
    write_synthetic(generate_synthetic(args.options), args.dir);
    std::cout << "wrote train.tsv (" << args.options.train_size << "), dev.tsv (" << args.options.dev_size
              << ") and config.json to " << args.dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transformer text classifier with mixup on pooled hidden representations"};
    app.require_subcommand(1);

    CommonRunArgs train_args;
    auto* train = app.add_subcommand("train", "Train one model and write run.json + params.bin");
    add_common(train, train_args);

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Evaluate saved parameters on a dev file");
    eval->add_option("params", eval_args.params, "Parameter file written by train")->required();
    eval->add_option("--config", eval_args.config, "Run configuration used for training")->required();
    eval->add_option("--dev", eval_args.dev, "Dev TSV (defaults to paths.dev)");
    eval->add_option("--vocab", eval_args.vocab, "Vocabulary file (defaults to vocab.txt beside params)");

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep", "Data-reduction sweep over fractions x arms x seeds");
    add_common(sweep, sweep_args.common);
    sweep->add_option("--fractions", sweep_args.fractions, "Training fractions (default 0.1..1.0)")->delimiter(',');
    sweep->add_option("--arms", sweep_args.arms, "baseline, mixup or both");
    sweep->add_option("--seeds", sweep_args.seeds, "Seeds (default: config seed)")->delimiter(',');
    sweep->add_option("--jobs", sweep_args.jobs, "Cells trained concurrently")->check(CLI::PositiveNumber);

    std::string inject_fault;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every backward pass");
    gradcheck->add_option("--inject-fault", inject_fault, "Break one component's backward (harness self-test)");

    SyntheticArgs syn_args;
    auto* gen = app.add_subcommand("gen-synthetic", "Write the bundled keyword-vs-distractor task");
    gen->add_option("dir", syn_args.dir, "Output directory")->required();
    gen->add_option("--train-size", syn_args.options.train_size);
    gen->add_option("--dev-size", syn_args.options.dev_size);
    gen->add_option("--noise", syn_args.options.label_noise, "Training label noise rate");
    gen->add_option("--seed", syn_args.options.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (train->parsed()) return cmd_train(train_args);
        if (eval->parsed()) return cmd_eval(eval_args);
        if (sweep->parsed()) return cmd_sweep(sweep_args);
        if (gradcheck->parsed()) return cmd_gradcheck(inject_fault);
        if (gen->parsed()) return cmd_gen_synthetic(syn_args);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const LoadError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "mixf/errors.h"
#include "mixf/experiment.h"
#include "mixf/gradcheck_suite.h"
#include "mixf/synthetic.h"
#include "synthetic_fixture.h"
#include "test_support.h"

using namespace mixf;

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

SyntheticOptions small_options() {
    SyntheticOptions o;
    o.train_size = 200;
    o.dev_size = 100;
    return o;
}

}  // namespace

TEST_CASE("config parsing") {
    Json doc = synthetic_config_json();
    RunConfig c = run_config_from_json(doc, "/data/run");
    CHECK(c.seed == 1);
    CHECK(c.model.seed == 1);
    CHECK(c.train.seed == 1);
    CHECK(c.model.d_model == 16);
    CHECK(c.train.learning_rate == 2e-3);
    CHECK(std::holds_alternative<LastHalf>(c.train.mixup.schedule));
    CHECK(std::get<FixedLambda>(c.train.mixup.lambda).value == 0.5);
    CHECK(c.paths.train == std::filesystem::path("/data/run/train.tsv"));
    CHECK(c.task.metric == MetricKind::accuracy);

    Json round = to_json(c);
    RunConfig again = run_config_from_json(round);
    CHECK(config_hash(again) == config_hash(c));
    CHECK(config_hash(c).size() == 16);

    Json beta = doc;
    beta["mixup"]["lambda"] = {{"policy", "beta"}, {"alpha", 0.4}};
    beta["mixup"]["schedule"] = Json::array({1, 3});
    beta["train"]["grad_clip_norm"] = nullptr;
    RunConfig b = run_config_from_json(beta);
    CHECK(std::get<BetaLambda>(b.train.mixup.lambda).alpha == 0.4);
    CHECK(std::get<EpochSet>(b.train.mixup.schedule).epochs == std::vector<int>{1, 3});
    CHECK_FALSE(b.train.grad_clip_norm);
    CHECK(config_hash(b) != config_hash(c));

    Json bare = doc;
    bare["mixup"]["lambda"] = 0.3;
    CHECK(std::get<FixedLambda>(run_config_from_json(bare).train.mixup.lambda).value == 0.3);
}

TEST_CASE("config errors") {
    Json doc = synthetic_config_json();
    Json unknown = doc;
    unknown["train"]["warmup"] = 100;
    try {
        run_config_from_json(unknown);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("warmup") != std::string::npos);
    }
    Json wrong_type = doc;
    wrong_type["train"]["epochs"] = "three";
    CHECK_THROWS_AS(run_config_from_json(wrong_type), ValidationError);
    Json bad_fraction = doc;
    bad_fraction["fraction"] = 0.0;
    CHECK_THROWS_AS(run_config_from_json(bad_fraction), ValidationError);
    Json bad_metric = doc;
    bad_metric["task"]["metric"] = "spearman";
    CHECK_THROWS_AS(run_config_from_json(bad_metric), ValidationError);
}

TEST_CASE("overrides") {
    Json doc = synthetic_config_json();
    apply_override(doc, "train.epochs=5");
    apply_override(doc, "mixup.schedule=always");
    apply_override(doc, "seed=42");
    apply_override(doc, "task.name=renamed");
    RunConfig c = run_config_from_json(doc);
    CHECK(c.train.epochs == 5);
    CHECK(std::holds_alternative<AlwaysActive>(c.train.mixup.schedule));
    CHECK(c.seed == 42);
    CHECK(c.train.seed == 42);
    CHECK(c.task.name == "renamed");
    CHECK_THROWS_AS(apply_override(doc, "noequals"), ValidationError);
    CHECK_THROWS_AS(apply_override(doc, "seed.inner=1"), ValidationError);
}

TEST_CASE("synthetic generator") {
    SyntheticOptions o = small_options();
    auto a = generate_synthetic(o);
    auto b = generate_synthetic(o);
    REQUIRE(a.train.size() == 200);
    REQUIRE(a.dev.size() == 100);
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].text == b.train[i].text);
        CHECK(a.train[i].label == b.train[i].label);
    }
    int ones = 0;
    for (const auto& r : a.dev) ones += r.label;
    CHECK(ones == 50);

    o.seed = 8;
    auto c = generate_synthetic(o);
    bool differs = false;
    for (std::size_t i = 0; i < a.train.size(); ++i) differs = differs || a.train[i].text != c.train[i].text;
    CHECK(differs);

    // noise only flips training labels; a noise-free copy shows which
    SyntheticOptions clean = small_options();
    clean.label_noise = 0.0;
    auto d = generate_synthetic(clean);
    int flipped = 0;
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].text == d.train[i].text);
        flipped += a.train[i].label != d.train[i].label;
    }
    CHECK(flipped > 5);
    CHECK(flipped < 40);
}

TEST_CASE("a run report echoes its config and subset") {
    testing::TempDir dir;
    auto setup = testing::load_synthetic(dir.path(), small_options(), {"train.epochs=2", "fraction=0.5"});
    RunOutcome out = execute_run(setup.config, setup.data, "r1");
    const RunReport& r = out.report;
    CHECK(r.run_id == "r1");
    CHECK(r.train_size >= 99);  // per-class rounding
    CHECK(r.train_size <= 101);
    CHECK(r.epochs.size() == 2);
    CHECK(r.final_metric == r.epochs.back().dev_metric.value);
    CHECK(r.config_hash == config_hash(setup.config));
    CHECK(r.config == to_json(setup.config));

    RunConfig from_report = run_config_from_json(r.config);
    RunOutcome again = execute_run(from_report, setup.data, "r1");
    CHECK(again.report.final_metric == r.final_metric);
    CHECK(to_json(again.report)["epochs"][1]["mean_train_loss"] == to_json(r)["epochs"][1]["mean_train_loss"]);
    CHECK(again.params.identical(out.params));
}

TEST_CASE("sweep writes every cell plus per-fraction deltas") {
    testing::TempDir dir;
    auto setup = testing::load_synthetic(dir.path(), small_options(), {"train.epochs=2"});
    SweepOptions opts;
    opts.fractions = {0.5, 1.0};
    opts.seeds = {1, 2};
    opts.jobs = 2;
    SweepResult res = run_sweep(setup.config, setup.data, opts, dir.path() / "out");
    REQUIRE(res.cells.size() == 8);
    for (const auto& c : res.cells) {
        CHECK(c.status == "ok");
        REQUIRE(c.report);
    }
    REQUIRE(res.deltas.size() == 2);

    // shared reduction seed: baseline and mixup cells see the same subset
    for (const auto& b : res.cells) {
        if (b.arm != Arm::baseline) continue;
        for (const auto& m : res.cells) {
            if (m.arm == Arm::mixup && m.seed == b.seed && m.fraction == b.fraction)
                CHECK(m.report->train_subset_hash == b.report->train_subset_hash);
        }
    }
    CHECK(res.cells[0].report->train_subset_hash != res.cells[1].report->train_subset_hash);

    auto csv = dir.path() / "sweep.csv";
    write_sweep_csv(res, csv);
    auto lines = read_lines(csv);
    REQUIRE(lines.size() == 1 + 8 + 2);
    CHECK(lines[0] == "task,fraction,arm,seed,metric,status");
    CHECK(lines[1].starts_with("synthetic,0.5,baseline,1,"));
    CHECK(lines[9].starts_with("synthetic,0.5,delta,mean,"));
    CHECK(std::filesystem::exists(dir.path() / "out" / "runs" / "synthetic_f0.5_mixup_s2" / "run.json"));

    SweepOptions single = opts;
    single.fractions = {1.0};
    single.seeds = {1};
    single.jobs = 1;
    SweepResult one = run_sweep(setup.config, setup.data, single, dir.path() / "out2");
    CHECK(one.cells.size() == 2);
    CHECK(one.deltas.size() == 1);
    CHECK(one.cells[0].metric == res.cells[4].metric);  // same cell, jobs do not matter
}

TEST_CASE("failed cells are recorded and the sweep continues") {
    testing::TempDir dir;
    auto setup = testing::load_synthetic(dir.path(), small_options(), {"train.epochs=1"});
    setup.config.train.learning_rate = 1e300;
    setup.config.train.grad_clip_norm.reset();
    SweepOptions opts;
    opts.fractions = {1.0};
    opts.write_run_reports = false;
    SweepResult res = run_sweep(setup.config, setup.data, opts, dir.path());
    REQUIRE(res.cells.size() == 2);
    for (const auto& c : res.cells) {
        CHECK(c.status == "error");
        CHECK_FALSE(c.error.empty());
    }
    CHECK(res.deltas.empty());
}

TEST_CASE("default fractions") {
    auto f = default_fractions();
    REQUIRE(f.size() == 10);
    CHECK(f.front() == 0.1);
    CHECK(f.back() == 1.0);
}

TEST_CASE("gradient-check suite") {
    SuiteOutcome ok = run_gradcheck_suite(gradcheck_components());
    CHECK(ok.passed());
    CHECK(ok.seconds < 60.0);
    bool has_full = false;
    for (const auto& c : ok.components) {
        CHECK(c.report.max_rel_error < c.tolerance);
        has_full = has_full || c.name == "full_step_mixup";
    }
    CHECK(has_full);

    for (const char* op : {"softmax_rows", "layer_norm", "full_step"}) {
        SuiteOutcome bad = run_gradcheck_suite(gradcheck_components(op));
        CHECK_FALSE(bad.passed());
        CHECK(bad.offenders == std::vector<std::string>{op});
    }
}

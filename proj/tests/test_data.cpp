#include <doctest.h>

#include <algorithm>
#include <set>

#include "mixf/data.h"
#include "mixf/errors.h"
#include "test_support.h"

using namespace mixf;

namespace {

TaskSpec single_task() {
    TaskSpec t;
    t.name = "toy";
    return t;
}

TaskSpec pair_task() {
    TaskSpec t;
    t.name = "pairs";
    t.input_arity = InputArity::pair;
    t.sentence1_column = 0;
    t.sentence2_column = 1;
    t.label_column = 2;
    return t;
}

TaskSpec regression_task() {
    TaskSpec t;
    t.name = "sts";
    t.label_kind = HeadKind::regression;
    t.label_min = 0.0;
    t.label_max = 5.0;
    t.metric = MetricKind::spearman;
    return t;
}

Dataset labelled(std::size_t n, std::size_t classes) {
    Dataset ds;
    ds.task = single_task();
    ds.task.n_classes = classes;
    ds.max_len = 3;
    for (std::size_t i = 0; i < n; ++i) {
        ds.examples.push_back({{2, int(4 + i % 7), 3}, {1, 1, 1}, double(i % classes)});
    }
    return ds;
}

std::vector<int> ids(const Vocabulary& v, std::initializer_list<const char*> words) {
    std::vector<int> out;
    for (auto w : words) out.push_back(v.id(w));
    return out;
}

}  // namespace

TEST_CASE("tokenizer") {
    CHECK(tokenize("Hello, World!") == std::vector<std::string>{"hello", "world"});
    CHECK(tokenize("  a\t\tb\n") == std::vector<std::string>{"a", "b"});
    CHECK(tokenize("... !!") .empty());
    CHECK(tokenize("don't (stop)") == std::vector<std::string>{"don't", "stop"});
    // U+00A0 no-break space and U+3000 ideographic space separate tokens
    CHECK(tokenize("a\xC2\xA0" "b\xE3\x80\x80" "c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(tokenize("caf\xC3\xA9") == std::vector<std::string>{"caf\xC3\xA9"});
}

TEST_CASE("vocabulary construction") {
    Vocabulary v = build_vocab({"a a b"}, 1, 0);
    CHECK(v.size() == 6);
    CHECK(v.id("a") == 4);
    CHECK(v.id("b") == 5);
    CHECK(v.id("[PAD]") == 0);
    CHECK(v.id("[UNK]") == 1);
    CHECK(v.id("[CLS]") == 2);
    CHECK(v.id("[SEP]") == 3);
    for (int i = 0; i < 4; ++i) CHECK(v.id(v.token(i)) == i);

    Vocabulary strict = build_vocab({"a a b"}, 2, 0);
    CHECK(strict.id("a") == 4);
    CHECK(strict.id("b") == Vocabulary::kUnk);
    CHECK(strict.id("never") == Vocabulary::kUnk);

    Vocabulary tie = build_vocab({"y x"}, 1, 0);
    CHECK(tie.id("x") < tie.id("y"));

    Vocabulary capped = build_vocab({"a a a b b c"}, 1, 6);
    CHECK(capped.size() == 6);
    CHECK(capped.id("c") == Vocabulary::kUnk);

    CHECK_THROWS_AS(build_vocab({}, 1, 0), ValidationError);
    CHECK(build_vocab({"q w e q"}, 1, 0).tokens() == build_vocab({"q w e q"}, 1, 0).tokens());
}

TEST_CASE("vocabulary file round trip") {
    testing::TempDir dir;
    Vocabulary v = build_vocab({"the cat sat on the mat"}, 1, 0);
    v.save(dir.path() / "vocab.txt");
    Vocabulary back = Vocabulary::load(dir.path() / "vocab.txt");
    CHECK(back.tokens() == v.tokens());
    CHECK_THROWS_AS(Vocabulary::load(dir.path() / "none.txt"), ValidationError);
}

TEST_CASE("single sentence encoding") {
    Vocabulary v = build_vocab({"hello world"}, 1, 0);
    Example e = encode_example(v, single_task(), "hello world", std::nullopt, 1, 6);
    std::vector<int> expected = {Vocabulary::kCls, v.id("hello"), v.id("world"), Vocabulary::kSep, 0, 0};
    CHECK(e.token_ids == expected);
    CHECK(e.mask == std::vector<int>{1, 1, 1, 1, 0, 0});
    CHECK(e.label == 1);

    Example oov = encode_example(v, single_task(), "zebra quokka", std::nullopt, 0, 5);
    CHECK(oov.token_ids[1] == Vocabulary::kUnk);
    CHECK(oov.token_ids[2] == Vocabulary::kUnk);

    Example cut = encode_example(v, single_task(), "hello world hello world", std::nullopt, 0, 4);
    CHECK(cut.token_ids == std::vector<int>{2, v.id("hello"), v.id("world"), 3});

    CHECK_THROWS_AS(encode_example(v, single_task(), "hello", std::nullopt, 2, 6), ValidationError);
    CHECK_THROWS_AS(encode_example(v, single_task(), "hello", std::string_view("x"), 0, 6), ValidationError);
}

TEST_CASE("pair encoding truncates the longer segment first") {
    Vocabulary v = build_vocab({"a b c d e f g h"}, 1, 0);
    TaskSpec t = pair_task();
    Example e = encode_example(v, t, "a b c d e f", "g h", 0, 8);
    CHECK(e.token_ids.size() == 8);
    CHECK(std::count(e.token_ids.begin(), e.token_ids.end(), Vocabulary::kSep) == 2);
    std::vector<int> expected = {2};
    for (int id : ids(v, {"a", "b", "c"})) expected.push_back(id);
    expected.push_back(3);
    for (int id : ids(v, {"g", "h"})) expected.push_back(id);
    expected.push_back(3);
    CHECK(e.token_ids == expected);

    Example tie = encode_example(v, t, "a b c", "d e f", 0, 7);
    std::vector<int> tie_expected = {2, v.id("a"), v.id("b"), 3, v.id("d"), v.id("e"), 3};
    CHECK(tie.token_ids == tie_expected);
    CHECK(std::all_of(tie.mask.begin(), tie.mask.end(), [](int m) { return m == 1; }));

    Example padded = encode_example(v, t, "a", "b", 0, 8);
    for (std::size_t i = 0; i < 8; ++i) CHECK((padded.token_ids[i] == Vocabulary::kPad) == (padded.mask[i] == 0));
    CHECK_THROWS_AS(encode_example(v, t, "a", std::nullopt, 0, 8), ValidationError);
}

TEST_CASE("TaskSpec invariants") {
    TaskSpec t = single_task();
    t.metric = MetricKind::spearman;
    CHECK_THROWS_AS(t.validate(), ValidationError);
    t = single_task();
    t.n_classes = 3;
    t.metric = MetricKind::matthews;
    CHECK_THROWS_AS(t.validate(), ValidationError);
    TaskSpec r = regression_task();
    r.metric = MetricKind::accuracy;
    CHECK_THROWS_AS(r.validate(), ValidationError);
    CHECK(parse_metric("matthews") == MetricKind::matthews);
    CHECK_THROWS_AS(parse_metric("f1"), ValidationError);
}

TEST_CASE("loading TSV files") {
    testing::TempDir dir;
    Vocabulary v = build_vocab({"good bad fine"}, 1, 0);
    auto path = dir.write("ok.tsv", "sentence\tlabel\ngood\t1\nbad\t0\nfine\t1\n");
    Dataset ds = load_tsv(path, single_task(), v, 5);
    REQUIRE(ds.size() == 3);
    CHECK(ds.examples[0].token_ids[1] == v.id("good"));
    CHECK(ds.examples[1].token_ids[1] == v.id("bad"));
    CHECK(ds.examples[2].label == 1);
    for (const auto& ex : ds.examples) CHECK(ex.token_ids.size() == 5);

    auto crlf = dir.write("crlf.tsv", "sentence\tlabel\r\ngood\t1\r\nbad\t0\r\nfine\t1\r\n");
    Dataset ds2 = load_tsv(crlf, single_task(), v, 5);
    REQUIRE(ds2.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(ds2.examples[i].token_ids == ds.examples[i].token_ids);
        CHECK(ds2.examples[i].label == ds.examples[i].label);
    }

    auto bad = dir.write("bad.tsv", "sentence\tscore\nokay\t2.5\nnope\tabc\nfine\t1\n");
    try {
        load_tsv(bad, regression_task(), v, 5);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("abc") != std::string::npos);
    }

    auto fields = dir.write("fields.tsv", "sentence\tlabel\ngood\t1\textra\nbad\n");
    try {
        load_tsv(fields, single_task(), v, 5);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("line 3") != std::string::npos);
    }

    CHECK_THROWS_AS(load_tsv(dir.write("empty.tsv", "sentence\tlabel\n"), single_task(), v, 5), ValidationError);
    CHECK_THROWS_AS(load_tsv(dir.path() / "absent.tsv", single_task(), v, 5), ValidationError);
    CHECK_THROWS_AS(load_tsv(dir.write("range.tsv", "s\tl\ngood\t2\n"), single_task(), v, 5), ValidationError);
}

TEST_CASE("pair TSV with column mapping") {
    testing::TempDir dir;
    Vocabulary v = build_vocab({"a b c"}, 1, 0);
    TaskSpec t = pair_task();
    t.sentence1_column = 1;
    t.sentence2_column = 2;
    t.label_column = 0;
    auto path = dir.write("pairs.tsv", "label\ts1\ts2\n1\ta\tb\n0\tc\ta\n");
    Dataset ds = load_tsv(path, t, v, 6);
    REQUIRE(ds.size() == 2);
    CHECK(ds.examples[0].token_ids == std::vector<int>{2, v.id("a"), 3, v.id("b"), 3, 0});
    CHECK(ds.examples[1].label == 0);
}

TEST_CASE("data reduction") {
    Dataset ds = labelled(100, 2);
    for (std::uint64_t seed : {0u, 5u}) {
        Dataset same = reduce_dataset(ds, 1.0, seed);
        REQUIRE(same.size() == 100);
        for (std::size_t i = 0; i < 100; ++i) CHECK(same.examples[i].token_ids == ds.examples[i].token_ids);
    }

    Dataset tenth = reduce_dataset(ds, 0.1, 3);
    CHECK(tenth.size() == 10);
    CHECK(std::count_if(tenth.examples.begin(), tenth.examples.end(), [](const Example& e) { return e.label == 0; }) ==
          5);

    auto idx = reduction_indices(ds, 0.1, 3);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    CHECK(idx == reduction_indices(ds, 0.1, 3));

    Dataset big = labelled(1000, 2);
    CHECK(reduction_indices(big, 0.1, 1) == reduction_indices(big, 0.1, 1));
    CHECK(reduction_indices(big, 0.1, 1) != reduction_indices(big, 0.1, 2));

    Dataset skewed = labelled(21, 3);
    skewed.examples[0].label = 2;  // classes now 6 / 7 / 8
    Dataset small = reduce_dataset(skewed, 0.05, 9);
    std::set<double> present;
    for (const auto& e : small.examples) present.insert(e.label);
    CHECK(present.size() == 3);

    CHECK_THROWS_AS(reduce_dataset(ds, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(reduce_dataset(ds, 1.5, 1), ValidationError);
    Dataset dev = ds;
    dev.split = Split::dev;
    CHECK_THROWS_AS(reduce_dataset(dev, 0.5, 1), ValidationError);
}

TEST_CASE("property: reductions are subsets of the requested size") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(200);
        const std::size_t classes = 2 + rng.uniform_index(3);
        Dataset ds = labelled(n, classes);
        const double f = 0.05 + 0.95 * rng.uniform();
        auto idx = reduction_indices(ds, f, rng.next_u64());
        CHECK(std::is_sorted(idx.begin(), idx.end()));
        CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
        for (std::size_t c = 0; c < classes; ++c) {
            std::size_t total = 0, kept = 0;
            for (std::size_t i = 0; i < n; ++i) total += ds.examples[i].label == double(c);
            for (auto i : idx) kept += ds.examples[i].label == double(c);
            if (total == 0) continue;
            const double target = std::max(1.0, std::round(f * double(total)));
            CHECK(std::abs(double(kept) - target) <= 1.0);
        }
    }

    Dataset reg = labelled(50, 2);
    reg.task = regression_task();
    for (auto& e : reg.examples) e.label = 2.5;
    CHECK(reduce_dataset(reg, 0.3, 4).size() == 15);
}

TEST_CASE("batching") {
    Dataset ds = labelled(10, 2);
    auto plain = batches(ds, 8);
    REQUIRE(plain.size() == 2);
    CHECK(plain[0].batch_size == 8);
    CHECK(plain[1].batch_size == 2);
    CHECK(plain[0].targets.shape() == std::vector<std::size_t>{8, 2});
    CHECK(plain[0].targets.at(1, 1) == 1.0);
    CHECK(plain[0].targets.at(1, 0) == 0.0);
    CHECK(plain[0].class_labels[1] == 1);
    CHECK(plain[1].token(0, 1) == ds.examples[8].token_ids[1]);
    CHECK(batches(ds, 8, std::nullopt, true).size() == 1);

    auto a = batches(ds, 4, 77);
    auto b = batches(ds, 4, 77);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].token_ids == b[i].token_ids);

    Dataset reg = labelled(3, 2);
    reg.task = regression_task();
    reg.examples[2].label = 4.25;
    auto rb = batches(reg, 3);
    CHECK(rb[0].targets.shape() == std::vector<std::size_t>{3, 1});
    CHECK(rb[0].targets.at(2, 0) == 4.25);
    CHECK_THROWS_AS(batches(ds, 0), ValidationError);
    CHECK(epoch_shuffle_seed(1, 1) != epoch_shuffle_seed(1, 2));
}

#include <doctest.h>

#include <cmath>
#include <limits>

#include "mixf/errors.h"
#include "mixf/gradcheck.h"
#include "mixf/ops.h"
#include "test_support.h"

using namespace mixf;
using testing::max_rel_error;
using testing::numeric_gradient;
using testing::random_tensor;
using testing::weighted_sum;

TEST_CASE("tensor keeps data length equal to the shape product") {
    Tensor t({2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
    CHECK_THROWS_AS(Tensor({0, 3}), DimensionError);
    Tensor v = Tensor::from_vector({1, 2, 3});
    CHECK(v.rows() == 1);
    CHECK(v.cols() == 3);
}

TEST_CASE("matmul examples") {
    auto id = Tensor::from_rows({{1, 0}, {0, 1}});
    auto b = Tensor::from_rows({{3, 4}, {5, 6}});
    CHECK(matmul(id, b).output.identical(b));

    auto r = matmul(Tensor::from_rows({{1, 2}}), Tensor::from_rows({{3}, {4}}));
    CHECK(r.output.shape() == std::vector<std::size_t>{1, 1});
    CHECK(r.output[0] == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    try {
        matmul(Tensor::matrix(2, 3), Tensor::matrix(2, 3));
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
    }
}

TEST_CASE("matmul backward matches central differences") {
    Rng rng(1);
    Tensor a = random_tensor(rng, {3, 4});
    Tensor b = random_tensor(rng, {4, 2});
    Tensor w = random_tensor(rng, {3, 2});
    auto r = matmul(a, b);
    Tensor up = w;
    auto grads = r.backward(up);
    auto fa = [&](const Tensor& x) { return weighted_sum(matmul(x, b).output, w); };
    auto fb = [&](const Tensor& x) { return weighted_sum(matmul(a, x).output, w); };
    CHECK(max_rel_error(grads[0], numeric_gradient(fa, a)) < 1e-6);
    CHECK(max_rel_error(grads[1], numeric_gradient(fb, b)) < 1e-6);
}

TEST_CASE("softmax rows") {
    auto s = softmax_rows(Tensor::from_rows({{0, 0, 0}})).output;
    for (double v : s.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    auto big = softmax_rows(Tensor::from_rows({{1000, 0}})).output;
    CHECK(big.all_finite());
    CHECK(big[0] == 1.0);
    CHECK(big[1] < 1e-300);

    Rng rng(2);
    Tensor x = random_tensor(rng, {2, 5});
    Tensor w = random_tensor(rng, {2, 5});
    auto g = softmax_rows(x).backward(w)[0];
    auto f = [&](const Tensor& t) { return weighted_sum(softmax_rows(t).output, w); };
    CHECK(max_rel_error(g, numeric_gradient(f, x)) < 1e-6);
}

TEST_CASE("softmax rows sum to one and stay in [0,1] on random inputs") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor x = random_tensor(rng, {3, 1 + rng.uniform_index(9)}, -50.0, 50.0);
        Tensor s = softmax_rows(x).output;
        for (std::size_t r = 0; r < s.rows(); ++r) {
            double total = 0.0;
            for (double v : s.row(r)) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                total += v;
            }
            CHECK(std::abs(total - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("layer norm examples and gradients") {
    Tensor ones = Tensor::from_vector({1, 1, 1, 1});
    Tensor zeros = Tensor::from_vector({0, 0, 0, 0});
    auto flat = layer_norm(Tensor::from_rows({{5, 5, 5, 5}}), ones, zeros, 1e-5).output;
    for (double v : flat.values()) CHECK(v == 0.0);

    auto two = layer_norm(Tensor::from_rows({{1, -1}}), Tensor::from_vector({1, 1}), Tensor::from_vector({0, 0}),
                          1e-12)
                   .output;
    CHECK(two[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(two[1] == doctest::Approx(-1.0).epsilon(1e-9));

    Rng rng(4);
    Tensor x = random_tensor(rng, {4, 8});
    Tensor gain = random_tensor(rng, {8});
    Tensor bias = random_tensor(rng, {8});
    Tensor w = random_tensor(rng, {4, 8});
    auto grads = layer_norm(x, gain, bias, 1e-5).backward(w);
    CHECK(max_rel_error(grads[0], numeric_gradient([&](const Tensor& t) {
                            return weighted_sum(layer_norm(t, gain, bias, 1e-5).output, w);
                        }, x)) < 1e-5);
    CHECK(max_rel_error(grads[1], numeric_gradient([&](const Tensor& t) {
                            return weighted_sum(layer_norm(x, t, bias, 1e-5).output, w);
                        }, gain)) < 1e-5);
    CHECK(max_rel_error(grads[2], numeric_gradient([&](const Tensor& t) {
                            return weighted_sum(layer_norm(x, gain, t, 1e-5).output, w);
                        }, bias)) < 1e-5);
    CHECK_THROWS_AS(layer_norm(x, gain, bias, 0.0), ValidationError);
}

TEST_CASE("gelu") {
    CHECK(gelu(Tensor::scalar(0.0)).output[0] == 0.0);
    CHECK(std::abs(gelu(Tensor::scalar(10.0)).output[0] - 10.0) < 1e-6);
    Rng rng(5);
    Tensor x = random_tensor(rng, {7});
    Tensor w = random_tensor(rng, {7});
    auto g = gelu(x).backward(w)[0];
    CHECK(max_rel_error(g, numeric_gradient([&](const Tensor& t) { return weighted_sum(gelu(t).output, w); }, x)) <
          1e-6);
}

TEST_CASE("cross entropy with soft targets") {
    Tensor uniform = Tensor::from_rows({{0.3, 0.3, 0.3, 0.3}});
    Tensor onehot = Tensor::from_rows({{0, 0, 1, 0}});
    CHECK(cross_entropy_soft(uniform, onehot).output[0] == doctest::Approx(std::log(4.0)).epsilon(1e-14));

    Rng rng(6);
    Tensor z = random_tensor(rng, {3, 4});
    Tensor p = testing::random_distribution_rows(rng, 3, 4);
    Tensor q = testing::random_distribution_rows(rng, 3, 4);
    Tensor mixed = p;
    for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] = 0.5 * p[i] + 0.5 * q[i];
    const double lhs = cross_entropy_soft(z, mixed).output[0];
    const double rhs = 0.5 * cross_entropy_soft(z, p).output[0] + 0.5 * cross_entropy_soft(z, q).output[0];
    CHECK(std::abs(lhs - rhs) < 1e-12);

    auto g = cross_entropy_soft(z, p).backward(Tensor::scalar(1.0));
    auto f = [&](const Tensor& t) { return cross_entropy_soft(t, p).output[0]; };
    CHECK(max_rel_error(g[0], numeric_gradient(f, z)) < 1e-6);
}

TEST_CASE("cross entropy rejects targets that are not distributions") {
    Tensor z = Tensor::from_rows({{1, 2}});
    CHECK_THROWS_AS(cross_entropy_soft(z, Tensor::from_rows({{0.6, 0.6}})), ValidationError);
    CHECK_THROWS_AS(cross_entropy_soft(z, Tensor::from_rows({{1.5, -0.5}})), ValidationError);
}

TEST_CASE("mse") {
    Tensor a = Tensor::from_rows({{1}, {2}});
    CHECK(mse(a, a).output[0] == 0.0);
    CHECK(mse(Tensor::from_rows({{1}}), Tensor::from_rows({{3}})).output[0] == 4.0);
    CHECK_THROWS_AS(mse(a, Tensor::from_rows({{1}})), DimensionError);

    Rng rng(7);
    Tensor pred = random_tensor(rng, {5, 1});
    Tensor target = random_tensor(rng, {5, 1});
    auto g = mse(pred, target).backward(Tensor::scalar(1.0));
    CHECK(max_rel_error(g[0], numeric_gradient([&](const Tensor& t) { return mse(t, target).output[0]; }, pred)) <
          1e-7);
    CHECK(max_rel_error(g[1], numeric_gradient([&](const Tensor& t) { return mse(pred, t).output[0]; }, target)) <
          1e-7);
}

TEST_CASE("grad_check reference cases") {
    ScalarFunction square = [](const std::vector<Tensor>& in) {
        const Tensor& x = in[0];
        double s = 0.0;
        for (double v : x.values()) s += v * v;
        return DualResult{Tensor::scalar(s), [x](const Tensor& up) {
                              Tensor g = x;
                              for (double& v : g.values()) v *= 2.0 * up[0];
                              return std::vector<Tensor>{g};
                          }};
    };
    auto report = grad_check(square, {Tensor::from_vector({1, 2})});
    CHECK(report.max_rel_error < 1e-9);
    CHECK(report.entries_checked == 2);

    ScalarFunction linear = [](const std::vector<Tensor>& in) {
        double s = 3.0 * in[0][0] - 2.0 * in[0][1];
        return DualResult{Tensor::scalar(s), [](const Tensor& up) {
                              return std::vector<Tensor>{Tensor::from_vector({3.0 * up[0], -2.0 * up[0]})};
                          }};
    };
    CHECK(grad_check(linear, {Tensor::from_vector({0.25, 0.5})}).max_rel_error < 1e-10);
}

TEST_CASE("grad_check flags a wrong gradient and a non-deterministic function") {
    ScalarFunction wrong = [](const std::vector<Tensor>& in) {
        return DualResult{Tensor::scalar(in[0][0] * in[0][0]),
                          [](const Tensor&) { return std::vector<Tensor>{Tensor::from_vector({0.0})}; }};
    };
    CHECK_FALSE(grad_check(wrong, {Tensor::from_vector({3.0})}).passed);

    auto calls = std::make_shared<int>(0);
    ScalarFunction flaky = [calls](const std::vector<Tensor>& in) {
        double v = in[0][0] + (*calls)++;
        return DualResult{Tensor::scalar(v), [](const Tensor&) { return std::vector<Tensor>{Tensor::scalar(1.0)}; }};
    };
    CHECK_THROWS_AS(grad_check(flaky, {Tensor::scalar(1.0)}), NonDeterministicError);
    CHECK(relative_error(0.0, 1e-8) == doctest::Approx(1e-8));
    CHECK(relative_error(100.0, 101.0) == doctest::Approx(1.0 / 101.0));
}

// Every op, random inputs in [-2, 2]: zero upstream gives zero gradients,
// outputs are bit-identical across calls, gradients agree with differences.
TEST_CASE("property: every primitive is pure and gradient-exact") {
    Rng rng(8);
    using Op = std::function<DualResult(const std::vector<Tensor>&)>;
    struct Case {
        const char* name;
        Op op;
        std::vector<std::vector<std::size_t>> shapes;
    };
    std::vector<Case> cases = {
        {"matmul", [](const auto& in) { return matmul(in[0], in[1]); }, {{3, 4}, {4, 2}}},
        {"transpose", [](const auto& in) { return transpose(in[0]); }, {{3, 2}}},
        {"add", [](const auto& in) { return add(in[0], in[1]); }, {{2, 3}, {2, 3}}},
        {"add_row_bias", [](const auto& in) { return add_row_bias(in[0], in[1]); }, {{2, 3}, {3}}},
        {"scale", [](const auto& in) { return scale(in[0], -1.7); }, {{2, 3}}},
        {"softmax_rows", [](const auto& in) { return softmax_rows(in[0]); }, {{3, 4}}},
        {"layer_norm", [](const auto& in) { return layer_norm(in[0], in[1], in[2], 1e-5); }, {{3, 5}, {5}, {5}}},
        {"gelu", [](const auto& in) { return gelu(in[0]); }, {{2, 4}}},
        {"tanh", [](const auto& in) { return tanh_act(in[0]); }, {{2, 4}}},
        {"mse", [](const auto& in) { return mse(in[0], in[1]); }, {{4, 1}, {4, 1}}},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<Tensor> inputs;
            for (const auto& s : c.shapes) inputs.push_back(random_tensor(rng, s));
            DualResult first = c.op(inputs);
            DualResult second = c.op(inputs);
            CHECK(first.output.identical(second.output));
            CHECK(first.output.all_finite());

            for (const auto& g : first.backward(first.output.zeros_like()))
                for (double v : g.values()) CHECK(v == 0.0);

            Tensor w = random_tensor(rng, first.output.shape());
            ScalarFunction f = [&](const std::vector<Tensor>& in) { return contract(c.op(in), w); };
            auto report = grad_check(f, inputs, 1e-5, 1e-4);
            CHECK(report.max_rel_error < 1e-4);
        }
    }
}

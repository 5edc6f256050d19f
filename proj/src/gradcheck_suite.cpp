#include "mixf/gradcheck_suite.h"

#include <chrono>

#include "mixf/mixup.h"
#include "mixf/rng.h"
#include "mixf/trainer.h"

namespace mixf {

namespace {

constexpr double kOpTolerance = 1e-4;
constexpr double kModelTolerance = 1e-3;

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -2.0, double hi = 2.0) {
    Tensor t(std::move(shape), 0.0);
    for (double& v : t.values()) v = lo + (hi - lo) * rng.uniform();
    return t;
}

Tensor random_distribution_rows(Rng& rng, std::size_t rows, std::size_t cols) {
    Tensor t = random_tensor(rng, {rows, cols}, 0.05, 1.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double total = 0.0;
        for (double v : t.row(r)) total += v;
        for (double& v : t.row(r)) v /= total;
    }
    return t;
}

// Scalarizes a non-scalar op with a fixed random weighting of its output.
ScalarFunction contracted(std::function<DualResult(const std::vector<Tensor>&)> op, Tensor weights) {
    return [op = std::move(op), weights = std::move(weights)](const std::vector<Tensor>& in) {
        return contract(op(in), weights);
    };
}

GradCheckComponent op_component(std::string name, ScalarFunction f, std::vector<Tensor> inputs, bool corrupt) {
    if (corrupt) f = corrupt_backward(std::move(f));
    return {std::move(name), kOpTolerance,
            [f = std::move(f), inputs = std::move(inputs)] { return grad_check(f, inputs, 1e-5, kOpTolerance); }};
}

GradCheckComponent model_component(std::string name, HeadKind head, std::optional<MixPlan> plan, bool corrupt) {
    const ModelConfig config = tiny_model_config(head);
    ScalarFunction f = [config, plan, batch = tiny_batch(head)](const std::vector<Tensor>& in) {
        Parameters p(config);
        p.assign(in);
        return step_loss_function(p, batch, plan);
    };
    if (corrupt) f = corrupt_backward(std::move(f));
    return {std::move(name), kModelTolerance, [f = std::move(f), config] {
                // Random biases and gains so every parameter is exercised away from init values.
                Parameters p = init_params(config);
                Rng rng(99);
                for (std::size_t i = 0; i < p.count(); ++i) {
                    if (!p.name(i).ends_with(".weight")) {
                        for (double& v : p.tensor(i).values()) v += 0.5 * (2.0 * rng.uniform() - 1.0);
                    }
                }
                return grad_check(f, p.tensors(), 1e-5, kModelTolerance);
            }};
}

}  // namespace

ScalarFunction corrupt_backward(ScalarFunction f) {
    return [f = std::move(f)](const std::vector<Tensor>& in) {
        DualResult r = f(in);
        return DualResult{r.output, [inner = std::move(r.backward)](const Tensor& up) {
                              auto grads = inner(up);
                              for (auto& g : grads)
                                  for (double& v : g.values()) v = 1.5 * v + 0.01;
                              return grads;
                          }};
    };
}

ModelConfig tiny_model_config(HeadKind head) {
    ModelConfig c;
    c.vocab_size = 12;
    c.d_model = 8;
    c.n_heads = 2;
    c.n_layers = 1;
    c.d_ff = 16;
    c.max_len = 4;
    c.head = head;
    c.n_classes = 2;
    c.dropout_rate = 0.0;
    c.seed = 5;
    return c;
}

EncodedBatch tiny_batch(HeadKind head) {
    EncodedBatch b;
    b.batch_size = 2;
    b.seq_len = 4;
    b.token_ids = {2, 5, 7, 3, 2, 9, 3, 0};
    b.attention_mask = {1, 1, 1, 1, 1, 1, 1, 0};
    if (head == HeadKind::classification) {
        b.class_labels = {1, 0};
        b.targets = Tensor::from_rows({{0.0, 1.0}, {1.0, 0.0}});
    } else {
        b.targets = Tensor::from_rows({{0.8}, {-0.3}});
    }
    return b;
}

std::vector<GradCheckComponent> gradcheck_components(std::string_view corrupt) {
    Rng rng(2024);
    std::vector<GradCheckComponent> out;
    auto add = [&](std::string name, ScalarFunction f, std::vector<Tensor> inputs) {
        const bool broken = name == corrupt;
        out.push_back(op_component(std::move(name), std::move(f), std::move(inputs), broken));
    };

    add("matmul", contracted([](const auto& in) { return matmul(in[0], in[1]); }, random_tensor(rng, {3, 2})),
        {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 2})});
    add("transpose", contracted([](const auto& in) { return transpose(in[0]); }, random_tensor(rng, {4, 3})),
        {random_tensor(rng, {3, 4})});
    add("add_row_bias",
        contracted([](const auto& in) { return add_row_bias(in[0], in[1]); }, random_tensor(rng, {3, 4})),
        {random_tensor(rng, {3, 4}), random_tensor(rng, {4})});
    add("softmax_rows", contracted([](const auto& in) { return softmax_rows(in[0]); }, random_tensor(rng, {2, 5})),
        {random_tensor(rng, {2, 5})});
    add("layer_norm",
        contracted([](const auto& in) { return layer_norm(in[0], in[1], in[2], 1e-5); }, random_tensor(rng, {4, 8})),
        {random_tensor(rng, {4, 8}), random_tensor(rng, {8}), random_tensor(rng, {8})});
    add("gelu", contracted([](const auto& in) { return gelu(in[0]); }, random_tensor(rng, {6})),
        {random_tensor(rng, {6})});
    add("tanh", contracted([](const auto& in) { return tanh_act(in[0]); }, random_tensor(rng, {6})),
        {random_tensor(rng, {6})});
    {
        // Targets stay fixed: perturbing them would leave the simplex.
        Tensor targets = random_distribution_rows(rng, 3, 4);
        add("cross_entropy_soft",
            [targets](const std::vector<Tensor>& in) {
                DualResult r = cross_entropy_soft(in[0], targets);
                return DualResult{r.output, [b = std::move(r.backward)](const Tensor& up) {
                                      return std::vector<Tensor>{b(up)[0]};
                                  }};
            },
            {random_tensor(rng, {3, 4})});
    }
    add("mse", [](const std::vector<Tensor>& in) { return mse(in[0], in[1]); },
        {random_tensor(rng, {4, 1}), random_tensor(rng, {4, 1})});
    {
        MixPlan plan{0.3, {2, 0, 3, 1}};
        add("mix_representations",
            contracted([plan](const auto& in) { return mix_representations(in[0], plan); },
                       random_tensor(rng, {4, 3})),
            {random_tensor(rng, {4, 3})});
    }
    {
        ModelConfig config = tiny_model_config();
        add("head_forward",
            [config](const std::vector<Tensor>& in) {
                Parameters p(config);
                p.at("head.weight") = in[0];
                p.at("head.bias") = in[1];
                ModelDual head = head_forward(p, in[2]);
                Tensor targets = Tensor::from_rows({{1, 0}, {0, 1}, {0.5, 0.5}});
                DualResult loss = cross_entropy_soft(head.output, targets);
                return DualResult{loss.output, [p, head, loss](const Tensor& up) {
                                      Parameters grads = p.zeros_like();
                                      Tensor dpooled = head.backward(loss.backward(up)[0], grads);
                                      return std::vector<Tensor>{grads.at("head.weight"), grads.at("head.bias"),
                                                                 dpooled};
                                  }};
            },
            {random_tensor(rng, {8, 2}), random_tensor(rng, {2}), random_tensor(rng, {3, 8}, -1.0, 1.0)});
    }

    out.push_back(model_component("full_step", HeadKind::classification, std::nullopt, corrupt == "full_step"));
    out.push_back(model_component("full_step_mixup", HeadKind::classification, MixPlan{0.5, {1, 0}},
                                  corrupt == "full_step_mixup"));
    out.push_back(model_component("full_step_regression_mixup", HeadKind::regression, MixPlan{0.25, {1, 0}},
                                  corrupt == "full_step_regression_mixup"));
    return out;
}

SuiteOutcome run_gradcheck_suite(const std::vector<GradCheckComponent>& components) {
    SuiteOutcome outcome;
    const auto start = std::chrono::steady_clock::now();
    for (const auto& c : components) {
        ComponentOutcome co{c.name, c.tolerance, {}, {}};
        try {
            co.report = c.run();
        } catch (const std::exception& e) {
            co.error = e.what();
        }
        if (!co.passed()) outcome.offenders.push_back(c.name);
        outcome.components.push_back(std::move(co));
    }
    outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return outcome;
}

}  // namespace mixf

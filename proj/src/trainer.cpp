#include "mixf/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mixf/errors.h"

namespace mixf {

namespace {

void require_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) throw NonFiniteError(std::string("non-finite values in ") + what);
}

DualResult loss_for(const Parameters& params, const Tensor& outputs, const Tensor& targets) {
    if (params.config().head == HeadKind::classification) return cross_entropy_soft(outputs, targets);
    return mse(outputs, targets);
}

void check_task_matches(const ModelConfig& model, const Dataset& ds, const char* which) {
    const bool cls = ds.task.is_classification();
    if (cls != (model.head == HeadKind::classification) || (cls && model.n_classes != ds.task.n_classes)) {
        throw ValidationError(std::string(which) + " dataset task does not match the model head");
    }
    if (ds.max_len > model.max_len) {
        throw ValidationError(std::string(which) + " dataset max_len exceeds the model's max_len");
    }
}

}  // namespace

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ValidationError("train config: " + msg); };
    if (epochs < 1) fail("epochs must be at least 1");
    if (batch_size == 0) fail("batch_size must be at least 1");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("adam betas must be in [0, 1)");
    if (!(adam_eps > 0.0)) fail("adam eps must be positive");
    if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
    if (grad_clip_norm && !(*grad_clip_norm > 0.0)) fail("grad_clip_norm must be positive");
    mixup.validate();
}

TrainRngs::TrainRngs(std::uint64_t seed) : dropout(mix_seed(seed, 1)), mixup(mix_seed(seed, 2)) {}

StepResult train_step(const Parameters& params, const EncodedBatch& batch, bool mix_active,
                      const MixupConfig& mixup, TrainRngs& rngs, const StepOptions& options) {
    ModelDual enc = encode(params, batch, options.train_mode, &rngs.dropout);
    require_finite(enc.output, "pooled encoder output");

    StepResult result{0.0, params.zeros_like(), std::nullopt, enc.output, batch.targets};
    std::optional<DualResult> mixed;
    if (mix_active) {
        MixPlan plan = options.plan ? *options.plan : make_plan(batch.batch_size, mixup, rngs.mixup);
        mixed = mix_representations(enc.output, plan);
        result.head_input = mixed->output;
        result.targets = mix_labels(batch.targets, plan);
        result.plan = std::move(plan);
    }

    ModelDual head = head_forward(params, result.head_input);
    require_finite(head.output, "head output");
    DualResult loss = loss_for(params, head.output, result.targets);
    require_finite(loss.output, "loss");
    result.loss = loss.output[0];

    Tensor d_head_input = head.backward(loss.backward(Tensor::scalar(1.0))[0], result.grads);
    Tensor d_pooled = mixed ? mixed->backward(d_head_input)[0] : d_head_input;
    enc.backward(d_pooled, result.grads);
    for (std::size_t i = 0; i < result.grads.count(); ++i) {
        if (!result.grads.tensor(i).all_finite()) {
            throw NonFiniteError("non-finite gradient for '" + result.grads.name(i) + "'");
        }
    }
    return result;
}

DualResult step_loss_function(const Parameters& params, const EncodedBatch& batch,
                              const std::optional<MixPlan>& plan) {
    ModelDual enc = encode(params, batch, false, nullptr);
    Tensor head_input = enc.output;
    Tensor targets = batch.targets;
    std::optional<DualResult> mixed;
    if (plan) {
        mixed = mix_representations(enc.output, *plan);
        head_input = mixed->output;
        targets = mix_labels(batch.targets, *plan);
    }
    ModelDual head = head_forward(params, head_input);
    DualResult loss = loss_for(params, head.output, targets);
    return {loss.output, [enc, mixed, head, loss, like = params.zeros_like()](const Tensor& up) {
                Parameters grads = like;
                Tensor d = head.backward(loss.backward(up)[0], grads);
                if (mixed) d = mixed->backward(d)[0];
                enc.backward(d, grads);
                return grads.tensors();
            }};
}

void adam_update_tensor(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, long step,
                        const TrainConfig& config, bool decay, double grad_scale) {
    if (step < 1) throw ValidationError("adam: step count must be at least 1");
    const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    const double lr = config.learning_rate;
    const double wd = decay ? config.weight_decay : 0.0;
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i] * grad_scale;
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        param[i] -= lr * (m_hat / (std::sqrt(v_hat) + config.adam_eps) + wd * param[i]);
    }
}

double global_grad_norm(const Parameters& grads) {
    double total = 0.0;
    for (const auto& t : grads.tensors())
        for (double g : t.values()) total += g * g;
    return std::sqrt(total);
}

AdamStats adam_update(Parameters& params, const Parameters& grads, AdamState& state, const TrainConfig& config) {
    AdamStats stats;
    stats.grad_norm = global_grad_norm(grads);
    if (config.grad_clip_norm && stats.grad_norm > *config.grad_clip_norm) {
        stats.clip_scale = *config.grad_clip_norm / stats.grad_norm;
    }
    ++state.step;
    for (std::size_t i = 0; i < params.count(); ++i) {
        adam_update_tensor(params.tensor(i), grads.tensor(i), state.m.tensor(i), state.v.tensor(i), state.step,
                           config, params.decays(i), stats.clip_scale);
    }
    return stats;
}

Predictions predict(const Parameters& params, const Dataset& ds, std::size_t batch_size) {
    Predictions out;
    for (const auto& batch : batches(ds, batch_size)) {
        ModelDual enc = encode(params, batch, false, nullptr);
        ModelDual head = head_forward(params, enc.output);
        const Tensor& logits = head.output;
        for (std::size_t r = 0; r < logits.rows(); ++r) {
            auto row = logits.row(r);
            if (params.config().head == HeadKind::classification) {
                out.classes.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
            } else {
                out.values.push_back(row[0]);
            }
        }
    }
    return out;
}

EvalResult evaluate(const Parameters& params, const Dataset& ds) {
    if (ds.size() == 0) throw ValidationError("evaluate: empty dataset");
    Predictions pred = predict(params, ds);
    EvalResult result;
    result.metric_name = to_string(ds.task.metric);
    result.n = ds.size();
    if (ds.task.is_classification()) {
        std::vector<int> gold;
        gold.reserve(ds.size());
        for (const auto& ex : ds.examples) gold.push_back(static_cast<int>(ex.label));
        if (ds.task.metric == MetricKind::matthews) {
            result.value = matthews_corr(pred.classes, gold);
            auto constant = [](const std::vector<int>& v) {
                return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
            };
            result.degenerate = constant(pred.classes) || constant(gold);
        } else {
            result.value = accuracy(pred.classes, gold);
        }
    } else {
        std::vector<double> gold;
        gold.reserve(ds.size());
        for (const auto& ex : ds.examples) gold.push_back(ex.label);
        if (ds.size() < 2) throw ValidationError("evaluate: spearman needs at least 2 examples");
        result.value = spearman_corr(pred.values, gold);
        result.degenerate = is_constant(pred.values) || is_constant(gold);
    }
    return result;
}

TrainingResult run_training(const ModelConfig& model_config, const TrainConfig& train_config,
                            const Dataset& train_ds, const Dataset& dev_ds, const EpochCallback& on_epoch) {
    model_config.validate();
    train_config.validate();
    check_task_matches(model_config, train_ds, "train");
    check_task_matches(model_config, dev_ds, "dev");
    if (train_ds.size() == 0) throw ValidationError("run_training: empty training set");

    TrainingResult result{init_params(model_config), {}};
    AdamState adam(result.params);
    TrainRngs rngs(train_config.seed);

    for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        EpochReport report;
        report.epoch = epoch;
        report.mixup_active = is_active(epoch, train_config.epochs, train_config.mixup);
        report.lambda_policy = report.mixup_active ? describe(train_config.mixup.lambda) : "none";

        double loss_sum = 0.0;
        double lambda_sum = 0.0;
        auto epoch_batches = batches(train_ds, train_config.batch_size, epoch_shuffle_seed(train_config.seed, epoch));
        for (std::size_t s = 0; s < epoch_batches.size(); ++s) {
            StepResult step = [&] {
                try {
                    return train_step(result.params, epoch_batches[s], report.mixup_active, train_config.mixup,
                                      rngs);
                } catch (const NonFiniteError& e) {
                    throw NonFiniteError("epoch " + std::to_string(epoch) + ", step " + std::to_string(s + 1) +
                                         ": " + e.what());
                }
            }();
            loss_sum += step.loss;
            if (step.plan) lambda_sum += step.plan->lambda;
            adam_update(result.params, step.grads, adam, train_config);
        }
        report.steps = epoch_batches.size();
        report.mean_train_loss = loss_sum / static_cast<double>(report.steps);
        report.mean_lambda = report.mixup_active ? lambda_sum / static_cast<double>(report.steps) : 1.0;
        report.dev_metric = evaluate(result.params, dev_ds);
        report.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - start)
                                  .count();
        if (on_epoch) on_epoch(report);
        result.reports.push_back(std::move(report));
    }
    return result;
}

}  // namespace mixf

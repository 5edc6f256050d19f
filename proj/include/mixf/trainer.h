#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mixf/data.h"
#include "mixf/metrics.h"
#include "mixf/mixup.h"
#include "mixf/model.h"
#include "mixf/rng.h"

namespace mixf {

struct TrainConfig {
    int epochs = 3;
    std::size_t batch_size = 8;
    double learning_rate = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    std::optional<double> grad_clip_norm = 1.0;
    std::uint64_t seed = 0;
    MixupConfig mixup;

    void validate() const;
};

/// Independent random streams owned by a training run. Mixing plans draw
/// from their own stream so turning mixup on never shifts dropout masks.
struct TrainRngs {
    Rng dropout;
    Rng mixup;

    explicit TrainRngs(std::uint64_t seed);
};

struct StepOptions {
    bool train_mode = true;            // dropout on
    std::optional<MixPlan> plan;       // use this plan instead of drawing one
};

struct StepResult {
    double loss = 0.0;
    Parameters grads;
    std::optional<MixPlan> plan;       // set when the step mixed
    Tensor head_input;                 // pooled or mixed representation
    Tensor targets;                    // labels the loss was computed against
};

/// Forward and backward of one batch: encode, optional mix of pooled
/// representations and labels, head, loss.
StepResult train_step(const Parameters& params, const EncodedBatch& batch, bool mix_active,
                      const MixupConfig& mixup, TrainRngs& rngs, const StepOptions& options = {});

/// Loss of a batch for fixed params, dropout off, with an optional fixed plan.
/// Used for gradient checking.
DualResult step_loss_function(const Parameters& params, const EncodedBatch& batch,
                              const std::optional<MixPlan>& plan);

struct AdamState {
    Parameters m;
    Parameters v;
    long step = 0;

    explicit AdamState(const Parameters& like) : m(like.zeros_like()), v(like.zeros_like()) {}
};

/// Single-tensor Adam update with bias correction; grad_scale multiplies
/// the raw gradient (global-norm clipping) and weight decay is decoupled.
void adam_update_tensor(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, long step,
                        const TrainConfig& config, bool decay, double grad_scale = 1.0);

struct AdamStats {
    double grad_norm = 0.0;
    double clip_scale = 1.0;
};

double global_grad_norm(const Parameters& grads);

/// Increments state.step and updates every tensor in params.
AdamStats adam_update(Parameters& params, const Parameters& grads, AdamState& state,
                      const TrainConfig& config);

struct EpochReport {
    int epoch = 0;
    bool mixup_active = false;
    std::string lambda_policy;
    double mean_lambda = 1.0;  // average lambda over mixed steps; 1 when inactive
    double mean_train_loss = 0.0;
    std::size_t steps = 0;
    EvalResult dev_metric;
    long long wall_time_ms = 0;
};

struct TrainingResult {
    Parameters params;
    std::vector<EpochReport> reports;
};

/// Argmax classes (classification) or raw outputs (regression) for a dataset.
struct Predictions {
    std::vector<int> classes;
    std::vector<double> values;
};
Predictions predict(const Parameters& params, const Dataset& ds, std::size_t batch_size = 64);

/// Dropout off, no mixup; scored with the dataset's task metric.
EvalResult evaluate(const Parameters& params, const Dataset& ds);

using EpochCallback = std::function<void(const EpochReport&)>;

TrainingResult run_training(const ModelConfig& model_config, const TrainConfig& train_config,
                            const Dataset& train_ds, const Dataset& dev_ds,
                            const EpochCallback& on_epoch = {});

}  // namespace mixf

#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "mixf/ops.h"
#include "mixf/rng.h"
#include "mixf/tensor.h"

namespace mixf {

struct FixedLambda {
    double value = 0.5;
};

struct BetaLambda {
    double alpha = 1.0;
};

using LambdaPolicy = std::variant<FixedLambda, BetaLambda>;

/// Mix in every epoch.
struct AlwaysActive {};
/// Mix only in epochs after floor(total / 2); epochs 2..3 of 3.
struct LastHalf {};
/// Mix in the listed 1-based epochs.
struct EpochSet {
    std::vector<int> epochs;
};

using MixupSchedule = std::variant<AlwaysActive, LastHalf, EpochSet>;

struct MixupConfig {
    bool enabled = true;
    LambdaPolicy lambda = FixedLambda{0.5};
    MixupSchedule schedule = LastHalf{};

    void validate() const;
};

std::string describe(const LambdaPolicy& policy);
std::string describe(const MixupSchedule& schedule);

/// One mixing coefficient for the batch and the partner of every row.
struct MixPlan {
    double lambda = 1.0;
    std::vector<std::size_t> perm;
};

double sample_lambda(const MixupConfig& config, Rng& rng);

/// Draws lambda first, then a Fisher-Yates permutation of 0..batch_size-1.
MixPlan make_plan(std::size_t batch_size, const MixupConfig& config, Rng& rng);

/// out[k] = lambda * h[k] + (1 - lambda) * h[perm[k]].
///
/// The backward pass routes lambda * g[k] to row k and (1 - lambda) * g[k]
/// to row perm[k], so both members of a pair are trained. A coefficient that
/// is exactly zero contributes nothing, which keeps the lambda = 1 and
/// lambda = 0 endpoints bit-exact.
DualResult mix_representations(const Tensor& h, const MixPlan& plan);

/// Same convex combination applied to label rows (one-hot, soft or scalar).
Tensor mix_labels(const Tensor& labels, const MixPlan& plan);

/// Whether mixup runs in a 1-based epoch out of total_epochs.
bool is_active(int epoch, int total_epochs, const MixupConfig& config);

}  // namespace mixf

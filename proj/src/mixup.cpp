#include "mixf/mixup.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mixf/errors.h"

namespace mixf {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_plan(std::size_t rows, const MixPlan& plan, const char* op) {
    if (plan.perm.size() != rows) {
        throw ValidationError(std::string(op) + ": plan covers " + std::to_string(plan.perm.size()) +
                              " rows, batch has " + std::to_string(rows));
    }
    for (std::size_t p : plan.perm) {
        if (p >= rows) throw ValidationError(std::string(op) + ": permutation entry out of range");
    }
    if (!(plan.lambda >= 0.0 && plan.lambda <= 1.0)) {
        throw ValidationError(std::string(op) + ": lambda outside [0, 1]");
    }
}

// Row-wise convex combination with exact endpoints.
Tensor combine_rows(const Tensor& x, const MixPlan& plan) {
    const double lam = plan.lambda;
    const double other = 1.0 - lam;
    Tensor out = x.zeros_like();
    for (std::size_t k = 0; k < x.rows(); ++k) {
        auto self = x.row(k);
        auto partner = x.row(plan.perm[k]);
        auto dst = out.row(k);
        for (std::size_t c = 0; c < dst.size(); ++c) {
            if (other == 0.0) {
                dst[c] = self[c];
            } else if (lam == 0.0) {
                dst[c] = partner[c];
            } else {
                dst[c] = lam * self[c] + other * partner[c];
            }
        }
    }
    return out;
}

}  // namespace

void MixupConfig::validate() const {
    std::visit(overloaded{
                   [](const FixedLambda& f) {
                       if (!(f.value >= 0.0 && f.value <= 1.0)) {
                           throw ValidationError("mixup: fixed lambda must be in [0, 1]");
                       }
                   },
                   [](const BetaLambda& b) {
                       if (!(b.alpha > 0.0) || !std::isfinite(b.alpha)) {
                           throw ValidationError("mixup: beta alpha must be positive");
                       }
                   }},
               lambda);
    if (const auto* set = std::get_if<EpochSet>(&schedule)) {
        for (int e : set->epochs) {
            if (e < 1) throw ValidationError("mixup: epoch_set entries are 1-based");
        }
    }
}

std::string describe(const LambdaPolicy& policy) {
    std::ostringstream os;
    std::visit(overloaded{[&](const FixedLambda& f) { os << "fixed(" << f.value << ")"; },
                          [&](const BetaLambda& b) { os << "beta(" << b.alpha << ")"; }},
               policy);
    return os.str();
}

std::string describe(const MixupSchedule& schedule) {
    return std::visit(overloaded{[](const AlwaysActive&) { return std::string("always"); },
                                 [](const LastHalf&) { return std::string("last_half"); },
                                 [](const EpochSet& s) {
                                     std::string out = "epoch_set[";
                                     for (std::size_t i = 0; i < s.epochs.size(); ++i) {
                                         if (i) out += ',';
                                         out += std::to_string(s.epochs[i]);
                                     }
                                     return out + "]";
                                 }},
                      schedule);
}

double sample_lambda(const MixupConfig& config, Rng& rng) {
    return std::visit(overloaded{[](const FixedLambda& f) { return f.value; },
                                 [&](const BetaLambda& b) { return rng.beta(b.alpha, b.alpha); }},
                      config.lambda);
}

MixPlan make_plan(std::size_t batch_size, const MixupConfig& config, Rng& rng) {
    if (batch_size == 0) throw ValidationError("make_plan: batch_size must be at least 1");
    MixPlan plan;
    plan.lambda = sample_lambda(config, rng);
    plan.perm.resize(batch_size);
    std::iota(plan.perm.begin(), plan.perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(plan.perm));
    return plan;
}

DualResult mix_representations(const Tensor& h, const MixPlan& plan) {
    if (h.rank() != 2) throw DimensionError("mix_representations: expected [b x d], got " + h.shape_string());
    check_plan(h.rows(), plan, "mix_representations");
    Tensor out = combine_rows(h, plan);
    return {out, [plan, shape = h.shape()](const Tensor& up) {
                if (up.shape() != shape) throw DimensionError("mix_representations backward: bad upstream shape");
                const double lam = plan.lambda;
                const double other = 1.0 - lam;
                Tensor dh(shape, 0.0);
                for (std::size_t k = 0; k < up.rows(); ++k) {
                    auto g = up.row(k);
                    if (lam != 0.0) {
                        auto self = dh.row(k);
                        for (std::size_t c = 0; c < g.size(); ++c) self[c] += lam * g[c];
                    }
                    if (other != 0.0) {
                        auto partner = dh.row(plan.perm[k]);
                        for (std::size_t c = 0; c < g.size(); ++c) partner[c] += other * g[c];
                    }
                }
                return std::vector<Tensor>{dh};
            }};
}

Tensor mix_labels(const Tensor& labels, const MixPlan& plan) {
    if (labels.rank() != 2) throw DimensionError("mix_labels: expected [b x c], got " + labels.shape_string());
    check_plan(labels.rows(), plan, "mix_labels");
    return combine_rows(labels, plan);
}

bool is_active(int epoch, int total_epochs, const MixupConfig& config) {
    if (total_epochs < 1 || epoch < 1 || epoch > total_epochs) {
        throw ValidationError("is_active: epoch " + std::to_string(epoch) + " outside [1, " +
                              std::to_string(total_epochs) + "]");
    }
    if (!config.enabled) return false;
    return std::visit(overloaded{[](const AlwaysActive&) { return true; },
                                 [&](const LastHalf&) { return epoch > total_epochs / 2; },
                                 [&](const EpochSet& s) {
                                     return std::find(s.epochs.begin(), s.epochs.end(), epoch) !=
                                            s.epochs.end();
                                 }},
                      config.schedule);
}

}  // namespace mixf

#pragma once

#include <functional>
#include <vector>

#include "mixf/tensor.h"

namespace mixf {

/// Output of a differentiable primitive together with its vector-Jacobian
/// product. backward(upstream) returns one gradient per input, in argument
/// order, each shaped like that input. upstream must be shaped like output.
struct DualResult {
    Tensor output;
    std::function<std::vector<Tensor>(const Tensor& upstream)> backward;
};

DualResult matmul(const Tensor& a, const Tensor& b);
DualResult transpose(const Tensor& x);
DualResult add(const Tensor& a, const Tensor& b);
/// x[m x n] + bias[n] broadcast over rows.
DualResult add_row_bias(const Tensor& x, const Tensor& bias);
DualResult scale(const Tensor& x, double factor);
/// Elementwise product with a constant tensor (dropout masks); only x gets a gradient.
DualResult multiply_const(const Tensor& x, const Tensor& factor);

/// Row-wise softmax with max subtraction.
DualResult softmax_rows(const Tensor& x);

/// Per-row normalization scaled by gain and shifted by bias. Gradients are
/// returned for x, gain and bias.
DualResult layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Tanh-approximation GELU and the exact derivative of that approximation.
DualResult gelu(const Tensor& x);
DualResult tanh_act(const Tensor& x);

/// Mean over rows of -sum_k targets[k] * log_softmax(logits)[k]. Targets
/// must be probability rows. Gradients are returned for logits and targets.
DualResult cross_entropy_soft(const Tensor& logits, const Tensor& targets);

/// Mean squared error over all entries; gradients for pred and target.
DualResult mse(const Tensor& pred, const Tensor& target);

/// Scalar output of a random linear functional sum(weights * r.output).
/// Used to gradient-check ops whose output is not a scalar.
DualResult contract(DualResult r, const Tensor& weights);

}  // namespace mixf

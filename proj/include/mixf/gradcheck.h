#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mixf/ops.h"

namespace mixf {

/// Scalar-valued differentiable function of a list of tensors.
using ScalarFunction = std::function<DualResult(const std::vector<Tensor>&)>;

/// f returned different values for identical inputs.
class NonDeterministicError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GradCheckReport {
    std::vector<double> max_rel_error_per_input;
    double max_rel_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t entries_checked = 0;
    bool passed = true;
};

/// |a - n| / max(1, |a|, |n|).
double relative_error(double analytic, double numeric);

/// Compares f's backward against central differences
/// (f(x + h e) - f(x - h e)) / 2h for every coordinate of every input.
GradCheckReport grad_check(const ScalarFunction& f, const std::vector<Tensor>& inputs,
                           double h = 1e-5, double tol = 1e-4);

}  // namespace mixf

#include "mixf/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "mixf/errors.h"

namespace mixf {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const ScalarFunction& f, const std::vector<Tensor>& inputs, double h,
                           double tol) {
    if (!(h > 0.0)) throw ValidationError("grad_check: step h must be positive");

    DualResult base = f(inputs);
    if (base.output.size() != 1) {
        throw DimensionError("grad_check: function output must be scalar, got " +
                             base.output.shape_string());
    }
    DualResult again = f(inputs);
    if (!again.output.identical(base.output)) {
        throw NonDeterministicError("grad_check: two forward passes on identical inputs disagree (" +
                                    std::to_string(base.output[0]) + " vs " +
                                    std::to_string(again.output[0]) + ")");
    }
    std::vector<Tensor> analytic = base.backward(Tensor::scalar(1.0));
    if (analytic.size() != inputs.size()) {
        throw DimensionError("grad_check: backward returned " + std::to_string(analytic.size()) +
                             " gradients for " + std::to_string(inputs.size()) + " inputs");
    }

    GradCheckReport report;
    report.max_rel_error_per_input.assign(inputs.size(), 0.0);
    std::vector<Tensor> probe = inputs;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!analytic[i].same_shape(inputs[i])) {
            throw DimensionError("grad_check: gradient " + std::to_string(i) + " has shape " +
                                 analytic[i].shape_string() + ", input has " +
                                 inputs[i].shape_string());
        }
        for (std::size_t j = 0; j < inputs[i].size(); ++j) {
            const double original = inputs[i][j];
            probe[i][j] = original + h;
            const double plus = f(probe).output[0];
            probe[i][j] = original - h;
            const double minus = f(probe).output[0];
            probe[i][j] = original;

            const double numeric = (plus - minus) / (2.0 * h);
            double err = relative_error(analytic[i][j], numeric);
            if (!std::isfinite(err)) err = INFINITY;
            ++report.entries_checked;
            report.max_rel_error_per_input[i] = std::max(report.max_rel_error_per_input[i], err);
            if (err > report.max_rel_error || report.entries_checked == 1) {
                report.max_rel_error = err;
                report.worst_input = i;
                report.worst_index = j;
                report.worst_analytic = analytic[i][j];
                report.worst_numeric = numeric;
            }
        }
    }
    report.passed = report.max_rel_error < tol;
    return report;
}

}  // namespace mixf

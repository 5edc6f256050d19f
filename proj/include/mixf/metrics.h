#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mixf {

struct EvalResult {
    std::string metric_name;
    double value = 0.0;
    std::size_t n = 0;
    /// Set when a correlation was undefined (zero variance or a degenerate
    /// confusion matrix) and reported as 0.
    bool degenerate = false;
};

double accuracy(std::span<const int> pred, std::span<const int> gold);

/// Binary Matthews correlation; 0 when any marginal of the confusion matrix is empty.
double matthews_corr(std::span<const int> pred, std::span<const int> gold);

/// Centered Pearson correlation; 0 when either input has zero variance.
double pearson_corr(std::span<const double> x, std::span<const double> y);

/// 1-based ranks with tied values sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks.
double spearman_corr(std::span<const double> pred, std::span<const double> gold);

/// True when values has zero variance (every entry equal).
bool is_constant(std::span<const double> values);

}  // namespace mixf

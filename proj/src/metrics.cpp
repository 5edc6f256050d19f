#include "mixf/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mixf/errors.h"

namespace mixf {

namespace {

template <typename T>
void check_lengths(std::span<const T> a, std::span<const T> b, std::size_t min_len, const char* op) {
    if (a.size() != b.size()) {
        throw ValidationError(std::string(op) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()));
    }
    if (a.size() < min_len) {
        throw ValidationError(std::string(op) + ": needs at least " + std::to_string(min_len) + " values");
    }
}

}  // namespace

double accuracy(std::span<const int> pred, std::span<const int> gold) {
    check_lengths(pred, gold, 1, "accuracy");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == gold[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double matthews_corr(std::span<const int> pred, std::span<const int> gold) {
    check_lengths(pred, gold, 1, "matthews_corr");
    double tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if ((pred[i] != 0 && pred[i] != 1) || (gold[i] != 0 && gold[i] != 1)) {
            throw ValidationError("matthews_corr: labels must be 0 or 1");
        }
        if (pred[i] == 1) {
            (gold[i] == 1 ? tp : fp) += 1;
        } else {
            (gold[i] == 0 ? tn : fn) += 1;
        }
    }
    const double a = tp + fp, b = tp + fn, c = tn + fp, d = tn + fn;
    if (a == 0 || b == 0 || c == 0 || d == 0) return 0.0;
    return (tp * tn - fp * fn) / std::sqrt(a * b * c * d);
}

double pearson_corr(std::span<const double> x, std::span<const double> y) {
    check_lengths(x, y, 2, "pearson_corr");
    // a rounded mean would leave tiny nonzero deviations on constant input
    if (is_constant(x) || is_constant(y)) return 0.0;
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double spearman_corr(std::span<const double> pred, std::span<const double> gold) {
    check_lengths(pred, gold, 2, "spearman_corr");
    const auto rp = average_ranks(pred);
    const auto rg = average_ranks(gold);
    return pearson_corr(rp, rg);
}

bool is_constant(std::span<const double> values) {
    return std::adjacent_find(values.begin(), values.end(), std::not_equal_to<>()) == values.end();
}

}  // namespace mixf

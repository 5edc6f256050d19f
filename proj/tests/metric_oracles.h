#pragma once

#include <cmath>
#include <vector>

#include "mixf/rng.h"

// Brute-force reference implementations, deliberately written without
// sharing code or summation order with the library.
namespace oracle {

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& gold) {
    long hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == gold[i]) ++hits;
    return double(hits) / double(pred.size());
}

inline double matthews(const std::vector<int>& pred, const std::vector<int>& gold) {
    long long confusion[2][2] = {{0, 0}, {0, 0}};  // [pred][gold]
    for (std::size_t i = 0; i < pred.size(); ++i) confusion[pred[i]][gold[i]]++;
    const long long tp = confusion[1][1], tn = confusion[0][0], fp = confusion[1][0], fn = confusion[0][1];
    const long long den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (den == 0) return 0.0;
    return double((long double)(tp * tn - fp * fn) / std::sqrt((long double)den));
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    bool x_const = true, y_const = true;
    for (std::size_t i = 1; i < n; ++i) {
        x_const = x_const && x[i] == x[0];
        y_const = y_const && y[i] == y[0];
    }
    if (x_const || y_const) return 0.0;
    long double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    long double cov = 0, vx = 0, vy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    return double(cov / std::sqrt(vx * vy));
}

/// Rank of v is 1 + (number strictly below) + (number of equal others) / 2.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::size_t below = 0, equal = 0;
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (v[j] < v[i]) ++below;
            if (v[j] == v[i] && j != i) ++equal;
        }
        r[i] = 1.0 + double(below) + double(equal) / 2.0;
    }
    return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(average_ranks(x), average_ranks(y));
}

/// Random labels or values with frequent ties and occasional constant inputs.
struct Instance {
    std::vector<int> pred_cls, gold_cls;
    std::vector<double> pred_val, gold_val;
};

inline Instance random_instance(mixf::Rng& rng, int index) {
    Instance in;
    const std::size_t n = 2 + rng.uniform_index(60);
    const int style = index % 5;
    const double p1 = rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
        int g = rng.uniform() < p1 ? 1 : 0;
        int p = rng.uniform() < 0.7 ? g : 1 - g;
        if (style == 1) p = 1;  // single predicted class
        if (style == 2) g = 0;  // single gold class
        in.pred_cls.push_back(p);
        in.gold_cls.push_back(g);

        double x, y;
        if (style == 3) {
            x = double(rng.uniform_index(4));  // heavy ties
            y = double(rng.uniform_index(3)) * 0.5;
        } else if (style == 4) {
            x = 0.1;  // constant prediction
            y = rng.uniform();
        } else {
            x = rng.uniform() * 10.0 - 5.0;
            y = 0.5 * x + rng.normal();
        }
        in.pred_val.push_back(x);
        in.gold_val.push_back(y);
    }
    return in;
}

}  // namespace oracle

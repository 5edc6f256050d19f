#include "mixf/ops.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mixf/errors.h"

namespace mixf {

namespace {

void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(op) + ": expected a matrix, got " + t.shape_string());
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                             b.shape_string());
    }
}

void require_upstream(const Tensor& upstream, const Tensor& output, const char* op) {
    if (!upstream.same_shape(output)) {
        throw DimensionError(std::string(op) + " backward: upstream " + upstream.shape_string() +
                             " does not match output " + output.shape_string());
    }
}

// Plain product without building a backward closure.
Tensor gemm(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
    const std::size_t m = transpose_a ? a.cols() : a.rows();
    const std::size_t k = transpose_a ? a.rows() : a.cols();
    const std::size_t n = transpose_b ? b.rows() : b.cols();
    Tensor out = Tensor::matrix(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        auto dst = out.row(i);
        for (std::size_t t = 0; t < k; ++t) {
            const double av = transpose_a ? a.at(t, i) : a.at(i, t);
            if (av == 0.0) continue;
            if (transpose_b) {
                for (std::size_t j = 0; j < n; ++j) dst[j] += av * b.at(j, t);
            } else {
                auto src = b.row(t);
                for (std::size_t j = 0; j < n; ++j) dst[j] += av * src[j];
            }
        }
    }
    return out;
}

Tensor softmax_forward(const Tensor& x) {
    Tensor s = x.zeros_like();
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto in = x.row(r);
        auto out = s.row(r);
        double mx = *std::max_element(in.begin(), in.end());
        double total = 0.0;
        for (std::size_t c = 0; c < in.size(); ++c) {
            out[c] = std::exp(in[c] - mx);
            total += out[c];
        }
        for (double& v : out) v /= total;
    }
    return s;
}

constexpr double kGeluCoeff = 0.044715;

}  // namespace

DualResult matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions disagree, " + a.shape_string() + " x " +
                             b.shape_string());
    }
    Tensor out = gemm(a, b, false, false);
    return {out, [a, b, shape = out.shape()](const Tensor& up) {
                if (up.shape() != shape) throw DimensionError("matmul backward: bad upstream shape");
                return std::vector<Tensor>{gemm(up, b, false, true), gemm(a, up, true, false)};
            }};
}

DualResult transpose(const Tensor& x) {
    require_matrix(x, "transpose");
    Tensor out = Tensor::matrix(x.cols(), x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) out.at(c, r) = x.at(r, c);
    return {out, [out](const Tensor& up) {
                require_upstream(up, out, "transpose");
                Tensor g = Tensor::matrix(up.cols(), up.rows());
                for (std::size_t r = 0; r < up.rows(); ++r)
                    for (std::size_t c = 0; c < up.cols(); ++c) g.at(c, r) = up.at(r, c);
                return std::vector<Tensor>{g};
            }};
}

DualResult add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    out.add_scaled(b);
    return {out, [out](const Tensor& up) {
                require_upstream(up, out, "add");
                return std::vector<Tensor>{up, up};
            }};
}

DualResult add_row_bias(const Tensor& x, const Tensor& bias) {
    require_matrix(x, "add_row_bias");
    if (bias.rank() != 1 || bias.size() != x.cols()) {
        throw DimensionError("add_row_bias: bias " + bias.shape_string() + " does not match " +
                             x.shape_string());
    }
    Tensor out = x;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
    }
    return {out, [out, bias_shape = bias.shape()](const Tensor& up) {
                require_upstream(up, out, "add_row_bias");
                Tensor db(bias_shape, 0.0);
                for (std::size_t r = 0; r < up.rows(); ++r) {
                    auto row = up.row(r);
                    for (std::size_t c = 0; c < row.size(); ++c) db[c] += row[c];
                }
                return std::vector<Tensor>{up, db};
            }};
}

DualResult scale(const Tensor& x, double factor) {
    Tensor out = x;
    for (double& v : out.values()) v *= factor;
    return {out, [out, factor](const Tensor& up) {
                require_upstream(up, out, "scale");
                Tensor g = up;
                for (double& v : g.values()) v *= factor;
                return std::vector<Tensor>{g};
            }};
}

DualResult multiply_const(const Tensor& x, const Tensor& factor) {
    require_same_shape(x, factor, "multiply_const");
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor[i];
    return {out, [out, factor](const Tensor& up) {
                require_upstream(up, out, "multiply_const");
                Tensor g = up;
                for (std::size_t i = 0; i < g.size(); ++i) g[i] *= factor[i];
                return std::vector<Tensor>{g};
            }};
}

DualResult softmax_rows(const Tensor& x) {
    require_matrix(x, "softmax_rows");
    Tensor s = softmax_forward(x);
    return {s, [s](const Tensor& up) {
                require_upstream(up, s, "softmax_rows");
                Tensor g = s.zeros_like();
                for (std::size_t r = 0; r < s.rows(); ++r) {
                    auto sr = s.row(r);
                    auto ur = up.row(r);
                    double dot = 0.0;
                    for (std::size_t c = 0; c < sr.size(); ++c) dot += ur[c] * sr[c];
                    auto gr = g.row(r);
                    for (std::size_t c = 0; c < sr.size(); ++c) gr[c] = sr[c] * (ur[c] - dot);
                }
                return std::vector<Tensor>{g};
            }};
}

DualResult layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    require_matrix(x, "layer_norm");
    if (!(eps > 0.0)) throw ValidationError("layer_norm: eps must be positive");
    const std::size_t n = x.cols();
    if (gain.rank() != 1 || gain.size() != n || !gain.same_shape(bias)) {
        throw DimensionError("layer_norm: gain " + gain.shape_string() + " / bias " +
                             bias.shape_string() + " do not match " + x.shape_string());
    }
    Tensor xhat = x.zeros_like();
    Tensor out = x.zeros_like();
    std::vector<double> inv_std(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto in = x.row(r);
        double mean = 0.0;
        for (double v : in) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : in) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        auto xh = xhat.row(r);
        auto o = out.row(r);
        for (std::size_t c = 0; c < n; ++c) {
            xh[c] = (in[c] - mean) * inv_std[r];
            o[c] = gain[c] * xh[c] + bias[c];
        }
    }
    return {out, [out, xhat, inv_std, gain](const Tensor& up) {
                require_upstream(up, out, "layer_norm");
                const std::size_t n = xhat.cols();
                Tensor dx = xhat.zeros_like();
                Tensor dgain = gain.zeros_like();
                Tensor dbias = gain.zeros_like();
                std::vector<double> dxhat(n);
                for (std::size_t r = 0; r < xhat.rows(); ++r) {
                    auto u = up.row(r);
                    auto xh = xhat.row(r);
                    double mean_d = 0.0;
                    double mean_dx = 0.0;
                    for (std::size_t c = 0; c < n; ++c) {
                        dgain[c] += u[c] * xh[c];
                        dbias[c] += u[c];
                        dxhat[c] = u[c] * gain[c];
                        mean_d += dxhat[c];
                        mean_dx += dxhat[c] * xh[c];
                    }
                    mean_d /= static_cast<double>(n);
                    mean_dx /= static_cast<double>(n);
                    auto d = dx.row(r);
                    for (std::size_t c = 0; c < n; ++c) {
                        d[c] = inv_std[r] * (dxhat[c] - mean_d - xh[c] * mean_dx);
                    }
                }
                return std::vector<Tensor>{dx, dgain, dbias};
            }};
}

DualResult gelu(const Tensor& x) {
    const double k = std::sqrt(2.0 / std::numbers::pi);
    Tensor out = x.zeros_like();
    Tensor deriv = x.zeros_like();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        const double t = std::tanh(k * (v + kGeluCoeff * v * v * v));
        out[i] = 0.5 * v * (1.0 + t);
        deriv[i] = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * k * (1.0 + 3.0 * kGeluCoeff * v * v);
    }
    return {out, [out, deriv](const Tensor& up) {
                require_upstream(up, out, "gelu");
                Tensor g = up;
                for (std::size_t i = 0; i < g.size(); ++i) g[i] *= deriv[i];
                return std::vector<Tensor>{g};
            }};
}

DualResult tanh_act(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.values()) v = std::tanh(v);
    return {out, [out](const Tensor& up) {
                require_upstream(up, out, "tanh");
                Tensor g = up;
                for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - out[i] * out[i];
                return std::vector<Tensor>{g};
            }};
}

DualResult cross_entropy_soft(const Tensor& logits, const Tensor& targets) {
    require_matrix(logits, "cross_entropy_soft");
    require_same_shape(logits, targets, "cross_entropy_soft");
    const std::size_t b = logits.rows();
    for (std::size_t r = 0; r < b; ++r) {
        double total = 0.0;
        for (double v : targets.row(r)) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError("cross_entropy_soft: target row " + std::to_string(r) +
                                      " has an entry outside [0,1]");
            }
            total += v;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw ValidationError("cross_entropy_soft: target row " + std::to_string(r) +
                                  " sums to " + std::to_string(total) + ", not 1");
        }
    }
    Tensor log_probs = logits.zeros_like();
    for (std::size_t r = 0; r < b; ++r) {
        auto z = logits.row(r);
        double mx = *std::max_element(z.begin(), z.end());
        double total = 0.0;
        for (double v : z) total += std::exp(v - mx);
        const double lse = mx + std::log(total);
        auto lp = log_probs.row(r);
        for (std::size_t c = 0; c < z.size(); ++c) lp[c] = z[c] - lse;
    }
    double loss = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
        auto t = targets.row(r);
        auto lp = log_probs.row(r);
        double row_loss = 0.0;
        for (std::size_t c = 0; c < t.size(); ++c) row_loss -= t[c] * lp[c];
        loss += row_loss;
    }
    loss /= static_cast<double>(b);
    Tensor out = Tensor::scalar(loss);
    return {out, [log_probs, targets, b](const Tensor& up) {
                if (up.size() != 1) throw DimensionError("cross_entropy_soft backward: expected scalar upstream");
                const double s = up[0] / static_cast<double>(b);
                Tensor dlogits = log_probs.zeros_like();
                Tensor dtargets = log_probs.zeros_like();
                for (std::size_t r = 0; r < b; ++r) {
                    auto lp = log_probs.row(r);
                    auto t = targets.row(r);
                    auto dl = dlogits.row(r);
                    auto dt = dtargets.row(r);
                    for (std::size_t c = 0; c < lp.size(); ++c) {
                        dl[c] = s * (std::exp(lp[c]) - t[c]);
                        dt[c] = -s * lp[c];
                    }
                }
                return std::vector<Tensor>{dlogits, dtargets};
            }};
}

DualResult mse(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse");
    const double n = static_cast<double>(pred.size());
    Tensor diff = pred;
    diff.add_scaled(target, -1.0);
    double loss = 0.0;
    for (double v : diff.values()) loss += v * v;
    Tensor out = Tensor::scalar(loss / n);
    return {out, [diff, n](const Tensor& up) {
                if (up.size() != 1) throw DimensionError("mse backward: expected scalar upstream");
                Tensor dpred = diff;
                for (double& v : dpred.values()) v *= 2.0 * up[0] / n;
                Tensor dtarget = dpred;
                for (double& v : dtarget.values()) v = -v;
                return std::vector<Tensor>{dpred, dtarget};
            }};
}

DualResult contract(DualResult r, const Tensor& weights) {
    require_same_shape(r.output, weights, "contract");
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) total += weights[i] * r.output[i];
    return {Tensor::scalar(total), [inner = std::move(r.backward), weights](const Tensor& up) {
                Tensor seed = weights;
                for (double& v : seed.values()) v *= up[0];
                return inner(seed);
            }};
}

}  // namespace mixf

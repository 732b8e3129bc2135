#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sc/matrix.hpp"
#include "sc/rng.hpp"

// Fixed classifier head: Linear(in,64) -> BatchNorm -> ReLU -> Dropout(0.25)
// -> Linear(64,32) -> BatchNorm -> ReLU -> Dropout(0.25) -> Linear(32,out),
// with hand-written forward and backward passes. Dropout is inverted
// (scaling at train time), batch normalization keeps running statistics with
// momentum 0.1, and the backward pass differentiates through the batch
// statistics.
namespace sc::mlp {

struct MLPSpec {
    int in_dim = 0;
    std::array<int, 2> hidden{64, 32};
    int out_dim = 0;
    double dropout_p = 0.25;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;
};

// Learnable layout (flat): W1, b1, gamma1, beta1, W2, b2, gamma2, beta2,
// W3, b3. Weight matrices are row-major (out x in).
inline std::size_t param_count(const MLPSpec& spec) {
    const std::size_t in = spec.in_dim, h1 = spec.hidden[0], h2 = spec.hidden[1],
                      out = spec.out_dim;
    return (in * h1 + h1) + 2 * h1 + (h1 * h2 + h2) + 2 * h2 + (h2 * out + out);
}

struct MLPParams {
    std::vector<double> learnable;
    // Non-learnable batchnorm state.
    std::vector<double> running_mean1, running_var1;
    std::vector<double> running_mean2, running_var2;
};

namespace detail {

struct Layout {
    std::size_t w1, b1, g1, be1, w2, b2, g2, be2, w3, b3, total;
};

inline Layout layout(const MLPSpec& s) {
    Layout L{};
    const std::size_t in = s.in_dim, h1 = s.hidden[0], h2 = s.hidden[1],
                      out = s.out_dim;
    L.w1 = 0;
    L.b1 = L.w1 + in * h1;
    L.g1 = L.b1 + h1;
    L.be1 = L.g1 + h1;
    L.w2 = L.be1 + h1;
    L.b2 = L.w2 + h1 * h2;
    L.g2 = L.b2 + h2;
    L.be2 = L.g2 + h2;
    L.w3 = L.be2 + h2;
    L.b3 = L.w3 + h2 * out;
    L.total = L.b3 + out;
    return L;
}

// logits = X W^T + b with W stored row-major (out x in).
inline Matrix affine(const Matrix& x, std::span<const double> w,
                     std::span<const double> b, std::size_t out_dim) {
    Matrix y(x.rows, out_dim);
    for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t o = 0; o < out_dim; ++o) {
            double acc = b[o];
            const double* wrow = w.data() + o * x.cols;
            for (std::size_t c = 0; c < x.cols; ++c) acc += x(r, c) * wrow[c];
            y(r, o) = acc;
        }
    }
    return y;
}

struct BnCache {
    Matrix xhat;
    std::vector<double> inv_std; // 1/sqrt(var + eps), batch statistics
    std::vector<double> mean;
};

} // namespace detail

inline void validate(const MLPSpec& spec) {
    if (spec.in_dim < 1) throw std::invalid_argument("MLPSpec: in_dim must be >= 1");
    if (spec.out_dim < 2) throw std::invalid_argument("MLPSpec: out_dim must be >= 2");
}

// Uniform fan-in initialization for the affine layers; batchnorm starts at
// scale 1, shift 0, running mean 0, running variance 1.
inline MLPParams init_params(const MLPSpec& spec, std::uint64_t seed) {
    validate(spec);
    const auto L = detail::layout(spec);
    MLPParams p;
    p.learnable.assign(L.total, 0.0);
    Rng rng(seed);
    const auto fill_affine = [&](std::size_t w_off, std::size_t b_off,
                                 std::size_t fan_in, std::size_t fan_out) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < fan_in * fan_out; ++i) {
            p.learnable[w_off + i] = rng.uniform(-bound, bound);
        }
        for (std::size_t i = 0; i < fan_out; ++i) {
            p.learnable[b_off + i] = rng.uniform(-bound, bound);
        }
    };
    fill_affine(L.w1, L.b1, spec.in_dim, spec.hidden[0]);
    fill_affine(L.w2, L.b2, spec.hidden[0], spec.hidden[1]);
    fill_affine(L.w3, L.b3, spec.hidden[1], spec.out_dim);
    for (std::size_t i = 0; i < static_cast<std::size_t>(spec.hidden[0]); ++i) {
        p.learnable[L.g1 + i] = 1.0;
    }
    for (std::size_t i = 0; i < static_cast<std::size_t>(spec.hidden[1]); ++i) {
        p.learnable[L.g2 + i] = 1.0;
    }
    p.running_mean1.assign(spec.hidden[0], 0.0);
    p.running_var1.assign(spec.hidden[0], 1.0);
    p.running_mean2.assign(spec.hidden[1], 0.0);
    p.running_var2.assign(spec.hidden[1], 1.0);
    return p;
}

enum class Mode { kTrain, kEval };

struct ForwardCache {
    MLPSpec spec;
    Mode mode = Mode::kEval;
    std::vector<double> learnable; // snapshot used by the pass
    Matrix input;
    Matrix z1, z2;                  // affine outputs
    detail::BnCache bn1, bn2;       // batch statistics (train mode)
    Matrix act1, act2;              // post-BN pre-ReLU
    Matrix drop_mask1, drop_mask2;  // 0 or 1/keep, train mode
    Matrix h1, h2;                  // layer outputs fed forward
};

// Train mode uses batch statistics and updates the running ones in place;
// eval mode is deterministic and leaves params untouched.
inline std::pair<Matrix, ForwardCache> forward(const MLPSpec& spec, MLPParams& params,
                                               const Matrix& batch, Mode mode,
                                               std::uint64_t seed = 0) {
    validate(spec);
    if (batch.cols != static_cast<std::size_t>(spec.in_dim)) {
        throw std::invalid_argument("mlp::forward: batch width mismatch");
    }
    if (batch.rows == 0) throw std::invalid_argument("mlp::forward: empty batch");
    if (mode == Mode::kTrain && batch.rows < 2) {
        throw std::invalid_argument("mlp::forward: batchnorm undefined for batch of 1");
    }
    const auto L = detail::layout(spec);
    if (params.learnable.size() != L.total) {
        throw std::invalid_argument("mlp::forward: parameter layout mismatch");
    }
    const auto& w = params.learnable;
    Rng rng(seed);

    ForwardCache cache;
    cache.spec = spec;
    cache.mode = mode;
    cache.learnable = w;
    cache.input = batch;

    const auto batchnorm = [&](const Matrix& z, std::size_t g_off, std::size_t be_off,
                               std::vector<double>& rmean, std::vector<double>& rvar,
                               detail::BnCache& bn) {
        const std::size_t B = z.rows, C = z.cols;
        Matrix y(B, C);
        bn.xhat = Matrix(B, C);
        bn.inv_std.assign(C, 0.0);
        bn.mean.assign(C, 0.0);
        for (std::size_t c = 0; c < C; ++c) {
            double mean, var;
            if (mode == Mode::kTrain) {
                double s = 0.0;
                for (std::size_t r = 0; r < B; ++r) s += z(r, c);
                mean = s / static_cast<double>(B);
                double sq = 0.0;
                for (std::size_t r = 0; r < B; ++r) {
                    const double d = z(r, c) - mean;
                    sq += d * d;
                }
                var = sq / static_cast<double>(B); // biased, used for normalization
                const double unbiased = sq / static_cast<double>(B - 1);
                rmean[c] = (1.0 - spec.bn_momentum) * rmean[c] + spec.bn_momentum * mean;
                rvar[c] = (1.0 - spec.bn_momentum) * rvar[c] + spec.bn_momentum * unbiased;
            } else {
                mean = rmean[c];
                var = rvar[c];
            }
            const double inv = 1.0 / std::sqrt(var + spec.bn_eps);
            bn.inv_std[c] = inv;
            bn.mean[c] = mean;
            for (std::size_t r = 0; r < B; ++r) {
                const double xh = (z(r, c) - mean) * inv;
                bn.xhat(r, c) = xh;
                y(r, c) = w[g_off + c] * xh + w[be_off + c];
            }
        }
        return y;
    };

    const auto relu_dropout = [&](const Matrix& act, Matrix& mask) {
        const std::size_t B = act.rows, C = act.cols;
        Matrix h(B, C);
        if (mode == Mode::kTrain) {
            mask = Matrix(B, C);
            const double keep = 1.0 - spec.dropout_p;
            for (std::size_t i = 0; i < B * C; ++i) {
                mask.data[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
            }
            for (std::size_t i = 0; i < B * C; ++i) {
                h.data[i] = std::max(act.data[i], 0.0) * mask.data[i];
            }
        } else {
            for (std::size_t i = 0; i < B * C; ++i) {
                h.data[i] = std::max(act.data[i], 0.0);
            }
        }
        return h;
    };

    cache.z1 = detail::affine(batch, {w.data() + L.w1, w.size() - L.w1},
                              {w.data() + L.b1, w.size() - L.b1}, spec.hidden[0]);
    cache.act1 = batchnorm(cache.z1, L.g1, L.be1, params.running_mean1,
                           params.running_var1, cache.bn1);
    cache.h1 = relu_dropout(cache.act1, cache.drop_mask1);

    cache.z2 = detail::affine(cache.h1, {w.data() + L.w2, w.size() - L.w2},
                              {w.data() + L.b2, w.size() - L.b2}, spec.hidden[1]);
    cache.act2 = batchnorm(cache.z2, L.g2, L.be2, params.running_mean2,
                           params.running_var2, cache.bn2);
    cache.h2 = relu_dropout(cache.act2, cache.drop_mask2);

    Matrix logits = detail::affine(cache.h2, {w.data() + L.w3, w.size() - L.w3},
                                   {w.data() + L.b3, w.size() - L.b3}, spec.out_dim);
    return {std::move(logits), std::move(cache)};
}

struct Backward {
    std::vector<double> grads; // same layout as MLPParams::learnable
    Matrix dinput;
};

inline Backward backward(const ForwardCache& cache, const Matrix& dlogits) {
    if (cache.mode != Mode::kTrain) {
        throw std::invalid_argument("mlp::backward: cache must come from a train-mode forward");
    }
    const MLPSpec& spec = cache.spec;
    const auto L = detail::layout(spec);
    const auto& w = cache.learnable;
    const std::size_t B = cache.input.rows;
    if (dlogits.rows != B || dlogits.cols != static_cast<std::size_t>(spec.out_dim)) {
        throw std::invalid_argument("mlp::backward: dlogits shape mismatch");
    }

    Backward out;
    out.grads.assign(L.total, 0.0);

    // d(affine): dW = dY^T X, db = column sums, dX = dY W.
    const auto affine_backward = [&](const Matrix& x, const Matrix& dy,
                                     std::size_t w_off, std::size_t b_off) {
        const std::size_t in = x.cols, o_dim = dy.cols;
        for (std::size_t o = 0; o < o_dim; ++o) {
            for (std::size_t c = 0; c < in; ++c) {
                double acc = 0.0;
                for (std::size_t r = 0; r < B; ++r) acc += dy(r, o) * x(r, c);
                out.grads[w_off + o * in + c] += acc;
            }
            double acc = 0.0;
            for (std::size_t r = 0; r < B; ++r) acc += dy(r, o);
            out.grads[b_off + o] += acc;
        }
        Matrix dx(B, in);
        for (std::size_t r = 0; r < B; ++r) {
            for (std::size_t c = 0; c < in; ++c) {
                double acc = 0.0;
                for (std::size_t o = 0; o < o_dim; ++o) {
                    acc += dy(r, o) * w[w_off + o * in + c];
                }
                dx(r, c) = acc;
            }
        }
        return dx;
    };

    const auto relu_dropout_backward = [&](const Matrix& dh, const Matrix& act,
                                           const Matrix& mask) {
        Matrix d(act.rows, act.cols);
        for (std::size_t i = 0; i < d.data.size(); ++i) {
            d.data[i] = act.data[i] > 0.0 ? dh.data[i] * mask.data[i] : 0.0;
        }
        return d;
    };

    // Backward through batch statistics: with xh = (z - mu) * inv_std,
    // dz = inv_std/B * (B*dxh - sum(dxh) - xh * sum(dxh*xh)).
    const auto batchnorm_backward = [&](const Matrix& dy, const detail::BnCache& bn,
                                        std::size_t g_off, std::size_t be_off) {
        const std::size_t C = dy.cols;
        Matrix dz(B, C);
        for (std::size_t c = 0; c < C; ++c) {
            double sum_dxh = 0.0, sum_dxh_xh = 0.0;
            for (std::size_t r = 0; r < B; ++r) {
                const double dxh = dy(r, c) * w[g_off + c];
                sum_dxh += dxh;
                sum_dxh_xh += dxh * bn.xhat(r, c);
                out.grads[g_off + c] += dy(r, c) * bn.xhat(r, c);
                out.grads[be_off + c] += dy(r, c);
            }
            const double scale = bn.inv_std[c] / static_cast<double>(B);
            for (std::size_t r = 0; r < B; ++r) {
                const double dxh = dy(r, c) * w[g_off + c];
                dz(r, c) = scale * (static_cast<double>(B) * dxh - sum_dxh -
                                    bn.xhat(r, c) * sum_dxh_xh);
            }
        }
        return dz;
    };

    Matrix dh2 = affine_backward(cache.h2, dlogits, L.w3, L.b3);
    Matrix dact2 = relu_dropout_backward(dh2, cache.act2, cache.drop_mask2);
    Matrix dz2 = batchnorm_backward(dact2, cache.bn2, L.g2, L.be2);
    Matrix dh1 = affine_backward(cache.h1, dz2, L.w2, L.b2);
    Matrix dact1 = relu_dropout_backward(dh1, cache.act1, cache.drop_mask1);
    Matrix dz1 = batchnorm_backward(dact1, cache.bn1, L.g1, L.be1);
    out.dinput = affine_backward(cache.input, dz1, L.w1, L.b1);
    return out;
}

// Softmax cross-entropy, mean over the batch. Gradient w.r.t. logits is
// (softmax - onehot) / batch_size.
inline std::pair<double, Matrix> cross_entropy(const Matrix& logits,
                                               const std::vector<int>& labels) {
    if (labels.size() != logits.rows) {
        throw std::invalid_argument("cross_entropy: label count mismatch");
    }
    const std::size_t B = logits.rows, C = logits.cols;
    Matrix dlogits(B, C);
    double loss = 0.0;
    for (std::size_t r = 0; r < B; ++r) {
        if (labels[r] < 0 || labels[r] >= static_cast<int>(C)) {
            throw std::invalid_argument("cross_entropy: label out of range");
        }
        double mx = logits(r, 0);
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, logits(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) z += std::exp(logits(r, c) - mx);
        const double lse = mx + std::log(z);
        loss += lse - logits(r, static_cast<std::size_t>(labels[r]));
        for (std::size_t c = 0; c < C; ++c) {
            const double soft = std::exp(logits(r, c) - lse);
            dlogits(r, c) = (soft - (static_cast<int>(c) == labels[r] ? 1.0 : 0.0)) /
                            static_cast<double>(B);
        }
    }
    return {loss / static_cast<double>(B), std::move(dlogits)};
}

// Checkpoint: layer-tagged flat arrays plus running statistics.
inline nlohmann::ordered_json checkpoint_json(const MLPSpec& spec,
                                              const MLPParams& params) {
    const auto L = detail::layout(spec);
    const auto& w = params.learnable;
    const auto slice = [&](std::size_t off, std::size_t len) {
        return std::vector<double>(w.begin() + off, w.begin() + off + len);
    };
    const std::size_t in = spec.in_dim, h1 = spec.hidden[0], h2 = spec.hidden[1],
                      out = spec.out_dim;
    nlohmann::ordered_json j;
    j["in_dim"] = spec.in_dim;
    j["hidden"] = spec.hidden;
    j["out_dim"] = spec.out_dim;
    j["w1"] = slice(L.w1, in * h1);
    j["b1"] = slice(L.b1, h1);
    j["gamma1"] = slice(L.g1, h1);
    j["beta1"] = slice(L.be1, h1);
    j["w2"] = slice(L.w2, h1 * h2);
    j["b2"] = slice(L.b2, h2);
    j["gamma2"] = slice(L.g2, h2);
    j["beta2"] = slice(L.be2, h2);
    j["w3"] = slice(L.w3, h2 * out);
    j["b3"] = slice(L.b3, out);
    j["running_mean1"] = params.running_mean1;
    j["running_var1"] = params.running_var1;
    j["running_mean2"] = params.running_mean2;
    j["running_var2"] = params.running_var2;
    return j;
}

inline MLPParams load_checkpoint(const MLPSpec& spec, const nlohmann::json& j) {
    const auto L = detail::layout(spec);
    MLPParams p;
    p.learnable.assign(L.total, 0.0);
    const auto put = [&](const char* key, std::size_t off, std::size_t len) {
        const auto v = j.at(key).get<std::vector<double>>();
        if (v.size() != len) {
            throw std::runtime_error(std::string("checkpoint: bad length for ") + key);
        }
        std::copy(v.begin(), v.end(), p.learnable.begin() + off);
    };
    const std::size_t in = spec.in_dim, h1 = spec.hidden[0], h2 = spec.hidden[1],
                      out = spec.out_dim;
    put("w1", L.w1, in * h1);
    put("b1", L.b1, h1);
    put("gamma1", L.g1, h1);
    put("beta1", L.be1, h1);
    put("w2", L.w2, h1 * h2);
    put("b2", L.b2, h2);
    put("gamma2", L.g2, h2);
    put("beta2", L.be2, h2);
    put("w3", L.w3, h2 * out);
    put("b3", L.b3, out);
    p.running_mean1 = j.at("running_mean1").get<std::vector<double>>();
    p.running_var1 = j.at("running_var1").get<std::vector<double>>();
    p.running_mean2 = j.at("running_mean2").get<std::vector<double>>();
    p.running_var2 = j.at("running_var2").get<std::vector<double>>();
    return p;
}

} // namespace sc::mlp

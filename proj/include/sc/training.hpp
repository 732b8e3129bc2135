#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sc/ansatz.hpp"
#include "sc/tensornet.hpp"

// Circuit-fit training: AdamW with a per-epoch decaying learning rate,
// the probability-matching loss, and the single-vector / whole-sample
// fitting loops.
namespace sc::training {

struct AdamWConfig {
    double lr0 = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double lr_decay = 0.99; // multiplicative factor per epoch
};

class AdamW {
public:
    explicit AdamW(std::size_t param_count, AdamWConfig cfg = {})
        : cfg_(cfg), m_(param_count, 0.0), v_(param_count, 0.0) {}

    const AdamWConfig& config() const { return cfg_; }
    std::size_t step_count() const { return step_; }

    // Decoupled weight decay with bias-corrected moments;
    // learning rate = lr0 * lr_decay^epoch.
    void step(std::vector<double>& params, const std::vector<double>& grads,
              int epoch) {
        if (params.size() != m_.size() || grads.size() != m_.size()) {
            throw std::invalid_argument("AdamW::step: size mismatch");
        }
        for (double g : grads) {
            if (!std::isfinite(g)) throw std::runtime_error("AdamW::step: divergence");
        }
        ++step_;
        const double lr = cfg_.lr0 * std::pow(cfg_.lr_decay, epoch);
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
            const double mhat = m_[i] / bc1;
            const double vhat = v_[i] / bc2;
            params[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                               cfg_.weight_decay * params[i]);
        }
    }

private:
    AdamWConfig cfg_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t step_ = 0;
};

// One training item: input vector and its precomputed target distribution.
using FitBatch = std::vector<std::pair<tensornet::DataVector, std::vector<double>>>;

struct FitReport {
    std::vector<double> loss_history; // one entry per iteration, pre-update
    double best_loss = 0.0;
    std::vector<double> best_params;
    int run = 0;
    std::uint64_t seed = 0;
};

// Mean over the batch of || forward probabilities - target ||_2.
inline double circuit_loss(const ansatz::CircuitSpec& spec,
                           std::span<const double> params, const FitBatch& batch) {
    if (batch.empty()) throw std::invalid_argument("circuit_loss: empty batch");
    double total = 0.0;
    for (const auto& [x, target] : batch) {
        const auto fw = ansatz::forward(spec, params, x);
        if (target.size() != fw.probabilities.size()) {
            throw std::invalid_argument("circuit_loss: target length mismatch");
        }
        double s = 0.0;
        for (std::size_t i = 0; i < target.size(); ++i) {
            const double d = fw.probabilities[i] - target[i];
            s += d * d;
        }
        total += std::sqrt(s);
    }
    return total / static_cast<double>(batch.size());
}

// Loss together with its exact parameter gradient (full batch).
inline std::pair<double, std::vector<double>> circuit_loss_grad(
    const ansatz::CircuitSpec& spec, std::span<const double> params,
    const FitBatch& batch) {
    if (batch.empty()) throw std::invalid_argument("circuit_loss_grad: empty batch");
    double total = 0.0;
    std::vector<double> grad(spec.param_count(), 0.0);
    std::vector<double> upstream;
    for (const auto& [x, target] : batch) {
        const auto fw = ansatz::forward(spec, params, x);
        upstream.assign(fw.probabilities.size(), 0.0);
        double s = 0.0;
        for (std::size_t i = 0; i < target.size(); ++i) {
            upstream[i] = fw.probabilities[i] - target[i];
            s += upstream[i] * upstream[i];
        }
        const double nrm = std::sqrt(s);
        total += nrm;
        if (nrm == 0.0) continue; // flat spot of the norm; subgradient 0
        for (double& u : upstream) u /= nrm;
        const auto g = ansatz::gradient(spec, params, x, upstream,
                                        ansatz::Upstream::kProbabilities);
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    total *= inv;
    for (double& g : grad) g *= inv;
    return {total, std::move(grad)};
}

// Target distribution of a vector: its own decomposition truncated by
// (gamma, k), squared and renormalized.
inline std::vector<double> vector_target(const tensornet::DataVector& x,
                                         double gamma, std::size_t k) {
    const auto d = tensornet::decompose(x);
    const auto t = tensornet::truncate(d, gamma, k);
    return tensornet::target_probabilities(t);
}

// Number of terms the mean vector keeps under the threshold; used to pick k
// for a whole sample.
inline std::size_t select_k(const std::vector<tensornet::DataVector>& sample,
                            double gamma, std::size_t k_max) {
    const auto mean = tensornet::mean_vector(sample);
    const auto d = tensornet::decompose(mean);
    return tensornet::truncate(d, gamma, k_max).k;
}

namespace detail {

inline std::vector<FitReport> fit(const ansatz::CircuitSpec& spec,
                                  const FitBatch& batch, int iters, int runs,
                                  std::uint64_t seed, const AdamWConfig& opt_cfg) {
    if (iters < 1) throw std::invalid_argument("fit: iters must be >= 1");
    if (runs < 1) throw std::invalid_argument("fit: runs must be >= 1");
    std::vector<FitReport> reports;
    reports.reserve(runs);
    for (int run = 0; run < runs; ++run) {
        const std::uint64_t run_seed = seed + static_cast<std::uint64_t>(run);
        std::vector<double> params = ansatz::init_params(spec, run_seed);
        AdamW opt(params.size(), opt_cfg);
        FitReport report;
        report.run = run;
        report.seed = run_seed;
        report.best_loss = std::numeric_limits<double>::infinity();
        report.loss_history.reserve(iters);
        for (int it = 0; it < iters; ++it) {
            auto [loss, grad] = circuit_loss_grad(spec, params, batch);
            report.loss_history.push_back(loss);
            if (loss < report.best_loss) {
                report.best_loss = loss;
                report.best_params = params;
            }
            opt.step(params, grad, it);
        }
        reports.push_back(std::move(report));
    }
    return reports;
}

} // namespace detail

// Optimize against a single vector's own truncated target. One report per
// run; run r uses seed + r.
inline std::vector<FitReport> fit_single(const ansatz::CircuitSpec& spec,
                                         const tensornet::DataVector& x,
                                         double gamma, std::size_t k, int iters,
                                         int runs, std::uint64_t seed,
                                         const AdamWConfig& opt_cfg = {}) {
    FitBatch batch;
    batch.emplace_back(x, vector_target(x, gamma, k));
    return detail::fit(spec, batch, iters, runs, seed, opt_cfg);
}

// Optimize against a whole sample; each vector keeps its own (gamma, k)
// truncated target and the loss is the batch mean.
inline std::vector<FitReport> fit_sample(const ansatz::CircuitSpec& spec,
                                         const std::vector<tensornet::DataVector>& sample,
                                         double gamma, std::size_t k, int iters,
                                         int runs, std::uint64_t seed,
                                         const AdamWConfig& opt_cfg = {}) {
    if (sample.empty()) throw std::invalid_argument("fit_sample: empty sample");
    FitBatch batch;
    batch.reserve(sample.size());
    for (const auto& x : sample) {
        batch.emplace_back(x, vector_target(x, gamma, k));
    }
    return detail::fit(spec, batch, iters, runs, seed, opt_cfg);
}

} // namespace sc::training

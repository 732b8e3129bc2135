#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sc/ansatz.hpp"
#include "sc/dataio.hpp"
#include "sc/mlp.hpp"
#include "sc/rng.hpp"
#include "sc/tensornet.hpp"
#include "sc/training.hpp"

// End-to-end pipelines under stratified k-fold cross validation: the
// classifier head on original or reduced vectors, and the joint
// quantum-plus-classical model where the circuit's per-qubit marginals feed
// the head and both parameter sets step together.
namespace sc::hybrid {

enum class Mode { kClassicalOriginal, kClassicalReduced, kHybrid };

inline std::string mode_name(Mode m) {
    switch (m) {
        case Mode::kClassicalOriginal: return "classical-original";
        case Mode::kClassicalReduced: return "classical-reduced";
        case Mode::kHybrid: return "hybrid";
    }
    return "?";
}

inline Mode parse_mode(const std::string& s) {
    if (s == "classical-original") return Mode::kClassicalOriginal;
    if (s == "classical-reduced") return Mode::kClassicalReduced;
    if (s == "hybrid") return Mode::kHybrid;
    throw std::invalid_argument("unknown mode '" + s +
                                "' (classical-original | classical-reduced | hybrid)");
}

struct ExperimentConfig {
    std::string dataset;
    std::string data_dir;       // extra lookup root for named datasets
    Mode mode = Mode::kClassicalOriginal;
    double gamma = 0.3;
    int k_override = 0;         // 0 = registry default or mean-vector selection
    std::size_t k_max = 16;
    std::size_t max_samples = 1000;
    int folds = 5;
    int epochs = 100;
    int batch_size = 32;
    std::uint64_t seed = 0;
    double lr = 0.01;
    double lr_decay = 0.99;
    bool freeze_quantum = false;     // ablation: leave circuit angles at init
    bool renormalize_reduced = true; // reduced vectors rescaled to unit norm
    bool standardize = false;
};

struct ParamCounts {
    std::size_t quantum = 0;
    std::size_t classical = 0;
    std::size_t total = 0;
};

struct FoldReport {
    int fold = 0;
    std::vector<double> train_loss;   // per epoch
    std::vector<double> val_accuracy; // per epoch
    double final_accuracy = 0.0;
    ParamCounts params;
};

struct FoldSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

// Disjoint covering folds with class proportions preserved within one
// sample: each class's (shuffled) members are dealt round-robin.
inline std::vector<FoldSplit> stratified_folds(const std::vector<int>& labels,
                                               int folds, std::uint64_t seed) {
    if (folds < 2) throw std::invalid_argument("stratified_folds: folds must be >= 2");
    if (labels.empty()) throw std::invalid_argument("stratified_folds: no labels");
    const int classes = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    Rng rng(seed);
    std::vector<std::vector<std::size_t>> val_of(folds);
    for (int c = 0; c < classes; ++c) {
        if (by_class[c].size() < static_cast<std::size_t>(folds)) {
            throw std::runtime_error("stratified_folds: class " + std::to_string(c) +
                                     " has " + std::to_string(by_class[c].size()) +
                                     " members, fewer than " + std::to_string(folds) +
                                     " folds");
        }
        rng.shuffle(by_class[c]);
        for (std::size_t i = 0; i < by_class[c].size(); ++i) {
            val_of[i % folds].push_back(by_class[c][i]);
        }
    }
    std::vector<FoldSplit> splits(folds);
    std::vector<int> owner(labels.size(), 0);
    for (int f = 0; f < folds; ++f) {
        std::sort(val_of[f].begin(), val_of[f].end());
        for (std::size_t i : val_of[f]) owner[i] = f;
        splits[f].val = val_of[f];
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (int f = 0; f < folds; ++f) {
            if (owner[i] != f) splits[f].train.push_back(i);
        }
    }
    return splits;
}

namespace detail {

struct Prepared {
    dataio::Dataset ds;
    std::vector<tensornet::DataVector> vectors;
    std::vector<int> labels; // aligned with vectors (zero-norm rows removed)
    std::size_t k = 1;
};

inline std::size_t resolve_k(const ExperimentConfig& cfg, const std::string& name,
                             const std::vector<tensornet::DataVector>& vectors) {
    if (cfg.k_override > 0) return static_cast<std::size_t>(cfg.k_override);
    const auto it = dataio::known_datasets().find(name);
    if (it != dataio::known_datasets().end() && it->second.k > 0) {
        return static_cast<std::size_t>(it->second.k);
    }
    return training::select_k(vectors, cfg.gamma, cfg.k_max);
}

inline Prepared prepare_data(const ExperimentConfig& cfg) {
    dataio::LoadOptions opts;
    opts.standardize = cfg.standardize;
    dataio::Dataset ds =
        dataio::resolve(cfg.dataset, opts, cfg.data_dir, derive_seed(cfg.seed, 11));
    if (ds.regression) {
        throw std::runtime_error("experiment: '" + ds.name +
                                 "' is a regression dataset; classification only");
    }
    ds = dataio::subsample(ds, cfg.max_samples, derive_seed(cfg.seed, 12),
                           /*stratify=*/true);
    Prepared p;
    std::vector<std::size_t> dropped;
    p.vectors = dataio::to_vectors(ds, &dropped);
    p.labels.reserve(p.vectors.size());
    std::size_t di = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (di < dropped.size() && dropped[di] == i) {
            ++di;
            continue;
        }
        p.labels.push_back(ds.labels[i]);
    }
    p.k = resolve_k(cfg, ds.name, p.vectors);
    p.ds = std::move(ds);
    return p;
}

// Feature rows for the classical modes: the normalized amplitudes, or the
// truncated reconstruction (optionally renormalized).
inline Matrix classical_inputs(const Prepared& p, const ExperimentConfig& cfg) {
    const std::size_t dim = tensornet::dim_of(p.ds.n);
    Matrix x(p.vectors.size(), dim);
    for (std::size_t r = 0; r < p.vectors.size(); ++r) {
        if (cfg.mode == Mode::kClassicalOriginal) {
            std::copy(p.vectors[r].amplitudes.begin(), p.vectors[r].amplitudes.end(),
                      x.row(r).begin());
            continue;
        }
        const auto d = tensornet::decompose(p.vectors[r]);
        const auto t = tensornet::truncate(d, cfg.gamma, p.k);
        std::vector<double> rec = tensornet::reconstruct(t.kept);
        if (cfg.renormalize_reduced) {
            double s = 0.0;
            for (double v : rec) s += v * v;
            if (s > 0.0) {
                const double inv = 1.0 / std::sqrt(s);
                for (double& v : rec) v *= inv;
            }
        }
        std::copy(rec.begin(), rec.end(), x.row(r).begin());
    }
    return x;
}

inline double accuracy(const Matrix& logits, const std::vector<int>& labels) {
    std::size_t hit = 0;
    for (std::size_t r = 0; r < logits.rows; ++r) {
        std::size_t arg = 0;
        for (std::size_t c = 1; c < logits.cols; ++c) {
            if (logits(r, c) > logits(r, arg)) arg = c;
        }
        if (static_cast<int>(arg) == labels[r]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(logits.rows);
}

inline Matrix rows_of(const Matrix& x, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), x.cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto src = x.row(idx[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

inline std::vector<int> labels_of(const std::vector<int>& labels,
                                  const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(labels[i]);
    return out;
}

} // namespace detail

// One train-mode batch through the joint model: circuit marginals feed the
// head, cross entropy scores the logits, and the head's input gradient is
// pulled back through each sample's circuit.
struct JointBatchResult {
    double loss = 0.0;
    std::vector<double> head_grads;
    std::vector<double> circuit_grads;
};

inline JointBatchResult joint_batch(const ansatz::CircuitSpec& qspec,
                                    std::span<const double> qparams,
                                    const mlp::MLPSpec& spec, mlp::MLPParams& params,
                                    const std::vector<tensornet::DataVector>& xs,
                                    const std::vector<int>& ys,
                                    std::uint64_t dropout_seed) {
    Matrix inputs(xs.size(), qspec.n);
    for (std::size_t r = 0; r < xs.size(); ++r) {
        const auto fw = ansatz::forward(qspec, qparams, xs[r]);
        std::copy(fw.marginals.begin(), fw.marginals.end(), inputs.row(r).begin());
    }
    auto [logits, cache] =
        mlp::forward(spec, params, inputs, mlp::Mode::kTrain, dropout_seed);
    auto [loss, dlogits] = mlp::cross_entropy(logits, ys);
    auto back = mlp::backward(cache, dlogits);

    JointBatchResult out;
    out.loss = loss;
    out.head_grads = std::move(back.grads);
    out.circuit_grads.assign(qparams.size(), 0.0);
    for (std::size_t r = 0; r < xs.size(); ++r) {
        const auto g = ansatz::gradient(qspec, qparams, xs[r], back.dinput.row(r),
                                        ansatz::Upstream::kMarginals);
        for (std::size_t i = 0; i < g.size(); ++i) out.circuit_grads[i] += g[i];
    }
    return out;
}

inline ParamCounts count_parameters(const ExperimentConfig& cfg) {
    int n = 0, classes = 0;
    std::size_t k = 1;
    const auto it = dataio::known_datasets().find(cfg.dataset);
    if (it != dataio::known_datasets().end() && !it->second.synthetic) {
        if (it->second.regression) {
            throw std::runtime_error("count_parameters: '" + cfg.dataset +
                                     "' is a regression dataset; classification only");
        }
        n = it->second.n;
        classes = it->second.classes;
        k = cfg.k_override > 0 ? static_cast<std::size_t>(cfg.k_override)
                               : static_cast<std::size_t>(it->second.k);
    } else {
        const auto p = detail::prepare_data(cfg);
        n = p.ds.n;
        classes = p.ds.classes();
        k = p.k;
    }
    ParamCounts counts;
    mlp::MLPSpec head;
    head.out_dim = classes;
    if (cfg.mode == Mode::kHybrid) {
        counts.quantum = ansatz::build_spec(n, static_cast<int>(k)).param_count();
        head.in_dim = n;
    } else {
        head.in_dim = static_cast<int>(tensornet::dim_of(n));
    }
    counts.classical = mlp::param_count(head);
    counts.total = counts.quantum + counts.classical;
    return counts;
}

// Classifier head on precomputed feature rows; one model per fold, freshly
// initialized. Single-sample remainder batches are skipped (batchnorm needs
// at least two rows).
inline std::vector<FoldReport> run_classical(const ExperimentConfig& cfg) {
    if (cfg.mode == Mode::kHybrid) {
        throw std::invalid_argument("run_classical: use run_hybrid for hybrid mode");
    }
    const auto p = detail::prepare_data(cfg);
    const Matrix x = detail::classical_inputs(p, cfg);
    const auto splits = stratified_folds(p.labels, cfg.folds, derive_seed(cfg.seed, 13));

    mlp::MLPSpec spec;
    spec.in_dim = static_cast<int>(x.cols);
    spec.out_dim = p.ds.classes();
    const ParamCounts counts{0, mlp::param_count(spec), mlp::param_count(spec)};

    training::AdamWConfig opt_cfg;
    opt_cfg.lr0 = cfg.lr;
    opt_cfg.lr_decay = cfg.lr_decay;

    std::vector<FoldReport> reports;
    for (int f = 0; f < cfg.folds; ++f) {
        const std::uint64_t fold_seed = derive_seed(cfg.seed, 100 + f);
        mlp::MLPParams params = mlp::init_params(spec, fold_seed);
        training::AdamW opt(params.learnable.size(), opt_cfg);

        const Matrix val_x = detail::rows_of(x, splits[f].val);
        const auto val_y = detail::labels_of(p.labels, splits[f].val);

        FoldReport report;
        report.fold = f;
        report.params = counts;
        std::vector<std::size_t> order = splits[f].train;
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            Rng shuffler(derive_seed(fold_seed, 1000 + epoch));
            shuffler.shuffle(order);
            double loss_sum = 0.0;
            std::size_t seen = 0;
            for (std::size_t off = 0; off < order.size();
                 off += static_cast<std::size_t>(cfg.batch_size)) {
                const std::size_t take = std::min<std::size_t>(cfg.batch_size,
                                                               order.size() - off);
                if (take < 2) continue;
                const std::vector<std::size_t> idx(order.begin() + off,
                                                   order.begin() + off + take);
                const Matrix bx = detail::rows_of(x, idx);
                const auto by = detail::labels_of(p.labels, idx);
                auto [logits, cache] =
                    mlp::forward(spec, params, bx, mlp::Mode::kTrain,
                                 derive_seed(fold_seed, 5000 + epoch * 1000 + off));
                auto [loss, dlogits] = mlp::cross_entropy(logits, by);
                const auto back = mlp::backward(cache, dlogits);
                opt.step(params.learnable, back.grads, epoch);
                loss_sum += loss * static_cast<double>(take);
                seen += take;
            }
            report.train_loss.push_back(seen > 0 ? loss_sum / static_cast<double>(seen)
                                                 : 0.0);
            auto [vlogits, vcache] = mlp::forward(spec, params, val_x, mlp::Mode::kEval);
            report.val_accuracy.push_back(detail::accuracy(vlogits, val_y));
        }
        report.final_accuracy = report.val_accuracy.back();
        reports.push_back(std::move(report));
    }
    return reports;
}

// Joint model: circuit marginals feed the head; the angle vector and the
// head parameters are updated by AdamW in the same step. The circuit part
// can be frozen at its initialization for ablation runs.
inline std::vector<FoldReport> run_hybrid(const ExperimentConfig& cfg) {
    if (cfg.mode != Mode::kHybrid) {
        throw std::invalid_argument("run_hybrid: config mode must be hybrid");
    }
    const auto p = detail::prepare_data(cfg);
    const auto splits = stratified_folds(p.labels, cfg.folds, derive_seed(cfg.seed, 13));
    const ansatz::CircuitSpec qspec =
        ansatz::build_spec(p.ds.n, static_cast<int>(p.k));

    mlp::MLPSpec spec;
    spec.in_dim = p.ds.n;
    spec.out_dim = p.ds.classes();
    const ParamCounts counts{qspec.param_count(), mlp::param_count(spec),
                             qspec.param_count() + mlp::param_count(spec)};

    training::AdamWConfig opt_cfg;
    opt_cfg.lr0 = cfg.lr;
    opt_cfg.lr_decay = cfg.lr_decay;

    const auto marginals_matrix = [&](std::span<const double> qparams,
                                      const std::vector<std::size_t>& idx) {
        Matrix m(idx.size(), p.ds.n);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const auto fw = ansatz::forward(qspec, qparams, p.vectors[idx[r]]);
            std::copy(fw.marginals.begin(), fw.marginals.end(), m.row(r).begin());
        }
        return m;
    };

    std::vector<FoldReport> reports;
    for (int f = 0; f < cfg.folds; ++f) {
        const std::uint64_t fold_seed = derive_seed(cfg.seed, 100 + f);
        std::vector<double> qparams = ansatz::init_params(qspec, fold_seed);
        mlp::MLPParams params = mlp::init_params(spec, derive_seed(fold_seed, 7));
        training::AdamW qopt(qparams.size(), opt_cfg);
        training::AdamW copt(params.learnable.size(), opt_cfg);

        const auto val_y = detail::labels_of(p.labels, splits[f].val);

        FoldReport report;
        report.fold = f;
        report.params = counts;
        std::vector<std::size_t> order = splits[f].train;
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            Rng shuffler(derive_seed(fold_seed, 1000 + epoch));
            shuffler.shuffle(order);
            double loss_sum = 0.0;
            std::size_t seen = 0;
            for (std::size_t off = 0; off < order.size();
                 off += static_cast<std::size_t>(cfg.batch_size)) {
                const std::size_t take = std::min<std::size_t>(cfg.batch_size,
                                                               order.size() - off);
                if (take < 2) continue;
                const std::vector<std::size_t> idx(order.begin() + off,
                                                   order.begin() + off + take);
                std::vector<tensornet::DataVector> bx;
                bx.reserve(idx.size());
                for (std::size_t i : idx) bx.push_back(p.vectors[i]);
                const auto by = detail::labels_of(p.labels, idx);
                const auto step = joint_batch(
                    qspec, qparams, spec, params, bx, by,
                    derive_seed(fold_seed, 5000 + epoch * 1000 + off));
                copt.step(params.learnable, step.head_grads, epoch);
                if (!cfg.freeze_quantum) qopt.step(qparams, step.circuit_grads, epoch);
                loss_sum += step.loss * static_cast<double>(take);
                seen += take;
            }
            report.train_loss.push_back(seen > 0 ? loss_sum / static_cast<double>(seen)
                                                 : 0.0);
            const Matrix val_x = marginals_matrix(qparams, splits[f].val);
            auto [vlogits, vcache] = mlp::forward(spec, params, val_x, mlp::Mode::kEval);
            report.val_accuracy.push_back(detail::accuracy(vlogits, val_y));
        }
        report.final_accuracy = report.val_accuracy.back();
        reports.push_back(std::move(report));
    }
    return reports;
}

// Mean and population standard deviation of the per-fold final accuracies.
inline std::pair<double, double> summarize(const std::vector<FoldReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("summarize: no reports");
    double mean = 0.0;
    for (const auto& r : reports) mean += r.final_accuracy;
    mean /= static_cast<double>(reports.size());
    double var = 0.0;
    for (const auto& r : reports) {
        const double d = r.final_accuracy - mean;
        var += d * d;
    }
    var /= static_cast<double>(reports.size());
    return {mean, std::sqrt(var)};
}

} // namespace sc::hybrid

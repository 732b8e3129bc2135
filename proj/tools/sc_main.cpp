// sc — Schmidt-circuit compression toolkit.
//
// Subcommands: decompose, fit-circuit, train-classical, train-hybrid,
// count-params, gen-data. Every command is deterministic under --seed and
// every output file starts with a JSON block of the fully resolved
// configuration. Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sc/ansatz.hpp"
#include "sc/dataio.hpp"
#include "sc/format.hpp"
#include "sc/hybrid.hpp"
#include "sc/tensornet.hpp"
#include "sc/training.hpp"

using namespace sc;

namespace {

using nlohmann::ordered_json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_file(const std::string& path, const std::string& contents) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file " + path);
    out << contents;
}

// Shared dataset/IO flags.
struct DataArgs {
    std::string data;
    std::string data_dir;
    std::string label_column = "label";
    int n_override = 0;
    int feature_limit = 0;
    bool standardize = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--data", data, "dataset name or CSV path")->required();
        cmd->add_option("--data-dir", data_dir,
                        "dataset directory (also $SC_DATA_DIR, then ./data)");
        cmd->add_option("--label-column", label_column, "label column name");
        cmd->add_option("--qubits", n_override, "override the qubit count");
        cmd->add_option("--feature-limit", feature_limit,
                        "keep only the first N feature columns");
        cmd->add_flag("--standardize", standardize, "z-score features before encoding");
    }

    dataio::LoadOptions options() const {
        dataio::LoadOptions opts;
        opts.label_column = label_column;
        opts.n_override = n_override;
        opts.feature_limit = feature_limit;
        opts.standardize = standardize;
        return opts;
    }

    void echo(ordered_json& j) const {
        j["data"] = data;
        if (!data_dir.empty()) j["data_dir"] = data_dir;
        j["label_column"] = label_column;
        if (n_override > 0) j["qubits"] = n_override;
        if (feature_limit > 0) j["feature_limit"] = feature_limit;
        j["standardize"] = standardize;
    }
};

int run_decompose(const DataArgs& dargs, double gamma, std::size_t sample,
                  std::size_t k_max, std::uint64_t seed, const std::string& out) {
    ordered_json config;
    config["command"] = "decompose";
    dargs.echo(config);
    config["gamma"] = gamma;
    config["sample"] = sample;
    config["k_max"] = k_max;
    config["seed"] = seed;
    config["out"] = out;

    auto ds = dataio::resolve(dargs.data, dargs.options(), dargs.data_dir, seed);
    ds = dataio::subsample(ds, sample, seed);
    const auto vectors = dataio::to_vectors(ds);
    if (vectors.empty()) throw std::runtime_error("decompose: no usable samples");
    const auto mean = tensornet::mean_vector(vectors);
    const auto d = tensornet::decompose(mean);
    const auto t = tensornet::truncate(d, gamma, k_max);

    write_file(out + ".json", tensornet::export_json(d, t, config.dump()));

    std::string csv = "# " + config.dump() + "\ncoefficient,probability,kept\n";
    for (std::size_t i = 0; i < d.terms.size(); ++i) {
        const double c = d.terms[i].coeff;
        csv += sc::format_double17(c) + "," + sc::format_double17(c * c) + "," +
               (i < t.k ? "1" : "0") + "\n";
    }
    write_file(out + "_coeffs.csv", csv);

    std::cout << "n=" << d.n << " terms=" << d.terms.size() << " k=" << t.k
              << " delta_psi=" << sc::format_double(t.delta_psi) << "\n";
    return 0;
}

int run_fit_circuit(const DataArgs& dargs, int k_flag, bool single, std::size_t sample,
                    int runs, int iters, double gamma, std::size_t k_max, double lr,
                    double lr_decay, std::uint64_t seed, const std::string& out) {
    auto ds = dataio::resolve(dargs.data, dargs.options(), dargs.data_dir, seed);
    ds = dataio::subsample(ds, sample, seed);
    const auto vectors = dataio::to_vectors(ds);
    if (vectors.empty()) throw std::runtime_error("fit-circuit: no usable samples");

    const std::size_t k = k_flag > 0 ? static_cast<std::size_t>(k_flag)
                                     : training::select_k(vectors, gamma, k_max);
    const auto spec = ansatz::build_spec(ds.n, static_cast<int>(k));

    ordered_json config;
    config["command"] = "fit-circuit";
    dargs.echo(config);
    config["k"] = k;
    config["single"] = single;
    config["sample"] = sample;
    config["runs"] = runs;
    config["iters"] = iters;
    config["gamma"] = gamma;
    config["lr"] = lr;
    config["lr_decay"] = lr_decay;
    config["seed"] = seed;
    config["out"] = out;

    training::AdamWConfig opt_cfg;
    opt_cfg.lr0 = lr;
    opt_cfg.lr_decay = lr_decay;

    std::vector<training::FitReport> reports;
    training::FitBatch zero_batch;
    if (single) {
        reports = training::fit_single(spec, vectors.front(), gamma, k, iters, runs,
                                       seed, opt_cfg);
        zero_batch.emplace_back(vectors.front(),
                                training::vector_target(vectors.front(), gamma, k));
    } else {
        reports = training::fit_sample(spec, vectors, gamma, k, iters, runs, seed,
                                       opt_cfg);
        for (const auto& v : vectors) {
            zero_batch.emplace_back(v, training::vector_target(v, gamma, k));
        }
    }
    const std::vector<double> zero(spec.param_count(), 0.0);
    const double zero_loss = training::circuit_loss(spec, zero, zero_batch);

    double mean_best = 0.0;
    ordered_json per_run = ordered_json::array();
    ordered_json seeds = ordered_json::array();
    for (const auto& r : reports) {
        std::string csv = "# " + config.dump() + "\niteration,loss\n";
        for (std::size_t i = 0; i < r.loss_history.size(); ++i) {
            csv += std::to_string(i) + "," + sc::format_double17(r.loss_history[i]) +
                   "\n";
        }
        write_file(out + "_run" + std::to_string(r.run) + ".csv", csv);
        mean_best += r.best_loss;
        per_run.push_back(r.best_loss);
        seeds.push_back(r.seed);
    }
    mean_best /= static_cast<double>(reports.size());

    ordered_json summary;
    summary["config"] = config;
    summary["n"] = ds.n;
    summary["k"] = k;
    summary["mean_best"] = mean_best;
    summary["per_run_best"] = per_run;
    summary["seeds"] = seeds;
    summary["zero_angle_loss"] = zero_loss;
    write_file(out + "_summary.json", summary.dump(2) + "\n");

    std::cout << "k=" << k << " mean best loss over " << runs
              << " runs: " << sc::format_double(mean_best)
              << " (zero-angle loss " << sc::format_double(zero_loss) << ")\n";
    return 0;
}

int run_train(const DataArgs& dargs, hybrid::Mode mode, hybrid::ExperimentConfig cfg,
              const std::string& out) {
    cfg.dataset = dargs.data;
    cfg.data_dir = dargs.data_dir;
    cfg.standardize = dargs.standardize;
    cfg.mode = mode;

    ordered_json config;
    config["command"] = mode == hybrid::Mode::kHybrid ? "train-hybrid" : "train-classical";
    dargs.echo(config);
    config["mode"] = hybrid::mode_name(mode);
    config["gamma"] = cfg.gamma;
    if (cfg.k_override > 0) config["k"] = cfg.k_override;
    config["max_samples"] = cfg.max_samples;
    config["folds"] = cfg.folds;
    config["epochs"] = cfg.epochs;
    config["batch_size"] = cfg.batch_size;
    config["lr"] = cfg.lr;
    config["lr_decay"] = cfg.lr_decay;
    config["freeze_quantum"] = cfg.freeze_quantum;
    config["renormalize_reduced"] = cfg.renormalize_reduced;
    config["seed"] = cfg.seed;
    config["out"] = out;

    const auto reports = mode == hybrid::Mode::kHybrid ? hybrid::run_hybrid(cfg)
                                                       : hybrid::run_classical(cfg);
    const auto [mean, stddev] = hybrid::summarize(reports);

    ordered_json per_fold = ordered_json::array();
    for (const auto& r : reports) {
        std::string csv = "# " + config.dump() + "\nepoch,train_loss,val_accuracy\n";
        for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
            csv += std::to_string(e) + "," + sc::format_double17(r.train_loss[e]) +
                   "," + sc::format_double17(r.val_accuracy[e]) + "\n";
        }
        write_file(out + "_fold" + std::to_string(r.fold) + ".csv", csv);
        ordered_json f;
        f["fold"] = r.fold;
        f["final_accuracy"] = r.final_accuracy;
        per_fold.push_back(f);
    }

    const auto counts = reports.front().params;
    ordered_json summary;
    summary["config"] = config;
    summary["per_fold"] = per_fold;
    summary["mean_acc"] = mean;
    summary["std_acc"] = stddev;
    summary["param_counts"] =
        ordered_json{{"quantum", counts.quantum},
                     {"classical", counts.classical},
                     {"total", counts.total}};
    write_file(out + "_summary.json", summary.dump(2) + "\n");

    std::cout << hybrid::mode_name(mode) << " accuracy " << sc::format_double(mean)
              << " +- " << sc::format_double(stddev) << " (params: quantum "
              << counts.quantum << ", classical " << counts.classical << ", total "
              << counts.total << ")\n";
    return 0;
}

int run_count_params(const DataArgs& dargs, const std::string& mode_name_str,
                     int k_flag) {
    const auto it = dataio::known_datasets().find(dargs.data);
    if (it == dataio::known_datasets().end() &&
        !std::filesystem::exists(dargs.data)) {
        std::string names;
        for (const auto& [k, v] : dataio::known_datasets()) names += k + " ";
        throw UsageError("unknown dataset '" + dargs.data + "'; known names: " + names);
    }
    hybrid::ExperimentConfig cfg;
    cfg.dataset = dargs.data;
    cfg.data_dir = dargs.data_dir;
    cfg.mode = hybrid::parse_mode(mode_name_str);
    cfg.k_override = k_flag;
    const auto counts = hybrid::count_parameters(cfg);
    std::cout << "dataset,mode,quantum,classical,total\n"
              << dargs.data << "," << mode_name_str << "," << counts.quantum << ","
              << counts.classical << "," << counts.total << "\n";
    if (cfg.mode != hybrid::Mode::kHybrid) {
        hybrid::ExperimentConfig hcfg = cfg;
        hcfg.mode = hybrid::Mode::kHybrid;
        const auto h = hybrid::count_parameters(hcfg);
        std::cout << "note: counting the k-term circuit angles alongside this head "
                     "gives "
                  << counts.total + h.quantum << " (" << counts.total << " + "
                  << h.quantum << ")\n";
    }
    return 0;
}

int run_gen_data(int qubits, int classes, int informative, double separation,
                 std::size_t samples, std::uint64_t seed, const std::string& out) {
    dataio::SyntheticSpec spec;
    spec.n = qubits;
    spec.classes = classes;
    spec.informative = informative;
    spec.separation = separation;
    spec.samples = samples;
    spec.seed = seed;
    const auto ds = dataio::make_classification(spec);
    const auto parent = std::filesystem::path(out).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    dataio::write_csv(ds, out);
    std::cout << "wrote " << out << " (" << ds.size() << " x " << ds.features.cols
              << ", " << classes << " classes)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Schmidt-circuit compression toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read defaults from a TOML config file");

    // decompose
    auto* dec = app.add_subcommand(
        "decompose", "decompose the mean vector of a sample and threshold it");
    DataArgs dec_data;
    dec_data.attach(dec);
    double dec_gamma = 0.3;
    std::size_t dec_sample = 100, dec_kmax = 16;
    std::uint64_t dec_seed = 0;
    std::string dec_out;
    dec->add_option("--gamma", dec_gamma, "coefficient threshold");
    dec->add_option("--sample", dec_sample, "subset size for the mean vector");
    dec->add_option("--k-max", dec_kmax, "cap on the kept term count");
    dec->add_option("--seed", dec_seed, "random seed");
    dec->add_option("--out", dec_out, "output prefix")->required();

    // fit-circuit
    auto* fit = app.add_subcommand("fit-circuit",
                                   "train the block-encoding circuit on targets");
    DataArgs fit_data;
    fit_data.attach(fit);
    int fit_k = 0, fit_runs = 5, fit_iters = 300;
    bool fit_single_flag = false;
    std::size_t fit_sample_size = 20, fit_kmax = 16;
    double fit_gamma = 0.3, fit_lr = 0.05, fit_decay = 0.99;
    std::uint64_t fit_seed = 0;
    std::string fit_out;
    fit->add_option("--k", fit_k, "term count (0 = derive from the mean vector)");
    fit->add_flag("--single", fit_single_flag, "fit one vector instead of the sample");
    fit->add_option("--sample", fit_sample_size, "sample size");
    fit->add_option("--runs", fit_runs, "optimization restarts");
    fit->add_option("--iters", fit_iters, "iterations per run");
    fit->add_option("--gamma", fit_gamma, "threshold used for targets and k selection");
    fit->add_option("--k-max", fit_kmax, "cap for derived k");
    fit->add_option("--lr", fit_lr, "initial learning rate");
    fit->add_option("--lr-decay", fit_decay, "per-iteration learning rate factor");
    fit->add_option("--seed", fit_seed, "random seed");
    fit->add_option("--out", fit_out, "output prefix")->required();

    // train-classical / train-hybrid
    const auto attach_train = [](CLI::App* cmd, DataArgs& dargs,
                                 hybrid::ExperimentConfig& cfg, std::string& out) {
        dargs.attach(cmd);
        cmd->add_option("--gamma", cfg.gamma, "truncation threshold");
        int* k_ptr = &cfg.k_override;
        cmd->add_option("--k", *k_ptr, "term count override");
        cmd->add_option("--max-samples", cfg.max_samples, "sample cap");
        cmd->add_option("--folds", cfg.folds, "cross-validation folds");
        cmd->add_option("--epochs", cfg.epochs, "training epochs");
        cmd->add_option("--batch", cfg.batch_size, "minibatch size");
        cmd->add_option("--lr", cfg.lr, "initial learning rate");
        cmd->add_option("--lr-decay", cfg.lr_decay, "per-epoch learning rate factor");
        cmd->add_option("--seed", cfg.seed, "random seed");
        cmd->add_option("--out", out, "output prefix")->required();
    };

    auto* trc = app.add_subcommand("train-classical",
                                   "cross-validate the classifier head");
    DataArgs trc_data;
    hybrid::ExperimentConfig trc_cfg;
    std::string trc_out, trc_mode = "classical-original";
    attach_train(trc, trc_data, trc_cfg, trc_out);
    trc->add_option("--mode", trc_mode, "classical-original | classical-reduced");
    bool trc_no_renorm = false;
    trc->add_flag("--no-renormalize", trc_no_renorm,
                  "keep reduced vectors at their truncated norm");

    auto* trh = app.add_subcommand("train-hybrid",
                                   "cross-validate the joint circuit plus head model");
    DataArgs trh_data;
    hybrid::ExperimentConfig trh_cfg;
    std::string trh_out;
    attach_train(trh, trh_data, trh_cfg, trh_out);
    trh->add_flag("--freeze-quantum", trh_cfg.freeze_quantum,
                  "keep circuit angles at their initialization");

    // count-params
    auto* cnt = app.add_subcommand("count-params",
                                   "print learnable parameter counts");
    DataArgs cnt_data;
    cnt_data.attach(cnt);
    std::string cnt_mode = "hybrid";
    int cnt_k = 0;
    cnt->add_option("--mode", cnt_mode,
                    "hybrid | classical-original | classical-reduced");
    cnt->add_option("--k", cnt_k, "term count override");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset CSV");
    int gen_qubits = 5, gen_classes = 2, gen_informative = 2;
    double gen_sep = 1.0;
    std::size_t gen_samples = 200;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--qubits", gen_qubits, "feature count = 2^qubits");
    gen->add_option("--classes", gen_classes, "class count");
    gen->add_option("--informative", gen_informative, "informative feature count");
    gen->add_option("--sep", gen_sep, "cluster separation");
    gen->add_option("--samples", gen_samples, "row count");
    gen->add_option("--seed", gen_seed, "random seed");
    gen->add_option("--out", gen_out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 2;
    }

    try {
        if (dec->parsed()) {
            return run_decompose(dec_data, dec_gamma, dec_sample, dec_kmax, dec_seed,
                                 dec_out);
        }
        if (fit->parsed()) {
            return run_fit_circuit(fit_data, fit_k, fit_single_flag, fit_sample_size,
                                   fit_runs, fit_iters, fit_gamma, fit_kmax, fit_lr,
                                   fit_decay, fit_seed, fit_out);
        }
        if (trc->parsed()) {
            trc_cfg.renormalize_reduced = !trc_no_renorm;
            return run_train(trc_data, hybrid::parse_mode(trc_mode), trc_cfg, trc_out);
        }
        if (trh->parsed()) {
            return run_train(trh_data, hybrid::Mode::kHybrid, trh_cfg, trh_out);
        }
        if (cnt->parsed()) {
            return run_count_params(cnt_data, cnt_mode, cnt_k);
        }
        if (gen->parsed()) {
            return run_gen_data(gen_qubits, gen_classes, gen_informative, gen_sep,
                                gen_samples, gen_seed, gen_out);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        const std::string msg = e.what();
        return msg.starts_with("unknown dataset") ? 2 : 1;
    }
    return 0;
}

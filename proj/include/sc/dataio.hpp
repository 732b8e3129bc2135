#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sc/matrix.hpp"
#include "sc/rng.hpp"
#include "sc/tensornet.hpp"

// Dataset ingestion: numeric CSV with a header row, label factorization,
// qubit-count assignment, zero-padding plus amplitude normalization,
// subsampling, and the synthetic cluster generator behind the
// "random5"/"random10" dataset names.
namespace sc::dataio {

struct Dataset {
    std::string name;
    Matrix features;              // samples x d raw features
    std::vector<int> labels;      // classification targets
    std::vector<double> targets;  // regression targets
    bool regression = false;
    int n = 0;                    // assigned qubit count, d <= 2^n
    std::vector<std::string> class_names;

    std::size_t size() const { return features.rows; }
    int classes() const { return static_cast<int>(class_names.size()); }
};

// Shipped defaults per known dataset name. k is the default term count used
// by the circuit experiments; feature_limit truncates the raw columns before
// qubit assignment (only diabetes needs it, and which columns the original
// 3-qubit assignment kept is not recorded anywhere, so the first 8 is a
// documented guess).
struct DatasetInfo {
    int n = 0;
    int k = 1;
    int classes = 0; // 0 for regression
    bool regression = false;
    int feature_limit = 0;
    bool synthetic = false;
};

inline const std::map<std::string, DatasetInfo>& known_datasets() {
    static const std::map<std::string, DatasetInfo> table = {
        {"iris", {2, 1, 3, false, 0, false}},
        {"california_housing", {3, 1, 0, true, 0, false}},
        {"diabetes", {3, 3, 0, true, 8, false}},
        {"wine", {4, 1, 3, false, 0, false}},
        {"breast_cancer", {5, 2, 2, false, 0, false}},
        {"ionosphere", {6, 1, 2, false, 0, false}},
        {"covtype", {6, 3, 7, false, 0, false}},
        {"digits", {6, 2, 10, false, 0, false}},
        {"random5", {5, 0, 2, false, 0, true}},
        {"random10", {10, 0, 2, false, 0, true}},
    };
    return table;
}

inline int ceil_log2_dim(std::size_t d) {
    int n = 1;
    while ((std::size_t{1} << n) < d) ++n;
    return n;
}

struct LoadOptions {
    std::string label_column = "label";
    int n_override = 0;     // 0 = registry default or ceil(log2 d)
    int feature_limit = 0;  // 0 = registry default (none for most datasets)
    bool standardize = false;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline std::optional<double> parse_double(std::string s) {
    // trim whitespace and a possible trailing CR
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return std::nullopt;
    const auto e = s.find_last_not_of(" \t\r\n");
    s = s.substr(b, e - b + 1);
    double value = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return value;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace detail

// Z-score each feature column in place (population statistics). Constant
// columns are left centered at zero.
inline void standardize_features(Dataset& ds) {
    for (std::size_t c = 0; c < ds.features.cols; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < ds.features.rows; ++r) mean += ds.features(r, c);
        mean /= static_cast<double>(ds.features.rows);
        double var = 0.0;
        for (std::size_t r = 0; r < ds.features.rows; ++r) {
            const double d = ds.features(r, c) - mean;
            var += d * d;
        }
        var /= static_cast<double>(ds.features.rows);
        const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
        for (std::size_t r = 0; r < ds.features.rows; ++r) {
            ds.features(r, c) = (ds.features(r, c) - mean) * inv;
        }
    }
}

inline Dataset load_csv(const std::string& path, const LoadOptions& opts = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);

    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("load_csv: empty file " + path);
    const auto columns = detail::split_csv_line(header);
    std::size_t label_col = columns.size();
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (detail::trim(columns[i]) == opts.label_column) {
            label_col = i;
            break;
        }
    }
    if (label_col == columns.size()) {
        throw std::runtime_error("load_csv: label column '" + opts.label_column +
                                 "' not found in " + path);
    }

    const std::string name = std::filesystem::path(path).stem().string();
    const auto it = known_datasets().find(name);
    const DatasetInfo* info = it != known_datasets().end() ? &it->second : nullptr;

    Dataset ds;
    ds.name = name;
    ds.regression = info != nullptr && info->regression;

    std::vector<double> flat;
    std::vector<std::string> raw_labels;
    std::string line;
    std::size_t row = 1;
    const std::size_t d_raw = columns.size() - 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != columns.size()) {
            throw std::runtime_error("load_csv: row " + std::to_string(row) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(columns.size()));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == label_col) {
                raw_labels.push_back(detail::trim(cells[c]));
                continue;
            }
            const auto value = detail::parse_double(cells[c]);
            if (!value || !std::isfinite(*value)) {
                throw std::runtime_error("load_csv: row " + std::to_string(row) +
                                         ", column " + std::to_string(c + 1) + " ('" +
                                         detail::trim(cells[c]) + "') is not numeric");
            }
            flat.push_back(*value);
        }
    }
    if (raw_labels.empty()) throw std::runtime_error("load_csv: no data rows in " + path);

    int feature_limit = opts.feature_limit;
    if (feature_limit == 0 && info != nullptr) feature_limit = info->feature_limit;
    std::size_t d = d_raw;
    if (feature_limit > 0 && static_cast<std::size_t>(feature_limit) < d_raw) {
        d = static_cast<std::size_t>(feature_limit);
        std::cerr << "load_csv: WARNING keeping only the first " << d << " of " << d_raw
                  << " feature columns of '" << name
                  << "'; the original column subset for this qubit count is unrecorded\n";
    }

    ds.features = Matrix(raw_labels.size(), d);
    for (std::size_t r = 0; r < raw_labels.size(); ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            ds.features(r, c) = flat[r * d_raw + c];
        }
    }

    if (ds.regression) {
        ds.targets.reserve(raw_labels.size());
        for (std::size_t r = 0; r < raw_labels.size(); ++r) {
            const auto value = detail::parse_double(raw_labels[r]);
            if (!value) {
                throw std::runtime_error("load_csv: row " + std::to_string(r + 2) +
                                         ": regression target '" + raw_labels[r] +
                                         "' is not numeric");
            }
            ds.targets.push_back(*value);
        }
    } else {
        // Factorize labels onto [0, classes) by sorted distinct value.
        std::vector<std::string> distinct = raw_labels;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        ds.class_names = distinct;
        ds.labels.reserve(raw_labels.size());
        for (const auto& s : raw_labels) {
            const auto pos = std::lower_bound(distinct.begin(), distinct.end(), s);
            ds.labels.push_back(static_cast<int>(pos - distinct.begin()));
        }
    }

    ds.n = opts.n_override > 0 ? opts.n_override
                               : (info != nullptr ? info->n : ceil_log2_dim(d));
    if (d > tensornet::dim_of(ds.n)) {
        throw std::runtime_error("load_csv: " + std::to_string(d) +
                                 " features do not fit 2^" + std::to_string(ds.n) +
                                 " amplitudes; padding never truncates (set a feature "
                                 "limit explicitly to cut columns)");
    }
    if (opts.standardize) standardize_features(ds);
    return ds;
}

// Zero-pad each row to 2^n and scale to unit norm. Zero-norm rows are
// excluded; their indices are reported through `dropped` and a warning.
inline std::vector<tensornet::DataVector> to_vectors(
    const Dataset& ds, std::vector<std::size_t>* dropped = nullptr) {
    std::vector<tensornet::DataVector> out;
    out.reserve(ds.size());
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const auto row = ds.features.row(r);
        double s = 0.0;
        for (double x : row) s += x * x;
        if (s == 0.0) {
            std::cerr << "to_vectors: WARNING dropping zero-norm sample at index " << r
                      << "\n";
            if (dropped != nullptr) dropped->push_back(r);
            continue;
        }
        out.push_back(
            tensornet::normalize(std::vector<double>(row.begin(), row.end()), ds.n));
    }
    return out;
}

namespace detail {

inline Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.name = ds.name;
    out.regression = ds.regression;
    out.n = ds.n;
    out.class_names = ds.class_names;
    out.features = Matrix(idx.size(), ds.features.cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto src = ds.features.row(idx[r]);
        std::copy(src.begin(), src.end(), out.features.row(r).begin());
        if (ds.regression) {
            out.targets.push_back(ds.targets[idx[r]]);
        } else {
            out.labels.push_back(ds.labels[idx[r]]);
        }
    }
    return out;
}

} // namespace detail

// Random subset without replacement; stratified keeps class proportions
// within one sample per class (largest remainder allocation).
inline Dataset subsample(const Dataset& ds, std::size_t max_count, std::uint64_t seed,
                         bool stratify = false) {
    if (max_count < 1) throw std::invalid_argument("subsample: max_count must be >= 1");
    if (max_count >= ds.size()) return ds;
    Rng rng(seed);
    std::vector<std::size_t> chosen;
    if (!stratify || ds.regression) {
        std::vector<std::size_t> idx(ds.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        rng.shuffle(idx);
        chosen.assign(idx.begin(), idx.begin() + max_count);
    } else {
        const int classes = ds.classes();
        std::vector<std::vector<std::size_t>> by_class(classes);
        for (std::size_t i = 0; i < ds.labels.size(); ++i) {
            by_class[ds.labels[i]].push_back(i);
        }
        // Proportional share per class, remainders to the largest fractions.
        std::vector<std::size_t> take(classes, 0);
        std::vector<std::pair<double, int>> fractions;
        std::size_t assigned = 0;
        for (int c = 0; c < classes; ++c) {
            const double exact = static_cast<double>(by_class[c].size()) * max_count /
                                 static_cast<double>(ds.size());
            take[c] = std::min<std::size_t>(static_cast<std::size_t>(exact),
                                            by_class[c].size());
            assigned += take[c];
            fractions.emplace_back(exact - std::floor(exact), c);
        }
        std::stable_sort(fractions.begin(), fractions.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (const auto& [frac, c] : fractions) {
            if (assigned >= max_count) break;
            if (take[c] < by_class[c].size()) {
                ++take[c];
                ++assigned;
            }
        }
        for (int c = 0; c < classes; ++c) {
            rng.shuffle(by_class[c]);
            chosen.insert(chosen.end(), by_class[c].begin(),
                          by_class[c].begin() + take[c]);
        }
        std::sort(chosen.begin(), chosen.end());
    }
    return detail::take_rows(ds, chosen);
}

struct SyntheticSpec {
    int n = 5;            // features = 2^n
    int classes = 2;
    int informative = 2;  // dimensions that carry the class signal
    double separation = 1.0;
    std::size_t samples = 200;
    std::uint64_t seed = 0;
};

// Gaussian clusters centered at distinct random hypercube vertices (scaled
// by `separation`) over the informative subspace; the remaining features are
// standard normal noise.
inline Dataset make_classification(const SyntheticSpec& spec) {
    if (spec.classes < 2) throw std::invalid_argument("make_classification: classes >= 2");
    if (spec.n < 1) throw std::invalid_argument("make_classification: n >= 1");
    const std::size_t dim = tensornet::dim_of(spec.n);
    int informative = std::max(spec.informative, 1);
    informative = std::min<int>(informative, static_cast<int>(dim));
    while ((1 << informative) < spec.classes) ++informative;

    Rng rng(spec.seed);
    // Distinct vertex per class.
    std::vector<std::size_t> vertices;
    while (vertices.size() < static_cast<std::size_t>(spec.classes)) {
        const std::size_t v = rng.below(std::size_t{1} << informative);
        if (std::find(vertices.begin(), vertices.end(), v) == vertices.end()) {
            vertices.push_back(v);
        }
    }

    Dataset ds;
    ds.name = "random" + std::to_string(spec.n);
    ds.n = spec.n;
    ds.features = Matrix(spec.samples, dim);
    ds.labels.reserve(spec.samples);
    for (int c = 0; c < spec.classes; ++c) {
        ds.class_names.push_back(std::to_string(c));
    }
    for (std::size_t s = 0; s < spec.samples; ++s) {
        const int label = static_cast<int>(s % spec.classes);
        ds.labels.push_back(label);
        const std::size_t vertex = vertices[label];
        for (std::size_t f = 0; f < dim; ++f) {
            double x = rng.normal();
            if (f < static_cast<std::size_t>(informative)) {
                const double center = (vertex >> f) & 1 ? spec.separation : -spec.separation;
                x += center;
            }
            ds.features(s, f) = x;
        }
    }
    return ds;
}

inline void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    for (std::size_t c = 0; c < ds.features.cols; ++c) out << "f" << c << ",";
    out << "label\n";
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (std::size_t c = 0; c < ds.features.cols; ++c) {
            out << format_double(ds.features(r, c)) << ",";
        }
        if (ds.regression) {
            out << format_double(ds.targets[r]) << "\n";
        } else {
            out << ds.class_names[ds.labels[r]] << "\n";
        }
    }
}

// Resolve a dataset reference: an explicit CSV path, a synthetic name
// (random5/random10, generated on the fly), or a known name looked up under
// `data_dir`, $SC_DATA_DIR, then ./data.
inline Dataset resolve(const std::string& ref, const LoadOptions& opts = {},
                       const std::string& data_dir = "", std::uint64_t seed = 0) {
    namespace fs = std::filesystem;
    const auto it = known_datasets().find(ref);
    if (it != known_datasets().end() && it->second.synthetic) {
        SyntheticSpec spec;
        spec.n = it->second.n;
        spec.classes = it->second.classes;
        spec.samples = 200;
        spec.seed = seed;
        Dataset ds = make_classification(spec);
        if (opts.standardize) standardize_features(ds);
        return ds;
    }
    if (fs::exists(ref) && !fs::is_directory(ref)) return load_csv(ref, opts);
    if (it == known_datasets().end()) {
        std::string names;
        for (const auto& [k, v] : known_datasets()) names += k + " ";
        throw std::runtime_error("unknown dataset '" + ref + "'; known names: " + names +
                                 "(or pass a CSV path)");
    }
    std::vector<fs::path> candidates;
    if (!data_dir.empty()) candidates.emplace_back(fs::path(data_dir) / (ref + ".csv"));
    if (const char* env = std::getenv("SC_DATA_DIR"); env != nullptr && *env != '\0') {
        candidates.emplace_back(fs::path(env) / (ref + ".csv"));
    }
    candidates.emplace_back(fs::path("data") / (ref + ".csv"));
    for (const auto& p : candidates) {
        if (fs::exists(p)) return load_csv(p.string(), opts);
    }
    throw std::runtime_error("dataset '" + ref + "' not found (looked for " + ref +
                             ".csv under --data-dir, $SC_DATA_DIR, ./data); run "
                             "tools/fetch_data.py to download it");
}

} // namespace sc::dataio

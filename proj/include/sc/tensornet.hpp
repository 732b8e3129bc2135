#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "sc/format.hpp"

// Recursive Schmidt decomposition of real vectors. A unit vector of length
// 2^n is split one qubit at a time via the SVD of its 2 x 2^(n-1) reshape,
// yielding a linear combination of Kronecker products of two-dimensional
// unit factors. Truncating the combination to its largest coefficients gives
// a k-rank approximation whose error is governed by the dropped weights.
namespace sc::tensornet {

using Factor = std::array<double, 2>;

struct DataVector {
    std::vector<double> amplitudes; // length 2^n, unit L2 norm
    int n = 0;                      // qubit count
};

struct TensorTerm {
    double coeff = 0.0;          // nonnegative; sign is carried by the factors
    std::vector<Factor> factors; // n unit 2-vectors, qubit 0 (most significant) first
};

struct TensorDecomposition {
    int n = 0;
    std::vector<TensorTerm> terms; // sorted by coeff descending
};

struct TruncationResult {
    TensorDecomposition kept;
    std::size_t k = 0;
    double gamma = 0.0;
    double delta_psi = 0.0; // L2 distance between full and kept reconstructions
};

inline std::size_t dim_of(int n) { return std::size_t{1} << n; }

namespace detail {

constexpr double kSigmaFloor = 1e-12; // branches below this are not recursed
constexpr double kSignFloor = 1e-12;  // magnitude that counts as "nonzero" for sign fixing

inline double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Flip u (and its paired remainder w) so that the first component of u with
// magnitude above kSignFloor is positive. Removes the SVD sign freedom and
// makes the decomposition deterministic.
inline void canonicalize(Factor& u, std::vector<double>& w) {
    for (double x : u) {
        if (std::abs(x) > kSignFloor) {
            if (x < 0.0) {
                u[0] = -u[0];
                u[1] = -u[1];
                for (double& y : w) y = -y;
            }
            return;
        }
    }
}

// Decompose a unit vector of length 2^n; every emitted term is scaled by the
// accumulated coefficient of the branch above it.
inline void decompose_rec(const std::vector<double>& v, int n,
                          std::vector<TensorTerm>& out) {
    if (n == 1) {
        out.push_back({1.0, {Factor{v[0], v[1]}}});
        return;
    }
    const std::size_t half = dim_of(n - 1);
    // Gram matrix of the 2 x 2^(n-1) reshape M with M[r][c] = v[r*half + c].
    double g00 = 0.0, g01 = 0.0, g11 = 0.0;
    for (std::size_t c = 0; c < half; ++c) {
        g00 += v[c] * v[c];
        g01 += v[c] * v[half + c];
        g11 += v[half + c] * v[half + c];
    }
    const double phi = 0.5 * std::atan2(2.0 * g01, g00 - g11);
    const double cs = std::cos(phi), sn = std::sin(phi);
    const Factor us[2] = {{cs, sn}, {-sn, cs}};

    for (Factor u : us) {
        // w = M^T u; its norm is the Schmidt coefficient of this branch.
        std::vector<double> w(half);
        for (std::size_t c = 0; c < half; ++c) {
            w[c] = u[0] * v[c] + u[1] * v[half + c];
        }
        const double sigma = norm2(w);
        if (sigma < kSigmaFloor) continue;
        canonicalize(u, w);
        for (double& y : w) y /= sigma;

        std::vector<TensorTerm> children;
        decompose_rec(w, n - 1, children);
        for (TensorTerm& child : children) {
            TensorTerm term;
            term.coeff = sigma * child.coeff;
            term.factors.reserve(1 + child.factors.size());
            term.factors.push_back(u);
            term.factors.insert(term.factors.end(), child.factors.begin(),
                                child.factors.end());
            out.push_back(std::move(term));
        }
    }
}

} // namespace detail

// Zero-pad to length 2^n and scale to unit L2 norm.
inline DataVector normalize(const std::vector<double>& raw, int n) {
    if (n < 1) throw std::invalid_argument("normalize: n must be >= 1");
    const std::size_t dim = dim_of(n);
    if (raw.size() > dim) {
        throw std::invalid_argument("normalize: input length " +
                                    std::to_string(raw.size()) + " exceeds 2^n = " +
                                    std::to_string(dim));
    }
    double s = 0.0;
    for (double x : raw) s += x * x;
    if (s == 0.0) throw std::invalid_argument("normalize: zero vector");
    const double inv = 1.0 / std::sqrt(s);
    DataVector out;
    out.n = n;
    out.amplitudes.assign(dim, 0.0);
    for (std::size_t i = 0; i < raw.size(); ++i) out.amplitudes[i] = raw[i] * inv;
    return out;
}

// Renormalized sum of the samples.
inline DataVector mean_vector(const std::vector<DataVector>& samples) {
    if (samples.empty()) throw std::invalid_argument("mean_vector: empty sample");
    const int n = samples.front().n;
    const std::size_t dim = samples.front().amplitudes.size();
    std::vector<double> sum(dim, 0.0);
    for (const DataVector& v : samples) {
        if (v.amplitudes.size() != dim) {
            throw std::invalid_argument("mean_vector: mismatched lengths");
        }
        for (std::size_t i = 0; i < dim; ++i) sum[i] += v.amplitudes[i];
    }
    const double nrm = detail::norm2(sum);
    if (nrm == 0.0) throw std::runtime_error("mean_vector: degenerate mean");
    for (double& x : sum) x /= nrm;
    return DataVector{std::move(sum), n};
}

inline TensorDecomposition decompose(const DataVector& v) {
    if (v.n < 1) throw std::invalid_argument("decompose: n must be >= 1");
    if (v.amplitudes.size() != dim_of(v.n)) {
        throw std::invalid_argument("decompose: amplitude length is not 2^n");
    }
    const double nrm = detail::norm2(v.amplitudes);
    if (std::abs(nrm - 1.0) > 1e-9) {
        throw std::invalid_argument("decompose: input is not unit norm");
    }
    TensorDecomposition d;
    d.n = v.n;
    detail::decompose_rec(v.amplitudes, v.n, d.terms);
    std::stable_sort(d.terms.begin(), d.terms.end(),
                     [](const TensorTerm& a, const TensorTerm& b) {
                         return a.coeff > b.coeff;
                     });
    return d;
}

// Sum of coeff * (factor_0 ⊗ ... ⊗ factor_{n-1}) as a dense 2^n array.
inline std::vector<double> reconstruct(const TensorDecomposition& d) {
    const std::size_t dim = dim_of(d.n);
    std::vector<double> out(dim, 0.0);
    std::vector<double> cur, next;
    for (const TensorTerm& term : d.terms) {
        cur.assign(1, term.coeff);
        for (const Factor& f : term.factors) {
            next.resize(cur.size() * 2);
            for (std::size_t i = 0; i < cur.size(); ++i) {
                next[2 * i] = cur[i] * f[0];
                next[2 * i + 1] = cur[i] * f[1];
            }
            cur.swap(next);
        }
        for (std::size_t i = 0; i < dim; ++i) out[i] += cur[i];
    }
    return out;
}

// Keep the terms with coeff >= gamma, capped at the k_max largest. When no
// coefficient qualifies the single largest term is kept so the result is
// never empty.
inline TruncationResult truncate(const TensorDecomposition& d, double gamma,
                                 std::size_t k_max) {
    if (gamma < 0.0) throw std::invalid_argument("truncate: gamma must be >= 0");
    if (k_max < 1) throw std::invalid_argument("truncate: k_max must be >= 1");
    if (d.terms.empty()) throw std::invalid_argument("truncate: empty decomposition");

    std::size_t qualify = 0;
    while (qualify < d.terms.size() && d.terms[qualify].coeff >= gamma) ++qualify;
    const std::size_t k = std::max<std::size_t>(1, std::min(qualify, k_max));

    TruncationResult r;
    r.kept.n = d.n;
    r.kept.terms.assign(d.terms.begin(), d.terms.begin() + k);
    r.k = k;
    r.gamma = gamma;

    const std::vector<double> full = reconstruct(d);
    const std::vector<double> approx = reconstruct(r.kept);
    double err = 0.0;
    for (std::size_t i = 0; i < full.size(); ++i) {
        const double diff = full[i] - approx[i];
        err += diff * diff;
    }
    r.delta_psi = std::sqrt(err);
    return r;
}

// Squared components of the kept reconstruction, renormalized to sum 1 so
// they are comparable with circuit measurement probabilities.
inline std::vector<double> target_probabilities(const TruncationResult& t) {
    if (t.kept.terms.empty()) {
        throw std::invalid_argument("target_probabilities: no kept terms");
    }
    std::vector<double> p = reconstruct(t.kept);
    double sum = 0.0;
    for (double& x : p) {
        x = x * x;
        sum += x;
    }
    if (sum == 0.0) throw std::runtime_error("target_probabilities: zero reconstruction");
    for (double& x : p) x /= sum;
    return p;
}

// JSON export: {n, terms:[{coeff, factors:[[a,b],...]}], gamma, k, delta_psi}.
// The full term list is written; the first k entries are the kept ones.
// Coefficients carry 17 significant digits.
inline std::string export_json(const TensorDecomposition& d,
                               const TruncationResult& t,
                               const std::string& config_json = "") {
    std::string out = "{\n";
    if (!config_json.empty()) out += "  \"config\": " + config_json + ",\n";
    out += "  \"n\": " + std::to_string(d.n) + ",\n";
    out += "  \"gamma\": " + format_double17(t.gamma) + ",\n";
    out += "  \"k\": " + std::to_string(t.k) + ",\n";
    out += "  \"delta_psi\": " + format_double17(t.delta_psi) + ",\n";
    out += "  \"terms\": [\n";
    for (std::size_t i = 0; i < d.terms.size(); ++i) {
        const TensorTerm& term = d.terms[i];
        out += "    {\"coeff\": " + format_double17(term.coeff) + ", \"factors\": [";
        for (std::size_t j = 0; j < term.factors.size(); ++j) {
            out += "[" + format_double17(term.factors[j][0]) + ", " +
                   format_double17(term.factors[j][1]) + "]";
            if (j + 1 < term.factors.size()) out += ", ";
        }
        out += "]}";
        if (i + 1 < d.terms.size()) out += ",";
        out += "\n";
    }
    out += "  ]\n}\n";
    return out;
}

} // namespace sc::tensornet

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "sc/tensornet.hpp"

// Real-valued statevector simulator for Ry-family circuits. All amplitudes
// stay real because every gate is an orthogonal rotation.
//
// Qubit convention: qubit 0 is the most significant position of the
// amplitude index. The ancilla register occupies the top a positions, the
// data register the n positions below it, so an amplitude index decomposes
// as (ancilla value) * 2^n + (data basis index). Within the data register,
// data qubit 0 is again the most significant.
namespace sc::statevec {

struct QubitIndex {
    int value = 0;
};

constexpr int kMaxQubits = 20;

struct StateVector {
    std::vector<double> amplitudes; // length 2^(n+a)
    int n = 0;                      // data qubits
    int a = 0;                      // ancilla qubits

    int qubit_count() const { return n + a; }
    std::size_t dim() const { return std::size_t{1} << (n + a); }
    std::size_t data_dim() const { return std::size_t{1} << n; }

    QubitIndex ancilla_qubit(int j) const {
        if (j < 0 || j >= a) throw std::invalid_argument("ancilla_qubit: out of range");
        return QubitIndex{j};
    }
    QubitIndex data_qubit(int j) const {
        if (j < 0 || j >= n) throw std::invalid_argument("data_qubit: out of range");
        return QubitIndex{a + j};
    }
    // Bit position of a qubit within the amplitude index (bit 0 = least
    // significant).
    int bit_of(QubitIndex q) const {
        if (q.value < 0 || q.value >= n + a) {
            throw std::invalid_argument("qubit index out of range");
        }
        return n + a - 1 - q.value;
    }
};

namespace detail {

// Ry(theta) on the qubit at `target_bit`, restricted to the subspace where
// the masked index bits equal ctrl_val. Mask 0 applies unconditionally.
inline void rotate_pairs(StateVector& s, int target_bit, std::size_t ctrl_mask,
                         std::size_t ctrl_val, double theta) {
    const double c = std::cos(theta / 2.0);
    const double sn = std::sin(theta / 2.0);
    const std::size_t tbit = std::size_t{1} << target_bit;
    const std::size_t dim = s.dim();
    for (std::size_t i = 0; i < dim; ++i) {
        if ((i & tbit) != 0 || (i & ctrl_mask) != ctrl_val) continue;
        const std::size_t j = i | tbit;
        const double a0 = s.amplitudes[i];
        const double a1 = s.amplitudes[j];
        s.amplitudes[i] = c * a0 - sn * a1;
        s.amplitudes[j] = sn * a0 + c * a1;
    }
}

} // namespace detail

// |0...0>_ancilla ⊗ |x>_data, ancilla most significant.
inline StateVector prepare(const tensornet::DataVector& x, int a) {
    if (a < 0) throw std::invalid_argument("prepare: ancilla count must be >= 0");
    if (x.n + a > kMaxQubits) {
        throw std::invalid_argument("prepare: total qubit count exceeds cap of 20");
    }
    StateVector s;
    s.n = x.n;
    s.a = a;
    s.amplitudes.assign(s.dim(), 0.0);
    for (std::size_t i = 0; i < x.amplitudes.size(); ++i) {
        s.amplitudes[i] = x.amplitudes[i];
    }
    return s;
}

inline void apply_ry(StateVector& s, QubitIndex q, double theta) {
    detail::rotate_pairs(s, s.bit_of(q), 0, 0, theta);
}

inline void apply_cry(StateVector& s, QubitIndex control, QubitIndex target,
                      double theta) {
    if (control.value == target.value) {
        throw std::invalid_argument("apply_cry: control equals target");
    }
    const std::size_t cbit = std::size_t{1} << s.bit_of(control);
    detail::rotate_pairs(s, s.bit_of(target), cbit, cbit, theta);
}

// ⊗_j Ry(theta_j) on the data register, applied only where the ancilla
// register equals ancilla_value. Zero-controls are realized by the basis
// selection itself rather than explicit X conjugation.
inline void apply_term_controlled(StateVector& s, std::size_t ancilla_value,
                                  std::span<const double> thetas) {
    if (ancilla_value >= (std::size_t{1} << s.a)) {
        throw std::invalid_argument("apply_term_controlled: ancilla value out of range");
    }
    if (thetas.size() != static_cast<std::size_t>(s.n)) {
        throw std::invalid_argument("apply_term_controlled: need one angle per data qubit");
    }
    const std::size_t anc_mask = ((std::size_t{1} << s.a) - 1) << s.n;
    const std::size_t anc_val = ancilla_value << s.n;
    for (int j = 0; j < s.n; ++j) {
        detail::rotate_pairs(s, s.n - 1 - j, anc_mask, anc_val, thetas[j]);
    }
}

// Distribution over the data register, marginalized over the ancilla.
inline std::vector<double> data_probabilities(const StateVector& s) {
    const std::size_t ddim = s.data_dim();
    std::vector<double> p(ddim, 0.0);
    for (std::size_t i = 0; i < s.dim(); ++i) {
        p[i & (ddim - 1)] += s.amplitudes[i] * s.amplitudes[i];
    }
    return p;
}

// M[j] = P(data qubit j reads 1), marginalized over everything else.
inline std::vector<double> qubit_marginals(const StateVector& s) {
    std::vector<double> m(s.n, 0.0);
    for (std::size_t i = 0; i < s.dim(); ++i) {
        const double w = s.amplitudes[i] * s.amplitudes[i];
        for (int j = 0; j < s.n; ++j) {
            if (i & (std::size_t{1} << (s.n - 1 - j))) m[j] += w;
        }
    }
    return m;
}

} // namespace sc::statevec

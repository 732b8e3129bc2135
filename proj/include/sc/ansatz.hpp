#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sc/rng.hpp"
#include "sc/statevec.hpp"
#include "sc/tensornet.hpp"

// Block-encoding circuit family: an ancilla register of ceil(log2 k) qubits
// selects between k tensor-product terms, each term a chain of per-qubit Ry
// rotations on the data register. Two ansatz layers of Ry plus a linear
// controlled-Ry chain prepare the ancilla weights. No rotation layer follows
// the controlled terms; measurement happens on the data register only.
namespace sc::ansatz {

struct CircuitSpec {
    int n = 0; // data qubits
    int k = 1; // tensor-product terms
    int a = 0; // ancilla qubits, ceil(log2 k)

    std::size_t param_count() const {
        const std::size_t ancilla_layer = a + (a > 0 ? a - 1 : 0);
        return 2 * ancilla_layer + static_cast<std::size_t>(k) * n;
    }
};

inline int ceil_log2(int k) {
    int a = 0;
    while ((1 << a) < k) ++a;
    return a;
}

inline CircuitSpec build_spec(int n, int k) {
    if (n < 1) throw std::invalid_argument("build_spec: n must be >= 1");
    if (k < 1) throw std::invalid_argument("build_spec: k must be >= 1");
    if (k > (1 << n)) {
        throw std::invalid_argument("build_spec: k exceeds decomposition size");
    }
    CircuitSpec spec{n, k, ceil_log2(k)};
    if (n + spec.a > statevec::kMaxQubits) {
        throw std::invalid_argument("build_spec: total qubit count exceeds cap of 20");
    }
    return spec;
}

struct Forward {
    std::vector<double> probabilities; // length 2^n, sums to 1
    std::vector<double> marginals;     // length n, P(data qubit j = 1)
};

enum class Upstream { kProbabilities, kMarginals };

namespace detail {

// One trainable rotation: Ry on target_bit restricted to the control
// subspace. Slots are listed in circuit order and map 1:1 onto parameters:
// [layer 1 ancilla Ry (a), layer 1 CRy chain (a-1), layer 2 likewise,
//  then n angles per term for terms 0..k-1].
struct RotSlot {
    int target_bit = 0;
    std::size_t ctrl_mask = 0;
    std::size_t ctrl_val = 0;
};

inline std::vector<RotSlot> build_slots(const CircuitSpec& spec) {
    std::vector<RotSlot> slots;
    slots.reserve(spec.param_count());
    const int nq = spec.n + spec.a;
    const auto anc_bit = [&](int j) { return nq - 1 - j; };
    for (int layer = 0; layer < 2; ++layer) {
        if (spec.a == 0) break;
        for (int j = 0; j < spec.a; ++j) {
            slots.push_back({anc_bit(j), 0, 0});
        }
        for (int j = 0; j + 1 < spec.a; ++j) {
            const std::size_t cbit = std::size_t{1} << anc_bit(j);
            slots.push_back({anc_bit(j + 1), cbit, cbit});
        }
    }
    const std::size_t anc_mask = ((std::size_t{1} << spec.a) - 1) << spec.n;
    for (int term = 0; term < spec.k; ++term) {
        const std::size_t anc_val = static_cast<std::size_t>(term) << spec.n;
        for (int j = 0; j < spec.n; ++j) {
            slots.push_back({spec.n - 1 - j, anc_mask, anc_val});
        }
    }
    return slots;
}

inline void apply_slot(statevec::StateVector& s, const RotSlot& slot, double theta) {
    statevec::detail::rotate_pairs(s, slot.target_bit, slot.ctrl_mask,
                                   slot.ctrl_val, theta);
}

// lambda^T (dG/dtheta) psi for a rotation slot; psi is the state before the
// gate. Outside the control subspace the derivative vanishes.
inline double slot_grad(const std::vector<double>& lambda,
                        const std::vector<double>& psi, const RotSlot& slot,
                        double theta) {
    const double c = std::cos(theta / 2.0);
    const double sn = std::sin(theta / 2.0);
    const std::size_t tbit = std::size_t{1} << slot.target_bit;
    double g = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        if ((i & tbit) != 0 || (i & slot.ctrl_mask) != slot.ctrl_val) continue;
        const std::size_t j = i | tbit;
        const double a0 = psi[i], a1 = psi[j];
        g += lambda[i] * 0.5 * (-sn * a0 - c * a1);
        g += lambda[j] * 0.5 * (c * a0 - sn * a1);
    }
    return g;
}

inline void check_args(const CircuitSpec& spec, std::span<const double> params,
                       const tensornet::DataVector& x) {
    if (params.size() != spec.param_count()) {
        throw std::invalid_argument("ansatz: parameter vector length mismatch");
    }
    if (x.n != spec.n) {
        throw std::invalid_argument("ansatz: data vector qubit count mismatch");
    }
}

} // namespace detail

inline Forward forward(const CircuitSpec& spec, std::span<const double> params,
                       const tensornet::DataVector& x) {
    detail::check_args(spec, params, x);
    statevec::StateVector s = statevec::prepare(x, spec.a);
    const auto slots = detail::build_slots(spec);
    for (std::size_t i = 0; i < slots.size(); ++i) {
        detail::apply_slot(s, slots[i], params[i]);
    }
    return {statevec::data_probabilities(s), statevec::qubit_marginals(s)};
}

// dLoss/dparams via adjoint back-propagation: one forward sweep, then each
// gate is undone in turn while the cotangent is pulled back through its
// transpose. Exact up to rounding; agrees with central finite differences.
inline std::vector<double> gradient(const CircuitSpec& spec,
                                    std::span<const double> params,
                                    const tensornet::DataVector& x,
                                    std::span<const double> upstream,
                                    Upstream kind) {
    detail::check_args(spec, params, x);
    const std::size_t expected = kind == Upstream::kProbabilities
                                     ? (std::size_t{1} << spec.n)
                                     : static_cast<std::size_t>(spec.n);
    if (upstream.size() != expected) {
        throw std::invalid_argument("ansatz::gradient: upstream length mismatch");
    }

    statevec::StateVector s = statevec::prepare(x, spec.a);
    const auto slots = detail::build_slots(spec);
    for (std::size_t i = 0; i < slots.size(); ++i) {
        detail::apply_slot(s, slots[i], params[i]);
    }

    // Seed the cotangent from the probability derivative: both outputs are
    // sums of squared amplitudes, so dL/dpsi[i] = 2 psi[i] * (weight of i).
    std::vector<double> lambda(s.dim(), 0.0);
    const std::size_t ddim = s.data_dim();
    if (kind == Upstream::kProbabilities) {
        for (std::size_t i = 0; i < s.dim(); ++i) {
            lambda[i] = 2.0 * s.amplitudes[i] * upstream[i & (ddim - 1)];
        }
    } else {
        for (std::size_t i = 0; i < s.dim(); ++i) {
            double w = 0.0;
            for (int j = 0; j < spec.n; ++j) {
                if (i & (std::size_t{1} << (spec.n - 1 - j))) w += upstream[j];
            }
            lambda[i] = 2.0 * s.amplitudes[i] * w;
        }
    }

    statevec::StateVector lam;
    lam.n = s.n;
    lam.a = s.a;
    lam.amplitudes = std::move(lambda);

    std::vector<double> grads(slots.size(), 0.0);
    for (std::size_t t = slots.size(); t-- > 0;) {
        detail::apply_slot(s, slots[t], -params[t]); // state before gate t
        grads[t] = detail::slot_grad(lam.amplitudes, s.amplitudes, slots[t], params[t]);
        detail::apply_slot(lam, slots[t], -params[t]); // transpose pullback
    }
    return grads;
}

// Angles drawn uniformly from [-pi/8, pi/8]. The small range keeps the k=1
// circuit near the identity map at the start of training.
inline std::vector<double> init_params(const CircuitSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> p(spec.param_count());
    constexpr double bound = std::numbers::pi / 8.0;
    for (double& x : p) x = rng.uniform(-bound, bound);
    return p;
}

// Checkpoint format: {n, k, a, params, seed, loss_history}.
inline nlohmann::ordered_json checkpoint_json(const CircuitSpec& spec,
                                              std::span<const double> params,
                                              std::uint64_t seed,
                                              std::span<const double> loss_history) {
    nlohmann::ordered_json j;
    j["n"] = spec.n;
    j["k"] = spec.k;
    j["a"] = spec.a;
    j["params"] = std::vector<double>(params.begin(), params.end());
    j["seed"] = seed;
    j["loss_history"] = std::vector<double>(loss_history.begin(), loss_history.end());
    return j;
}

struct Checkpoint {
    CircuitSpec spec;
    std::vector<double> params;
    std::uint64_t seed = 0;
    std::vector<double> loss_history;
};

inline Checkpoint load_checkpoint(const nlohmann::json& j) {
    Checkpoint c;
    c.spec = build_spec(j.at("n").get<int>(), j.at("k").get<int>());
    if (c.spec.a != j.at("a").get<int>()) {
        throw std::runtime_error("checkpoint: inconsistent ancilla count");
    }
    c.params = j.at("params").get<std::vector<double>>();
    if (c.params.size() != c.spec.param_count()) {
        throw std::runtime_error("checkpoint: parameter count mismatch");
    }
    c.seed = j.at("seed").get<std::uint64_t>();
    c.loss_history = j.at("loss_history").get<std::vector<double>>();
    return c;
}

} // namespace sc::ansatz

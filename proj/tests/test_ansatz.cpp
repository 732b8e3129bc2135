#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "sc/ansatz.hpp"
#include "sc/rng.hpp"
#include "sc/statevec.hpp"
#include "sc/tensornet.hpp"

using namespace sc;
using namespace sc::ansatz;
using sc::tensornet::DataVector;
using sc::tensornet::normalize;

namespace {

DataVector random_unit(int n, Rng& rng) {
    std::vector<double> v(tensornet::dim_of(n));
    for (double& x : v) x = rng.normal();
    return normalize(v, n);
}

// Central finite differences of a scalar function of the parameters.
template <typename F>
std::vector<double> finite_diff(std::vector<double> params, F&& f, double h = 1e-5) {
    std::vector<double> g(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double orig = params[i];
        params[i] = orig + h;
        const double fp = f(params);
        params[i] = orig - h;
        const double fm = f(params);
        params[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

void require_close(const std::vector<double>& got, const std::vector<double>& want,
                   double rel_tol) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double denom = std::max(std::abs(want[i]), 1e-3);
        REQUIRE(std::abs(got[i] - want[i]) / denom < rel_tol);
    }
}

} // namespace

TEST_CASE("build_spec ancilla and parameter counts") {
    // (n, k) -> (a, params) triples checked against the per-dataset circuit
    // shapes used throughout: 2 angles for (2,1), 24 for (6,3), 14 for (6,2).
    const auto s1 = build_spec(2, 1);
    REQUIRE(s1.a == 0);
    REQUIRE(s1.param_count() == 2);

    const auto s2 = build_spec(6, 3);
    REQUIRE(s2.a == 2);
    REQUIRE(s2.param_count() == 24);

    const auto s3 = build_spec(6, 2);
    REQUIRE(s3.a == 1);
    REQUIRE(s3.param_count() == 14);

    const auto s4 = build_spec(5, 2);
    REQUIRE(s4.a == 1);
    REQUIRE(s4.param_count() == 12);

    REQUIRE(build_spec(3, 8).a == 3);
    REQUIRE_THROWS_WITH(build_spec(2, 5),
                        Catch::Matchers::ContainsSubstring("exceeds decomposition size"));
}

TEST_CASE("forward reduces to the identity at zero angles when k=1") {
    Rng rng(3);
    for (int n = 1; n <= 4; ++n) {
        const auto spec = build_spec(n, 1);
        const std::vector<double> params(spec.param_count(), 0.0);
        const auto x = random_unit(n, rng);
        const auto fw = forward(spec, params, x);
        for (std::size_t i = 0; i < fw.probabilities.size(); ++i) {
            REQUIRE(fw.probabilities[i] ==
                    Catch::Approx(x.amplitudes[i] * x.amplitudes[i]).margin(1e-12));
        }
    }
}

TEST_CASE("forward single qubit closed form") {
    const auto spec = build_spec(1, 1);
    for (double theta : {0.0, 0.4, 1.1, 2.7, -0.9}) {
        const std::vector<double> params{theta};
        const auto fw = forward(spec, params, normalize({1.0, 0.0}, 1));
        REQUIRE(fw.probabilities[0] ==
                Catch::Approx(std::cos(theta / 2) * std::cos(theta / 2)).margin(1e-12));
        REQUIRE(fw.probabilities[1] ==
                Catch::Approx(std::sin(theta / 2) * std::sin(theta / 2)).margin(1e-12));
    }
}

TEST_CASE("forward probabilities sum to one") {
    Rng rng(7);
    for (int rep = 0; rep < 30; ++rep) {
        const int n = 2 + static_cast<int>(rng.below(3));
        const int k = 1 + static_cast<int>(rng.below(3));
        const auto spec = build_spec(n, k);
        const auto params = init_params(spec, rng.bits());
        const auto fw = forward(spec, params, random_unit(n, rng));
        double s = 0.0;
        for (double p : fw.probabilities) s += p;
        REQUIRE(s == Catch::Approx(1.0).margin(1e-12));
        REQUIRE(fw.marginals.size() == static_cast<std::size_t>(n));
    }
}

TEST_CASE("forward validates argument sizes") {
    const auto spec = build_spec(2, 2);
    const std::vector<double> bad(spec.param_count() + 1, 0.0);
    REQUIRE_THROWS_AS(forward(spec, bad, normalize({1.0, 0.0, 0.0, 0.0}, 2)),
                      std::invalid_argument);
    const std::vector<double> ok(spec.param_count(), 0.0);
    REQUIRE_THROWS_AS(forward(spec, ok, normalize({1.0, 0.0}, 1)), std::invalid_argument);
}

TEST_CASE("ancilla-free circuit equals a chain of data rotations") {
    Rng rng(11);
    const int n = 3;
    const auto spec = build_spec(n, 1);
    const auto params = init_params(spec, 99);
    const auto x = random_unit(n, rng);
    const auto fw = forward(spec, params, x);

    auto s = statevec::prepare(x, 0);
    for (int j = 0; j < n; ++j) statevec::apply_ry(s, s.data_qubit(j), params[j]);
    const auto probs = statevec::data_probabilities(s);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        REQUIRE(fw.probabilities[i] == Catch::Approx(probs[i]).margin(1e-12));
    }
}

TEST_CASE("gradient with zero upstream vanishes") {
    const auto spec = build_spec(3, 2);
    const auto params = init_params(spec, 5);
    const auto x = normalize({1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0}, 3);
    const std::vector<double> upstream(8, 0.0);
    for (double g : gradient(spec, params, x, upstream, Upstream::kProbabilities)) {
        REQUIRE(g == 0.0);
    }
}

TEST_CASE("gradient closed form for one qubit") {
    // P1(theta) = sin^2(theta/2), dP1/dtheta = sin(theta/2) cos(theta/2).
    const auto spec = build_spec(1, 1);
    for (double theta : {0.3, 1.2, -2.0}) {
        const std::vector<double> params{theta};
        const std::vector<double> upstream{0.0, 1.0};
        const auto g =
            gradient(spec, params, normalize({1.0, 0.0}, 1), upstream,
                     Upstream::kProbabilities);
        REQUIRE(g[0] ==
                Catch::Approx(std::sin(theta / 2) * std::cos(theta / 2)).margin(1e-12));
    }
}

TEST_CASE("gradient matches finite differences for probability losses") {
    Rng rng(13);
    int checked = 0;
    for (int n = 1; n <= 6 && checked < 30; ++n) {
        for (int k = 1; k <= 4; ++k) {
            if (k > (1 << n)) continue;
            const auto spec = build_spec(n, k);
            auto params = init_params(spec, rng.bits());
            const auto x = random_unit(n, rng);
            std::vector<double> upstream(tensornet::dim_of(n));
            for (double& u : upstream) u = rng.uniform(-1, 1);

            const auto adj = gradient(spec, params, x, upstream, Upstream::kProbabilities);
            const auto fd = finite_diff(params, [&](const std::vector<double>& p) {
                const auto fw = forward(spec, p, x);
                double loss = 0.0;
                for (std::size_t i = 0; i < upstream.size(); ++i) {
                    loss += upstream[i] * fw.probabilities[i];
                }
                return loss;
            });
            require_close(adj, fd, 1e-4);
            ++checked;
        }
    }
    REQUIRE(checked >= 20);
}

TEST_CASE("gradient matches finite differences for marginal losses") {
    Rng rng(17);
    for (int rep = 0; rep < 15; ++rep) {
        const int n = 1 + static_cast<int>(rng.below(5));
        const int k = 1 + static_cast<int>(rng.below(std::min(4, 1 << n)));
        const auto spec = build_spec(n, k);
        auto params = init_params(spec, rng.bits());
        const auto x = random_unit(n, rng);
        std::vector<double> upstream(n);
        for (double& u : upstream) u = rng.uniform(-1, 1);

        const auto adj = gradient(spec, params, x, upstream, Upstream::kMarginals);
        const auto fd = finite_diff(params, [&](const std::vector<double>& p) {
            const auto fw = forward(spec, p, x);
            double loss = 0.0;
            for (int j = 0; j < n; ++j) loss += upstream[j] * fw.marginals[j];
            return loss;
        });
        require_close(adj, fd, 1e-4);
    }
}

TEST_CASE("init_params is deterministic and bounded") {
    const auto spec = build_spec(2, 1);
    REQUIRE(init_params(spec, 42) == init_params(spec, 42));
    REQUIRE(init_params(spec, 42) != init_params(spec, 43));
    REQUIRE(init_params(spec, 1).size() == 2);

    const auto big = build_spec(4, 4);
    Rng seeds(0);
    constexpr double bound = std::numbers::pi / 8.0;
    for (int rep = 0; rep < 500; ++rep) {
        for (double v : init_params(big, seeds.bits())) {
            REQUIRE(v >= -bound);
            REQUIRE(v <= bound);
        }
    }
}

TEST_CASE("checkpoint round trip") {
    const auto spec = build_spec(4, 3);
    const auto params = init_params(spec, 77);
    const std::vector<double> history{0.5, 0.25, 0.1};
    const auto j = checkpoint_json(spec, params, 77, history);
    const auto c = load_checkpoint(nlohmann::json::parse(j.dump()));
    REQUIRE(c.spec.n == 4);
    REQUIRE(c.spec.k == 3);
    REQUIRE(c.spec.a == 2);
    REQUIRE(c.params == params);
    REQUIRE(c.seed == 77);
    REQUIRE(c.loss_history == history);
}

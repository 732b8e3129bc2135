#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sc/matrix.hpp"
#include "sc/mlp.hpp"
#include "sc/rng.hpp"

using namespace sc;
using namespace sc::mlp;

namespace {

Matrix random_batch(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& x : m.data) x = rng.normal();
    return m;
}

MLPSpec small_spec(int in, int out) {
    MLPSpec s;
    s.in_dim = in;
    s.out_dim = out;
    return s;
}

} // namespace

TEST_CASE("param_count matches the per-dataset head sizes") {
    // in=2,out=3 / in=6,out=7 / in=6,out=10 are the iris, covtype and digits
    // hybrid heads; their totals are pinned integers.
    REQUIRE(param_count(small_spec(2, 3)) == 2563);
    REQUIRE(param_count(small_spec(6, 7)) == 2951);
    REQUIRE(param_count(small_spec(6, 10)) == 3050);
    REQUIRE(param_count(small_spec(4, 3)) == 2691);
}

TEST_CASE("init_params fills the layout deterministically") {
    const auto spec = small_spec(3, 2);
    const auto a = init_params(spec, 9);
    const auto b = init_params(spec, 9);
    REQUIRE(a.learnable == b.learnable);
    REQUIRE(a.learnable.size() == param_count(spec));
    REQUIRE(a.running_mean1 == std::vector<double>(64, 0.0));
    REQUIRE(a.running_var1 == std::vector<double>(64, 1.0));
}

TEST_CASE("zero weights give zero logits") {
    const auto spec = small_spec(4, 3);
    MLPParams p = init_params(spec, 1);
    std::fill(p.learnable.begin(), p.learnable.end(), 0.0);
    Rng rng(2);
    const auto batch = random_batch(5, 4, rng);
    auto [logits, cache] = forward(spec, p, batch, Mode::kEval);
    for (double x : logits.data) REQUIRE(x == 0.0);
}

TEST_CASE("eval mode is deterministic") {
    const auto spec = small_spec(4, 3);
    MLPParams p = init_params(spec, 3);
    Rng rng(4);
    const auto batch = random_batch(8, 4, rng);
    auto [l1, c1] = forward(spec, p, batch, Mode::kEval, 11);
    auto [l2, c2] = forward(spec, p, batch, Mode::kEval, 97);
    REQUIRE(l1.data == l2.data);
}

TEST_CASE("train mode batchnorm output has mean beta and variance gamma^2") {
    const auto spec = small_spec(6, 2);
    MLPParams p = init_params(spec, 5);
    Rng rng(6);
    const auto batch = random_batch(64, 6, rng);
    auto [logits, cache] = forward(spec, p, batch, Mode::kTrain, 7);

    const auto L = detail::layout(spec);
    for (std::size_t c = 0; c < 64; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < 64; ++r) mean += cache.act1(r, c);
        mean /= 64.0;
        double var = 0.0;
        for (std::size_t r = 0; r < 64; ++r) {
            const double d = cache.act1(r, c) - mean;
            var += d * d;
        }
        var /= 64.0;
        const double gamma = cache.learnable[L.g1 + c];
        const double beta = cache.learnable[L.be1 + c];
        REQUIRE(mean == Catch::Approx(beta).margin(1e-6));
        // Biased batch variance of the normalized activations is slightly
        // below gamma^2 because of the eps in the denominator.
        REQUIRE(var == Catch::Approx(gamma * gamma).margin(1e-4));
    }
}

TEST_CASE("train mode rejects a batch of one") {
    const auto spec = small_spec(4, 2);
    MLPParams p = init_params(spec, 1);
    Matrix batch(1, 4);
    REQUIRE_THROWS_WITH(forward(spec, p, batch, Mode::kTrain, 0),
                        Catch::Matchers::ContainsSubstring("batchnorm undefined"));
    REQUIRE_NOTHROW(forward(spec, p, batch, Mode::kEval));
}

TEST_CASE("running statistics move toward the batch statistics") {
    const auto spec = small_spec(4, 2);
    MLPParams p = init_params(spec, 1);
    Rng rng(8);
    Matrix batch = random_batch(32, 4, rng);
    for (double& x : batch.data) x = x * 2.0 + 1.0;
    const auto rm_before = p.running_mean1;
    forward(spec, p, batch, Mode::kTrain, 0);
    REQUIRE(p.running_mean1 != rm_before);
}

TEST_CASE("backward requires a train-mode cache") {
    const auto spec = small_spec(4, 2);
    MLPParams p = init_params(spec, 1);
    Rng rng(9);
    const auto batch = random_batch(4, 4, rng);
    auto [logits, cache] = forward(spec, p, batch, Mode::kEval);
    Matrix dlogits(4, 2);
    REQUIRE_THROWS_AS(backward(cache, dlogits), std::invalid_argument);
}

TEST_CASE("backward: zero upstream gives zero gradients") {
    const auto spec = small_spec(4, 2);
    MLPParams p = init_params(spec, 1);
    Rng rng(10);
    const auto batch = random_batch(6, 4, rng);
    auto [logits, cache] = forward(spec, p, batch, Mode::kTrain, 3);
    const auto back = backward(cache, Matrix(6, 2));
    for (double g : back.grads) REQUIRE(g == 0.0);
    for (double g : back.dinput.data) REQUIRE(g == 0.0);
}

TEST_CASE("final affine gradient has the closed form dW = dY^T H") {
    const auto spec = small_spec(3, 2);
    MLPParams p = init_params(spec, 2);
    Rng rng(11);
    const auto batch = random_batch(5, 3, rng);
    auto [logits, cache] = forward(spec, p, batch, Mode::kTrain, 4);
    Matrix dlogits(5, 2);
    for (double& x : dlogits.data) x = rng.normal();
    const auto back = backward(cache, dlogits);

    const auto L = detail::layout(spec);
    for (std::size_t o = 0; o < 2; ++o) {
        for (std::size_t c = 0; c < 32; ++c) {
            double expect = 0.0;
            for (std::size_t r = 0; r < 5; ++r) expect += dlogits(r, o) * cache.h2(r, c);
            REQUIRE(back.grads[L.w3 + o * 32 + c] == Catch::Approx(expect).margin(1e-12));
        }
        double expect_b = 0.0;
        for (std::size_t r = 0; r < 5; ++r) expect_b += dlogits(r, o);
        REQUIRE(back.grads[L.b3 + o] == Catch::Approx(expect_b).margin(1e-12));
    }
}

TEST_CASE("backward matches finite differences through the whole stack") {
    const auto spec = small_spec(5, 3);
    MLPParams p = init_params(spec, 13);
    Rng rng(14);
    const auto batch = random_batch(7, 5, rng);
    const std::vector<int> labels{0, 1, 2, 0, 1, 2, 0};
    const std::uint64_t drop_seed = 21;

    auto loss_at = [&](MLPParams& params) {
        auto [logits, cache] = forward(spec, params, batch, Mode::kTrain, drop_seed);
        return cross_entropy(logits, labels).first;
    };

    MLPParams work = p;
    auto [logits, cache] = forward(spec, work, batch, Mode::kTrain, drop_seed);
    auto [loss, dlogits] = cross_entropy(logits, labels);
    const auto back = backward(cache, dlogits);

    // Spot-check a spread of parameters across every layer.
    const auto L = detail::layout(spec);
    const std::vector<std::size_t> probes{
        L.w1,      L.w1 + 17, L.b1 + 3,  L.g1 + 10, L.be1 + 20, L.w2 + 100,
        L.b2 + 5,  L.g2 + 7,  L.be2 + 1, L.w3 + 40, L.b3 + 2};
    const double h = 1e-5;
    for (std::size_t idx : probes) {
        MLPParams plus = p, minus = p;
        plus.learnable[idx] += h;
        minus.learnable[idx] -= h;
        const double fd = (loss_at(plus) - loss_at(minus)) / (2 * h);
        REQUIRE(std::abs(back.grads[idx] - fd) / std::max(std::abs(fd), 1e-3) < 1e-4);
    }

    // And the input gradient, which feeds the circuit chain rule.
    for (std::size_t probe : {std::size_t{0}, std::size_t{12}, std::size_t{34}}) {
        Matrix bplus = batch, bminus = batch;
        bplus.data[probe] += h;
        bminus.data[probe] -= h;
        MLPParams w1 = p, w2 = p;
        auto [lp, cp] = forward(spec, w1, bplus, Mode::kTrain, drop_seed);
        auto [lm, cm] = forward(spec, w2, bminus, Mode::kTrain, drop_seed);
        const double fd = (cross_entropy(lp, labels).first -
                           cross_entropy(lm, labels).first) /
                          (2 * h);
        REQUIRE(std::abs(back.dinput.data[probe] - fd) /
                    std::max(std::abs(fd), 1e-3) <
                1e-4);
    }
}

TEST_CASE("cross entropy closed forms") {
    SECTION("uniform logits give ln C") {
        Matrix logits(3, 4);
        const auto [loss, grad] = cross_entropy(logits, {0, 1, 2});
        REQUIRE(loss == Catch::Approx(std::log(4.0)).epsilon(1e-12));
    }
    SECTION("confident correct logits approach zero loss") {
        Matrix logits(2, 3);
        logits(0, 0) = 50.0;
        logits(1, 2) = 50.0;
        const auto [loss, grad] = cross_entropy(logits, {0, 2});
        REQUIRE(loss < 1e-12);
    }
    SECTION("gradient matches finite differences") {
        Rng rng(15);
        Matrix logits(4, 3);
        for (double& x : logits.data) x = rng.normal();
        const std::vector<int> labels{2, 0, 1, 1};
        const auto [loss, grad] = cross_entropy(logits, labels);
        const double h = 1e-6;
        for (std::size_t i = 0; i < logits.data.size(); ++i) {
            Matrix lp = logits, lm = logits;
            lp.data[i] += h;
            lm.data[i] -= h;
            const double fd = (cross_entropy(lp, labels).first -
                               cross_entropy(lm, labels).first) /
                              (2 * h);
            REQUIRE(std::abs(grad.data[i] - fd) < 1e-6);
        }
    }
    SECTION("label out of range is rejected") {
        Matrix logits(1, 2);
        REQUIRE_THROWS_AS(cross_entropy(logits, {2}), std::invalid_argument);
    }
}

TEST_CASE("dropout preserves activation mass in expectation") {
    const auto spec = small_spec(4, 2);
    MLPParams p = init_params(spec, 16);
    Rng rng(17);
    const auto batch = random_batch(4, 4, rng);

    MLPParams eval_params = p;
    auto [eval_logits, ec] = forward(spec, eval_params, batch, Mode::kEval);

    // Train-mode uses batch statistics, so compare the dropout layer output
    // directly: mean over masks of h1 equals relu(act1).
    Matrix acc(4, 64);
    const int masks = 10000;
    double base_sum = 0.0;
    Matrix base(4, 64);
    for (int m = 0; m < masks; ++m) {
        MLPParams work = p;
        auto [logits, cache] = forward(spec, work, batch, Mode::kTrain, 1000 + m);
        for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += cache.h1.data[i];
        if (m == 0) {
            for (std::size_t i = 0; i < base.data.size(); ++i) {
                base.data[i] = std::max(cache.act1.data[i], 0.0);
                base_sum += std::abs(base.data[i]);
            }
        }
    }
    double acc_sum = 0.0;
    for (double x : acc.data) acc_sum += std::abs(x) / masks;
    REQUIRE(acc_sum == Catch::Approx(base_sum).epsilon(0.01));
}

TEST_CASE("checkpoint round trip") {
    const auto spec = small_spec(5, 4);
    MLPParams p = init_params(spec, 19);
    Rng rng(20);
    const auto batch = random_batch(8, 5, rng);
    forward(spec, p, batch, Mode::kTrain, 1); // move the running stats
    const auto j = checkpoint_json(spec, p);
    const auto q = load_checkpoint(spec, nlohmann::json::parse(j.dump()));
    REQUIRE(q.learnable == p.learnable);
    REQUIRE(q.running_mean1 == p.running_mean1);
    REQUIRE(q.running_var1 == p.running_var1);
    REQUIRE(q.running_mean2 == p.running_mean2);
    REQUIRE(q.running_var2 == p.running_var2);
}

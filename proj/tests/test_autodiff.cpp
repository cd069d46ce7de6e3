#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cellgraph/autodiff.hpp"
#include "cellgraph/rng.hpp"

using namespace cellgraph;
using ad::make_tensor;
using ad::Tape;
using ad::TensorPtr;

namespace {

TensorPtr random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                        double hi = 1.0, bool requires_grad = false) {
    std::size_t n = ad::Tensor::element_count(shape);
    std::vector<double> v(n);
    for (double& x : v) x = rng.next_in(lo, hi);
    return make_tensor(std::move(shape), std::move(v), requires_grad);
}

// keeps values away from relu/abs kinks so finite differences stay clean
TensorPtr random_tensor_offset(std::vector<std::size_t> shape, Rng& rng) {
    auto t = random_tensor(std::move(shape), rng);
    for (double& x : t->values)
        if (std::fabs(x) < 0.05) x += x >= 0 ? 0.1 : -0.1;
    return t;
}

}  // namespace

TEST_CASE("matmul forward matches a naive triple loop exactly on integers", "[autodiff]") {
    Rng rng(11);
    for (int rep = 0; rep < 5; ++rep) {
        std::size_t m = 2 + rng.next_below(4), k = 2 + rng.next_below(4),
                    n = 2 + rng.next_below(4);
        auto a = make_tensor({m, k}, std::vector<double>(m * k));
        auto b = make_tensor({k, n}, std::vector<double>(k * n));
        for (double& x : a->values) x = static_cast<double>(rng.next_int_in(-6, 6));
        for (double& x : b->values) x = static_cast<double>(rng.next_int_in(-6, 6));
        Tape tape;
        auto c = tape.matmul(a, b);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double expect = 0;
                for (std::size_t l = 0; l < k; ++l)
                    expect += a->values[i * k + l] * b->values[l * n + j];
                REQUIRE(c->values[i * n + j] == expect);
            }
    }
}

TEST_CASE("matmul rejects mismatched inner dimensions", "[autodiff]") {
    Tape tape;
    auto a = ad::zeros({2, 3});
    auto b = ad::zeros({4, 2});
    REQUIRE_THROWS_AS(tape.matmul(a, b), ShapeMismatchError);
}

TEST_CASE("row softmax rows sum to one and shift invariance holds", "[autodiff]") {
    Rng rng(5);
    auto x = random_tensor({6, 9}, rng, -4.0, 4.0);
    Tape tape;
    auto y = tape.row_softmax(x);
    for (std::size_t r = 0; r < 6; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 9; ++c) s += y->values[r * 9 + c];
        REQUIRE(std::fabs(s - 1.0) < 1e-12);
    }
    auto shifted = make_tensor(x->shape, x->values);
    for (std::size_t r = 0; r < 6; ++r) {
        double mx = shifted->values[r * 9];
        for (std::size_t c = 1; c < 9; ++c) mx = std::max(mx, shifted->values[r * 9 + c]);
        for (std::size_t c = 0; c < 9; ++c) shifted->values[r * 9 + c] -= mx;
    }
    auto y2 = tape.row_softmax(shifted);
    for (std::size_t i = 0; i < y->size(); ++i) REQUIRE(y->values[i] == y2->values[i]);
}

TEST_CASE("loss = sum gives all-ones gradient", "[autodiff]") {
    auto x = make_tensor({3, 2}, {1, -2, 3, 0.5, -1, 4}, true);
    Tape tape;
    auto loss = tape.mean_all(tape.scale(x, 6.0));  // == sum(x)
    tape.backward(loss);
    for (double g : x->grad) REQUIRE(std::fabs(g - 1.0) < 1e-15);
}

TEST_CASE("dead relu blocks every gradient", "[autodiff]") {
    auto x = make_tensor({2, 3}, {-1, -2, -0.5, -3, -0.1, -4}, true);
    Tape tape;
    auto loss = tape.mean_all(tape.relu(x));
    tape.backward(loss);
    for (double g : x->grad) REQUIRE(g == 0.0);
}

TEST_CASE("backward requires a scalar loss", "[autodiff]") {
    auto x = make_tensor({2, 2}, {1, 2, 3, 4}, true);
    Tape tape;
    auto y = tape.relu(x);
    REQUIRE_THROWS_AS(tape.backward(y), NonScalarLossError);
}

TEST_CASE("gradients of tensors unreachable from the loss stay zero", "[autodiff]") {
    auto x = make_tensor({2, 2}, {1, 2, 3, 4}, true);
    auto y = make_tensor({2, 2}, {1, 1, 1, 1}, true);
    Tape tape;
    auto unused = tape.relu(y);
    auto loss = tape.mean_all(x);
    tape.backward(loss);
    y->ensure_grad();
    for (double g : y->grad) REQUIRE(g == 0.0);
    REQUIRE(unused->values[0] == 1.0);
}

TEST_CASE("grad_check on x*x at 3 gives derivative 6", "[autodiff]") {
    auto x = make_tensor({1}, {3.0});
    double err = ad::grad_check(
        [](Tape& t, const TensorPtr& v) { return t.mean_all(t.mul(v, v)); }, x);
    REQUIRE(err < 1e-6);

    // and the analytic value itself
    auto probe = make_tensor({1}, {3.0}, true);
    Tape tape;
    auto loss = tape.mean_all(tape.mul(probe, probe));
    tape.backward(loss);
    REQUIRE(std::fabs(probe->grad[0] - 6.0) < 1e-12);
}

TEST_CASE("finite differences validate every primitive", "[autodiff]") {
    Rng rng(42);

    SECTION("add / sub / mul / scale / abs / huber / relu / sigmoid") {
        auto x = random_tensor_offset({4, 5}, rng);
        auto other = random_tensor({4, 5}, rng, 0.2, 1.2);
        std::vector<std::function<TensorPtr(Tape&, const TensorPtr&)>> checks = {
            [other](Tape& t, const TensorPtr& v) { return t.mean_all(t.add(v, other)); },
            [other](Tape& t, const TensorPtr& v) { return t.mean_all(t.sub(v, other)); },
            [other](Tape& t, const TensorPtr& v) { return t.mean_all(t.mul(v, other)); },
            [](Tape& t, const TensorPtr& v) { return t.mean_all(t.scale(v, -2.5)); },
            [](Tape& t, const TensorPtr& v) { return t.mean_all(t.abs(v)); },
            [](Tape& t, const TensorPtr& v) { return t.mean_all(t.huber(v, 0.5)); },
            [](Tape& t, const TensorPtr& v) { return t.mean_all(t.relu(v)); },
            [](Tape& t, const TensorPtr& v) { return t.mean_all(t.sigmoid(v)); },
        };
        for (const auto& f : checks) REQUIRE(ad::grad_check(f, x) < 1e-4);
    }

    SECTION("matmul both sides") {
        auto a = random_tensor({5, 7}, rng);
        auto b = random_tensor({7, 3}, rng);
        REQUIRE(ad::grad_check(
                    [b](Tape& t, const TensorPtr& v) { return t.mean_all(t.matmul(v, b)); },
                    a) < 1e-4);
        REQUIRE(ad::grad_check(
                    [a](Tape& t, const TensorPtr& v) { return t.mean_all(t.matmul(a, v)); },
                    b) < 1e-4);
    }

    SECTION("transpose, concat, slice, add_rowvec") {
        auto x = random_tensor({4, 6}, rng);
        auto other = random_tensor({4, 3}, rng);
        auto vec = random_tensor({1, 6}, rng);
        REQUIRE(ad::grad_check(
                    [](Tape& t, const TensorPtr& v) {
                        return t.mean_all(t.mul(t.transpose(v), t.transpose(v)));
                    },
                    x) < 1e-4);
        REQUIRE(ad::grad_check(
                    [other](Tape& t, const TensorPtr& v) {
                        auto c = t.concat_cols({v, other});
                        return t.mean_all(t.mul(c, c));
                    },
                    x) < 1e-4);
        REQUIRE(ad::grad_check(
                    [](Tape& t, const TensorPtr& v) {
                        auto s = t.slice_cols(v, 1, 4);
                        return t.mean_all(t.mul(s, s));
                    },
                    x) < 1e-4);
        REQUIRE(ad::grad_check(
                    [vec](Tape& t, const TensorPtr& v) {
                        auto s = t.add_rowvec(v, vec);
                        return t.mean_all(t.mul(s, s));
                    },
                    x) < 1e-4);
        REQUIRE(ad::grad_check(
                    [x](Tape& t, const TensorPtr& v) {
                        auto s = t.add_rowvec(x, v);
                        return t.mean_all(t.mul(s, s));
                    },
                    vec) < 1e-4);
    }

    SECTION("reductions and softmax") {
        auto x = random_tensor({5, 4}, rng);
        REQUIRE(ad::grad_check(
                    [](Tape& t, const TensorPtr& v) {
                        auto s = t.row_sum(v);
                        return t.mean_all(t.mul(s, s));
                    },
                    x) < 1e-4);
        REQUIRE(ad::grad_check(
                    [](Tape& t, const TensorPtr& v) {
                        auto s = t.row_mean(v);
                        return t.mean_all(t.mul(s, s));
                    },
                    x) < 1e-4);
        REQUIRE(ad::grad_check(
                    [](Tape& t, const TensorPtr& v) {
                        auto s = t.row_softmax(v);
                        return t.mean_all(t.mul(s, s));
                    },
                    x) < 1e-4);
        // softmax then mean alone is constant; weight it to keep the check alive
        auto weights = random_tensor({5, 4}, rng);
        REQUIRE(ad::grad_check(
                    [weights](Tape& t, const TensorPtr& v) {
                        return t.mean_all(t.mul(t.row_softmax(v), weights));
                    },
                    x) < 1e-4);
    }

    SECTION("graph kernels: sage_aggregate, renormalize, patch_norm") {
        auto x = random_tensor({5, 3}, rng);
        auto adj = random_tensor({5, 5}, rng, 0.1, 2.0);
        REQUIRE(ad::grad_check(
                    [adj](Tape& t, const TensorPtr& v) {
                        auto s = t.sage_aggregate(v, adj);
                        return t.mean_all(t.mul(s, s));
                    },
                    x) < 1e-4);
        REQUIRE(ad::grad_check(
                    [x](Tape& t, const TensorPtr& v) {
                        auto s = t.sage_aggregate(x, v);
                        return t.mean_all(t.mul(s, s));
                    },
                    adj) < 1e-4);
        REQUIRE(ad::grad_check(
                    [](Tape& t, const TensorPtr& v) {
                        auto s = t.renormalize_adjacency(v, 0.4, true);
                        return t.mean_all(t.mul(s, s));
                    },
                    adj) < 1e-4);
        REQUIRE(ad::grad_check(
                    [](Tape& t, const TensorPtr& v) {
                        auto s = t.renormalize_adjacency(v, 0.4, false);
                        return t.mean_all(t.mul(s, s));
                    },
                    adj) < 1e-4);

        auto gamma = random_tensor({3}, rng, 0.5, 1.5);
        auto beta = random_tensor({3}, rng);
        REQUIRE(ad::grad_check(
                    [gamma, beta](Tape& t, const TensorPtr& v) {
                        auto s = t.patch_norm(v, gamma, beta);
                        return t.mean_all(t.mul(s, s));
                    },
                    x) < 1e-4);
        REQUIRE(ad::grad_check(
                    [x, beta](Tape& t, const TensorPtr& v) {
                        auto s = t.patch_norm(x, v, beta);
                        return t.mean_all(t.mul(s, s));
                    },
                    gamma) < 1e-4);
        REQUIRE(ad::grad_check(
                    [x, gamma](Tape& t, const TensorPtr& v) {
                        auto s = t.patch_norm(x, gamma, v);
                        return t.mean_all(t.mul(s, s));
                    },
                    beta) < 1e-4);
    }
}

TEST_CASE("three layer composition matches finite differences", "[autodiff]") {
    Rng rng(7);
    auto w1 = random_tensor({4, 6}, rng);
    auto w2 = random_tensor({6, 3}, rng);
    auto x = random_tensor_offset({2, 4}, rng);
    double err = ad::grad_check(
        [w1, w2](Tape& t, const TensorPtr& v) {
            auto h1 = t.relu(t.matmul(v, w1));
            auto h2 = t.sigmoid(t.matmul(h1, w2));
            return t.mean_all(h2);
        },
        x);
    REQUIRE(err < 1e-4);
}

TEST_CASE("backward is deterministic across identical tapes", "[autodiff]") {
    Rng rng(99);
    auto run = [&](std::uint64_t seed) {
        Rng local(seed);
        auto x = random_tensor({6, 6}, local, -2, 2, true);
        auto w = random_tensor({6, 4}, local, -1, 1, true);
        Tape tape;
        auto loss = tape.mean_all(tape.relu(tape.matmul(tape.row_softmax(x), w)));
        tape.backward(loss);
        auto g = x->grad;
        g.insert(g.end(), w->grad.begin(), w->grad.end());
        return g;
    };
    auto g1 = run(1234), g2 = run(1234);
    REQUIRE(g1.size() == g2.size());
    for (std::size_t i = 0; i < g1.size(); ++i) REQUIRE(g1[i] == g2[i]);
    (void)rng;
}

TEST_CASE("gradient accumulates across fan-out", "[autodiff]") {
    auto x = make_tensor({1}, {2.0}, true);
    Tape tape;
    auto y = tape.add(x, x);  // y = 2x
    auto loss = tape.mean_all(y);
    tape.backward(loss);
    REQUIRE(std::fabs(x->grad[0] - 2.0) < 1e-15);
}

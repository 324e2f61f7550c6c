#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "support/gradcheck.hpp"
#include "vecsketch/autodiff.hpp"
#include "vecsketch/rng.hpp"

using namespace vecsketch;
using diff::ParamBinder;
using diff::ParamStore;
using diff::Tape;
using diff::Tensor;
using diff::Var;

TEST_CASE("softmax of a constant row is uniform") {
    Tape tape;
    Var y = tape.softmax(tape.constant(Tensor::vector({0, 0, 0, 0})));
    for (double v : tape.value(y).data) CHECK(v == doctest::Approx(0.25));

    // Rows sum to one and stay positive for arbitrary logits.
    Rng rng(3);
    Tape t2;
    Tensor logits = Tensor::uniform({5, 7}, 30.0, rng);
    Var s = t2.softmax(t2.constant(logits));
    const Tensor& out = t2.value(s);
    for (int r = 0; r < 5; ++r) {
        double total = 0.0;
        for (int c = 0; c < 7; ++c) {
            CHECK(out.at(r, c) > 0.0);
            total += out.at(r, c);
        }
        CHECK(std::fabs(total - 1.0) < 1e-12);
    }
}

TEST_CASE("cumsum forward") {
    Tape tape;
    Var y = tape.cumsum(tape.constant(Tensor::vector({0.25, 0.25, 0.25, 0.25})));
    const Tensor& out = tape.value(y);
    CHECK(out.data == std::vector<double>{0.25, 0.5, 0.75, 1.0});

    Var m = tape.cumsum(tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4})), 0);
    CHECK(tape.value(m).data == std::vector<double>{1, 2, 4, 6});
}

TEST_CASE("gradient of sum of squares") {
    ParamStore store;
    int x = store.add("x", Tensor::vector({1.0, 2.0}));
    Tape tape;
    Var xv = tape.param(store, x);
    Var loss = tape.sum(tape.mul(xv, xv));
    tape.backward(loss, store);
    CHECK(store.grad(x).data[0] == doctest::Approx(2.0));
    CHECK(store.grad(x).data[1] == doctest::Approx(4.0));
}

TEST_CASE("constant loss leaves all gradients zero") {
    ParamStore store;
    int w = store.add("w", Tensor::vector({1.0, -1.0, 0.5}));
    Tape tape;
    (void)tape.param(store, w);
    Var loss = tape.constant_scalar(42.0);
    CHECK_THROWS(tape.backward(tape.constant(Tensor::vector({1, 2})), store));
    tape.backward(loss, store);
    for (double g : store.grad(w).data) CHECK(g == 0.0);
}

TEST_CASE("composite loss gradient is the sum of part gradients") {
    Rng rng(5);
    ParamStore store;
    int w = store.add("w", Tensor::uniform({4}, 1.0, rng));

    auto grad_of = [&](const std::function<Var(Tape&, Var)>& f) {
        store.zero_grad();
        Tape tape;
        Var wv = tape.param(store, w);
        tape.backward(f(tape, wv), store);
        return store.grad(w).data;
    };
    auto ga = grad_of([](Tape& t, Var w2) { return t.sum(t.mul(w2, w2)); });
    auto gb = grad_of([](Tape& t, Var w2) { return t.sum(t.tanh(w2)); });
    auto gc = grad_of([](Tape& t, Var w2) {
        return t.add(t.sum(t.mul(w2, w2)), t.sum(t.tanh(w2)));
    });
    for (std::size_t i = 0; i < ga.size(); ++i)
        CHECK(gc[i] == doctest::Approx(ga[i] + gb[i]).epsilon(1e-12));
}

TEST_CASE("every primitive passes finite differences") {
    Rng rng(11);
    ParamStore store;
    int a = store.add("a", Tensor::uniform({3, 4}, 1.0, rng));
    int b = store.add("b", Tensor::uniform({4, 2}, 1.0, rng));
    int v = store.add("v", Tensor::uniform({4}, 1.0, rng));
    int c = store.add("c", Tensor::uniform({3, 2}, 1.0, rng));
    int bias = store.add("bias", Tensor::uniform({4}, 1.0, rng));
    int pos = store.add("pos", Tensor::vector({0.5, 1.5, 2.5, 0.25}));

    using Build = gradcheck::LossBuilder;
    std::vector<std::pair<const char*, Build>> cases = {
        {"matmul2", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.matmul(p(t, a), p(t, b)));
         }},
        {"matvec", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.matmul(p(t, a), p(t, v)));
         }},
        {"add", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.mul(t.add(p(t, b), p(t, b)), p(t, b)));
         }},
        {"sub", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.mul(t.sub(p(t, b), p(t, c) /*sep shape*/), p(t, b)));
         }},
        {"mul", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.mul(p(t, a), p(t, a)));
         }},
        {"scale+add_scalar", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.add_scalar(t.scale(p(t, a), -1.7), 0.3));
         }},
        {"bias_add", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.tanh(t.bias_add(p(t, a), p(t, bias))));
         }},
        {"tanh", [&](Tape& t, const ParamBinder& p) { return t.sum(t.tanh(p(t, a))); }},
        {"sigmoid", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.sigmoid(p(t, a)));
         }},
        {"exp", [&](Tape& t, const ParamBinder& p) { return t.sum(t.exp(p(t, a))); }},
        {"log", [&](Tape& t, const ParamBinder& p) { return t.sum(t.log(p(t, pos))); }},
        {"softmax", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.mul(t.softmax(p(t, a)), p(t, a)));
         }},
        {"cumsum_rows", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.mul(t.cumsum(p(t, a), 1), p(t, a)));
         }},
        {"cumsum_cols", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.mul(t.cumsum(p(t, a), 0), p(t, a)));
         }},
        {"concat0", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.tanh(t.concat({p(t, a), p(t, a)}, 0)));
         }},
        {"concat1", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.tanh(t.concat({p(t, b), p(t, b)}, 1)));
         }},
        {"slice", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.mul(t.slice(p(t, a), 1, 1, 2), t.slice(p(t, a), 1, 0, 2)));
         }},
        {"reshape", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.tanh(t.reshape(p(t, a), {4, 3})));
         }},
        {"row_sum", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.tanh(t.row_sum(p(t, a))));
         }},
        {"squared_difference", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.squared_difference(p(t, b), p(t, c)));
         }},
        {"gather_rows", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.tanh(t.gather_rows(p(t, a), {2, 0, 2})));
         }},
        {"logsumexp", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.logsumexp(p(t, a)));
         }},
        {"bce_with_logits", [&](Tape& t, const ParamBinder& p) {
             return t.sum(t.bce_with_logits(p(t, v), {1.0, 0.0, 1.0, 0.0}));
         }},
    };

    for (auto& [name, build] : cases) {
        INFO("primitive: " << name);
        auto report = gradcheck::compare(store, build);
        CHECK(report.max_rel_err < 1e-6);
    }
}

TEST_CASE("logsumexp is stable at large magnitudes") {
    Tape tape;
    Var y = tape.logsumexp(tape.constant(Tensor::vector({1000.0, 1000.0})));
    CHECK(tape.value(y).data[0] == doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("backward accumulates shared-parameter gradients") {
    // The same parameter node used twice contributes twice.
    ParamStore store;
    int w = store.add("w", Tensor::vector({3.0}));
    Tape tape;
    Var wv = tape.param(store, w);
    Var loss = tape.sum(tape.mul(wv, wv));  // w^2 -> dw = 2w
    tape.backward(loss, store);
    CHECK(store.grad(w).data[0] == doctest::Approx(6.0));
}

TEST_CASE("sgd on a quadratic matches the hand-computed sequence") {
    // f(x) = x^2, x0 = 1, lr = 0.1: x_{k+1} = 0.8 x_k
    ParamStore store;
    int x = store.add("x", Tensor::vector({1.0}));
    double expected = 1.0;
    for (int k = 0; k < 5; ++k) {
        Tape tape;
        Var xv = tape.param(store, x);
        tape.backward(tape.sum(tape.mul(xv, xv)), store);
        store.sgd_step(0.1);
        expected *= 0.8;
        CHECK(store.value(x).data[0] == doctest::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("optimizer edge cases") {
    ParamStore store;
    int x = store.add("x", Tensor::vector({2.0, -1.0}));

    SUBCASE("zero gradient leaves parameters unchanged") {
        store.zero_grad();
        store.sgd_step(0.5);
        CHECK(store.value(x).data[0] == 2.0);
        store.adam_step({});
        CHECK(store.value(x).data[0] == 2.0);
    }
    SUBCASE("non-finite gradient aborts the step") {
        store.grad(x).data[0] = std::nan("");
        CHECK_THROWS_AS(store.sgd_step(0.1), Error);
        CHECK(store.value(x).data[0] == 2.0);  // untouched
    }
    SUBCASE("gradient clipping caps the global norm") {
        store.grad(x).data = {3.0, 4.0};  // norm 5
        store.clip_grad_norm(1.0);
        CHECK(store.grad_norm() == doctest::Approx(1.0));
        CHECK(store.grad(x).data[0] == doctest::Approx(0.6));
    }
}

TEST_CASE("adam runs are deterministic") {
    auto run = [] {
        Rng rng(9);
        ParamStore store;
        int w = store.add("w", Tensor::uniform({8}, 1.0, rng));
        std::vector<double> losses;
        for (int k = 0; k < 10; ++k) {
            Tape tape;
            Var wv = tape.param(store, w);
            Var loss = tape.sum(tape.squared_difference(
                wv, tape.constant(Tensor::full({8}, 0.3))));
            losses.push_back(tape.value(loss).data[0]);
            tape.backward(loss, store);
            store.adam_step({});
        }
        return std::make_pair(losses, store.value(w).data);
    };
    auto [l1, w1] = run();
    auto [l2, w2] = run();
    CHECK(l1 == l2);  // bitwise
    CHECK(w1 == w2);
}

TEST_CASE("checkpoint round trip verifies the config hash") {
    Rng rng(21);
    ParamStore store;
    store.add("layer.w", Tensor::uniform({3, 3}, 1.0, rng));
    store.add("layer.b", Tensor::zeros({3}));
    store.save_checkpoint("/tmp/vecsketch_ckpt_test.json", "confighash", "tag-1");

    ParamStore loaded;
    std::string tag = loaded.load_checkpoint("/tmp/vecsketch_ckpt_test.json", "confighash");
    CHECK(tag == "tag-1");
    CHECK(loaded.size() == 2);
    CHECK(loaded.value(0).data == store.value(0).data);

    ParamStore bad;
    CHECK_THROWS_AS(bad.load_checkpoint("/tmp/vecsketch_ckpt_test.json", "other"), Error);
}

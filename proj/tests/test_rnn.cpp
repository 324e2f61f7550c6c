#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support/gradcheck.hpp"
#include "vecsketch/rnn.hpp"
#include "vecsketch/rng.hpp"

using namespace vecsketch;
using diff::ParamBinder;
using diff::ParamStore;
using diff::Tape;
using diff::Tensor;
using diff::Var;

TEST_CASE("gru cell with zero weights and inputs stays at zero") {
    ParamStore store;
    Rng rng(1);
    diff::GruCell cell = diff::GruCell::attach(store, "cell", 3, 5, rng);
    for (std::size_t s = 0; s < store.size(); ++s)
        std::fill(store.value(static_cast<int>(s)).data.begin(),
                  store.value(static_cast<int>(s)).data.end(), 0.0);
    Tape tape;
    Var x = tape.constant(Tensor::zeros({3}));
    Var h = cell.zero_state(tape);
    Var next = cell.step(tape, diff::train_binder(store), x, h);
    for (double v : tape.value(next).data) CHECK(v == 0.0);
}

TEST_CASE("gru gradients match finite differences on a 4-step sequence") {
    Rng rng(7);
    ParamStore store;
    diff::GruCell cell = diff::GruCell::attach(store, "cell", 2, 6, rng);
    std::vector<Tensor> inputs;
    for (int i = 0; i < 4; ++i) inputs.push_back(Tensor::uniform({2}, 1.0, rng));

    auto build = [&](Tape& t, const ParamBinder& p) {
        Var h = cell.zero_state(t);
        for (const Tensor& in : inputs) h = cell.step(t, p, t.constant(in), h);
        return t.sum(t.mul(h, h));
    };
    auto report = gradcheck::compare(store, build);
    INFO("worst: " << report.worst_param);
    CHECK(report.max_rel_err < 1e-5);
}

TEST_CASE("bidirectional gradients match finite differences") {
    Rng rng(17);
    ParamStore store;
    diff::BiGru rnn = diff::BiGru::attach(store, "bi", 2, 4, rng);
    std::vector<Tensor> inputs;
    for (int i = 0; i < 3; ++i) inputs.push_back(Tensor::uniform({2}, 1.0, rng));

    auto build = [&](Tape& t, const ParamBinder& p) {
        std::vector<Var> in;
        for (const Tensor& i : inputs) in.push_back(t.constant(i));
        auto out = rnn.run(t, p, in);
        Var acc = t.sum(t.tanh(out.last));
        for (Var s : out.per_step) acc = t.add(acc, t.sum(t.tanh(s)));
        return acc;
    };
    auto report = gradcheck::compare(store, build);
    INFO("worst: " << report.worst_param);
    CHECK(report.max_rel_err < 1e-5);
}

TEST_CASE("identical seeds give bitwise identical states") {
    auto run = [] {
        Rng rng(99);
        ParamStore store;
        diff::GruCell cell = diff::GruCell::attach(store, "cell", 2, 8, rng);
        Tape tape;
        Var h = cell.zero_state(tape);
        for (int i = 0; i < 5; ++i) {
            Tensor in = Tensor::uniform({2}, 1.0, rng);
            h = cell.step(tape, diff::train_binder(store), tape.constant(in), h);
        }
        return tape.value(h).data;
    };
    CHECK(run() == run());
}

TEST_CASE("bigru last state concatenates the two end states") {
    Rng rng(23);
    ParamStore store;
    diff::BiGru rnn = diff::BiGru::attach(store, "bi", 2, 3, rng);
    Tape tape;
    std::vector<Var> in;
    for (int i = 0; i < 4; ++i)
        in.push_back(tape.constant(Tensor::uniform({2}, 1.0, rng)));
    auto out = rnn.run(tape, diff::train_binder(store), in);
    REQUIRE(tape.value(out.last).numel() == 6);
    const auto& last = tape.value(out.last).data;
    const auto& fwd_end = tape.value(out.per_step[3]).data;   // [fwd_3; bwd_3]
    const auto& bwd_start = tape.value(out.per_step[0]).data; // [fwd_0; bwd_0]
    for (int i = 0; i < 3; ++i) {
        CHECK(last[i] == fwd_end[i]);
        CHECK(last[3 + i] == bwd_start[3 + i]);
    }
}

#include "vecsketch/rnn.hpp"

#include <cmath>
#include <stdexcept>

#include "vecsketch/error.hpp"

namespace vecsketch::diff {

int ensure_param(ParamStore& store, const std::string& name, std::vector<int> shape,
                 double bound, Rng& rng) {
    int slot = store.find(name);
    if (slot >= 0) {
        if (store.value(slot).shape != shape)
            throw Error(ErrorCategory::Model, "parameter " + name +
                                                  " has shape " +
                                                  store.value(slot).shape_str() +
                                                  ", expected different");
        return slot;
    }
    return store.add(name, Tensor::uniform(std::move(shape), bound, rng));
}

GruCell GruCell::attach(ParamStore& store, const std::string& prefix, int input_dim,
                        int hidden_dim, Rng& rng) {
    GruCell c;
    c.input_dim = input_dim;
    c.hidden_dim = hidden_dim;
    const double wb = 1.0 / std::sqrt(static_cast<double>(input_dim));
    const double ub = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    c.w_z = ensure_param(store, prefix + ".w_z", {hidden_dim, input_dim}, wb, rng);
    c.u_z = ensure_param(store, prefix + ".u_z", {hidden_dim, hidden_dim}, ub, rng);
    c.b_z = ensure_param(store, prefix + ".b_z", {hidden_dim}, 0.0, rng);
    c.w_r = ensure_param(store, prefix + ".w_r", {hidden_dim, input_dim}, wb, rng);
    c.u_r = ensure_param(store, prefix + ".u_r", {hidden_dim, hidden_dim}, ub, rng);
    c.b_r = ensure_param(store, prefix + ".b_r", {hidden_dim}, 0.0, rng);
    c.w_h = ensure_param(store, prefix + ".w_h", {hidden_dim, input_dim}, wb, rng);
    c.u_h = ensure_param(store, prefix + ".u_h", {hidden_dim, hidden_dim}, ub, rng);
    c.b_h = ensure_param(store, prefix + ".b_h", {hidden_dim}, 0.0, rng);
    return c;
}

Var GruCell::step(Tape& t, const ParamBinder& bind, Var x, Var h) const {
    Var z = t.sigmoid(t.add(t.add(t.matmul(bind(t, w_z), x),
                                  t.matmul(bind(t, u_z), h)),
                            bind(t, b_z)));
    Var r = t.sigmoid(t.add(t.add(t.matmul(bind(t, w_r), x),
                                  t.matmul(bind(t, u_r), h)),
                            bind(t, b_r)));
    Var cand = t.tanh(t.add(t.add(t.matmul(bind(t, w_h), x),
                                  t.matmul(bind(t, u_h), t.mul(r, h))),
                            bind(t, b_h)));
    Var keep = t.add_scalar(t.neg(z), 1.0);  // 1 - z
    return t.add(t.mul(keep, h), t.mul(z, cand));
}

BiGru BiGru::attach(ParamStore& store, const std::string& prefix, int input_dim,
                    int hidden_dim, Rng& rng) {
    BiGru b;
    b.forward = GruCell::attach(store, prefix + ".fwd", input_dim, hidden_dim, rng);
    b.backward = GruCell::attach(store, prefix + ".bwd", input_dim, hidden_dim, rng);
    return b;
}

BiGru::Output BiGru::run(Tape& tape, const ParamBinder& bind,
                         const std::vector<Var>& inputs) const {
    if (inputs.empty()) throw std::invalid_argument("BiGru: empty input sequence");
    const std::size_t n = inputs.size();
    std::vector<Var> fwd(n), bwd(n);
    Var h = forward.zero_state(tape);
    for (std::size_t i = 0; i < n; ++i) {
        h = forward.step(tape, bind, inputs[i], h);
        fwd[i] = h;
    }
    h = backward.zero_state(tape);
    for (std::size_t i = n; i-- > 0;) {
        h = backward.step(tape, bind, inputs[i], h);
        bwd[i] = h;
    }
    Output out;
    out.per_step.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.per_step[i] = tape.concat({fwd[i], bwd[i]}, 0);
    out.last = tape.concat({fwd[n - 1], bwd[0]}, 0);
    return out;
}

}  // namespace vecsketch::diff

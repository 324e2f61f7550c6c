#pragma once

#include <string>
#include <vector>

#include "vecsketch/autodiff.hpp"

namespace vecsketch::diff {

/// Finds an existing named parameter (verifying its shape) or creates it
/// with uniform +-bound init. Lets model constructors bind to checkpointed
/// stores and fresh stores through the same path.
int ensure_param(ParamStore& store, const std::string& name, std::vector<int> shape,
                 double bound, Rng& rng);

/// Gated recurrent cell (update/reset gates).
struct GruCell {
    int input_dim = 0;
    int hidden_dim = 0;
    int w_z = -1, u_z = -1, b_z = -1;
    int w_r = -1, u_r = -1, b_r = -1;
    int w_h = -1, u_h = -1, b_h = -1;

    static GruCell attach(ParamStore& store, const std::string& prefix, int input_dim,
                          int hidden_dim, Rng& rng);

    /// One step: returns the next hidden state. x: (input_dim), h: (hidden_dim).
    Var step(Tape& tape, const ParamBinder& bind, Var x, Var h) const;

    Var zero_state(Tape& tape) const {
        return tape.constant(Tensor::zeros({hidden_dim}));
    }
};

/// Bidirectional recurrent encoder: per-step states are the concatenation
/// [forward_i; backward_i] of width 2*hidden.
struct BiGru {
    GruCell forward;
    GruCell backward;

    static BiGru attach(ParamStore& store, const std::string& prefix, int input_dim,
                        int hidden_dim, Rng& rng);

    struct Output {
        std::vector<Var> per_step;  // each (2*hidden)
        Var last;                   // [forward_end; backward_end], (2*hidden)
    };
    Output run(Tape& tape, const ParamBinder& bind, const std::vector<Var>& inputs) const;
};

}  // namespace vecsketch::diff

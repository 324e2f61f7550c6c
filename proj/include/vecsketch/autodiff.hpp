#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "vecsketch/params.hpp"
#include "vecsketch/tensor.hpp"

namespace vecsketch::diff {

/// Handle to a node on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Record of primitive applications in topological (creation) order.
/// Built single-threaded, consumed once by backward(). Independent tapes
/// may run concurrently; gradients land in the bound ParamStore.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaves.
    Var constant(Tensor value);
    Var constant_scalar(double value) { return constant(Tensor::scalar(value)); }
    /// Leaf bound to a ParamStore slot; cached so repeated use (weight
    /// sharing across time steps) creates one node.
    Var param(ParamStore& store, int slot);

    // Primitives. Shapes are explicit; only bias_add broadcasts.
    Var matmul(Var a, Var b);  // (m,k)@(k,n) -> (m,n); (m,k)@(k) -> (m)
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var scale(Var a, double c);
    Var add_scalar(Var a, double c);
    Var neg(Var a) { return scale(a, -1.0); }
    Var bias_add(Var matrix, Var bias);  // (m,n) + (n) per row
    Var tanh(Var a);
    Var sigmoid(Var a);
    Var exp(Var a);
    Var log(Var a);  // flags non-finite output rather than throwing
    Var softmax(Var a);             // over last axis
    Var cumsum(Var a, int axis = -1);
    Var concat(const std::vector<Var>& parts, int axis = 0);
    Var slice(Var a, int axis, int start, int len);
    Var reshape(Var a, std::vector<int> shape);
    Var sum(Var a);      // -> scalar
    Var row_sum(Var a);  // (m,n) -> (m)
    Var squared_difference(Var a, Var b);
    Var gather_rows(Var a, std::vector<int> rows);
    /// log(sum(exp(row))) per row, stable. (m,n) -> (m); (n) -> scalar.
    Var logsumexp(Var a);
    /// Elementwise binary cross-entropy from logits against constant targets.
    Var bce_with_logits(Var logits, std::vector<double> targets);

    void backward(Var loss, ParamStore& store);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    const Tensor& value(int id) const { return nodes_[id].value; }
    /// Gradient of the last backward() loss w.r.t. this node. Zeros if the
    /// node did not influence the loss.
    Tensor grad_of(Var v) const;
    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        Tensor grad;  // allocated lazily during backward
        bool needs_grad = false;
        int param_slot = -1;
        std::function<void(Tape&, int)> backprop;
    };

    int push(Tensor value, bool needs_grad, std::function<void(Tape&, int)> backprop);
    Tensor& grad_buffer(int id);
    void add_to_grad(int id, const Tensor& g);
    bool needs(Var v) const { return nodes_[v.id].needs_grad; }

    std::vector<Node> nodes_;
    std::unordered_map<int, int> param_cache_;
};

/// Maps a ParamStore slot to a tape node. Training binds live parameters,
/// inference binds frozen copies; models are written against the binder so
/// both paths share one graph builder.
using ParamBinder = std::function<Var(Tape&, int)>;

inline ParamBinder train_binder(ParamStore& store) {
    return [&store](Tape& tape, int slot) { return tape.param(store, slot); };
}

inline ParamBinder frozen_binder(const ParamStore& store) {
    return [&store](Tape& tape, int slot) { return tape.constant(store.value(slot)); };
}

}  // namespace vecsketch::diff

#include "vecsketch/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace vecsketch::diff {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    a.shape_str() + " vs " + b.shape_str());
}

}  // namespace

int Tape::push(Tensor value, bool needs_grad,
               std::function<void(Tape&, int)> backprop) {
    Node node;
    node.value = std::move(value);
    node.needs_grad = needs_grad;
    node.backprop = std::move(backprop);
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::grad_buffer(int id) {
    Node& n = nodes_[id];
    if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
}

void Tape::add_to_grad(int id, const Tensor& g) {
    Tensor& buf = grad_buffer(id);
    for (std::size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += g.data[i];
}

Tensor Tape::grad_of(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.data.empty()) return Tensor::zeros(n.value.shape);
    return n.grad;
}

Var Tape::constant(Tensor value) { return Var{push(std::move(value), false, nullptr)}; }

Var Tape::param(ParamStore& store, int slot) {
    auto it = param_cache_.find(slot);
    if (it != param_cache_.end()) return Var{it->second};
    int id = push(store.value(slot), true, nullptr);
    nodes_[id].param_slot = slot;
    param_cache_[slot] = id;
    return Var{id};
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rank() != 2 || (B.rank() != 2 && B.rank() != 1))
        throw std::invalid_argument("matmul: unsupported ranks");
    if (A.cols() != B.rows())
        throw std::invalid_argument("matmul: inner dimensions differ " +
                                    A.shape_str() + " @ " + B.shape_str());
    const int m = A.rows(), k = A.cols();
    Tensor out;
    if (B.rank() == 2) {
        const int n = B.cols();
        out = Tensor::zeros({m, n});
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
                double av = A.at(i, p);
                if (av == 0.0) continue;
                const double* brow = &B.data[static_cast<std::size_t>(p) * n];
                double* orow = &out.data[static_cast<std::size_t>(i) * n];
                for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
    } else {
        out = Tensor::zeros({m});
        for (int i = 0; i < m; ++i) {
            const double* arow = &A.data[static_cast<std::size_t>(i) * k];
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * B.data[p];
            out.data[i] = acc;
        }
    }
    bool ng = needs(a) || needs(b);
    int ida = a.id, idb = b.id;
    return Var{push(std::move(out), ng, [ida, idb](Tape& t, int self) {
        const Tensor& G = t.nodes_[self].grad;
        const Tensor& A2 = t.nodes_[ida].value;
        const Tensor& B2 = t.nodes_[idb].value;
        const int m2 = A2.rows(), k2 = A2.cols();
        if (B2.rank() == 2) {
            const int n2 = B2.cols();
            if (t.nodes_[ida].needs_grad) {
                Tensor& dA = t.grad_buffer(ida);
                for (int i = 0; i < m2; ++i)
                    for (int p = 0; p < k2; ++p) {
                        const double* grow = &G.data[static_cast<std::size_t>(i) * n2];
                        const double* brow = &B2.data[static_cast<std::size_t>(p) * n2];
                        double acc = 0.0;
                        for (int j = 0; j < n2; ++j) acc += grow[j] * brow[j];
                        dA.at(i, p) += acc;
                    }
            }
            if (t.nodes_[idb].needs_grad) {
                Tensor& dB = t.grad_buffer(idb);
                for (int p = 0; p < k2; ++p)
                    for (int i = 0; i < m2; ++i) {
                        double av = A2.at(i, p);
                        if (av == 0.0) continue;
                        const double* grow = &G.data[static_cast<std::size_t>(i) * n2];
                        double* drow = &dB.data[static_cast<std::size_t>(p) * n2];
                        for (int j = 0; j < n2; ++j) drow[j] += av * grow[j];
                    }
            }
        } else {
            if (t.nodes_[ida].needs_grad) {
                Tensor& dA = t.grad_buffer(ida);
                for (int i = 0; i < m2; ++i)
                    for (int p = 0; p < k2; ++p) dA.at(i, p) += G.data[i] * B2.data[p];
            }
            if (t.nodes_[idb].needs_grad) {
                Tensor& dB = t.grad_buffer(idb);
                for (int i = 0; i < m2; ++i) {
                    double g = G.data[i];
                    if (g == 0.0) continue;
                    const double* arow = &A2.data[static_cast<std::size_t>(i) * k2];
                    for (int p = 0; p < k2; ++p) dB.data[p] += g * arow[p];
                }
            }
        }
    })};
}

Var Tape::add(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    check_same_shape(A, B, "add");
    Tensor out = A;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += B.data[i];
    int ida = a.id, idb = b.id;
    return Var{push(std::move(out), needs(a) || needs(b), [ida, idb](Tape& t, int self) {
        const Tensor& G = t.nodes_[self].grad;
        if (t.nodes_[ida].needs_grad) t.add_to_grad(ida, G);
        if (t.nodes_[idb].needs_grad) t.add_to_grad(idb, G);
    })};
}

Var Tape::sub(Var a, Var b) { return add(a, neg(b)); }

Var Tape::mul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    check_same_shape(A, B, "mul");
    Tensor out = A;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];
    int ida = a.id, idb = b.id;
    return Var{push(std::move(out), needs(a) || needs(b), [ida, idb](Tape& t, int self) {
        const Tensor& G = t.nodes_[self].grad;
        const Tensor& A2 = t.nodes_[ida].value;
        const Tensor& B2 = t.nodes_[idb].value;
        if (t.nodes_[ida].needs_grad) {
            Tensor& dA = t.grad_buffer(ida);
            for (std::size_t i = 0; i < dA.data.size(); ++i)
                dA.data[i] += G.data[i] * B2.data[i];
        }
        if (t.nodes_[idb].needs_grad) {
            Tensor& dB = t.grad_buffer(idb);
            for (std::size_t i = 0; i < dB.data.size(); ++i)
                dB.data[i] += G.data[i] * A2.data[i];
        }
    })};
}

Var Tape::scale(Var a, double c) {
    Tensor out = value(a);
    for (double& v : out.data) v *= c;
    int ida = a.id;
    return Var{push(std::move(out), needs(a), [ida, c](Tape& t, int self) {
        if (!t.nodes_[ida].needs_grad) return;
        const Tensor& G = t.nodes_[self].grad;
        Tensor& dA = t.grad_buffer(ida);
        for (std::size_t i = 0; i < dA.data.size(); ++i) dA.data[i] += c * G.data[i];
    })};
}

Var Tape::add_scalar(Var a, double c) {
    Tensor out = value(a);
    for (double& v : out.data) v += c;
    int ida = a.id;
    return Var{push(std::move(out), needs(a), [ida](Tape& t, int self) {
        if (t.nodes_[ida].needs_grad) t.add_to_grad(ida, t.nodes_[self].grad);
    })};
}

Var Tape::bias_add(Var matrix, Var bias) {
    const Tensor& A = value(matrix);
    const Tensor& B = value(bias);
    if (A.rank() != 2 || B.rank() != 1 || A.cols() != B.rows())
        throw std::invalid_argument("bias_add: need (m,n) + (n)");
    Tensor out = A;
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) out.at(i, j) += B.data[j];
    int ida = matrix.id, idb = bias.id;
    return Var{push(std::move(out), needs(matrix) || needs(bias),
                    [ida, idb](Tape& t, int self) {
                        const Tensor& G = t.nodes_[self].grad;
                        if (t.nodes_[ida].needs_grad) t.add_to_grad(ida, G);
                        if (t.nodes_[idb].needs_grad) {
                            Tensor& dB = t.grad_buffer(idb);
                            for (int i = 0; i < G.rows(); ++i)
                                for (int j = 0; j < G.cols(); ++j)
                                    dB.data[j] += G.at(i, j);
                        }
                    })};
}

Var Tape::tanh(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) v = std::tanh(v);
    int ida = a.id;
    return Var{push(std::move(out), needs(a), [ida](Tape& t, int self) {
        if (!t.nodes_[ida].needs_grad) return;
        const Tensor& G = t.nodes_[self].grad;
        const Tensor& Y = t.nodes_[self].value;
        Tensor& dA = t.grad_buffer(ida);
        for (std::size_t i = 0; i < dA.data.size(); ++i)
            dA.data[i] += G.data[i] * (1.0 - Y.data[i] * Y.data[i]);
    })};
}

Var Tape::sigmoid(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    int ida = a.id;
    return Var{push(std::move(out), needs(a), [ida](Tape& t, int self) {
        if (!t.nodes_[ida].needs_grad) return;
        const Tensor& G = t.nodes_[self].grad;
        const Tensor& Y = t.nodes_[self].value;
        Tensor& dA = t.grad_buffer(ida);
        for (std::size_t i = 0; i < dA.data.size(); ++i)
            dA.data[i] += G.data[i] * Y.data[i] * (1.0 - Y.data[i]);
    })};
}

Var Tape::exp(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) v = std::exp(v);
    int ida = a.id;
    return Var{push(std::move(out), needs(a), [ida](Tape& t, int self) {
        if (!t.nodes_[ida].needs_grad) return;
        const Tensor& G = t.nodes_[self].grad;
        const Tensor& Y = t.nodes_[self].value;
        Tensor& dA = t.grad_buffer(ida);
        for (std::size_t i = 0; i < dA.data.size(); ++i)
            dA.data[i] += G.data[i] * Y.data[i];
    })};
}

Var Tape::log(Var a) {
    Tensor out = value(a);
    for (double& v : out.data) v = std::log(v);  // domain violations yield nan/-inf
    int ida = a.id;
    return Var{push(std::move(out), needs(a), [ida](Tape& t, int self) {
        if (!t.nodes_[ida].needs_grad) return;
        const Tensor& G = t.nodes_[self].grad;
        const Tensor& X = t.nodes_[ida].value;
        Tensor& dA = t.grad_buffer(ida);
        for (std::size_t i = 0; i < dA.data.size(); ++i)
            dA.data[i] += G.data[i] / X.data[i];
    })};
}

Var Tape::softmax(Var a) {
    const Tensor& A = value(a);
    Tensor out = A;
    const int cols = A.rank() == 2 ? A.cols() : static_cast<int>(A.numel());
    const int rows = static_cast<int>(A.numel()) / cols;
    for (int r = 0; r < rows; ++r) {
        double* row = &out.data[static_cast<std::size_t>(r) * cols];
        double m = row[0];
        for (int j = 1; j < cols; ++j) m = std::max(m, row[j]);
        double z = 0.0;
        for (int j = 0; j < cols; ++j) {
            row[j] = std::exp(row[j] - m);
            z += row[j];
        }
        for (int j = 0; j < cols; ++j) row[j] /= z;
    }
    int ida = a.id;
    return Var{push(std::move(out), needs(a), [ida, rows, cols](Tape& t, int self) {
        if (!t.nodes_[ida].needs_grad) return;
        const Tensor& G = t.nodes_[self].grad;
        const Tensor& Y = t.nodes_[self].value;
        Tensor& dA = t.grad_buffer(ida);
        for (int r = 0; r < rows; ++r) {
            const double* g = &G.data[static_cast<std::size_t>(r) * cols];
            const double* y = &Y.data[static_cast<std::size_t>(r) * cols];
            double dot = 0.0;
            for (int j = 0; j < cols; ++j) dot += g[j] * y[j];
            double* d = &dA.data[static_cast<std::size_t>(r) * cols];
            for (int j = 0; j < cols; ++j) d[j] += y[j] * (g[j] - dot);
        }
    })};
}

Var Tape::cumsum(Var a, int axis) {
    const Tensor& A = value(a);
    if (axis == -1) axis = A.rank() - 1;
    if (axis < 0 || axis >= A.rank())
        throw std::invalid_argument("cumsum: bad axis");
    Tensor out = A;
    const int cols = A.cols();
    const int rows = static_cast<int>(A.numel()) / cols;
    if (A.rank() == 1 || axis == 1) {
        for (int r = 0; r < rows; ++r) {
            double* row = &out.data[static_cast<std::size_t>(r) * cols];
            for (int j = 1; j < cols; ++j) row[j] += row[j - 1];
        }
    } else {
        for (int r = 1; r < rows; ++r)
            for (int j = 0; j < cols; ++j) out.at(r, j) += out.at(r - 1, j);
    }
    bool along_rows = (A.rank() == 1 || axis == 1);
    int ida = a.id;
    return Var{push(std::move(out), needs(a),
                    [ida, rows, cols, along_rows](Tape& t, int self) {
                        if (!t.nodes_[ida].needs_grad) return;
                        // Adjoint of a prefix sum is a suffix sum.
                        Tensor G = t.nodes_[self].grad;
                        if (along_rows) {
                            for (int r = 0; r < rows; ++r) {
                                double* row = &G.data[static_cast<std::size_t>(r) * cols];
                                for (int j = cols - 2; j >= 0; --j) row[j] += row[j + 1];
                            }
                        } else {
                            for (int r = rows - 2; r >= 0; --r)
                                for (int j = 0; j < cols; ++j)
                                    G.at(r, j) += G.at(r + 1, j);
                        }
                        t.add_to_grad(ida, G);
                    })};
}

Var Tape::concat(const std::vector<Var>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: empty part list");
    const int rank = value(parts[0]).rank();
    if (axis < 0 || axis >= rank) throw std::invalid_argument("concat: bad axis");
    bool ng = false;
    for (Var p : parts) ng = ng || needs(p);

    Tensor out;
    std::vector<int> ids;
    for (Var p : parts) ids.push_back(p.id);
    if (rank == 1 || (rank == 2 && axis == 0)) {
        std::vector<int> shape = value(parts[0]).shape;
        int total = 0;
        for (Var p : parts) {
            const Tensor& t = value(p);
            if (t.rank() != rank || (rank == 2 && t.cols() != value(parts[0]).cols()))
                throw std::invalid_argument("concat: incompatible shapes");
            total += t.shape[0];
        }
        shape[0] = total;
        out = Tensor::zeros(shape);
        std::size_t pos = 0;
        for (Var p : parts) {
            const Tensor& t = value(p);
            std::copy(t.data.begin(), t.data.end(), out.data.begin() + pos);
            pos += t.numel();
        }
        return Var{push(std::move(out), ng, [ids](Tape& t, int self) {
            const Tensor& G = t.nodes_[self].grad;
            std::size_t pos = 0;
            for (int id : ids) {
                const Tensor& part = t.nodes_[id].value;
                if (t.nodes_[id].needs_grad) {
                    Tensor g = Tensor::zeros(part.shape);
                    std::copy(G.data.begin() + pos, G.data.begin() + pos + part.numel(),
                              g.data.begin());
                    t.add_to_grad(id, g);
                }
                pos += part.numel();
            }
        })};
    }
    // rank 2, axis 1: columns side by side
    int rows = value(parts[0]).rows();
    int total_cols = 0;
    for (Var p : parts) {
        const Tensor& t = value(p);
        if (t.rank() != 2 || t.rows() != rows)
            throw std::invalid_argument("concat: incompatible shapes");
        total_cols += t.cols();
    }
    out = Tensor::zeros({rows, total_cols});
    int col = 0;
    for (Var p : parts) {
        const Tensor& t = value(p);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < t.cols(); ++j) out.at(i, col + j) = t.at(i, j);
        col += t.cols();
    }
    return Var{push(std::move(out), ng, [ids, rows](Tape& t, int self) {
        const Tensor& G = t.nodes_[self].grad;
        int col = 0;
        for (int id : ids) {
            const Tensor& part = t.nodes_[id].value;
            if (t.nodes_[id].needs_grad) {
                Tensor g = Tensor::zeros(part.shape);
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < part.cols(); ++j)
                        g.at(i, j) = G.at(i, col + j);
                t.add_to_grad(id, g);
            }
            col += part.cols();
        }
    })};
}

Var Tape::slice(Var a, int axis, int start, int len) {
    const Tensor& A = value(a);
    if (axis < 0 || axis >= A.rank()) throw std::invalid_argument("slice: bad axis");
    if (start < 0 || len <= 0 || start + len > A.shape[axis])
        throw std::invalid_argument("slice: out of range");
    Tensor out;
    if (A.rank() == 1) {
        out = Tensor::zeros({len});
        std::copy(A.data.begin() + start, A.data.begin() + start + len,
                  out.data.begin());
    } else if (axis == 0) {
        out = Tensor::zeros({len, A.cols()});
        std::copy(A.data.begin() + static_cast<std::size_t>(start) * A.cols(),
                  A.data.begin() + static_cast<std::size_t>(start + len) * A.cols(),
                  out.data.begin());
    } else {
        out = Tensor::zeros({A.rows(), len});
        for (int i = 0; i < A.rows(); ++i)
            for (int j = 0; j < len; ++j) out.at(i, j) = A.at(i, start + j);
    }
    int ida = a.id;
    int rank = A.rank();
    return Var{push(std::move(out), needs(a),
                    [ida, axis, start, len, rank](Tape& t, int self) {
                        if (!t.nodes_[ida].needs_grad) return;
                        const Tensor& G = t.nodes_[self].grad;
                        Tensor& dA = t.grad_buffer(ida);
                        if (rank == 1) {
                            for (int j = 0; j < len; ++j) dA.data[start + j] += G.data[j];
                        } else if (axis == 0) {
                            const int cols = dA.cols();
                            for (int i = 0; i < len; ++i)
                                for (int j = 0; j < cols; ++j)
                                    dA.at(start + i, j) += G.at(i, j);
                        } else {
                            for (int i = 0; i < dA.rows(); ++i)
                                for (int j = 0; j < len; ++j)
                                    dA.at(i, start + j) += G.at(i, j);
                        }
                    })};
}

Var Tape::reshape(Var a, std::vector<int> shape) {
    Tensor out(std::move(shape), value(a).data);
    int ida = a.id;
    return Var{push(std::move(out), needs(a), [ida](Tape& t, int self) {
        if (!t.nodes_[ida].needs_grad) return;
        Tensor g = t.nodes_[self].grad;
        g.shape = t.nodes_[ida].value.shape;
        t.add_to_grad(ida, g);
    })};
}

Var Tape::sum(Var a) {
    const Tensor& A = value(a);
    double acc = 0.0;
    for (double v : A.data) acc += v;
    int ida = a.id;
    return Var{push(Tensor::scalar(acc), needs(a), [ida](Tape& t, int self) {
        if (!t.nodes_[ida].needs_grad) return;
        double g = t.nodes_[self].grad.data[0];
        Tensor& dA = t.grad_buffer(ida);
        for (double& v : dA.data) v += g;
    })};
}

Var Tape::row_sum(Var a) {
    const Tensor& A = value(a);
    if (A.rank() != 2) throw std::invalid_argument("row_sum: need rank 2");
    Tensor out = Tensor::zeros({A.rows()});
    for (int i = 0; i < A.rows(); ++i) {
        double acc = 0.0;
        for (int j = 0; j < A.cols(); ++j) acc += A.at(i, j);
        out.data[i] = acc;
    }
    int ida = a.id;
    return Var{push(std::move(out), needs(a), [ida](Tape& t, int self) {
        if (!t.nodes_[ida].needs_grad) return;
        const Tensor& G = t.nodes_[self].grad;
        Tensor& dA = t.grad_buffer(ida);
        for (int i = 0; i < dA.rows(); ++i)
            for (int j = 0; j < dA.cols(); ++j) dA.at(i, j) += G.data[i];
    })};
}

Var Tape::squared_difference(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    check_same_shape(A, B, "squared_difference");
    Tensor out = A;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        double d = A.data[i] - B.data[i];
        out.data[i] = d * d;
    }
    int ida = a.id, idb = b.id;
    return Var{push(std::move(out), needs(a) || needs(b), [ida, idb](Tape& t, int self) {
        const Tensor& G = t.nodes_[self].grad;
        const Tensor& A2 = t.nodes_[ida].value;
        const Tensor& B2 = t.nodes_[idb].value;
        if (t.nodes_[ida].needs_grad) {
            Tensor& dA = t.grad_buffer(ida);
            for (std::size_t i = 0; i < dA.data.size(); ++i)
                dA.data[i] += 2.0 * (A2.data[i] - B2.data[i]) * G.data[i];
        }
        if (t.nodes_[idb].needs_grad) {
            Tensor& dB = t.grad_buffer(idb);
            for (std::size_t i = 0; i < dB.data.size(); ++i)
                dB.data[i] -= 2.0 * (A2.data[i] - B2.data[i]) * G.data[i];
        }
    })};
}

Var Tape::gather_rows(Var a, std::vector<int> rows) {
    const Tensor& A = value(a);
    if (A.rank() != 2) throw std::invalid_argument("gather_rows: need rank 2");
    for (int r : rows)
        if (r < 0 || r >= A.rows()) throw std::invalid_argument("gather_rows: index");
    Tensor out = Tensor::zeros({static_cast<int>(rows.size()), A.cols()});
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < A.cols(); ++j) out.at(static_cast<int>(i), j) = A.at(rows[i], j);
    int ida = a.id;
    return Var{push(std::move(out), needs(a), [ida, rows](Tape& t, int self) {
        if (!t.nodes_[ida].needs_grad) return;
        const Tensor& G = t.nodes_[self].grad;
        Tensor& dA = t.grad_buffer(ida);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (int j = 0; j < dA.cols(); ++j)
                dA.at(rows[i], j) += G.at(static_cast<int>(i), j);
    })};
}

Var Tape::logsumexp(Var a) {
    const Tensor& A = value(a);
    const int cols = A.rank() == 2 ? A.cols() : static_cast<int>(A.numel());
    const int rows = static_cast<int>(A.numel()) / cols;
    Tensor out = A.rank() == 2 ? Tensor::zeros({rows}) : Tensor::scalar(0.0);
    for (int r = 0; r < rows; ++r) {
        const double* row = &A.data[static_cast<std::size_t>(r) * cols];
        double m = row[0];
        for (int j = 1; j < cols; ++j) m = std::max(m, row[j]);
        double z = 0.0;
        for (int j = 0; j < cols; ++j) z += std::exp(row[j] - m);
        out.data[r] = m + std::log(z);
    }
    int ida = a.id;
    return Var{push(std::move(out), needs(a), [ida, rows, cols](Tape& t, int self) {
        if (!t.nodes_[ida].needs_grad) return;
        const Tensor& G = t.nodes_[self].grad;
        const Tensor& Y = t.nodes_[self].value;
        const Tensor& X = t.nodes_[ida].value;
        Tensor& dA = t.grad_buffer(ida);
        for (int r = 0; r < rows; ++r) {
            const double* x = &X.data[static_cast<std::size_t>(r) * cols];
            double* d = &dA.data[static_cast<std::size_t>(r) * cols];
            for (int j = 0; j < cols; ++j)
                d[j] += G.data[r] * std::exp(x[j] - Y.data[r]);
        }
    })};
}

Var Tape::bce_with_logits(Var logits, std::vector<double> targets) {
    const Tensor& X = value(logits);
    if (X.numel() != targets.size())
        throw std::invalid_argument("bce_with_logits: target count mismatch");
    Tensor out = X;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        double x = X.data[i];
        out.data[i] = std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::fabs(x)));
    }
    int ida = logits.id;
    return Var{push(std::move(out), needs(logits), [ida, targets](Tape& t, int self) {
        if (!t.nodes_[ida].needs_grad) return;
        const Tensor& G = t.nodes_[self].grad;
        const Tensor& X2 = t.nodes_[ida].value;
        Tensor& dA = t.grad_buffer(ida);
        for (std::size_t i = 0; i < dA.data.size(); ++i) {
            double s = 1.0 / (1.0 + std::exp(-X2.data[i]));
            dA.data[i] += (s - targets[i]) * G.data[i];
        }
    })};
}

void Tape::backward(Var loss, ParamStore& store) {
    if (!loss.valid() || !value(loss).is_scalar())
        throw std::invalid_argument("backward: loss must be a scalar node");
    grad_buffer(loss.id).data[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& node = nodes_[i];
        if (!node.needs_grad || node.grad.data.empty()) continue;
        if (node.backprop) node.backprop(*this, i);
    }
    for (Node& node : nodes_) {
        if (node.param_slot < 0 || node.grad.data.empty()) continue;
        Tensor& g = store.grad(node.param_slot);
        for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += node.grad.data[i];
    }
}

}  // namespace vecsketch::diff

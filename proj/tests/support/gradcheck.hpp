#pragma once

// Central-finite-difference oracle for reverse-mode gradients. Test-only;
// independent of the adjoint rules it checks.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "vecsketch/autodiff.hpp"

namespace gradcheck {

using LossBuilder =
    std::function<vecsketch::diff::Var(vecsketch::diff::Tape&,
                                       const vecsketch::diff::ParamBinder&)>;

struct Report {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t checked = 0;
};

/// Compares reverse-mode gradients of the scalar loss against central
/// differences over every element of every parameter in the store.
inline Report compare(vecsketch::diff::ParamStore& store, const LossBuilder& build,
                      double step = 1e-5, double denom_floor = 1e-3) {
    namespace diff = vecsketch::diff;
    store.zero_grad();
    {
        diff::Tape tape;
        diff::Var loss = build(tape, diff::train_binder(store));
        tape.backward(loss, store);
    }
    std::vector<diff::Tensor> analytic;
    for (std::size_t s = 0; s < store.size(); ++s)
        analytic.push_back(store.grad(static_cast<int>(s)));
    store.zero_grad();

    auto loss_value = [&]() {
        diff::Tape tape;
        diff::Var loss = build(tape, diff::frozen_binder(store));
        return tape.value(loss).data[0];
    };

    Report report;
    for (std::size_t s = 0; s < store.size(); ++s) {
        diff::Tensor& value = store.value(static_cast<int>(s));
        for (std::size_t i = 0; i < value.data.size(); ++i) {
            double original = value.data[i];
            value.data[i] = original + step;
            double plus = loss_value();
            value.data[i] = original - step;
            double minus = loss_value();
            value.data[i] = original;
            double numeric = (plus - minus) / (2.0 * step);
            double a = analytic[s].data[i];
            double rel = std::fabs(a - numeric) /
                         std::max({std::fabs(a), std::fabs(numeric), denom_floor});
            ++report.checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = store.name(static_cast<int>(s)) + "[" +
                                     std::to_string(i) + "]";
            }
        }
    }
    return report;
}

}  // namespace gradcheck

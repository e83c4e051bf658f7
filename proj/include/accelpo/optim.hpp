#pragma once

#include "accelpo/core.hpp"

namespace accelpo {

/// Plain gradient step, ascent convention: params + lr * grad.
/// Callers negate the gradient for minimization.
inline Table sgd_step(const Table& params, const Table& grad, double lr) {
    check_same_shape(params, grad, "sgd_step");
    return axpy(params, lr, grad);
}

/// Adam state over a flat table of parameters. Defaults follow the common
/// (0.9, 0.999, 1e-8) setting.
struct AdamState {
    Table m;
    Table v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double lr = 1e-3;

    AdamState() = default;
    AdamState(int rows, int cols, double learning_rate)
        : m(rows, cols, 0.0), v(rows, cols, 0.0), lr(learning_rate) {}
};

/// One bias-corrected Adam step, ascent convention. Returns the parameter
/// delta (lr * mhat / (sqrt(vhat) + eps)) and the advanced state.
inline std::pair<Table, AdamState> adam_step(const AdamState& state, const Table& grad) {
    check_same_shape(state.m, grad, "adam_step");
    AdamState next = state;
    next.t = state.t + 1;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(next.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(next.t));
    Table delta(grad.rows(), grad.cols());
    for (size_t i = 0; i < grad.data().size(); ++i) {
        const double g = grad.data()[i];
        next.m.data()[i] = state.beta1 * state.m.data()[i] + (1.0 - state.beta1) * g;
        next.v.data()[i] = state.beta2 * state.v.data()[i] + (1.0 - state.beta2) * g * g;
        const double mhat = next.m.data()[i] / c1;
        const double vhat = next.v.data()[i] / c2;
        delta.data()[i] = state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
    return {std::move(delta), std::move(next)};
}

}  // namespace accelpo

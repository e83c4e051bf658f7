#pragma once

#include "accelpo/core.hpp"
#include "accelpo/policy.hpp"

namespace accelpo {

/// Auto-regressive accelerator memory: the previous committed update u_{t-1},
/// the previous gradient prediction, and the dual (logit) history needed by
/// the half-step forms. Value type; step functions return the advanced state.
struct UpdateState {
    Table u_prev;
    Table g_prev;
    Table z_prev;
    Table z_half_prev;
    double momentum = 0.0;   // mu in [0, 1)
    double step = 1.0;       // beta > 0
    double improve_step = 1.0;  // alpha > 0, used by half-step proposals

    UpdateState() = default;
    UpdateState(int rows, int cols, double mu, double beta, double alpha)
        : u_prev(rows, cols, 0.0), g_prev(rows, cols, 0.0), z_prev(rows, cols, 0.0),
          z_half_prev(rows, cols, 0.0), momentum(mu), step(beta), improve_step(alpha) {
        if (!(mu >= 0.0 && mu < 1.0))
            throw std::invalid_argument("UpdateState: momentum must lie in [0, 1)");
        if (!(beta > 0.0) || !(alpha > 0.0))
            throw std::invalid_argument("UpdateState: step sizes must be positive");
    }
};

/// u_t = g_hat: the inexact NPG / mirror-ascent base case. No memory.
inline std::pair<Table, UpdateState> vanilla_update(const UpdateState& state,
                                                    const Table& g_hat) {
    check_same_shape(state.u_prev, g_hat, "vanilla_update");
    UpdateState next = state;
    next.u_prev = g_hat;
    next.g_prev = g_hat;
    return {g_hat, std::move(next)};
}

/// Heavy-ball: u_t = mu u_{t-1} + beta g_hat.
inline std::pair<Table, UpdateState> momentum_update(const UpdateState& state,
                                                     const Table& g_hat) {
    check_same_shape(state.u_prev, g_hat, "momentum_update");
    Table u = axpy(scaled(state.u_prev, state.momentum), state.step, g_hat);
    UpdateState next = state;
    next.u_prev = u;
    next.g_prev = g_hat;
    return {std::move(u), std::move(next)};
}

/// Optimistic update: u_t = beta g_next + mu (u_{t-1} - beta g_curr), where
/// g_next predicts the next gradient and g_curr estimates the current one.
inline std::pair<Table, UpdateState> optimistic_update(const UpdateState& state,
                                                       const Table& g_next,
                                                       const Table& g_curr) {
    check_same_shape(state.u_prev, g_next, "optimistic_update");
    check_same_shape(state.u_prev, g_curr, "optimistic_update");
    Table u(g_next.rows(), g_next.cols());
    for (size_t i = 0; i < u.data().size(); ++i)
        u.data()[i] = state.step * g_next.data()[i] +
                      state.momentum * (state.u_prev.data()[i] - state.step * g_curr.data()[i]);
    UpdateState next = state;
    next.u_prev = u;
    next.g_prev = g_next;
    return {std::move(u), std::move(next)};
}

/// Half-step proposal pi_{t+1/2} = P grad-Omega(z_t + alpha u_{t-1}); the
/// stale update probes ahead before the committed step.
inline TabularPolicy extragrad_half_step(const Table& z, const Table& u_prev, double alpha) {
    return mirror_step(TabularPolicy(z), u_prev, alpha);
}

/// Extra-gradient update: the optimistic rule with the prediction replaced by
/// the gradient evaluated at the half-step proposal.
inline std::pair<Table, UpdateState> extragrad_update(const UpdateState& state,
                                                      const Table& g_half,
                                                      const Table& g_curr) {
    return optimistic_update(state, g_half, g_curr);
}

enum class UpdateRule { vanilla, momentum, extragrad };

/// Exact-gradient mirror-ascent driver: iterates the accelerated update rules
/// with g_t = Q_{pi_t} computed exactly, returning J(pi*) - J(pi_t) per
/// iteration. The extra-gradient rule starts each iteration from the half-step
/// proposal unless `recompute_target` commits the full step instead.
inline std::vector<double> exact_gradient_regret(const TabularMdp& mdp, UpdateRule rule,
                                                 int iterations, double alpha, double mu,
                                                 double beta,
                                                 bool recompute_target = false) {
    const double j_star = value_iteration(mdp, 1e-10).j_star;
    UpdateState state(mdp.n_states(), mdp.n_actions(), mu, beta, alpha);
    TabularPolicy pi = TabularPolicy::uniform(mdp.n_states(), mdp.n_actions());
    std::vector<double> regret;
    regret.reserve(iterations);
    for (int t = 0; t < iterations; ++t) {
        regret.push_back(j_star - performance(mdp, pi.probs));
        const Table g_curr = exact_q(mdp, pi.probs);
        Table u;
        TabularPolicy next;
        switch (rule) {
        case UpdateRule::vanilla: {
            std::tie(u, state) = vanilla_update(state, g_curr);
            next = mirror_step(pi, u, alpha);
            break;
        }
        case UpdateRule::momentum: {
            std::tie(u, state) = momentum_update(state, g_curr);
            next = mirror_step(pi, u, alpha);
            break;
        }
        case UpdateRule::extragrad: {
            const TabularPolicy half = extragrad_half_step(pi.logits, state.u_prev, alpha);
            const Table g_half = exact_q(mdp, half.probs);
            std::tie(u, state) = extragrad_update(state, g_half, g_curr);
            next = recompute_target ? mirror_step(pi, u, alpha) : half;
            break;
        }
        }
        state.z_prev = pi.logits;
        state.z_half_prev = next.logits;
        pi = std::move(next);
    }
    return regret;
}

}  // namespace accelpo

#pragma once

#include "accelpo/core.hpp"
#include "accelpo/mdp.hpp"

namespace accelpo {

/// Bellman evaluation operator on Q-tables:
/// (T_pi Q)(s,a) = r(s,a) + g sum_{s'} P(s'|s,a) sum_{a'} pi(a'|s') Q(s',a').
inline Table t_pi(const TabularMdp& mdp, const Table& policy, const Table& q) {
    detail::check_policy_shape(mdp, policy, "t_pi");
    if (q.rows() != mdp.n_states() || q.cols() != mdp.n_actions())
        throw std::invalid_argument("t_pi: Q-table has wrong shape");
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    const double g = mdp.discount();

    std::vector<double> v(n);
    for (int s = 0; s < n; ++s) {
        double x = 0.0;
        for (int a = 0; a < m; ++a) x += policy(s, a) * q(s, a);
        v[s] = x;
    }
    Table out(n, m);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < m; ++a) {
            double backup = 0.0;
            const auto nd = mdp.next_dist(s, a);
            for (int s2 = 0; s2 < n; ++s2) backup += nd[s2] * v[s2];
            out(s, a) = mdp.reward(s, a) + g * backup;
        }
    return out;
}

/// Bellman optimality operator on Q-tables (max over next actions).
inline Table t_opt(const TabularMdp& mdp, const Table& q) {
    if (q.rows() != mdp.n_states() || q.cols() != mdp.n_actions())
        throw std::invalid_argument("t_opt: Q-table has wrong shape");
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    const double g = mdp.discount();

    std::vector<double> v(n);
    for (int s = 0; s < n; ++s) {
        double best = q(s, 0);
        for (int a = 1; a < m; ++a) best = std::max(best, q(s, a));
        v[s] = best;
    }
    Table out(n, m);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < m; ++a) {
            double backup = 0.0;
            const auto nd = mdp.next_dist(s, a);
            for (int s2 = 0; s2 < n; ++s2) backup += nd[s2] * v[s2];
            out(s, a) = mdp.reward(s, a) + g * backup;
        }
    return out;
}

/// Optimistic policy-iteration evaluation relaxation
/// Q_{t+1} = Q_t - lambda (Q_t - target), with target = T Q_t supplied by the
/// caller. lambda = 1 returns the target exactly.
inline Table opi_eval_step(const Table& q, const Table& target, double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0))
        throw std::invalid_argument("opi_eval_step: lambda must lie in (0, 1]");
    check_same_shape(q, target, "opi_eval_step");
    if (lambda == 1.0) return target;
    Table out = q;
    for (size_t i = 0; i < out.data().size(); ++i)
        out.data()[i] -= lambda * (q.data()[i] - target.data()[i]);
    return out;
}

enum class SearchMode { eval, greedy };

/// Exhaustive h-step lookahead values on the exact simulator:
/// U = T_{pi_b}^h Q_leaf (eval) or U = T^h Q_leaf (greedy). h = 0 returns the
/// leaf values unchanged. Depth truncation is the only approximation.
inline Table search_values(const TabularMdp& mdp, const Table& q_leaf, int h, SearchMode mode,
                           const Table& tree_policy) {
    if (h < 0) throw std::invalid_argument("search_values: horizon must be >= 0");
    Table u = q_leaf;
    for (int k = 0; k < h; ++k)
        u = (mode == SearchMode::eval) ? t_pi(mdp, tree_policy, u) : t_opt(mdp, u);
    return u;
}

/// Search-value advantage A(s,a) = U(s,a) - sum_b pi_b(b|s) U(s,b).
inline Table search_advantage(const Table& u, const Table& tree_policy) {
    check_same_shape(u, tree_policy, "search_advantage");
    Table adv(u.rows(), u.cols());
    for (int s = 0; s < u.rows(); ++s) {
        double v = 0.0;
        for (int a = 0; a < u.cols(); ++a) v += tree_policy(s, a) * u(s, a);
        for (int a = 0; a < u.cols(); ++a) adv(s, a) = u(s, a) - v;
    }
    return adv;
}

/// Verifies the lookahead recursion
/// U^(h) = Q_{t+1} + g E_{pi_b}[U^(h-1) - Q_t], Q_{t+1} = T_{pi_b} Q_t,
/// against the direct h-fold operator power. True iff they agree within 1e-10.
inline bool lookahead_recursion_check(const TabularMdp& mdp, const Table& tree_policy,
                                      const Table& q_t, int h) {
    if (h < 1) throw std::invalid_argument("lookahead_recursion_check: h must be >= 1");
    const Table direct = search_values(mdp, q_t, h, SearchMode::eval, tree_policy);

    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    const double g = mdp.discount();
    const Table q_next = t_pi(mdp, tree_policy, q_t);

    auto expected_next = [&](const Table& x) {
        // (E_{pi_b} x)(s,a) = sum_{s'} P(s'|s,a) sum_{a'} pi_b(a'|s') x(s',a')
        std::vector<double> v(n);
        for (int s = 0; s < n; ++s) {
            double t = 0.0;
            for (int a = 0; a < m; ++a) t += tree_policy(s, a) * x(s, a);
            v[s] = t;
        }
        Table out(n, m);
        for (int s = 0; s < n; ++s)
            for (int a = 0; a < m; ++a) {
                double backup = 0.0;
                const auto nd = mdp.next_dist(s, a);
                for (int s2 = 0; s2 < n; ++s2) backup += nd[s2] * v[s2];
                out(s, a) = backup;
            }
        return out;
    };

    Table u = q_t;  // U^(0)
    for (int k = 1; k <= h; ++k) {
        const Table corr = expected_next(axpy(u, -1.0, q_t));
        u = axpy(q_next, g, corr);
    }
    return sup_dist(u, direct) <= 1e-10;
}

}  // namespace accelpo

#pragma once

#include "accelpo/core.hpp"
#include "accelpo/mdp.hpp"

#include <numeric>

namespace accelpo {

namespace detail {

/// Rowwise softmax with max subtraction.
inline Table softmax_rows(const Table& logits) {
    Table probs(logits.rows(), logits.cols());
    for (int s = 0; s < logits.rows(); ++s) {
        double mx = logits(s, 0);
        for (int a = 1; a < logits.cols(); ++a) mx = std::max(mx, logits(s, a));
        double z = 0.0;
        for (int a = 0; a < logits.cols(); ++a) {
            probs(s, a) = std::exp(logits(s, a) - mx);
            z += probs(s, a);
        }
        for (int a = 0; a < logits.cols(); ++a) probs(s, a) /= z;
    }
    return probs;
}

}  // namespace detail

/// Softmax-parametrized policy: logits z and their rowwise softmax.
/// Policies are equivalence classes under per-row additive shifts of z;
/// normalized construction subtracts the rowwise max to prevent drift.
struct TabularPolicy {
    Table logits;
    Table probs;

    TabularPolicy() = default;
    explicit TabularPolicy(Table z) : logits(std::move(z)) {
        if (!all_finite(logits))
            throw std::invalid_argument("TabularPolicy: logits must be finite");
        probs = detail::softmax_rows(logits);
    }
    static TabularPolicy uniform(int n_states, int n_actions) {
        return TabularPolicy(Table(n_states, n_actions, 0.0));
    }
};

/// Direct (probability-row) policy; zero entries are allowed.
struct DirectPolicy {
    Table probs;

    DirectPolicy() = default;
    explicit DirectPolicy(Table p) : probs(std::move(p)) {
        for (int s = 0; s < probs.rows(); ++s) {
            double sum = 0.0;
            for (int a = 0; a < probs.cols(); ++a) {
                if (!(probs(s, a) >= 0.0))
                    throw std::invalid_argument("DirectPolicy: negative probability");
                sum += probs(s, a);
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw std::invalid_argument("DirectPolicy: row does not sum to 1");
        }
    }
};

/// Mirror-ascent (natural policy gradient) step: pi' ~ pi * exp(a U), done as
/// logit addition followed by rowwise max normalization. The scaled update is
/// centered by its row max before it touches the logits, so per-row constant
/// shifts of U cancel before any rounding can couple them to z.
inline TabularPolicy mirror_step(const TabularPolicy& policy, const Table& u, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("mirror_step: step must be positive");
    check_same_shape(policy.logits, u, "mirror_step");
    if (!all_finite(u)) throw std::invalid_argument("mirror_step: update must be finite");
    Table z = policy.logits;
    for (int s = 0; s < z.rows(); ++s) {
        double wmax = step * u(s, 0);
        for (int a = 1; a < z.cols(); ++a) wmax = std::max(wmax, step * u(s, a));
        for (int a = 0; a < z.cols(); ++a) z(s, a) += step * u(s, a) - wmax;
        double mx = z(s, 0);
        for (int a = 1; a < z.cols(); ++a) mx = std::max(mx, z(s, a));
        for (int a = 0; a < z.cols(); ++a) z(s, a) -= mx;
    }
    return TabularPolicy(std::move(z));
}

/// Euclidean projection of a vector onto the probability simplex
/// (sort-and-threshold).
inline std::vector<double> euclidean_project(std::span<const double> v) {
    const size_t n = v.size();
    if (n == 0) throw std::invalid_argument("euclidean_project: empty input");
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument("euclidean_project: non-finite input");

    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cum = 0.0;
    double tau = sorted[0] - 1.0;
    for (size_t j = 0; j < n; ++j) {
        cum += sorted[j];
        const double t = (cum - 1.0) / static_cast<double>(j + 1);
        if (sorted[j] - t > 0.0) tau = t;  // largest support size with positive mass
    }
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = std::max(0.0, v[i] - tau);
    return out;
}

/// Weighted KL-divergence sum_s d(s) sum_a p(a|s) (log p - log q).
/// Returns +infinity when p puts mass where q has none and d(s) > 0.
inline double weighted_kl(const Table& p, const Table& q, std::span<const double> d) {
    check_same_shape(p, q, "weighted_kl");
    if (static_cast<int>(d.size()) != p.rows())
        throw std::invalid_argument("weighted_kl: weight vector has wrong size");
    double total = 0.0;
    for (int s = 0; s < p.rows(); ++s) {
        if (d[s] == 0.0) continue;
        double kl = 0.0;
        for (int a = 0; a < p.cols(); ++a) {
            const double ps = p(s, a);
            if (ps == 0.0) continue;
            const double qs = q(s, a);
            if (qs <= 0.0) return std::numeric_limits<double>::infinity();
            kl += ps * (std::log(ps) - std::log(qs));
        }
        total += d[s] * kl;
    }
    return total;
}

/// Pointwise KL of a single state row; +infinity on support violation.
inline double kl_row(std::span<const double> p, std::span<const double> q) {
    double kl = 0.0;
    for (size_t a = 0; a < p.size(); ++a) {
        if (p[a] == 0.0) continue;
        if (q[a] <= 0.0) return std::numeric_limits<double>::infinity();
        kl += p[a] * (std::log(p[a]) - std::log(q[a]));
    }
    return kl;
}

/// Soft policy-iteration mixing pi_{t+1} = (1-a) pi_t + a pi_plus.
inline DirectPolicy soft_pi_mix(const DirectPolicy& pi_t, const DirectPolicy& pi_plus,
                                double mix) {
    if (!(mix > 0.0 && mix <= 1.0))
        throw std::invalid_argument("soft_pi_mix: mix must lie in (0, 1]");
    check_same_shape(pi_t.probs, pi_plus.probs, "soft_pi_mix");
    Table out = pi_t.probs;
    for (size_t i = 0; i < out.data().size(); ++i)
        out.data()[i] = (1.0 - mix) * pi_t.probs.data()[i] + mix * pi_plus.probs.data()[i];
    return DirectPolicy(std::move(out));
}

/// Analytic logit-space policy gradient for the softmax parametrization:
/// g(s,a) = d(s) pi(a|s) (Q(s,a) - sum_b pi(b|s) Q(s,b)).
/// With d the (unnormalized) discounted occupancy and Q = Q_pi this is the
/// exact gradient of the performance objective.
inline Table softmax_policy_gradient(const TabularPolicy& policy, const Table& q,
                                     std::span<const double> d) {
    check_same_shape(policy.probs, q, "softmax_policy_gradient");
    if (static_cast<int>(d.size()) != q.rows())
        throw std::invalid_argument("softmax_policy_gradient: weight vector has wrong size");
    Table g(q.rows(), q.cols(), 0.0);
    for (int s = 0; s < q.rows(); ++s) {
        if (d[s] == 0.0) continue;
        double v = 0.0;
        for (int a = 0; a < q.cols(); ++a) v += policy.probs(s, a) * q(s, a);
        for (int a = 0; a < q.cols(); ++a)
            g(s, a) = d[s] * policy.probs(s, a) * (q(s, a) - v);
    }
    return g;
}

/// Score-function estimate of the logit-space gradient from a rollout:
/// (1/n) sum_i grad log pi(A_i|S_i) * (U(S_i,A_i) - E_pi[U(S_i,.)]).
inline Table sampled_policy_gradient(const Rollout& rollout, const TabularPolicy& policy,
                                     const Table& u) {
    if (rollout.transitions.empty())
        throw std::invalid_argument("sampled_policy_gradient: empty rollout");
    check_same_shape(policy.probs, u, "sampled_policy_gradient");
    Table g(u.rows(), u.cols(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(rollout.size());
    for (const Transition& tr : rollout.transitions) {
        const int s = tr.state;
        double v = 0.0;
        for (int a = 0; a < u.cols(); ++a) v += policy.probs(s, a) * u(s, a);
        const double adv = u(s, tr.action) - v;
        for (int a = 0; a < u.cols(); ++a) {
            const double score = (a == tr.action ? 1.0 : 0.0) - policy.probs(s, a);
            g(s, a) += inv_n * score * adv;
        }
    }
    return g;
}

}  // namespace accelpo

#pragma once

#include "accelpo/agents.hpp"
#include "accelpo/bellman.hpp"
#include "accelpo/harness.hpp"
#include "accelpo/optim.hpp"
#include "accelpo/updates.hpp"

#include <functional>

namespace accelpo::harness {

// ---------------------------------------------------------------------------
// Randomized small instances for property checks and tests.
// ---------------------------------------------------------------------------

inline TabularMdp random_mdp(Rng& rng, int n_states, int n_actions, double discount) {
    std::vector<double> transitions(static_cast<size_t>(n_states) * n_actions * n_states);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            double sum = 0.0;
            const size_t base = (static_cast<size_t>(s) * n_actions + a) * n_states;
            for (int s2 = 0; s2 < n_states; ++s2) {
                const double w = 0.05 + rng.uniform();
                transitions[base + s2] = w;
                sum += w;
            }
            for (int s2 = 0; s2 < n_states; ++s2) transitions[base + s2] /= sum;
            // Force the row to sum to exactly 1 against accumulated roundoff.
            double acc = 0.0;
            for (int s2 = 0; s2 < n_states - 1; ++s2) acc += transitions[base + s2];
            transitions[base + n_states - 1] = 1.0 - acc;
        }
    Table rewards(n_states, n_actions);
    for (double& r : rewards.data()) r = rng.uniform();
    std::vector<double> rho(n_states);
    double sum = 0.0;
    for (double& p : rho) {
        p = 0.05 + rng.uniform();
        sum += p;
    }
    for (double& p : rho) p /= sum;
    double acc = 0.0;
    for (int s = 0; s < n_states - 1; ++s) acc += rho[s];
    rho[n_states - 1] = 1.0 - acc;
    return TabularMdp(n_states, n_actions, std::move(transitions), std::move(rewards), discount,
                      std::move(rho));
}

inline Table random_policy_table(Rng& rng, int n_states, int n_actions) {
    Table p(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        double sum = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            p(s, a) = 0.05 + rng.uniform();
            sum += p(s, a);
        }
        for (int a = 0; a < n_actions; ++a) p(s, a) /= sum;
        double acc = 0.0;
        for (int a = 0; a < n_actions - 1; ++a) acc += p(s, a);
        p(s, n_actions - 1) = 1.0 - acc;
    }
    return p;
}

inline Table random_table(Rng& rng, int rows, int cols, double lo, double hi) {
    Table t(rows, cols);
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

/// Central finite differences of performance w.r.t. every policy logit.
inline Table fd_performance_gradient(const TabularMdp& mdp, const Table& theta, double eps) {
    Table g(theta.rows(), theta.cols());
    for (int s = 0; s < theta.rows(); ++s)
        for (int a = 0; a < theta.cols(); ++a) {
            Table up = theta, dn = theta;
            up(s, a) += eps;
            dn(s, a) -= eps;
            const double fu = performance(mdp, TabularPolicy(std::move(up)).probs);
            const double fd = performance(mdp, TabularPolicy(std::move(dn)).probs);
            g(s, a) = (fu - fd) / (2.0 * eps);
        }
    return g;
}

/// Central finite differences of the meta loss w.r.t. every meta-parameter.
inline Table fd_meta_gradient(const Table& eta, const Table& theta, double xi,
                              const Table& target_probs, const MetaBuffer& batch, double eps) {
    Table g(eta.rows(), eta.cols());
    for (int s = 0; s < eta.rows(); ++s)
        for (int a = 0; a < eta.cols(); ++a) {
            Table up = eta, dn = eta;
            up(s, a) += eps;
            dn(s, a) -= eps;
            const double fu = meta_loss(up, theta, xi, target_probs, batch);
            const double fd = meta_loss(dn, theta, xi, target_probs, batch);
            g(s, a) = (fu - fd) / (2.0 * eps);
        }
    return g;
}

// ---------------------------------------------------------------------------
// Invariant suite: randomized checks of every module's stated properties,
// reused by the `check` subcommand and the test binaries.
// ---------------------------------------------------------------------------

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace detail {

inline void add_check(std::vector<CheckResult>& out, const std::string& name,
                      const std::function<std::pair<bool, std::string>()>& body) {
    CheckResult r;
    r.name = name;
    try {
        auto [pass, detail] = body();
        r.pass = pass;
        r.detail = detail;
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("exception: ") + e.what();
    }
    out.push_back(std::move(r));
}

inline std::string worst(double v) { return "worst " + format_double(v); }

/// Two-stage grid search over the 3-point simplex: a coarse 1e4-point scan
/// followed by a local refinement around the coarse optimum. Independent of
/// any closed form it is used to verify.
template <typename F>
double simplex_grid_best(F&& objective, bool maximize) {
    const double sign = maximize ? 1.0 : -1.0;
    double best = -std::numeric_limits<double>::infinity();
    double b0 = 1.0 / 3.0, b1 = 1.0 / 3.0;
    const int grid = 100;
    for (int i = 0; i <= grid; ++i)
        for (int j = 0; j <= grid - i; ++j) {
            const double p0 = i / 100.0, p1 = j / 100.0;
            const double v = sign * objective(p0, p1, 1.0 - p0 - p1);
            if (v > best) {
                best = v;
                b0 = p0;
                b1 = p1;
            }
        }
    // Refine twice, shrinking the window around the incumbent.
    double window = 0.01;
    for (int level = 0; level < 2; ++level) {
        const double step = window / 50.0;
        const double lo0 = std::max(0.0, b0 - window), hi0 = std::min(1.0, b0 + window);
        const double lo1_base = std::max(0.0, b1 - window);
        double n0 = b0, n1 = b1;
        for (double p0 = lo0; p0 <= hi0 + 1e-15; p0 += step)
            for (double p1 = lo1_base; p1 <= std::min(1.0 - p0, b1 + window) + 1e-15;
                 p1 += step) {
                const double p2 = 1.0 - p0 - p1;
                if (p2 < -1e-15) continue;
                const double v = sign * objective(p0, p1, std::max(0.0, p2));
                if (v > best) {
                    best = v;
                    n0 = p0;
                    n1 = p1;
                }
            }
        b0 = n0;
        b1 = n1;
        window = step;
    }
    return sign * best;
}

}  // namespace detail

inline std::vector<CheckResult> run_invariant_checks(std::uint64_t audit_seed) {
    std::vector<CheckResult> out;
    using detail::add_check;
    using detail::worst;

    // ---- mdp ----
    add_check(out, "mdp/exact-q-matches-operator-fixed-point", [&] {
        Rng rng(audit_seed + 1);
        double w = 0.0;
        for (int k = 0; k < 5; ++k) {
            const int n = 2 + static_cast<int>(rng.raw() % 7);  // <= 8 states
            const TabularMdp mdp = random_mdp(rng, n, 2 + static_cast<int>(rng.raw() % 2), 0.9);
            const Table pi = random_policy_table(rng, mdp.n_states(), mdp.n_actions());
            Table q(mdp.n_states(), mdp.n_actions(), 0.0);
            for (int i = 0; i < 1000; ++i) q = t_pi(mdp, pi, q);
            w = std::max(w, sup_dist(q, exact_q(mdp, pi)));
        }
        return std::make_pair(w <= 1e-8, worst(w));
    });

    add_check(out, "mdp/visitation-flow-identity", [&] {
        Rng rng(audit_seed + 2);
        double w = 0.0;
        for (int k = 0; k < 10; ++k) {
            const TabularMdp mdp = random_mdp(rng, 4 + static_cast<int>(rng.raw() % 4), 3, 0.9);
            const Table pi = random_policy_table(rng, mdp.n_states(), mdp.n_actions());
            const auto d = visitation(mdp, pi);
            for (int s = 0; s < mdp.n_states(); ++s) {
                double flow = (1.0 - mdp.discount()) * mdp.initial_dist()[s];
                for (int s1 = 0; s1 < mdp.n_states(); ++s1)
                    for (int a = 0; a < mdp.n_actions(); ++a)
                        flow += mdp.discount() * pi(s1, a) * mdp.transition(s1, a, s) * d[s1];
                w = std::max(w, std::abs(d[s] - flow));
            }
            double sum = 0.0;
            for (double x : d) sum += x;
            w = std::max(w, std::abs(sum - 1.0));
        }
        return std::make_pair(w <= 1e-10, worst(w));
    });

    add_check(out, "mdp/performance-dual-form", [&] {
        Rng rng(audit_seed + 3);
        double w = 0.0;
        for (int k = 0; k < 10; ++k) {
            const TabularMdp mdp = random_mdp(rng, 5, 3, 0.9);
            const Table pi = random_policy_table(rng, 5, 3);
            const auto d = visitation(mdp, pi);
            double dual = 0.0;
            for (int s = 0; s < 5; ++s)
                for (int a = 0; a < 3; ++a) dual += d[s] * pi(s, a) * mdp.reward(s, a);
            dual /= (1.0 - mdp.discount());
            w = std::max(w, std::abs(dual - performance(mdp, pi)));
        }
        return std::make_pair(w <= 1e-8, worst(w));
    });

    add_check(out, "mdp/value-iteration-dominates-all-policies", [&] {
        Rng rng(audit_seed + 4);
        const TabularMdp mdp = random_mdp(rng, 6, 3, 0.9);
        const Table q_star = value_iteration(mdp, 1e-12).q_star;
        double w = 0.0;
        for (int k = 0; k < 100; ++k) {
            const Table pi = random_policy_table(rng, 6, 3);
            const Table q = exact_q(mdp, pi);
            for (size_t i = 0; i < q.data().size(); ++i)
                w = std::max(w, q.data()[i] - q_star.data()[i]);
        }
        return std::make_pair(w <= 1e-9, "max excess " + format_double(w));
    });

    add_check(out, "mdp/discount-one-rejected-at-construction", [&] {
        Rng rng(audit_seed + 5);
        try {
            random_mdp(rng, 3, 2, 1.0);
            return std::make_pair(false, std::string("construction accepted gamma = 1"));
        } catch (const std::invalid_argument&) {
            return std::make_pair(true, std::string("rejected"));
        }
    });

    // ---- policy ----
    add_check(out, "policy/mirror-step-maximizes-regularized-objective", [&] {
        Rng rng(audit_seed + 6);
        double w = 0.0;
        for (int k = 0; k < 5; ++k) {
            const double alpha = 0.5;
            TabularPolicy pi(random_table(rng, 1, 3, -0.5, 0.5));
            const Table u = random_table(rng, 1, 3, -1.0, 1.0);
            const TabularPolicy stepped = mirror_step(pi, u, alpha);
            auto objective = [&](double p0, double p1, double p2) {
                const double probs[3] = {p0, p1, p2};
                double lin = 0.0, kl = 0.0;
                for (int a = 0; a < 3; ++a) {
                    lin += probs[a] * u(0, a);
                    if (probs[a] > 0.0)
                        kl += probs[a] * (std::log(probs[a]) - std::log(pi.probs(0, a)));
                }
                return lin - kl / alpha;
            };
            const double best = detail::simplex_grid_best(objective, /*maximize=*/true);
            const double got = objective(stepped.probs(0, 0), stepped.probs(0, 1),
                                         stepped.probs(0, 2));
            if (got + 1e-12 < best) return std::make_pair(false, std::string("grid beat the closed form"));
            w = std::max(w, got - best);
        }
        return std::make_pair(w <= 1e-4, "objective gap " + format_double(w));
    });

    add_check(out, "policy/euclidean-projection-matches-grid-search", [&] {
        Rng rng(audit_seed + 7);
        double w = 0.0;
        for (int k = 0; k < 5; ++k) {
            const std::vector<double> v = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                                           rng.uniform(-1.5, 1.5)};
            const auto proj = euclidean_project(v);
            auto dist2 = [&](double p0, double p1, double p2) {
                return (p0 - v[0]) * (p0 - v[0]) + (p1 - v[1]) * (p1 - v[1]) +
                       (p2 - v[2]) * (p2 - v[2]);
            };
            const double best = detail::simplex_grid_best(dist2, /*maximize=*/false);
            const double got = dist2(proj[0], proj[1], proj[2]);
            if (got > best + 1e-12) return std::make_pair(false, std::string("grid beat the projection"));
            w = std::max(w, best - got);
        }
        return std::make_pair(w <= 1e-4, "distance gap " + format_double(w));
    });

    add_check(out, "policy/softmax-gradient-matches-finite-differences", [&] {
        Rng rng(audit_seed + 8);
        double w = 0.0;
        for (int k = 0; k < 50; ++k) {
            const int n = 2 + static_cast<int>(rng.raw() % 4);  // <= 5 states
            const int m = 2 + static_cast<int>(rng.raw() % 3);
            const TabularMdp mdp = random_mdp(rng, n, m, 0.8);
            const Table theta = random_table(rng, n, m, -1.0, 1.0);
            const TabularPolicy pi((Table(theta)));
            auto d = visitation(mdp, pi.probs);
            for (double& x : d) x /= (1.0 - mdp.discount());
            const Table analytic = softmax_policy_gradient(pi, exact_q(mdp, pi.probs), d);
            const Table fd = fd_performance_gradient(mdp, theta, 1e-5);
            const double rel = sup_dist(analytic, fd) / std::max(sup_norm(fd), 1e-12);
            w = std::max(w, rel);
        }
        return std::make_pair(w <= 1e-5, "rel err " + format_double(w));
    });

    add_check(out, "policy/mirror-step-shift-invariance", [&] {
        Rng rng(audit_seed + 9);
        double w = 0.0;
        for (int k = 0; k < 20; ++k) {
            TabularPolicy pi(random_table(rng, 3, 4, -1.0, 1.0));
            // Dyadic update entries and integer shifts stay exactly
            // representable, so the invariance must hold bitwise.
            Table u(3, 4);
            for (double& x : u.data())
                x = static_cast<double>(static_cast<int>(rng.raw() % 257) - 128) / 16.0;
            Table shifted = u;
            for (int s = 0; s < 3; ++s) {
                const double c = static_cast<double>(static_cast<int>(rng.raw() % 9) - 4);
                for (int a = 0; a < 4; ++a) shifted(s, a) += c;
            }
            const TabularPolicy a = mirror_step(pi, u, 0.5);
            const TabularPolicy b = mirror_step(pi, shifted, 0.5);
            if (!(a.probs == b.probs)) return std::make_pair(false, std::string("probs differ"));
            // Random real shifts agree to roundoff.
            Table noisy = u;
            for (int s = 0; s < 3; ++s) {
                const double c = rng.uniform(-2.0, 2.0);
                for (int a2 = 0; a2 < 4; ++a2) noisy(s, a2) += c;
            }
            w = std::max(w, sup_dist(mirror_step(pi, noisy, 0.37).probs,
                                     mirror_step(pi, u, 0.37).probs));
        }
        return std::make_pair(w <= 1e-12, worst(w));
    });

    add_check(out, "policy/soft-pi-mix-improves-with-greedy-target", [&] {
        Rng rng(audit_seed + 10);
        double worst_drop = 0.0;
        for (int k = 0; k < 100; ++k) {
            const TabularMdp mdp = random_mdp(rng, 4, 3, 0.85);
            const DirectPolicy pi(random_policy_table(rng, 4, 3));
            const Table q = exact_q(mdp, pi.probs);
            Table greedy(4, 3, 0.0);
            for (int s = 0; s < 4; ++s) {
                int best = 0;
                for (int a = 1; a < 3; ++a)
                    if (q(s, a) > q(s, best)) best = a;
                greedy(s, best) = 1.0;
            }
            const double mix = 0.05 + 0.95 * rng.uniform();
            const DirectPolicy mixed = soft_pi_mix(pi, DirectPolicy(std::move(greedy)), mix);
            worst_drop = std::min(worst_drop,
                                  performance(mdp, mixed.probs) - performance(mdp, pi.probs));
        }
        return std::make_pair(worst_drop >= -1e-9, "worst gain " + format_double(worst_drop));
    });

    // ---- bellman ----
    add_check(out, "bellman/operators-are-monotone", [&] {
        Rng rng(audit_seed + 11);
        const TabularMdp mdp = random_mdp(rng, 6, 3, 0.9);
        const Table pi = random_policy_table(rng, 6, 3);
        double w = 0.0;
        for (int k = 0; k < 100; ++k) {
            const Table q1 = random_table(rng, 6, 3, -5.0, 5.0);
            Table q2 = q1;
            for (double& x : q2.data()) x += rng.uniform();
            const Table a1 = t_pi(mdp, pi, q1), a2 = t_pi(mdp, pi, q2);
            const Table b1 = t_opt(mdp, q1), b2 = t_opt(mdp, q2);
            for (size_t i = 0; i < a1.data().size(); ++i) {
                w = std::max(w, a1.data()[i] - a2.data()[i]);
                w = std::max(w, b1.data()[i] - b2.data()[i]);
            }
        }
        return std::make_pair(w <= 1e-12, "max violation " + format_double(w));
    });

    add_check(out, "bellman/contraction-modulus-is-gamma", [&] {
        Rng rng(audit_seed + 12);
        const TabularMdp mdp = random_mdp(rng, 6, 3, 0.9);
        const Table pi = random_policy_table(rng, 6, 3);
        double w = 0.0;
        for (int k = 0; k < 20; ++k) {
            const Table q = random_table(rng, 6, 3, -3.0, 3.0);
            const double c = rng.uniform(-2.0, 2.0);
            Table qc = q;
            for (double& x : qc.data()) x += c;
            w = std::max(w, std::abs(sup_dist(t_opt(mdp, qc), t_opt(mdp, q)) -
                                     mdp.discount() * std::abs(c)));
            w = std::max(w, std::abs(sup_dist(t_pi(mdp, pi, qc), t_pi(mdp, pi, q)) -
                                     mdp.discount() * std::abs(c)));
        }
        return std::make_pair(w <= 1e-12, worst(w));
    });

    add_check(out, "bellman/contraction-over-random-pairs", [&] {
        Rng rng(audit_seed + 13);
        const TabularMdp mdp = random_mdp(rng, 6, 3, 0.9);
        const Table pi = random_policy_table(rng, 6, 3);
        double w = 0.0;
        for (int k = 0; k < 1000; ++k) {
            const Table q1 = random_table(rng, 6, 3, -5.0, 5.0);
            const Table q2 = random_table(rng, 6, 3, -5.0, 5.0);
            const double lhs = sup_dist(t_pi(mdp, pi, q1), t_pi(mdp, pi, q2));
            const double lhs_opt = sup_dist(t_opt(mdp, q1), t_opt(mdp, q2));
            const double rhs = mdp.discount() * sup_dist(q1, q2);
            w = std::max(w, std::max(lhs, lhs_opt) - rhs);
        }
        return std::make_pair(w <= 1e-12, "max excess " + format_double(w));
    });

    add_check(out, "bellman/eval-power-composition", [&] {
        Rng rng(audit_seed + 14);
        const TabularMdp mdp = random_mdp(rng, 5, 3, 0.9);
        const Table pi = random_policy_table(rng, 5, 3);
        const Table q = random_table(rng, 5, 3, -2.0, 2.0);
        for (int h1 = 0; h1 <= 4; ++h1)
            for (int h2 = 0; h2 <= 4; ++h2) {
                const Table once = search_values(mdp, q, h1 + h2, SearchMode::eval, pi);
                const Table twice = search_values(
                    mdp, search_values(mdp, q, h1, SearchMode::eval, pi), h2, SearchMode::eval,
                    pi);
                if (!(once == twice))
                    return std::make_pair(false, std::string("composition differs"));
            }
        return std::make_pair(true, std::string("exact"));
    });

    add_check(out, "bellman/greedy-dominates-eval", [&] {
        Rng rng(audit_seed + 15);
        const TabularMdp mdp = random_mdp(rng, 6, 3, 0.9);
        double w = 0.0;
        for (int k = 0; k < 20; ++k) {
            const Table pi = random_policy_table(rng, 6, 3);
            const Table q = random_table(rng, 6, 3, -2.0, 2.0);
            for (int h = 0; h <= 6; ++h) {
                const Table ge = search_values(mdp, q, h, SearchMode::greedy, pi);
                const Table ev = search_values(mdp, q, h, SearchMode::eval, pi);
                for (size_t i = 0; i < ge.data().size(); ++i)
                    w = std::max(w, ev.data()[i] - ge.data()[i]);
            }
        }
        return std::make_pair(w <= 1e-12, "max excess " + format_double(w));
    });

    add_check(out, "bellman/eval-error-bound", [&] {
        Rng rng(audit_seed + 16);
        const TabularMdp mdp = random_mdp(rng, 6, 3, 0.9);
        double w = 0.0;
        for (int k = 0; k < 10; ++k) {
            const Table pi = random_policy_table(rng, 6, 3);
            const Table q_pi = exact_q(mdp, pi);
            const Table leaf = random_table(rng, 6, 3, -3.0, 3.0);
            const double base = sup_dist(leaf, q_pi);
            for (int h = 0; h <= 8; ++h) {
                const Table u = search_values(mdp, leaf, h, SearchMode::eval, pi);
                const double bound = std::pow(mdp.discount(), h) * base;
                w = std::max(w, sup_dist(u, q_pi) - bound);
            }
        }
        return std::make_pair(w <= 1e-10, "max excess " + format_double(w));
    });

    add_check(out, "bellman/lookahead-recursion-identity", [&] {
        Rng rng(audit_seed + 17);
        for (int k = 0; k < 10; ++k) {
            const TabularMdp mdp = random_mdp(rng, 5, 3, 0.9);
            const Table pi = random_policy_table(rng, 5, 3);
            const Table q = random_table(rng, 5, 3, -2.0, 2.0);
            for (int h : {1, 4, 8})
                if (!lookahead_recursion_check(mdp, pi, q, h))
                    return std::make_pair(false, "failed at h=" + std::to_string(h));
        }
        return std::make_pair(true, std::string("holds"));
    });

    // ---- updates ----
    add_check(out, "updates/rules-linear-in-gradients", [&] {
        Rng rng(audit_seed + 18);
        double w = 0.0;
        for (int k = 0; k < 20; ++k) {
            UpdateState fresh(2, 3, 0.5, 0.7, 1.0);
            UpdateState warm = fresh;
            warm.u_prev = random_table(rng, 2, 3, -1.0, 1.0);
            const Table g1 = random_table(rng, 2, 3, -1.0, 1.0);
            const Table g2 = random_table(rng, 2, 3, -1.0, 1.0);
            const double a = rng.uniform(-2.0, 2.0);
            // Fresh state: strictly linear.
            const Table combo = axpy(scaled(g1, a), 2.0 - a, g2);
            auto lin = [&](const UpdateState& st, auto&& rule) {
                const Table u12 = rule(st, combo).first;
                const Table u1 = rule(st, g1).first;
                const Table u2 = rule(st, g2).first;
                return sup_dist(u12, axpy(scaled(u1, a), 2.0 - a, u2));
            };
            auto mom = [](const UpdateState& st, const Table& g) { return momentum_update(st, g); };
            auto van = [](const UpdateState& st, const Table& g) { return vanilla_update(st, g); };
            auto opt = [](const UpdateState& st, const Table& g) {
                return optimistic_update(st, g, g);
            };
            w = std::max(w, lin(fresh, van));
            w = std::max(w, lin(fresh, mom));
            w = std::max(w, lin(fresh, opt));
            // Warm state: affine combinations with weights summing to one.
            const double b = 1.0 - a;
            const Table affine = axpy(scaled(g1, a), b, g2);
            const Table u12 = momentum_update(warm, affine).first;
            const Table u1 = momentum_update(warm, g1).first;
            const Table u2 = momentum_update(warm, g2).first;
            w = std::max(w, sup_dist(u12, axpy(scaled(u1, a), b, u2)));
        }
        return std::make_pair(w <= 1e-12, worst(w));
    });

    add_check(out, "updates/optimistic-perfect-prediction-fixed-point", [&] {
        Rng rng(audit_seed + 19);
        double w = 0.0;
        for (int k = 0; k < 20; ++k) {
            UpdateState st(2, 3, rng.uniform(0.0, 0.99), 0.25 * (1 + rng.raw() % 8), 1.0);
            const Table g = random_table(rng, 2, 3, -1.0, 1.0);
            st.u_prev = scaled(g, st.step);
            const Table u = optimistic_update(st, g, g).first;
            w = std::max(w, sup_dist(u, scaled(g, st.step)));
        }
        return std::make_pair(w == 0.0, worst(w));
    });

    add_check(out, "updates/dual-and-primal-recursions-agree", [&] {
        Rng rng(audit_seed + 20);
        const double mu = 0.6, beta = 0.8, alpha = 0.9;
        double w = 0.0;
        for (int rep = 0; rep < 5; ++rep) {
            UpdateState st(1, 3, mu, beta, alpha);
            Table z = random_table(rng, 1, 3, -1.0, 1.0);
            Table z_prev = z, z_half_prev = z;
            Table g_prev(1, 3, 0.0);
            bool have_history = false;
            for (int t = 0; t < 50; ++t) {
                const Table g_next = random_table(rng, 1, 3, -1.0, 1.0);
                const Table g_curr = random_table(rng, 1, 3, -1.0, 1.0);
                const Table u_prev = st.u_prev;
                Table u;
                std::tie(u, st) = optimistic_update(st, g_next, g_curr);
                const Table z_half = axpy(z, alpha, u);
                if (have_history) {
                    // Independent dual form: z + mu (z_half_prev - z_prev)
                    //                          + alpha beta (g_next - mu g_curr).
                    Table rhs = z;
                    for (int a = 0; a < 3; ++a)
                        rhs(0, a) += mu * (z_half_prev(0, a) - z_prev(0, a)) +
                                     alpha * beta * (g_next(0, a) - mu * g_curr(0, a));
                    w = std::max(w, sup_dist(rhs, z_half));
                }
                z_prev = z;
                z_half_prev = z_half;
                z = z_half;  // start the next iteration from the committed half-step
                g_prev = g_curr;
                have_history = true;
            }
        }
        return std::make_pair(w <= 1e-10, worst(w));
    });

    // ---- optim ----
    add_check(out, "optim/adam-sign-equivariant", [&] {
        Rng rng(audit_seed + 21);
        AdamState pos(2, 3, 0.1), neg(2, 3, 0.1);
        double w = 0.0;
        for (int t = 0; t < 50; ++t) {
            const Table g = random_table(rng, 2, 3, -1.0, 1.0);
            auto [dp, sp] = adam_step(pos, g);
            auto [dn, sn] = adam_step(neg, scaled(g, -1.0));
            pos = std::move(sp);
            neg = std::move(sn);
            w = std::max(w, sup_dist(dp, scaled(dn, -1.0)));
        }
        return std::make_pair(w == 0.0, worst(w));
    });

    add_check(out, "optim/steps-are-elementwise", [&] {
        Rng rng(audit_seed + 22);
        const Table g = random_table(rng, 1, 6, -1.0, 1.0);
        const Table p = random_table(rng, 1, 6, -1.0, 1.0);
        Table g_rev(1, 6), p_rev(1, 6);
        for (int a = 0; a < 6; ++a) {
            g_rev(0, a) = g(0, 5 - a);
            p_rev(0, a) = p(0, 5 - a);
        }
        const Table s1 = sgd_step(p, g, 0.3);
        const Table s2 = sgd_step(p_rev, g_rev, 0.3);
        for (int a = 0; a < 6; ++a)
            if (s1(0, a) != s2(0, 5 - a))
                return std::make_pair(false, std::string("sgd not elementwise"));
        AdamState st1(1, 6, 0.1), st2(1, 6, 0.1);
        const Table d1 = adam_step(st1, g).first;
        const Table d2 = adam_step(st2, g_rev).first;
        for (int a = 0; a < 6; ++a)
            if (d1(0, a) != d2(0, 5 - a))
                return std::make_pair(false, std::string("adam not elementwise"));
        return std::make_pair(true, std::string("permutation equivariant"));
    });

    // ---- agents ----
    add_check(out, "agents/meta-gradient-matches-finite-differences", [&] {
        Rng rng(audit_seed + 23);
        double w = 0.0;
        for (int k = 0; k < 5; ++k) {
            const TabularMdp mdp = random_mdp(rng, 2, 2, 0.8);
            const Table theta = random_table(rng, 2, 2, -1.0, 1.0);
            const Table eta = random_table(rng, 2, 2, -1.0, 1.0);
            const TabularPolicy pi((Table(theta)));
            MetaBuffer batch(1);
            batch.push(sample_rollout(mdp, pi.probs, 4, rng));
            const TabularPolicy target(random_table(rng, 2, 2, -1.0, 1.0));
            const Table g = meta_gradient(eta, theta, 0.5, target.probs, batch);
            const Table fd = fd_meta_gradient(eta, theta, 0.5, target.probs, batch, 1e-6);
            w = std::max(w, sup_dist(g, fd) / std::max(sup_norm(fd), 1e-12));
        }
        return std::make_pair(w <= 1e-4, "rel err " + format_double(w));
    });

    add_check(out, "agents/runs-deterministic-and-regret-nonnegative", [&] {
        const TabularMdp maze = load_maze(default_maze_map());
        RunConfig cfg;
        cfg.algorithm = Algorithm::ac;
        cfg.policy_step = 0.5;
        cfg.critic_step = 0.1;
        cfg.episodes = 2;
        cfg.seed = audit_seed;
        const RegretTrace a = run_ac(maze, cfg, Rng(cfg.seed));
        const RegretTrace b = run_ac(maze, cfg, Rng(cfg.seed));
        if (a.steps.size() != b.steps.size())
            return std::make_pair(false, std::string("trace lengths differ"));
        double min_regret = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < a.steps.size(); ++i) {
            if (a.steps[i].regret != b.steps[i].regret ||
                a.steps[i].cum_regret != b.steps[i].cum_regret)
                return std::make_pair(false, std::string("traces differ"));
            min_regret = std::min(min_regret, a.steps[i].regret);
        }
        return std::make_pair(min_regret >= -1e-9, "min regret " + format_double(min_regret));
    });

    add_check(out, "agents/lookahead-at-zero-reduces-to-actor-critic", [&] {
        const TabularMdp maze = load_maze(default_maze_map());
        RunConfig cfg;
        cfg.algorithm = Algorithm::fws;
        cfg.horizon = 0;
        cfg.episodes = 2;
        cfg.seed = audit_seed + 24;
        const RegretTrace f = run_fws(maze, cfg, Rng(cfg.seed));
        RunConfig cfg_ac = cfg;
        cfg_ac.algorithm = Algorithm::ac;
        const RegretTrace a = run_ac(maze, cfg_ac, Rng(cfg_ac.seed));
        if (f.steps.size() != a.steps.size())
            return std::make_pair(false, std::string("trace lengths differ"));
        for (size_t i = 0; i < f.steps.size(); ++i)
            if (f.steps[i].regret != a.steps[i].regret ||
                f.steps[i].cum_regret != a.steps[i].cum_regret)
                return std::make_pair(false, std::string("traces differ"));
        return std::make_pair(true, std::string("bit-identical"));
    });

    return out;
}

}  // namespace accelpo::harness

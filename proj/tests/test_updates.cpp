#include <catch2/catch_amalgamated.hpp>

#include "accelpo/checks.hpp"
#include "accelpo/updates.hpp"

using namespace accelpo;
using Catch::Approx;

TEST_CASE("vanilla update is the identity on the gradient estimate") {
    UpdateState st(2, 3, 0.5, 0.8, 1.0);
    Rng rng(3);
    const Table g = harness::random_table(rng, 2, 3, -1.0, 1.0);
    auto [u1, st1] = vanilla_update(st, g);
    REQUIRE(u1 == g);
    auto [u0, st0] = vanilla_update(st, Table(2, 3, 0.0));
    REQUIRE(sup_norm(u0) == 0.0);
    // History does not leak into the output.
    auto [u2, st2] = vanilla_update(st1, g);
    REQUIRE(u2 == u1);
}

TEST_CASE("momentum reduces to a scaled vanilla step when the decay is zero") {
    UpdateState st(1, 2, 0.0, 0.7, 1.0);
    Table g(1, 2, 2.0);
    const Table u = momentum_update(st, g).first;
    REQUIRE(u(0, 0) == Approx(1.4).epsilon(1e-14));
}

TEST_CASE("momentum accumulates the geometric series of a constant gradient") {
    const double mu = 0.5, beta = 0.8;
    UpdateState st(1, 1, mu, beta, 1.0);
    Table g(1, 1, 1.5);
    Table u;
    for (int k = 0; k < 60; ++k) std::tie(u, st) = momentum_update(st, g);
    REQUIRE(u(0, 0) == Approx(beta * 1.5 / (1.0 - mu)).margin(1e-8));
}

TEST_CASE("momentum direct substitution") {
    UpdateState st(1, 1, 0.9, 1.0, 1.0);
    st.u_prev(0, 0) = 1.0;
    const Table u = momentum_update(st, Table(1, 1, 0.0)).first;
    REQUIRE(u(0, 0) == Approx(0.9).epsilon(1e-15));
}

TEST_CASE("optimistic update algebra") {
    Rng rng(7);
    const double mu = 0.6, beta = 0.75;
    UpdateState st(2, 2, mu, beta, 1.0);
    st.u_prev = harness::random_table(rng, 2, 2, -1.0, 1.0);
    const Table g = harness::random_table(rng, 2, 2, -1.0, 1.0);

    // Equal prediction and estimate: u = beta g + mu (u_prev - beta g).
    const Table u = optimistic_update(st, g, g).first;
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a)
            REQUIRE(u(s, a) ==
                    Approx(beta * g(s, a) + mu * (st.u_prev(s, a) - beta * g(s, a)))
                        .margin(1e-15));

    // Perfect-prediction fixed point.
    st.u_prev = scaled(g, beta);
    const Table fixed = optimistic_update(st, g, g).first;
    REQUIRE(sup_dist(fixed, scaled(g, beta)) == 0.0);

    // No memory: pure extrapolation.
    UpdateState pure(2, 2, 0.0, beta, 1.0);
    const Table g2 = harness::random_table(rng, 2, 2, -1.0, 1.0);
    REQUIRE(optimistic_update(pure, g2, g).first == scaled(g2, beta));
}

TEST_CASE("dual-space recursion reproduces the update recursion") {
    // z_{t+1/2} = z_t + alpha u_t must match the independently evolved dual
    // form z_t + mu (z_{t-1/2} - z_{t-1}) + alpha beta (g_next - mu g_curr)
    // once the history (z_{t-1}, z_{t-1/2}) comes from the same rule.
    Rng rng(11);
    const double mu = 0.45, beta = 1.2, alpha = 0.7;
    UpdateState st(1, 4, mu, beta, alpha);
    Table z = harness::random_table(rng, 1, 4, -1.0, 1.0);
    Table z_prev, z_half_prev;
    bool have_history = false;
    for (int t = 0; t < 20; ++t) {
        const Table g_next = harness::random_table(rng, 1, 4, -1.0, 1.0);
        const Table g_curr = harness::random_table(rng, 1, 4, -1.0, 1.0);
        Table u;
        std::tie(u, st) = optimistic_update(st, g_next, g_curr);
        const Table z_half = axpy(z, alpha, u);
        if (have_history) {
            Table rhs = z;
            for (int a = 0; a < 4; ++a)
                rhs(0, a) += mu * (z_half_prev(0, a) - z_prev(0, a)) +
                             alpha * beta * (g_next(0, a) - mu * g_curr(0, a));
            REQUIRE(sup_dist(rhs, z_half) <= 1e-10);
        }
        z_prev = z;
        z_half_prev = z_half;
        z = z_half;
        have_history = true;
    }
}

TEST_CASE("half-step proposal is a mirror step with the stale update") {
    Rng rng(13);
    const Table z = harness::random_table(rng, 3, 3, -1.0, 1.0);
    const Table u_prev = harness::random_table(rng, 3, 3, -1.0, 1.0);

    const TabularPolicy a = extragrad_half_step(z, u_prev, 0.8);
    const TabularPolicy b = mirror_step(TabularPolicy{Table(z)}, u_prev, 0.8);
    REQUIRE(a.probs == b.probs);

    const TabularPolicy same = extragrad_half_step(z, Table(3, 3, 0.0), 0.8);
    REQUIRE(same.probs == TabularPolicy{Table(z)}.probs);

    Table onehot(3, 3, 0.0);
    onehot(0, 2) = onehot(1, 0) = onehot(2, 1) = 1.0;
    const TabularPolicy greedy = extragrad_half_step(z, onehot, 1e6);
    REQUIRE(greedy.probs(0, 2) == Approx(1.0).margin(1e-6));
}

TEST_CASE("extragrad update shares the optimistic formula") {
    Rng rng(17);
    UpdateState st(2, 2, 0.5, 0.9, 1.0);
    st.u_prev = harness::random_table(rng, 2, 2, -1.0, 1.0);
    const Table g_half = harness::random_table(rng, 2, 2, -1.0, 1.0);
    const Table g_curr = harness::random_table(rng, 2, 2, -1.0, 1.0);
    REQUIRE(extragrad_update(st, g_half, g_curr).first ==
            optimistic_update(st, g_half, g_curr).first);

    UpdateState plain(2, 2, 0.0, 1.0, 1.0);
    REQUIRE(extragrad_update(plain, g_half, g_curr).first == g_half);
}

TEST_CASE("extra-gradient loop beats vanilla mirror ascent on cumulative regret") {
    // Simulation oracle on a small MDP with exact gradients. The accurate
    // half-step predictions keep the doubled update step stable; at beta = 1
    // the correction term cancels the momentum and the rule tracks vanilla.
    Rng rng(19);
    const TabularMdp mdp = harness::random_mdp(rng, 2, 3, 0.9);
    const int iters = 200;
    const double alpha = 0.05;
    const auto vanilla = exact_gradient_regret(mdp, UpdateRule::vanilla, iters, alpha, 0.0, 1.0);
    const auto extra = exact_gradient_regret(mdp, UpdateRule::extragrad, iters, alpha, 0.5, 2.0);
    double cum_vanilla = 0.0, cum_extra = 0.0;
    for (int t = 0; t < iters; ++t) {
        cum_vanilla += vanilla[t];
        cum_extra += extra[t];
    }
    REQUIRE(cum_extra < cum_vanilla);
}

TEST_CASE("heavy-ball loop beats vanilla mirror ascent on cumulative regret") {
    Rng rng(20);
    const TabularMdp mdp = harness::random_mdp(rng, 2, 3, 0.9);
    const auto vanilla = exact_gradient_regret(mdp, UpdateRule::vanilla, 200, 0.1, 0.0, 1.0);
    const auto heavy = exact_gradient_regret(mdp, UpdateRule::momentum, 200, 0.1, 0.5, 1.0);
    double cum_vanilla = 0.0, cum_heavy = 0.0;
    for (int t = 0; t < 200; ++t) {
        cum_vanilla += vanilla[t];
        cum_heavy += heavy[t];
    }
    REQUIRE(cum_heavy < cum_vanilla);
}

TEST_CASE("recompute_target commits the full extra-gradient step") {
    Rng rng(23);
    const TabularMdp mdp = harness::random_mdp(rng, 2, 2, 0.9);
    const auto lazy = exact_gradient_regret(mdp, UpdateRule::extragrad, 50, 0.1, 0.5, 1.0, false);
    const auto full = exact_gradient_regret(mdp, UpdateRule::extragrad, 50, 0.1, 0.5, 1.0, true);
    REQUIRE(lazy != full);  // distinct trajectories, both finite
    for (double r : full) REQUIRE(std::isfinite(r));
}

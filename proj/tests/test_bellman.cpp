#include <catch2/catch_amalgamated.hpp>

#include "accelpo/bellman.hpp"
#include "accelpo/checks.hpp"

using namespace accelpo;
using Catch::Approx;

TEST_CASE("exact Q is a fixed point of the evaluation operator") {
    Rng rng(3);
    const TabularMdp mdp = harness::random_mdp(rng, 6, 3, 0.9);
    const Table pi = harness::random_policy_table(rng, 6, 3);
    const Table q = exact_q(mdp, pi);
    REQUIRE(sup_dist(t_pi(mdp, pi, q), q) <= 1e-10);
}

TEST_CASE("zero rewards scale a constant table by the discount") {
    std::vector<double> transitions = {0.0, 1.0, 1.0, 0.0};
    Table rewards(2, 1, 0.0);
    const TabularMdp mdp(2, 1, std::move(transitions), std::move(rewards), 0.7, {1.0, 0.0});
    const Table pi(2, 1, 1.0);
    const Table c(2, 1, 5.0);
    const Table out = t_pi(mdp, pi, c);
    REQUIRE(out(0, 0) == Approx(3.5).epsilon(1e-14));
    REQUIRE(out(1, 0) == Approx(3.5).epsilon(1e-14));
}

TEST_CASE("evaluation operator contracts random pairs at rate gamma") {
    Rng rng(7);
    const TabularMdp mdp = harness::random_mdp(rng, 5, 3, 0.9);
    const Table pi = harness::random_policy_table(rng, 5, 3);
    for (int k = 0; k < 200; ++k) {
        const Table q1 = harness::random_table(rng, 5, 3, -5.0, 5.0);
        const Table q2 = harness::random_table(rng, 5, 3, -5.0, 5.0);
        REQUIRE(sup_dist(t_pi(mdp, pi, q1), t_pi(mdp, pi, q2)) <=
                mdp.discount() * sup_dist(q1, q2) + 1e-12);
    }
}

TEST_CASE("optimal Q is a fixed point of the optimality operator") {
    const TabularMdp mdp = load_maze(default_maze_map());
    const ValueIterationResult vi = value_iteration(mdp, 1e-10);
    REQUIRE(sup_dist(t_opt(mdp, vi.q_star), vi.q_star) <= 1e-9);
}

TEST_CASE("with a single action the two operators coincide") {
    Rng rng(11);
    const TabularMdp mdp = harness::random_mdp(rng, 5, 1, 0.85);
    const Table pi(5, 1, 1.0);
    const Table q = harness::random_table(rng, 5, 1, -2.0, 2.0);
    REQUIRE(t_opt(mdp, q) == t_pi(mdp, pi, q));
}

TEST_CASE("optimality operator dominates every evaluation operator") {
    Rng rng(13);
    const TabularMdp mdp = harness::random_mdp(rng, 5, 3, 0.9);
    const Table q = harness::random_table(rng, 5, 3, -2.0, 2.0);
    const Table opt = t_opt(mdp, q);
    for (int k = 0; k < 100; ++k) {
        const Table pi = harness::random_policy_table(rng, 5, 3);
        const Table ev = t_pi(mdp, pi, q);
        for (size_t i = 0; i < ev.data().size(); ++i)
            REQUIRE(opt.data()[i] >= ev.data()[i] - 1e-12);
    }
}

TEST_CASE("opi evaluation step endpoints") {
    const Table q(2, 2, 0.0);
    const Table target(2, 2, 2.0);
    REQUIRE(opi_eval_step(q, target, 1.0) == target);
    const Table mid = opi_eval_step(q, target, 0.5);
    REQUIRE(mid(0, 0) == Approx(1.0));
    REQUIRE_THROWS_AS(opi_eval_step(q, target, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(opi_eval_step(q, target, 1.5), std::invalid_argument);
}

TEST_CASE("relaxed optimality iteration still reaches the optimum") {
    Rng rng(17);
    const TabularMdp mdp = harness::random_mdp(rng, 5, 3, 0.85);
    const Table q_star = value_iteration(mdp, 1e-12).q_star;
    Table q(5, 3, 0.0);
    for (int k = 0; k < 400; ++k) q = opi_eval_step(q, t_opt(mdp, q), 0.5);
    REQUIRE(sup_dist(q, q_star) <= 1e-8);
}

TEST_CASE("zero-horizon search returns the leaf values unchanged") {
    Rng rng(19);
    const TabularMdp mdp = harness::random_mdp(rng, 4, 2, 0.9);
    const Table pi = harness::random_policy_table(rng, 4, 2);
    const Table leaf = harness::random_table(rng, 4, 2, -1.0, 1.0);
    REQUIRE(search_values(mdp, leaf, 0, SearchMode::eval, pi) == leaf);
    REQUIRE(search_values(mdp, leaf, 0, SearchMode::greedy, pi) == leaf);
    REQUIRE_THROWS_AS(search_values(mdp, leaf, -1, SearchMode::eval, pi),
                      std::invalid_argument);
}

TEST_CASE("deep evaluation search lands within the contraction bound of Q_pi") {
    Rng rng(23);
    const TabularMdp mdp = harness::random_mdp(rng, 6, 3, 0.9);
    const Table pi = harness::random_policy_table(rng, 6, 3);
    const Table leaf = harness::random_table(rng, 6, 3, -3.0, 3.0);
    const Table q_pi = exact_q(mdp, pi);
    const Table u = search_values(mdp, leaf, 30, SearchMode::eval, pi);
    const double bound = std::pow(mdp.discount(), 30) * sup_dist(leaf, q_pi);
    REQUIRE(sup_dist(u, q_pi) <= bound + 1e-10);
}

TEST_CASE("deep greedy search converges to the optimal Q") {
    Rng rng(29);
    const TabularMdp mdp = harness::random_mdp(rng, 6, 3, 0.9);
    const Table pi = harness::random_policy_table(rng, 6, 3);
    const Table leaf = harness::random_table(rng, 6, 3, -2.0, 2.0);
    const Table q_star = value_iteration(mdp, 1e-12).q_star;
    const Table u = search_values(mdp, leaf, 200, SearchMode::greedy, pi);
    REQUIRE(sup_dist(u, q_star) <= 1e-6);
}

TEST_CASE("search advantage is centered under the tree policy") {
    Rng rng(31);
    const Table pi = harness::random_policy_table(rng, 4, 3);
    const Table u = harness::random_table(rng, 4, 3, -2.0, 2.0);
    const Table adv = search_advantage(u, pi);
    for (int s = 0; s < 4; ++s) {
        double mean = 0.0;
        for (int a = 0; a < 3; ++a) mean += pi(s, a) * adv(s, a);
        REQUIRE(std::abs(mean) <= 1e-12);
    }

    const Table constant(4, 3, 1.5);
    REQUIRE(sup_norm(search_advantage(constant, pi)) <= 1e-12);
}

TEST_CASE("search advantage hand values") {
    Table u(1, 2, 0.0);
    u(0, 0) = 1.0;
    const Table uniform(1, 2, 0.5);
    const Table adv = search_advantage(u, uniform);
    REQUIRE(adv(0, 0) == Approx(0.5));
    REQUIRE(adv(0, 1) == Approx(-0.5));

    Table det(1, 2, 0.0);
    det(0, 0) = 1.0;
    const Table adv2 = search_advantage(u, det);
    REQUIRE(adv2(0, 0) == 0.0);  // exact for a deterministic tree policy
}

TEST_CASE("lookahead recursion identity") {
    Rng rng(37);
    const TabularMdp mdp = harness::random_mdp(rng, 5, 3, 0.9);
    const Table pi = harness::random_policy_table(rng, 5, 3);
    const Table q = harness::random_table(rng, 5, 3, -2.0, 2.0);
    REQUIRE(lookahead_recursion_check(mdp, pi, q, 1));
    REQUIRE(lookahead_recursion_check(mdp, pi, q, 4));

    const TabularMdp maze = load_maze(default_maze_map());
    const Table maze_pi(maze.n_states(), maze.n_actions(), 0.25);
    Rng rng2(38);
    const Table maze_q =
        harness::random_table(rng2, maze.n_states(), maze.n_actions(), -1.0, 1.0);
    REQUIRE(lookahead_recursion_check(maze, maze_pi, maze_q, 16));
}

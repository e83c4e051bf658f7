#include <catch2/catch_amalgamated.hpp>

#include "accelpo/bellman.hpp"
#include "accelpo/checks.hpp"
#include "accelpo/mdp.hpp"

#include <deque>
#include <set>

using namespace accelpo;
using Catch::Approx;

namespace {

TabularMdp one_state_mdp(int n_actions, const std::vector<double>& rewards, double discount) {
    std::vector<double> transitions(n_actions, 1.0);
    Table r(1, n_actions);
    for (int a = 0; a < n_actions; ++a) r(0, a) = rewards[a];
    return TabularMdp(1, n_actions, std::move(transitions), std::move(r), discount, {1.0});
}

Table uniform_policy(const TabularMdp& mdp) {
    return Table(mdp.n_states(), mdp.n_actions(), 1.0 / mdp.n_actions());
}

/// Independent oracle: grid BFS distance from 'S' to 'G' over free cells.
int bfs_shortest_path(const std::string& map) {
    const MazeSpec spec = parse_maze(map);
    const int rows = static_cast<int>(spec.grid.size());
    const int cols = static_cast<int>(spec.grid.front().size());
    std::vector<int> dist(static_cast<size_t>(rows) * cols, -1);
    std::deque<std::pair<int, int>> q{{spec.start_row, spec.start_col}};
    dist[static_cast<size_t>(spec.start_row) * cols + spec.start_col] = 0;
    const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
    while (!q.empty()) {
        auto [r, c] = q.front();
        q.pop_front();
        for (int k = 0; k < 4; ++k) {
            const int r2 = r + dr[k], c2 = c + dc[k];
            if (r2 < 0 || r2 >= rows || c2 < 0 || c2 >= cols) continue;
            if (spec.grid[r2][c2] == '#') continue;
            auto& d = dist[static_cast<size_t>(r2) * cols + c2];
            if (d < 0) {
                d = dist[static_cast<size_t>(r) * cols + c] + 1;
                q.push_back({r2, c2});
            }
        }
    }
    return dist[static_cast<size_t>(spec.goal_row) * cols + spec.goal_col];
}

}  // namespace

TEST_CASE("default maze has 48 states and the benchmark discount") {
    const TabularMdp mdp = load_maze(default_maze_map());
    REQUIRE(mdp.n_states() == 48);
    REQUIRE(mdp.n_actions() == 4);
    REQUIRE(mdp.discount() == Approx(0.99));
    // Point mass on the start cell.
    int support = 0;
    for (double p : mdp.initial_dist())
        if (p > 0) ++support;
    REQUIRE(support == 1);
}

TEST_CASE("smallest legal maze: SG") {
    const TabularMdp mdp = load_maze("SG");
    REQUIRE(mdp.n_states() == 2);
    // Action order is up, down, left, right; moving right from S enters the
    // goal: reward 1, restart at S.
    const int right = 3;
    REQUIRE(mdp.reward(0, right) == 1.0);
    REQUIRE(mdp.transition(0, right, 0) == 1.0);
    REQUIRE(mdp.episode_end(0, right));
    // Bumps leave the agent in place with no reward.
    REQUIRE(mdp.reward(0, 0) == 0.0);
    REQUIRE(mdp.transition(0, 0, 0) == 1.0);
}

TEST_CASE("malformed mazes are rejected") {
    REQUIRE_THROWS_AS(load_maze("S#G"), std::invalid_argument);      // unreachable goal
    REQUIRE_THROWS_AS(load_maze("SG\nG."), std::invalid_argument);   // duplicate goal
    REQUIRE_THROWS_AS(load_maze("..\n.."), std::invalid_argument);   // no S/G
    REQUIRE_THROWS_AS(load_maze("SG.\n.."), std::invalid_argument);  // ragged rows
    REQUIRE_THROWS_AS(load_maze("SxG"), std::invalid_argument);      // bad character
    REQUIRE_THROWS_AS(load_maze("SG#."), std::invalid_argument);     // stranded free cell
}

TEST_CASE("exact_q solves the one-state geometric series") {
    const TabularMdp mdp = one_state_mdp(1, {1.0}, 0.9);
    const Table q = exact_q(mdp, uniform_policy(mdp));
    REQUIRE(q(0, 0) == Approx(10.0).epsilon(1e-12));
}

TEST_CASE("exact_q matches the iterated evaluation operator") {
    Rng rng(71);
    for (int rep = 0; rep < 5; ++rep) {
        const TabularMdp mdp = harness::random_mdp(rng, 5, 3, 0.9);
        const Table pi = harness::random_policy_table(rng, 5, 3);
        Table q(5, 3, 0.0);
        for (int i = 0; i < 10'000; ++i) q = t_pi(mdp, pi, q);
        REQUIRE(sup_dist(q, exact_q(mdp, pi)) <= 1e-8);
    }
}

TEST_CASE("uniform-policy value of the maze start is positive and bounded") {
    const TabularMdp mdp = load_maze(default_maze_map());
    const double j = performance(mdp, uniform_policy(mdp));
    REQUIRE(j > 0.0);
    REQUIRE(j < 1.0 / (1.0 - mdp.discount()));
}

TEST_CASE("value_iteration solves the two-armed one-state MDP in closed form") {
    const TabularMdp mdp = one_state_mdp(2, {0.0, 1.0}, 0.5);
    const ValueIterationResult vi = value_iteration(mdp, 1e-12);
    REQUIRE(vi.q_star(0, 0) == Approx(1.0).margin(1e-10));
    REQUIRE(vi.q_star(0, 1) == Approx(2.0).margin(1e-10));
    REQUIRE(vi.pi_star(0, 1) == 1.0);
}

TEST_CASE("value_iteration's greedy policy follows a shortest maze path") {
    const TabularMdp mdp = load_maze(default_maze_map());
    const ValueIterationResult vi = value_iteration(mdp, 1e-10);
    const int bfs = bfs_shortest_path(default_maze_map());
    REQUIRE(bfs > 0);
    REQUIRE(greedy_path_length(mdp, vi.pi_star) == bfs);
}

TEST_CASE("greedy policy is stable under tolerance refinement") {
    const TabularMdp mdp = load_maze(default_maze_map());
    const ValueIterationResult coarse = value_iteration(mdp, 1e-6);
    const ValueIterationResult fine = value_iteration(mdp, 1e-12);
    REQUIRE(coarse.pi_star == fine.pi_star);
}

TEST_CASE("visitation of a single state is a point mass") {
    const TabularMdp mdp = one_state_mdp(1, {0.5}, 0.9);
    const auto d = visitation(mdp, uniform_policy(mdp));
    REQUIRE(d.size() == 1);
    REQUIRE(d[0] == Approx(1.0).margin(1e-12));
}

TEST_CASE("visitation of the alternating two-state chain is (2/3, 1/3)") {
    // S -> G -> S deterministically, gamma = 1/2, start at S.
    // Geometric series oracle: d(S) = (1-g) (1 + g^2 + g^4 + ...) = 1/(1+g).
    std::vector<double> transitions = {0.0, 1.0, 1.0, 0.0};  // [s][a=0][s']
    Table rewards(2, 1, 0.0);
    const TabularMdp mdp(2, 1, std::move(transitions), std::move(rewards), 0.5, {1.0, 0.0});
    const auto d = visitation(mdp, uniform_policy(mdp));
    REQUIRE(d[0] == Approx(2.0 / 3.0).margin(1e-12));
    REQUIRE(d[1] == Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("visitation matches a discounted-horizon sampling oracle") {
    const TabularMdp mdp = load_maze(default_maze_map());
    const Table pi = uniform_policy(mdp);
    const auto d = visitation(mdp, pi);

    // Sample S_T with T geometric(1-g): each step stops with probability 1-g.
    Rng rng(2024);
    std::vector<double> counts(mdp.n_states(), 0.0);
    const int draws = 100'000;
    for (int k = 0; k < draws; ++k) {
        int s = rng.categorical(mdp.initial_dist());
        while (rng.uniform() < mdp.discount()) {
            const int a = rng.categorical(pi.row(s));
            s = rng.categorical(mdp.next_dist(s, a));
        }
        counts[s] += 1.0;
    }
    double tv = 0.0;
    for (int s = 0; s < mdp.n_states(); ++s)
        tv += std::abs(counts[s] / draws - d[s]);
    tv *= 0.5;
    REQUIRE(tv <= 1e-2);
}

TEST_CASE("performance of the one-state unit-reward MDP is 10") {
    const TabularMdp mdp = one_state_mdp(1, {1.0}, 0.9);
    REQUIRE(performance(mdp, uniform_policy(mdp)) == Approx(10.0).epsilon(1e-12));
}

TEST_CASE("optimal maze performance matches the cycle closed form") {
    const TabularMdp mdp = load_maze(default_maze_map());
    const ValueIterationResult vi = value_iteration(mdp, 1e-10);
    const int len = bfs_shortest_path(default_maze_map());
    const double g = mdp.discount();
    // Goal entry every `len` steps: J = g^(len-1) / (1 - g^len).
    const double closed = std::pow(g, len - 1) / (1.0 - std::pow(g, len));
    REQUIRE(vi.j_star == Approx(closed).epsilon(1e-9));
}

TEST_CASE("no policy beats the value-iteration optimum") {
    const TabularMdp mdp = load_maze(default_maze_map());
    const ValueIterationResult vi = value_iteration(mdp, 1e-10);
    Rng rng(5);
    for (int k = 0; k < 20; ++k) {
        const Table pi = harness::random_policy_table(rng, mdp.n_states(), mdp.n_actions());
        REQUIRE(performance(mdp, pi) <= vi.j_star + 1e-9);
    }
}

TEST_CASE("rollouts under deterministic dynamics are fully determined") {
    const TabularMdp mdp = load_maze("SG");
    Table pi(2, 4, 0.0);
    pi(0, 3) = 1.0;  // always right
    pi(1, 3) = 1.0;
    Rng rng(9);
    const Rollout r = sample_rollout(mdp, pi, 4, rng);
    for (const Transition& tr : r.transitions) {
        REQUIRE(tr.state == 0);
        REQUIRE(tr.action == 3);
        REQUIRE(tr.reward == 1.0);
        REQUIRE(tr.next_state == 0);
    }
}

TEST_CASE("rollouts are reproducible under a fixed seed") {
    const TabularMdp mdp = load_maze(default_maze_map());
    const Table pi = uniform_policy(mdp);
    Rng a(42), b(42);
    const Rollout ra = sample_rollout(mdp, pi, 64, a);
    const Rollout rb = sample_rollout(mdp, pi, 64, b);
    REQUIRE(ra.size() == rb.size());
    for (size_t i = 0; i < ra.size(); ++i) {
        REQUIRE(ra.transitions[i].state == rb.transitions[i].state);
        REQUIRE(ra.transitions[i].action == rb.transitions[i].action);
        REQUIRE(ra.transitions[i].next_state == rb.transitions[i].next_state);
    }
}

TEST_CASE("long uniform rollouts visit actions at the uniform rate") {
    const TabularMdp mdp = load_maze(default_maze_map());
    const Table pi = uniform_policy(mdp);
    Rng rng(7);
    const Rollout r = sample_rollout(mdp, pi, 100'000, rng);
    std::vector<std::vector<long>> counts(mdp.n_states(), std::vector<long>(4, 0));
    std::vector<long> visits(mdp.n_states(), 0);
    for (const Transition& tr : r.transitions) {
        ++counts[tr.state][tr.action];
        ++visits[tr.state];
    }
    for (int s = 0; s < mdp.n_states(); ++s) {
        if (visits[s] < 1000) continue;
        for (int a = 0; a < 4; ++a) {
            const double freq = static_cast<double>(counts[s][a]) / visits[s];
            REQUIRE(std::abs(freq - 0.25) <= 1e-2 + 3.0 / std::sqrt(double(visits[s])));
        }
    }
}

TEST_CASE("construction rejects bad tensors") {
    REQUIRE_THROWS_AS(one_state_mdp(1, {1.0}, 1.0), std::invalid_argument);
    // Transition row that does not sum to one.
    std::vector<double> bad = {0.5};
    Table r(1, 1, 0.0);
    REQUIRE_THROWS_AS(TabularMdp(1, 1, bad, r, 0.9, {1.0}), std::invalid_argument);
    // Negative reward.
    Table neg(1, 1, -0.5);
    REQUIRE_THROWS_AS(TabularMdp(1, 1, {1.0}, neg, 0.9, {1.0}), std::invalid_argument);
}

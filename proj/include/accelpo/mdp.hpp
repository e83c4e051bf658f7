#pragma once

#include "accelpo/core.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <sstream>
#include <string>
#include <vector>

namespace accelpo {

/// Finite discounted MDP with dense transition tensor P[s][a][s'],
/// reward table r[s][a], discount in [0,1) and an initial state distribution.
///
/// Instances are immutable after construction and validate their own
/// invariants: transition rows are distributions, rewards are finite and
/// non-negative, the initial distribution sums to one.
class TabularMdp {
public:
    TabularMdp(int n_states, int n_actions, std::vector<double> transitions, Table rewards,
               double discount, std::vector<double> initial_dist,
               std::vector<std::uint8_t> episode_end = {})
        : n_states_(n_states), n_actions_(n_actions), transitions_(std::move(transitions)),
          rewards_(std::move(rewards)), discount_(discount),
          initial_dist_(std::move(initial_dist)), episode_end_(std::move(episode_end)) {
        if (n_states_ <= 0 || n_actions_ <= 0)
            throw std::invalid_argument("TabularMdp: state and action counts must be positive");
        if (!(discount_ >= 0.0 && discount_ < 1.0))
            throw std::invalid_argument("TabularMdp: discount must lie in [0, 1)");
        if (transitions_.size() != tensor_size())
            throw std::invalid_argument("TabularMdp: transition tensor has wrong size");
        if (rewards_.rows() != n_states_ || rewards_.cols() != n_actions_)
            throw std::invalid_argument("TabularMdp: reward table has wrong shape");
        if (static_cast<int>(initial_dist_.size()) != n_states_)
            throw std::invalid_argument("TabularMdp: initial distribution has wrong size");
        if (!episode_end_.empty() &&
            episode_end_.size() != static_cast<size_t>(n_states_) * n_actions_)
            throw std::invalid_argument("TabularMdp: episode mask has wrong size");

        for (int s = 0; s < n_states_; ++s) {
            for (int a = 0; a < n_actions_; ++a) {
                double sum = 0.0;
                for (int s2 = 0; s2 < n_states_; ++s2) {
                    const double p = transition(s, a, s2);
                    if (!(p >= 0.0))
                        throw std::invalid_argument("TabularMdp: negative transition probability");
                    sum += p;
                }
                if (std::abs(sum - 1.0) > 1e-12)
                    throw std::invalid_argument("TabularMdp: transition row does not sum to 1");
                const double r = rewards_(s, a);
                if (!std::isfinite(r) || r < 0.0)
                    throw std::invalid_argument("TabularMdp: rewards must be finite and >= 0");
            }
        }
        double rho_sum = 0.0;
        for (double p : initial_dist_) {
            if (!(p >= 0.0))
                throw std::invalid_argument("TabularMdp: negative initial probability");
            rho_sum += p;
        }
        if (std::abs(rho_sum - 1.0) > 1e-12)
            throw std::invalid_argument("TabularMdp: initial distribution does not sum to 1");
    }

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    double discount() const { return discount_; }

    double transition(int s, int a, int s2) const {
        return transitions_[(static_cast<size_t>(s) * n_actions_ + a) * n_states_ + s2];
    }
    std::span<const double> next_dist(int s, int a) const {
        return {transitions_.data() + (static_cast<size_t>(s) * n_actions_ + a) * n_states_,
                static_cast<size_t>(n_states_)};
    }
    double reward(int s, int a) const { return rewards_(s, a); }
    const Table& rewards() const { return rewards_; }
    const std::vector<double>& initial_dist() const { return initial_dist_; }

    double r_max() const {
        double m = 0.0;
        for (double r : rewards_.data()) m = std::max(m, r);
        return m;
    }

    /// True when taking action `a` in state `s` completes an episode
    /// (for mazes: the move enters the goal and restarts from the start cell).
    bool episode_end(int s, int a) const {
        if (episode_end_.empty()) return false;
        return episode_end_[static_cast<size_t>(s) * n_actions_ + a] != 0;
    }
    bool has_episode_marks() const { return !episode_end_.empty(); }

private:
    size_t tensor_size() const {
        return static_cast<size_t>(n_states_) * n_actions_ * n_states_;
    }

    int n_states_;
    int n_actions_;
    std::vector<double> transitions_;
    Table rewards_;
    double discount_;
    std::vector<double> initial_dist_;
    std::vector<std::uint8_t> episode_end_;
};

namespace detail {

inline void check_policy_shape(const TabularMdp& mdp, const Table& policy, const char* where) {
    if (policy.rows() != mdp.n_states() || policy.cols() != mdp.n_actions())
        throw std::invalid_argument(std::string(where) + ": policy has wrong shape");
    for (int s = 0; s < policy.rows(); ++s) {
        double sum = 0.0;
        for (int a = 0; a < policy.cols(); ++a) {
            if (!(policy(s, a) >= 0.0))
                throw std::invalid_argument(std::string(where) + ": negative action probability");
            sum += policy(s, a);
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument(std::string(where) + ": policy row does not sum to 1");
    }
}

/// State-to-state transition matrix under a fixed policy.
inline Eigen::MatrixXd policy_transition_matrix(const TabularMdp& mdp, const Table& policy) {
    const int n = mdp.n_states();
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < mdp.n_actions(); ++a) {
            const double w = policy(s, a);
            if (w == 0.0) continue;
            const auto next = mdp.next_dist(s, a);
            for (int s2 = 0; s2 < n; ++s2) p(s, s2) += w * next[s2];
        }
    return p;
}

}  // namespace detail

/// Exact evaluation of a policy: state values, Q-table and performance in one
/// pass. V solves the |S|-dimensional linear system (I - g P_pi) V = r_pi by
/// dense LU; Q and J follow by one backup.
struct PolicyEvaluation {
    std::vector<double> v;
    Table q;
    double j = 0.0;
};

inline PolicyEvaluation evaluate_policy(const TabularMdp& mdp, const Table& policy) {
    detail::check_policy_shape(mdp, policy, "evaluate_policy");
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    const double g = mdp.discount();

    Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(n, n) -
                          g * detail::policy_transition_matrix(mdp, policy);
    Eigen::VectorXd r_pi(n);
    for (int s = 0; s < n; ++s) {
        double r = 0.0;
        for (int a = 0; a < m; ++a) r += policy(s, a) * mdp.reward(s, a);
        r_pi(s) = r;
    }
    Eigen::VectorXd v = sys.partialPivLu().solve(r_pi);
    if (!v.allFinite())
        throw std::runtime_error("evaluate_policy: linear solve failed");

    PolicyEvaluation out;
    out.v.assign(v.data(), v.data() + n);
    out.q = Table(n, m);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < m; ++a) {
            double backup = 0.0;
            const auto next = mdp.next_dist(s, a);
            for (int s2 = 0; s2 < n; ++s2) backup += next[s2] * out.v[s2];
            out.q(s, a) = mdp.reward(s, a) + g * backup;
        }
    out.j = 0.0;
    for (int s = 0; s < n; ++s) out.j += mdp.initial_dist()[s] * out.v[s];
    return out;
}

/// Q_pi as the fixed point of the evaluation operator, via the exact solve.
inline Table exact_q(const TabularMdp& mdp, const Table& policy) {
    return evaluate_policy(mdp, policy).q;
}

/// J(pi) = E_{S~rho}[V_pi(S)], unnormalized.
inline double performance(const TabularMdp& mdp, const Table& policy) {
    return evaluate_policy(mdp, policy).j;
}

/// Discounted visitation distribution d_pi = (1-g) rho^T (I - g P_pi)^{-1}.
inline std::vector<double> visitation(const TabularMdp& mdp, const Table& policy) {
    detail::check_policy_shape(mdp, policy, "visitation");
    const int n = mdp.n_states();
    const double g = mdp.discount();
    Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(n, n) -
                          g * detail::policy_transition_matrix(mdp, policy).transpose();
    Eigen::VectorXd rho(n);
    for (int s = 0; s < n; ++s) rho(s) = (1.0 - g) * mdp.initial_dist()[s];
    Eigen::VectorXd d = sys.partialPivLu().solve(rho);
    std::vector<double> out(d.data(), d.data() + n);
    for (double& x : out)
        if (x < 0.0 && x > -1e-12) x = 0.0;  // clamp solver roundoff
    return out;
}

struct ValueIterationResult {
    Table q_star;
    Table pi_star;  // greedy one-hot rows, ties to the lowest action index
    double j_star = 0.0;
    long iterations = 0;
};

/// Value iteration on Q-tables until the optimality-operator residual falls
/// below `tol` in sup norm.
inline ValueIterationResult value_iteration(const TabularMdp& mdp, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    const double g = mdp.discount();

    Table q(n, m, 0.0);
    Table next(n, m, 0.0);
    long iter = 0;
    const long max_iter = 10'000'000;
    while (true) {
        ++iter;
        std::vector<double> vmax(n);
        for (int s = 0; s < n; ++s) {
            double best = q(s, 0);
            for (int a = 1; a < m; ++a) best = std::max(best, q(s, a));
            vmax[s] = best;
        }
        for (int s = 0; s < n; ++s)
            for (int a = 0; a < m; ++a) {
                double backup = 0.0;
                const auto nd = mdp.next_dist(s, a);
                for (int s2 = 0; s2 < n; ++s2) backup += nd[s2] * vmax[s2];
                next(s, a) = mdp.reward(s, a) + g * backup;
            }
        const double resid = sup_dist(next, q);
        std::swap(q, next);
        if (resid <= tol || iter >= max_iter) break;
    }

    ValueIterationResult out;
    out.q_star = q;
    out.pi_star = Table(n, m, 0.0);
    for (int s = 0; s < n; ++s) {
        int best = 0;
        for (int a = 1; a < m; ++a)
            if (q(s, a) > q(s, best)) best = a;
        out.pi_star(s, best) = 1.0;
    }
    out.j_star = performance(mdp, out.pi_star);
    out.iterations = iter;
    return out;
}

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

struct Transition {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
};

/// Ordered environment transitions (S_i, A_i, R_i, S_{i+1}).
/// Rollouts run straight through episode restarts; a restart is just another
/// transition of the continuing MDP.
struct Rollout {
    std::vector<Transition> transitions;

    size_t size() const { return transitions.size(); }
    int last_state() const { return transitions.back().next_state; }
};

/// Sample an n-step rollout. Actions and next states are drawn by inverse-CDF
/// over ascending indices. When `start_state` is negative the start is drawn
/// from the initial distribution.
inline Rollout sample_rollout(const TabularMdp& mdp, const Table& policy, int n, Rng& rng,
                              int start_state = -1) {
    if (n < 1) throw std::invalid_argument("sample_rollout: n must be >= 1");
    detail::check_policy_shape(mdp, policy, "sample_rollout");
    int s = start_state >= 0 ? start_state : rng.categorical(mdp.initial_dist());
    if (s >= mdp.n_states()) throw std::invalid_argument("sample_rollout: bad start state");

    Rollout out;
    out.transitions.reserve(n);
    for (int i = 0; i < n; ++i) {
        const int a = rng.categorical(policy.row(s));
        const int s2 = rng.categorical(mdp.next_dist(s, a));
        out.transitions.push_back({s, a, mdp.reward(s, a), s2});
        s = s2;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Maze construction
// ---------------------------------------------------------------------------

/// Parsed ASCII maze: rectangular grid of {'.', '#', 'S', 'G'} with one start
/// and one goal, every free cell reachable from the start.
struct MazeSpec {
    std::vector<std::string> grid;
    int start_row = 0, start_col = 0;
    int goal_row = 0, goal_col = 0;
    int n_free = 0;
};

inline MazeSpec parse_maze(const std::string& ascii_map) {
    MazeSpec spec;
    std::istringstream in(ascii_map);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        spec.grid.push_back(line);
    }
    if (spec.grid.empty()) throw std::invalid_argument("maze: empty map");

    const size_t cols = spec.grid.front().size();
    int n_start = 0, n_goal = 0;
    for (size_t r = 0; r < spec.grid.size(); ++r) {
        if (spec.grid[r].size() != cols)
            throw std::invalid_argument("maze: map is not rectangular");
        for (size_t c = 0; c < cols; ++c) {
            const char ch = spec.grid[r][c];
            switch (ch) {
            case '.': case '#': break;
            case 'S':
                ++n_start; spec.start_row = static_cast<int>(r);
                spec.start_col = static_cast<int>(c);
                break;
            case 'G':
                ++n_goal; spec.goal_row = static_cast<int>(r);
                spec.goal_col = static_cast<int>(c);
                break;
            default:
                throw std::invalid_argument(std::string("maze: invalid character '") + ch + "'");
            }
            if (ch != '#') ++spec.n_free;
        }
    }
    if (n_start != 1) throw std::invalid_argument("maze: map must contain exactly one 'S'");
    if (n_goal != 1) throw std::invalid_argument("maze: map must contain exactly one 'G'");
    return spec;
}

/// Build the continuing maze MDP. Moves are deterministic in the order
/// up, down, left, right; bumping a wall or the border leaves the agent in
/// place; a move that enters 'G' earns reward 1 and restarts at 'S'.
inline TabularMdp load_maze(const std::string& ascii_map, double discount = 0.99) {
    const MazeSpec spec = parse_maze(ascii_map);
    const int n_rows = static_cast<int>(spec.grid.size());
    const int n_cols = static_cast<int>(spec.grid.front().size());

    // Dense cell -> state numbering over free cells, row major.
    std::vector<int> state_of(static_cast<size_t>(n_rows) * n_cols, -1);
    int n_states = 0;
    for (int r = 0; r < n_rows; ++r)
        for (int c = 0; c < n_cols; ++c)
            if (spec.grid[r][c] != '#') state_of[static_cast<size_t>(r) * n_cols + c] = n_states++;

    const int start = state_of[static_cast<size_t>(spec.start_row) * n_cols + spec.start_col];
    const int goal = state_of[static_cast<size_t>(spec.goal_row) * n_cols + spec.goal_col];

    // Reachability sweep from the start over grid moves.
    std::vector<char> seen(n_states, 0);
    std::deque<std::pair<int, int>> frontier{{spec.start_row, spec.start_col}};
    seen[start] = 1;
    const int dr[4] = {-1, 1, 0, 0};
    const int dc[4] = {0, 0, -1, 1};  // up, down, left, right
    while (!frontier.empty()) {
        auto [r, c] = frontier.front();
        frontier.pop_front();
        for (int k = 0; k < 4; ++k) {
            const int r2 = r + dr[k], c2 = c + dc[k];
            if (r2 < 0 || r2 >= n_rows || c2 < 0 || c2 >= n_cols) continue;
            if (spec.grid[r2][c2] == '#') continue;
            const int s2 = state_of[static_cast<size_t>(r2) * n_cols + c2];
            if (!seen[s2]) {
                seen[s2] = 1;
                frontier.push_back({r2, c2});
            }
        }
    }
    for (int s = 0; s < n_states; ++s)
        if (!seen[s])
            throw std::invalid_argument("maze: not all free cells are reachable from 'S'");

    const int n_actions = 4;
    std::vector<double> transitions(
        static_cast<size_t>(n_states) * n_actions * n_states, 0.0);
    Table rewards(n_states, n_actions, 0.0);
    std::vector<std::uint8_t> episode_end(static_cast<size_t>(n_states) * n_actions, 0);

    for (int r = 0; r < n_rows; ++r) {
        for (int c = 0; c < n_cols; ++c) {
            if (spec.grid[r][c] == '#') continue;
            const int s = state_of[static_cast<size_t>(r) * n_cols + c];
            for (int a = 0; a < n_actions; ++a) {
                int r2 = r + dr[a], c2 = c + dc[a];
                if (r2 < 0 || r2 >= n_rows || c2 < 0 || c2 >= n_cols ||
                    spec.grid[r2][c2] == '#') {
                    r2 = r; c2 = c;  // bump
                }
                int s2 = state_of[static_cast<size_t>(r2) * n_cols + c2];
                if (s2 == goal) {
                    rewards(s, a) = 1.0;
                    episode_end[static_cast<size_t>(s) * n_actions + a] = 1;
                    s2 = start;  // terminal-then-restart, kept continuing
                }
                transitions[(static_cast<size_t>(s) * n_actions + a) * n_states + s2] = 1.0;
            }
        }
    }

    std::vector<double> rho(n_states, 0.0);
    rho[start] = 1.0;
    return TabularMdp(n_states, n_actions, std::move(transitions), std::move(rewards), discount,
                      std::move(rho), std::move(episode_end));
}

/// The benchmark map: 6x9 grid with 6 walls, 48 free cells. The two wall
/// columns funnel traffic through one corridor family (shortest path 14).
inline const char* default_maze_map() {
    return ".......#G\n"
           "..#....#.\n"
           "S.#....#.\n"
           "..#......\n"
           ".........\n"
           ".........\n";
}

/// Steps a deterministic policy needs from the start to the first episode
/// end. Returns -1 if no episode completes within |S| * |A| steps.
inline int greedy_path_length(const TabularMdp& mdp, const Table& policy) {
    int s = 0;
    {
        double best = -1.0;
        for (int i = 0; i < mdp.n_states(); ++i)
            if (mdp.initial_dist()[i] > best) { best = mdp.initial_dist()[i]; s = i; }
    }
    const int limit = mdp.n_states() * mdp.n_actions();
    for (int t = 1; t <= limit; ++t) {
        int a = 0;
        for (int b = 1; b < mdp.n_actions(); ++b)
            if (policy(s, b) > policy(s, a)) a = b;
        const bool done = mdp.episode_end(s, a);
        int s2 = 0;
        double best = -1.0;
        const auto nd = mdp.next_dist(s, a);
        for (int i = 0; i < mdp.n_states(); ++i)
            if (nd[i] > best) { best = nd[i]; s2 = i; }
        if (done) return t;
        s = s2;
    }
    return -1;
}

}  // namespace accelpo

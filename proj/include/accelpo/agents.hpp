#pragma once

#include "accelpo/bellman.hpp"
#include "accelpo/core.hpp"
#include "accelpo/mdp.hpp"
#include "accelpo/optim.hpp"
#include "accelpo/policy.hpp"

#include <deque>
#include <functional>
#include <string>
#include <utility>

namespace accelpo {

enum class Algorithm { pg, ac, fws, opg_expert, opg_pred };
enum class TargetKind { parametric, geometric };
enum class MetaOptimizer { sgd, adam };

inline const char* to_string(Algorithm a) {
    switch (a) {
    case Algorithm::pg: return "pg";
    case Algorithm::ac: return "ac";
    case Algorithm::fws: return "fws";
    case Algorithm::opg_expert: return "opg_expert";
    case Algorithm::opg_pred: return "opg_pred";
    }
    return "?";
}

/// Full experiment configuration. Field defaults mirror the benchmark's
/// standard settings; per-algorithm validation happens in validate().
struct RunConfig {
    Algorithm algorithm = Algorithm::pg;
    double policy_step = 0.5;    // xi
    double critic_step = 0.1;    // zeta
    double meta_step = 0.05;     // nu
    double target_step = 1.0;    // alpha
    int horizon = 1;             // h: lookahead depth / target unroll / meta period
    int rollout_len = 2;         // n
    long episodes = 500;
    std::uint64_t seed = 0;
    SearchMode search_mode = SearchMode::eval;
    TargetKind target_kind = TargetKind::geometric;
    MetaOptimizer meta_optimizer = MetaOptimizer::adam;
    bool recompute_target = false;
    std::string map;  // empty -> builtin benchmark maze

    void validate() const {
        if (!(policy_step > 0.0)) throw std::invalid_argument("config: xi must be > 0");
        if (rollout_len < 1) throw std::invalid_argument("config: n must be >= 1");
        if (episodes < 1) throw std::invalid_argument("config: episodes must be >= 1");
        const bool uses_critic = algorithm == Algorithm::ac || algorithm == Algorithm::fws ||
                                 algorithm == Algorithm::opg_pred;
        if (uses_critic && !(critic_step >= 0.0))
            throw std::invalid_argument("config: zeta must be >= 0");
        if (algorithm == Algorithm::fws && horizon < 0)
            throw std::invalid_argument("config: lookahead horizon must be >= 0");
        if (algorithm == Algorithm::opg_expert || algorithm == Algorithm::opg_pred) {
            if (horizon < 1) throw std::invalid_argument("config: target depth must be >= 1");
            if (!(meta_step > 0.0)) throw std::invalid_argument("config: nu must be > 0");
            if (target_kind == TargetKind::geometric && !(target_step > 0.0))
                throw std::invalid_argument("config: alpha must be > 0");
        }
    }
};

struct RegretRecord {
    long step = 0;
    long episode = 0;
    double regret = 0.0;
    double cum_regret = 0.0;
};

/// Per-step and per-episode regret records of one run.
struct RegretTrace {
    std::string algorithm;
    std::uint64_t seed = 0;
    std::vector<RegretRecord> steps;     // may be empty in summary-only runs
    std::vector<RegretRecord> episodes;  // one record per completed episode
    long n_steps = 0;
    double total_regret = 0.0;  // sum of per-step regret over the whole run

    double final_regret() const {
        return episodes.empty() ? 0.0 : episodes.back().regret;
    }
};

/// FIFO buffer of the most recent rollouts, capacity = target depth h.
class MetaBuffer {
public:
    explicit MetaBuffer(size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0) throw std::invalid_argument("MetaBuffer: capacity must be >= 1");
    }
    void push(Rollout r) {
        items_.push_back(std::move(r));
        if (items_.size() > capacity_) items_.pop_front();
    }
    bool full() const { return items_.size() == capacity_; }
    size_t size() const { return items_.size(); }
    const std::deque<Rollout>& rollouts() const { return items_; }
    size_t total_transitions() const {
        size_t n = 0;
        for (const auto& r : items_) n += r.size();
        return n;
    }

private:
    size_t capacity_;
    std::deque<Rollout> items_;
};

/// Q-table-shaped meta-parameters plus the optimizer memory that adapts them.
struct MetaLearner {
    Table eta;
    AdamState adam;
};

// ---------------------------------------------------------------------------
// Meta-gradient machinery
// ---------------------------------------------------------------------------

/// Policy target ahead of the learner. Geometric targets take one
/// mirror-ascent step from theta_next with the supplied Q; parametric targets
/// take h sampled gradient steps, replaying the buffered rollouts in order.
inline TabularPolicy make_target(TargetKind kind, const Table& theta_next, const Table& q_target,
                                 double alpha, double xi, int h, const MetaBuffer& batch) {
    if (kind == TargetKind::geometric) {
        if (!(alpha > 0.0)) throw std::invalid_argument("make_target: alpha must be > 0");
        return mirror_step(TabularPolicy(theta_next), q_target, alpha);
    }
    if (h < 1) throw std::invalid_argument("make_target: parametric target needs h >= 1");
    if (batch.size() == 0) throw std::invalid_argument("make_target: empty batch");
    Table theta = theta_next;
    for (int j = 0; j < h; ++j) {
        const Rollout& b = batch.rollouts()[j % batch.size()];
        TabularPolicy pi(theta);
        const Table g = sampled_policy_gradient(b, pi, q_target);
        theta = sgd_step(theta, g, xi);
    }
    return TabularPolicy(std::move(theta));
}

/// Gradient w.r.t. the meta-parameters eta of the one-step unrolled loss
///   eta -> theta' = theta + xi * u_eta(last rollout)
///       -> mean over batch states of KL(pi_{theta'}(S), target(S)),
/// with the target held constant. u_eta is the sampled score-function update
/// built from U_eta, so the map is linear in eta and the chain rule closes in
/// one pass. Throws on infinite KL (target missing support).
inline Table meta_gradient(const Table& eta, const Table& theta, double xi,
                           const Table& target_probs, const MetaBuffer& batch) {
    check_same_shape(eta, theta, "meta_gradient");
    check_same_shape(eta, target_probs, "meta_gradient");
    if (batch.size() == 0) throw std::invalid_argument("meta_gradient: empty batch");

    const TabularPolicy pi_t{Table(theta)};
    const Rollout& last = batch.rollouts().back();
    const Table u = sampled_policy_gradient(last, pi_t, eta);
    const TabularPolicy pi_next(axpy(theta, xi, u));

    // dLoss/d(theta') accumulated over every batch state sample.
    const double inv_count = 1.0 / static_cast<double>(batch.total_transitions());
    Table dtheta(theta.rows(), theta.cols(), 0.0);
    for (const Rollout& r : batch.rollouts()) {
        for (const Transition& tr : r.transitions) {
            const int s = tr.state;
            const double kl = kl_row(pi_next.probs.row(s), target_probs.row(s));
            if (!std::isfinite(kl))
                throw std::domain_error(
                    "meta_gradient: target assigns zero probability on the learner's "
                    "support (infinite KL)");
            for (int b = 0; b < theta.cols(); ++b) {
                const double p = pi_next.probs(s, b);
                const double log_ratio = std::log(p) - std::log(target_probs(s, b));
                dtheta(s, b) += inv_count * p * (log_ratio - kl);
            }
        }
    }

    // Chain through the score-function update of the last rollout.
    Table g(theta.rows(), theta.cols(), 0.0);
    const double scale = xi / static_cast<double>(last.size());
    for (const Transition& tr : last.transitions) {
        const int s = tr.state;
        double f_mean = 0.0;
        for (int b = 0; b < theta.cols(); ++b) f_mean += pi_t.probs(s, b) * dtheta(s, b);
        const double inner = dtheta(s, tr.action) - f_mean;
        for (int a = 0; a < theta.cols(); ++a) {
            const double score = (a == tr.action ? 1.0 : 0.0) - pi_t.probs(s, a);
            g(s, a) += scale * score * inner;
        }
    }
    return g;
}

/// The scalar loss meta_gradient differentiates: mean KL between the
/// post-update policy and the target over the batch states. May return
/// +infinity on support violations.
inline double meta_loss(const Table& eta, const Table& theta, double xi,
                        const Table& target_probs, const MetaBuffer& batch) {
    if (batch.size() == 0) throw std::invalid_argument("meta_loss: empty batch");
    const TabularPolicy pi_t{Table(theta)};
    const Table u = sampled_policy_gradient(batch.rollouts().back(), pi_t, eta);
    const TabularPolicy pi_next(axpy(theta, xi, u));
    double total = 0.0;
    size_t count = 0;
    for (const Rollout& r : batch.rollouts())
        for (const Transition& tr : r.transitions) {
            total += kl_row(pi_next.probs.row(tr.state), target_probs.row(tr.state));
            ++count;
        }
    return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Run engines
// ---------------------------------------------------------------------------

namespace detail {

/// Streams per-step and per-episode regret into a trace while an agent
/// interacts with the environment.
struct RunRecorder {
    RegretTrace trace;
    double j_star = 0.0;
    long episode_budget = 0;
    bool keep_steps = true;

    long step = 0;
    long episode = 0;
    double cum = 0.0;

    bool done() const { return episode >= episode_budget; }

    void record(double j_curr, bool episode_ended) {
        ++step;
        const double regret = j_star - j_curr;
        cum += regret;
        if (keep_steps) trace.steps.push_back({step, episode, regret, cum});
        if (episode_ended) {
            trace.episodes.push_back({step, episode, regret, cum});
            ++episode;
        }
    }

    void finalize() {
        trace.n_steps = step;
        trace.total_regret = cum;
    }
};

/// Steps the environment for up to `n` transitions under `policy`, recording
/// regret as it goes. Stops early when the episode budget fills mid-rollout.
/// MDPs without episode marks treat every transition as one episode.
inline Rollout step_and_record(const TabularMdp& mdp, const Table& policy, int n, Rng& rng,
                               int& state, double j_curr, RunRecorder& rec) {
    Rollout out;
    out.transitions.reserve(n);
    for (int i = 0; i < n && !rec.done(); ++i) {
        const int a = rng.categorical(policy.row(state));
        const int s2 = rng.categorical(mdp.next_dist(state, a));
        out.transitions.push_back({state, a, mdp.reward(state, a), s2});
        const bool ended = mdp.has_episode_marks() ? mdp.episode_end(state, a) : true;
        rec.record(j_curr, ended);
        state = s2;
    }
    return out;
}

/// Expected-SARSA TD(0) batch update: every delta targets
/// R_i + g E_pi[U(S_{i+1}, .)] using the pre-update critic, then all deltas
/// apply together with step zeta / n.
inline void td_critic_update(Table& critic, const Rollout& rollout, const Table& policy,
                             const Table& u, double zeta, double gamma) {
    const double scale = zeta / static_cast<double>(rollout.size());
    std::vector<double> deltas;
    deltas.reserve(rollout.size());
    for (const Transition& tr : rollout.transitions) {
        double ev = 0.0;
        for (int a = 0; a < u.cols(); ++a) ev += policy(tr.next_state, a) * u(tr.next_state, a);
        deltas.push_back(tr.reward + gamma * ev - critic(tr.state, tr.action));
    }
    for (size_t i = 0; i < rollout.transitions.size(); ++i) {
        const Transition& tr = rollout.transitions[i];
        critic(tr.state, tr.action) += scale * deltas[i];
    }
}

/// Shared loop of the actor-critic family: the plain AC is the lookahead
/// agent at horizon zero (the search values degenerate to the critic).
inline RegretTrace run_search_ac(const TabularMdp& mdp, const RunConfig& cfg, Rng rng,
                                 int horizon, SearchMode mode, const char* name,
                                 bool keep_steps) {
    const ValueIterationResult vi = value_iteration(mdp, 1e-10);
    RunRecorder rec;
    rec.trace.algorithm = name;
    rec.trace.seed = cfg.seed;
    rec.j_star = vi.j_star;
    rec.episode_budget = cfg.episodes;
    rec.keep_steps = keep_steps;

    Table theta(mdp.n_states(), mdp.n_actions(), 0.0);
    Table critic(mdp.n_states(), mdp.n_actions(), 0.0);
    TabularPolicy pi(theta);
    double j = performance(mdp, pi.probs);
    int state = rng.categorical(mdp.initial_dist());

    while (!rec.done()) {
        const Rollout b = step_and_record(mdp, pi.probs, cfg.rollout_len, rng, state, j, rec);
        if (rec.done()) break;
        const Table u = search_values(mdp, critic, horizon, mode, pi.probs);
        const Table ghat = sampled_policy_gradient(b, pi, u);
        theta = sgd_step(theta, ghat, cfg.policy_step);
        td_critic_update(critic, b, pi.probs, u, cfg.critic_step, mdp.discount());
        pi = TabularPolicy(theta);
        j = performance(mdp, pi.probs);
    }
    rec.finalize();
    return rec.trace;
}

/// Supplies the Q-table the policy targets are built from:
/// (mdp, post-update policy probs, current critic) -> Q.
using TargetQFn = std::function<Table(const TabularMdp&, const Table&, const Table&)>;

/// Shared loop of the optimistic meta-gradient agents. `learn_critic` keeps a
/// TD critic alongside (target-prediction variant); `q_target` chooses what
/// grounds the policy targets.
inline RegretTrace run_opg_impl(const TabularMdp& mdp, const RunConfig& cfg, Rng rng,
                                bool learn_critic, const TargetQFn& q_target, const char* name,
                                bool keep_steps) {
    const ValueIterationResult vi = value_iteration(mdp, 1e-10);
    RunRecorder rec;
    rec.trace.algorithm = name;
    rec.trace.seed = cfg.seed;
    rec.j_star = vi.j_star;
    rec.episode_budget = cfg.episodes;
    rec.keep_steps = keep_steps;

    Table theta(mdp.n_states(), mdp.n_actions(), 0.0);
    Table critic(mdp.n_states(), mdp.n_actions(), 0.0);
    MetaLearner meta{Table(mdp.n_states(), mdp.n_actions(), 0.0),
                     AdamState(mdp.n_states(), mdp.n_actions(), cfg.meta_step)};
    MetaBuffer buffer(static_cast<size_t>(cfg.horizon));
    TabularPolicy pi(theta);
    double j = performance(mdp, pi.probs);
    int state = rng.categorical(mdp.initial_dist());
    long iter = 0;

    while (!rec.done()) {
        Rollout b = step_and_record(mdp, pi.probs, cfg.rollout_len, rng, state, j, rec);
        if (rec.done()) break;
        buffer.push(std::move(b));

        // Learner consumes the meta-parameters from before this meta update.
        const Table u = sampled_policy_gradient(buffer.rollouts().back(), pi, meta.eta);
        const Table theta_next = sgd_step(theta, u, cfg.policy_step);
        const TabularPolicy pi_next{Table(theta_next)};
        if (learn_critic)
            td_critic_update(critic, buffer.rollouts().back(), pi.probs, critic,
                             cfg.critic_step, mdp.discount());

        ++iter;
        if (iter % cfg.horizon == 0 && buffer.full()) {
            const Table q_tgt = q_target(mdp, pi_next.probs, critic);
            const TabularPolicy target =
                make_target(cfg.target_kind, theta_next, q_tgt, cfg.target_step,
                            cfg.policy_step, cfg.horizon, buffer);
            const Table g_meta =
                meta_gradient(meta.eta, theta, cfg.policy_step, target.probs, buffer);
            // Descent on the meta loss: feed the negated gradient to the
            // ascent-convention optimizers.
            if (cfg.meta_optimizer == MetaOptimizer::adam) {
                auto [delta, next_state] = adam_step(meta.adam, scaled(g_meta, -1.0));
                meta.adam = std::move(next_state);
                meta.eta = axpy(meta.eta, 1.0, delta);
            } else {
                meta.eta = sgd_step(meta.eta, g_meta, -cfg.meta_step);
            }
        }

        theta = theta_next;
        pi = pi_next;
        j = performance(mdp, pi.probs);
    }
    rec.finalize();
    return rec.trace;
}

}  // namespace detail

/// Standard policy gradient with the oracle critic: Q of the current policy
/// is recomputed exactly for every rollout.
inline RegretTrace run_pg(const TabularMdp& mdp, const RunConfig& cfg, Rng rng,
                          bool keep_steps = true) {
    cfg.validate();
    const ValueIterationResult vi = value_iteration(mdp, 1e-10);
    detail::RunRecorder rec;
    rec.trace.algorithm = to_string(Algorithm::pg);
    rec.trace.seed = cfg.seed;
    rec.j_star = vi.j_star;
    rec.episode_budget = cfg.episodes;
    rec.keep_steps = keep_steps;

    Table theta(mdp.n_states(), mdp.n_actions(), 0.0);
    TabularPolicy pi(theta);
    PolicyEvaluation ev = evaluate_policy(mdp, pi.probs);
    int state = rng.categorical(mdp.initial_dist());

    while (!rec.done()) {
        const Rollout b =
            detail::step_and_record(mdp, pi.probs, cfg.rollout_len, rng, state, ev.j, rec);
        if (rec.done()) break;
        const Table ghat = sampled_policy_gradient(b, pi, ev.q);
        theta = sgd_step(theta, ghat, cfg.policy_step);
        pi = TabularPolicy(theta);
        ev = evaluate_policy(mdp, pi.probs);
    }
    rec.finalize();
    return rec.trace;
}

/// Actor-critic with an expected-SARSA TD(0) critic.
inline RegretTrace run_ac(const TabularMdp& mdp, const RunConfig& cfg, Rng rng,
                          bool keep_steps = true) {
    cfg.validate();
    return detail::run_search_ac(mdp, cfg, rng, 0, SearchMode::eval,
                                 to_string(Algorithm::ac), keep_steps);
}

/// Actor-critic whose gradient critic is replaced by h-step forward-search
/// values, with the critic trained toward the search targets.
inline RegretTrace run_fws(const TabularMdp& mdp, const RunConfig& cfg, Rng rng,
                           bool keep_steps = true) {
    cfg.validate();
    return detail::run_search_ac(mdp, cfg, rng, cfg.horizon, cfg.search_mode,
                                 to_string(Algorithm::fws), keep_steps);
}

/// Optimistic policy gradients with expert targets: targets are grounded in
/// the exact Q of the post-update policy.
inline RegretTrace run_opg_expert(const TabularMdp& mdp, const RunConfig& cfg, Rng rng,
                                  bool keep_steps = true) {
    cfg.validate();
    return detail::run_opg_impl(
        mdp, cfg, rng, /*learn_critic=*/false,
        [](const TabularMdp& m, const Table& pi_next, const Table&) {
            return exact_q(m, pi_next);
        },
        to_string(Algorithm::opg_expert), keep_steps);
}

/// Optimistic policy gradients with target predictions: targets are grounded
/// in a TD critic that tracks the learner.
inline RegretTrace run_opg_pred(const TabularMdp& mdp, const RunConfig& cfg, Rng rng,
                                bool keep_steps = true) {
    cfg.validate();
    return detail::run_opg_impl(
        mdp, cfg, rng, /*learn_critic=*/true,
        [](const TabularMdp&, const Table&, const Table& critic) { return critic; },
        to_string(Algorithm::opg_pred), keep_steps);
}

inline RegretTrace run_algorithm(const TabularMdp& mdp, const RunConfig& cfg,
                                 bool keep_steps = true) {
    Rng rng(cfg.seed);
    switch (cfg.algorithm) {
    case Algorithm::pg: return run_pg(mdp, cfg, rng, keep_steps);
    case Algorithm::ac: return run_ac(mdp, cfg, rng, keep_steps);
    case Algorithm::fws: return run_fws(mdp, cfg, rng, keep_steps);
    case Algorithm::opg_expert: return run_opg_expert(mdp, cfg, rng, keep_steps);
    case Algorithm::opg_pred: return run_opg_pred(mdp, cfg, rng, keep_steps);
    }
    throw std::invalid_argument("run_algorithm: unknown algorithm");
}

}  // namespace accelpo

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pidrl/mdp.hpp"
#include "pidrl/planning.hpp"
#include "pidrl/rng.hpp"

namespace pidrl {

/// Learning-rate schedule as a function of a per-state (or per-pair) visit
/// count k:
///   constant:    mu = eps
///   polynomial:  mu = eps / (k + T)
///   count_cap:   mu = min(eps, M / max(k, 1));  M = +inf keeps mu = eps
struct LearningRateSchedule {
    enum class Kind { constant, polynomial, count_cap };

    Kind kind = Kind::constant;
    double epsilon = 0.1;
    double param = 0.0;  // T (polynomial) or M (count_cap)

    // eps = 0 freezes a component, which the standard search grids use for
    // the integral and derivative updates.
    static LearningRateSchedule constant(double eps) {
        if (!(eps >= 0.0 && eps <= 1.0))
            throw std::invalid_argument("constant schedule: eps must be in [0,1]");
        return {Kind::constant, eps, 0.0};
    }
    static LearningRateSchedule polynomial(double eps, double t_offset) {
        if (!(eps > 0.0) || !(t_offset >= eps))
            throw std::invalid_argument("polynomial schedule: need eps > 0 and T >= eps");
        return {Kind::polynomial, eps, t_offset};
    }
    static LearningRateSchedule count_cap(double eps, double cap) {
        if (!(eps >= 0.0 && eps <= 1.0) || !(cap > 0.0))
            throw std::invalid_argument("count_cap schedule: need eps in [0,1] and M > 0");
        return {Kind::count_cap, eps, cap};
    }

    double value(long long k) const {
        switch (kind) {
            case Kind::constant: return epsilon;
            case Kind::polynomial: return epsilon / (static_cast<double>(k) + param);
            case Kind::count_cap:
                return std::min(epsilon, param / static_cast<double>(k > 0 ? k : 1));
        }
        return epsilon;
    }
};

inline double schedule_value(const LearningRateSchedule& s, long long k) { return s.value(k); }

/// Independent schedules for the three stacked components (V/z/V' for
/// policy evaluation, Q/z/Q' for control).
struct ScheduleTriple {
    LearningRateSchedule v;
    LearningRateSchedule z;
    LearningRateSchedule v_prev;

    static ScheduleTriple shared(const LearningRateSchedule& s) { return {s, s, s}; }
};

/// Visit counters, one per state (policy evaluation) or per state-action
/// pair (control).
struct VisitCounts {
    std::vector<long long> n;

    explicit VisitCounts(std::size_t size) : n(size, 0) {}
    long long operator[](std::size_t i) const { return n[i]; }
    void increment(std::size_t i) { ++n[i]; }
};

/// Unbiased one-sample Bellman residual estimate for policy evaluation:
/// delta = R + gamma V(X') - V(X).
inline double br_estimate_pe(const TransitionSample& s, const Vec& v, double gamma) {
    return s.reward + gamma * v[s.next_state] - v[s.state];
}

inline int argmax_action(const Vec& q, int x, int m) {
    const std::size_t base = static_cast<std::size_t>(x) * m;
    int best = 0;
    for (int a = 1; a < m; ++a)
        if (q[base + a] > q[base + best]) best = a;  // lowest index wins ties
    return best;
}

inline double max_action_value(const Vec& q, int x, int m) {
    return q[static_cast<std::size_t>(x) * m + argmax_action(q, x, m)];
}

/// Control counterpart: delta = R + gamma max_a' Q(X',a') - Q(X,A).
inline double br_estimate_control(const TransitionSample& s, const Vec& q, int m, double gamma) {
    return s.reward + gamma * max_action_value(q, s.next_state, m)
           - q[static_cast<std::size_t>(s.state) * m + s.action];
}

/// One asynchronous PID TD update at the sampled state. All three
/// right-hand sides read the pre-update values; only entries at X_t change.
/// The learning rates are evaluated at the pre-increment visit count.
inline void pid_td_step(PeState& s, VisitCounts& counts, const TransitionSample& smp,
                        const Gains& g, const ScheduleTriple& sch, double gamma) {
    const int x = smp.state;
    const long long k = counts[x];
    const double delta = br_estimate_pe(smp, s.v, gamma);
    const double v_old = s.v[x];
    const double z_old = s.z[x];
    const double vp_old = s.v_prev[x];
    s.v[x] = v_old + sch.v.value(k) * (g.kappa_p * delta
                                       + g.kappa_i * (g.beta * z_old + g.alpha * delta)
                                       + g.kappa_d * (v_old - vp_old));
    s.z[x] = z_old + sch.z.value(k) * (g.beta * z_old + g.alpha * delta - z_old);
    s.v_prev[x] = vp_old + sch.v_prev.value(k) * (v_old - vp_old);
    counts.increment(x);
}

/// One asynchronous PID Q-Learning update at the sampled pair.
inline void pid_q_step(QState& s, VisitCounts& counts, const TransitionSample& smp,
                       const Gains& g, const ScheduleTriple& sch, int n_actions, double gamma) {
    const std::size_t xa = static_cast<std::size_t>(smp.state) * n_actions + smp.action;
    const long long k = counts[xa];
    const double delta = br_estimate_control(smp, s.q, n_actions, gamma);
    const double q_old = s.q[xa];
    const double z_old = s.z[xa];
    const double qp_old = s.q_prev[xa];
    s.q[xa] = q_old + sch.v.value(k) * (g.kappa_p * delta
                                        + g.kappa_i * (g.beta * z_old + g.alpha * delta)
                                        + g.kappa_d * (q_old - qp_old));
    s.z[xa] = z_old + sch.z.value(k) * (g.beta * z_old + g.alpha * delta - z_old);
    s.q_prev[xa] = qp_old + sch.v_prev.value(k) * (q_old - qp_old);
    counts.increment(xa);
}

/// Conventional TD(0) update, the kp = 1, ki = kd = 0 special case.
inline void td_step(Vec& v, VisitCounts& counts, const TransitionSample& smp,
                    const LearningRateSchedule& sch, double gamma) {
    const int x = smp.state;
    const double delta = br_estimate_pe(smp, v, gamma);
    v[x] += sch.value(counts[x]) * delta;
    counts.increment(x);
}

/// Watkins Q-Learning update.
inline void q_step(Vec& q, VisitCounts& counts, const TransitionSample& smp,
                   const LearningRateSchedule& sch, int n_actions, double gamma) {
    const std::size_t xa = static_cast<std::size_t>(smp.state) * n_actions + smp.action;
    const double delta = br_estimate_control(smp, q, n_actions, gamma);
    q[xa] += sch.value(counts[xa]) * delta;
    counts.increment(xa);
}

/// One fresh sample per state: A_x ~ pi(.|x), then (R_x, X'_x) from the
/// environment.
inline std::vector<TransitionSample> sync_dataset(const TabularMdp& mdp, const Policy& policy,
                                                  Rng& rng) {
    std::vector<TransitionSample> out;
    out.reserve(mdp.n_states());
    for (int x = 0; x < mdp.n_states(); ++x) {
        const int a = sample_action(policy, rng, x);
        out.push_back(sample_transition(mdp, rng, x, a));
    }
    return out;
}

/// Synchronous PID TD sweep: every state updated from its dataset sample
/// with one shared step size, reading time-t values throughout.
inline PeState sync_pid_td_step(const PeState& s, const std::vector<TransitionSample>& dataset,
                                const Gains& g, double mu, double gamma) {
    const std::size_t n = s.v.size();
    if (dataset.size() != n) throw std::invalid_argument("sync_pid_td_step: dataset must cover all states");
    PeState out = s;
    for (const TransitionSample& smp : dataset) {
        const int x = smp.state;
        const double delta = br_estimate_pe(smp, s.v, gamma);
        out.v[x] = s.v[x] + mu * (g.kappa_p * delta
                                  + g.kappa_i * (g.beta * s.z[x] + g.alpha * delta)
                                  + g.kappa_d * (s.v[x] - s.v_prev[x]));
        out.z[x] = s.z[x] + mu * (g.beta * s.z[x] + g.alpha * delta - s.z[x]);
        out.v_prev[x] = s.v_prev[x] + mu * (s.v[x] - s.v_prev[x]);
    }
    return out;
}

/// Synchronous conventional TD sweep.
inline Vec sync_td_step(const Vec& v, const std::vector<TransitionSample>& dataset, double mu,
                        double gamma) {
    if (dataset.size() != v.size()) throw std::invalid_argument("sync_td_step: dataset must cover all states");
    Vec out = v;
    for (const TransitionSample& smp : dataset)
        out[smp.state] = v[smp.state] + mu * br_estimate_pe(smp, v, gamma);
    return out;
}

// ---------------------------------------------------------------------------
// Run loop
// ---------------------------------------------------------------------------

enum class LearningAlgo { td, pid_td, q, pid_q };
enum class SamplingMode { iid_state, iid_state_action, trajectory };

inline bool is_control_algo(LearningAlgo a) {
    return a == LearningAlgo::q || a == LearningAlgo::pid_q;
}

/// Normalized errors used throughout the experiments:
/// ||V - V_exact||_1 / ||V_exact||_1 and ||Q - Q_exact||_F / ||Q_exact||_F.
inline double normalized_error_pe(const Vec& v, const Vec& v_exact) {
    const double denom = norm_1(v_exact);
    if (denom <= 0.0) throw std::invalid_argument("normalized_error_pe: exact solution has zero norm");
    double num = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) num += std::abs(v[i] - v_exact[i]);
    return num / denom;
}

inline double normalized_error_control(const Vec& q, const Vec& q_exact) {
    const double denom = norm_2(q_exact);
    if (denom <= 0.0) throw std::invalid_argument("normalized_error_control: exact solution has zero norm");
    double num = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) num += (q[i] - q_exact[i]) * (q[i] - q_exact[i]);
    return std::sqrt(num) / denom;
}

struct GainTracePoint {
    long long step = 0;
    double kappa_p = 0.0;
    double kappa_i = 0.0;
    double kappa_d = 0.0;
};

/// Outcome of one learning run: normalized error on the eval_every grid,
/// gain trajectory when gain adaptation was active, and RNG provenance.
struct RunResult {
    int run_id = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<long long, double>> error_trace;
    std::vector<GainTracePoint> gain_trace;
    bool diverged = false;
};

struct LearningRunConfig {
    LearningAlgo algo = LearningAlgo::td;
    SamplingMode sampling = SamplingMode::iid_state;
    Gains gains;
    ScheduleTriple schedules = ScheduleTriple::shared(LearningRateSchedule::constant(0.1));
    long long total_steps = 100000;
    long long eval_every = 1000;
    double blow_up = kBlowUpThreshold;
    double behavior_epsilon = 0.1;  // exploration rate of the trajectory mode in control
};

namespace detail {

/// Draws the next sample for a policy-evaluation run. RNG consumption does
/// not depend on the learner, so td and pid-td runs see identical streams.
inline TransitionSample next_pe_sample(const TabularMdp& mdp, const Policy& policy,
                                       SamplingMode mode, int& traj_state, Rng& rng) {
    int x;
    if (mode == SamplingMode::trajectory) {
        x = traj_state;
    } else {
        x = static_cast<int>(rng.uniform_int(mdp.n_states()));
    }
    const int a = sample_action(policy, rng, x);
    TransitionSample smp = sample_transition(mdp, rng, x, a);
    traj_state = smp.next_state;
    return smp;
}

/// Control counterpart; the trajectory mode follows an epsilon-greedy
/// behavior policy derived from the current Q.
inline TransitionSample next_control_sample(const TabularMdp& mdp, const Vec& q,
                                            SamplingMode mode, double behavior_epsilon,
                                            int& traj_state, Rng& rng) {
    int x, a;
    if (mode == SamplingMode::trajectory) {
        x = traj_state;
        if (rng.uniform() < behavior_epsilon) {
            a = static_cast<int>(rng.uniform_int(mdp.n_actions()));
        } else {
            a = argmax_action(q, x, mdp.n_actions());
        }
    } else if (mode == SamplingMode::iid_state_action) {
        x = static_cast<int>(rng.uniform_int(mdp.n_states()));
        a = static_cast<int>(rng.uniform_int(mdp.n_actions()));
    } else {
        throw std::invalid_argument("control runs need iid-state-action or trajectory sampling");
    }
    TransitionSample smp = sample_transition(mdp, rng, x, a);
    traj_state = smp.next_state;
    return smp;
}

}  // namespace detail

/// Runs a policy-evaluation learner (td or pid-td) for total_steps samples,
/// recording the normalized l1 error at step 0 and on the eval_every grid.
/// A blow-up only flags the run as diverged; it is not an error.
inline RunResult run_learning_pe(const TabularMdp& mdp, const Policy& policy,
                                 const LearningRunConfig& cfg, const Vec& v_exact, Rng& rng) {
    if (is_control_algo(cfg.algo)) throw std::invalid_argument("run_learning_pe: control algorithm");
    if (cfg.eval_every < 1 || cfg.total_steps < 0) throw std::invalid_argument("run_learning_pe: bad step config");
    const int n = mdp.n_states();
    PeState state = PeState::zero(n);
    VisitCounts counts(n);
    RunResult res;
    res.error_trace.emplace_back(0, normalized_error_pe(state.v, v_exact));
    int traj_state = cfg.sampling == SamplingMode::trajectory
                         ? static_cast<int>(rng.uniform_int(n)) : 0;
    for (long long t = 0; t < cfg.total_steps; ++t) {
        const TransitionSample smp =
            detail::next_pe_sample(mdp, policy, cfg.sampling, traj_state, rng);
        if (cfg.algo == LearningAlgo::pid_td) {
            pid_td_step(state, counts, smp, cfg.gains, cfg.schedules, mdp.gamma());
        } else {
            td_step(state.v, counts, smp, cfg.schedules.v, mdp.gamma());
        }
        if (std::abs(state.v[smp.state]) > cfg.blow_up) {
            res.diverged = true;
            break;
        }
        if ((t + 1) % cfg.eval_every == 0)
            res.error_trace.emplace_back(t + 1, normalized_error_pe(state.v, v_exact));
    }
    return res;
}

/// Control counterpart of run_learning_pe (q or pid-q, normalized Frobenius
/// error).
inline RunResult run_learning_control(const TabularMdp& mdp, const LearningRunConfig& cfg,
                                      const Vec& q_exact, Rng& rng) {
    if (!is_control_algo(cfg.algo)) throw std::invalid_argument("run_learning_control: PE algorithm");
    if (cfg.eval_every < 1 || cfg.total_steps < 0) throw std::invalid_argument("run_learning_control: bad step config");
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    QState state = QState::zero(n, m);
    VisitCounts counts(static_cast<std::size_t>(n) * m);
    RunResult res;
    res.error_trace.emplace_back(0, normalized_error_control(state.q, q_exact));
    int traj_state = cfg.sampling == SamplingMode::trajectory
                         ? static_cast<int>(rng.uniform_int(n)) : 0;
    for (long long t = 0; t < cfg.total_steps; ++t) {
        const TransitionSample smp = detail::next_control_sample(
            mdp, state.q, cfg.sampling, cfg.behavior_epsilon, traj_state, rng);
        if (cfg.algo == LearningAlgo::pid_q) {
            pid_q_step(state, counts, smp, cfg.gains, cfg.schedules, m, mdp.gamma());
        } else {
            q_step(state.q, counts, smp, cfg.schedules.v, m, mdp.gamma());
        }
        if (std::abs(state.q[static_cast<std::size_t>(smp.state) * m + smp.action]) > cfg.blow_up) {
            res.diverged = true;
            break;
        }
        if ((t + 1) % cfg.eval_every == 0)
            res.error_trace.emplace_back(t + 1, normalized_error_control(state.q, q_exact));
    }
    return res;
}

}  // namespace pidrl

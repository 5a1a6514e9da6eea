#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pidrl/learning.hpp"
#include "pidrl/mdp.hpp"

namespace pidrl {

/// Meta-learning configuration for sample-based gain adaptation. eps_norm is
/// the offset added to the running Bellman-residual average before dividing;
/// it is unrelated to the learning-rate cap that also goes by epsilon in the
/// schedule configs.
struct GainAdaptationConfig {
    double eta = 1e-5;
    double lambda = 0.5;
    double eps_norm = 1e-20;
    Gains initial_gains = Gains{1.0, 0.0, 0.0, 0.05, 0.95};

    void validate() const {
        if (!(eta >= 0.0)) throw std::invalid_argument("gain adaptation: eta must be >= 0");
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("gain adaptation: lambda must be in [0,1]");
        if (!(eps_norm > 0.0)) throw std::invalid_argument("gain adaptation: eps_norm must be > 0");
    }
};

/// Adapter bookkeeping: an exponential moving average of squared TD errors
/// and a lagged copy of the value function, both per state (or per pair).
/// Everything starts at zero, so the first delta' at a state is computed
/// against the zero function.
struct AdapterState {
    Vec running_br;
    Vec previous_v;

    explicit AdapterState(std::size_t size) : running_br(size, 0.0), previous_v(size, 0.0) {}
};

/// Gain update for policy evaluation, normalized by the running residual:
///   delta' = R + gamma prev_V(X') - prev_V(X)
///   delta  = R + gamma V(X') - V(X)
///   kp += eta * delta * delta' / (running_BR(X) + eps_norm)
///   ki += eta * delta * (beta z(X) + alpha delta') / (...)
///   kd += eta * delta * (V(X) - V'(X)) / (...)
inline Gains ga_td_gain_update(const Gains& g, const AdapterState& ad, const TransitionSample& smp,
                               const Vec& v, const Vec& z, const Vec& v_prev,
                               const GainAdaptationConfig& cfg, double gamma) {
    const int x = smp.state;
    const double dprime = smp.reward + gamma * ad.previous_v[smp.next_state] - ad.previous_v[x];
    const double delta = smp.reward + gamma * v[smp.next_state] - v[x];
    const double denom = ad.running_br[x] + cfg.eps_norm;
    Gains out = g;
    out.kappa_p += cfg.eta * delta * dprime / denom;
    out.kappa_i += cfg.eta * delta * (g.beta * z[x] + g.alpha * dprime) / denom;
    out.kappa_d += cfg.eta * delta * (v[x] - v_prev[x]) / denom;
    return out;
}

/// Control counterpart; A' is the greedy action of the current Q at X'
/// (lowest index wins ties) and both deltas evaluate Q at (X', A').
inline Gains ga_q_gain_update(const Gains& g, const AdapterState& ad, const TransitionSample& smp,
                              const Vec& q, const Vec& z, const Vec& q_prev,
                              const GainAdaptationConfig& cfg, int n_actions, double gamma) {
    const std::size_t xa = static_cast<std::size_t>(smp.state) * n_actions + smp.action;
    const int a_next = argmax_action(q, smp.next_state, n_actions);
    const std::size_t xa_next = static_cast<std::size_t>(smp.next_state) * n_actions + a_next;
    const double dprime = smp.reward + gamma * ad.previous_v[xa_next] - ad.previous_v[xa];
    const double delta = smp.reward + gamma * q[xa_next] - q[xa];
    const double denom = ad.running_br[xa] + cfg.eps_norm;
    Gains out = g;
    out.kappa_p += cfg.eta * delta * dprime / denom;
    out.kappa_i += cfg.eta * delta * (g.beta * z[xa] + g.alpha * dprime) / denom;
    out.kappa_d += cfg.eta * delta * (q[xa] - q_prev[xa]) / denom;
    return out;
}

/// Writes the two adapter cells touched by a step:
///   running_BR(i) <- (1 - lambda) running_BR(i) + lambda delta^2
///   previous_V(i) <- current value at i (pre-update value function)
inline void adapter_commit(AdapterState& ad, std::size_t index, double delta, double value_now,
                           double lambda) {
    ad.running_br[index] = (1.0 - lambda) * ad.running_br[index] + lambda * delta * delta;
    ad.previous_v[index] = value_now;
}

/// PID TD Learning with gain adaptation. Per sample, in order: compute
/// delta'/delta, adapt the gains, commit the adapter cells, then apply the
/// usual PID TD update with the new gains. With eta = 0 the run is
/// bit-identical to the fixed-gain learner on the same RNG stream.
inline RunResult run_pid_td_with_ga(const TabularMdp& mdp, const Policy& policy,
                                    const GainAdaptationConfig& ga, const LearningRunConfig& cfg,
                                    const Vec& v_exact, Rng& rng) {
    ga.validate();
    if (cfg.eval_every < 1 || cfg.total_steps < 0) throw std::invalid_argument("run_pid_td_with_ga: bad step config");
    const int n = mdp.n_states();
    const double gamma = mdp.gamma();
    PeState state = PeState::zero(n);
    VisitCounts counts(n);
    AdapterState adapter(n);
    Gains gains = ga.initial_gains;
    RunResult res;
    res.error_trace.emplace_back(0, normalized_error_pe(state.v, v_exact));
    res.gain_trace.push_back({0, gains.kappa_p, gains.kappa_i, gains.kappa_d});
    int traj_state = cfg.sampling == SamplingMode::trajectory
                         ? static_cast<int>(rng.uniform_int(n)) : 0;
    for (long long t = 0; t < cfg.total_steps; ++t) {
        const TransitionSample smp =
            detail::next_pe_sample(mdp, policy, cfg.sampling, traj_state, rng);
        gains = ga_td_gain_update(gains, adapter, smp, state.v, state.z, state.v_prev, ga, gamma);
        const double delta = br_estimate_pe(smp, state.v, gamma);
        adapter_commit(adapter, smp.state, delta, state.v[smp.state], ga.lambda);
        pid_td_step(state, counts, smp, gains, cfg.schedules, gamma);
        if (std::abs(state.v[smp.state]) > cfg.blow_up) {
            res.diverged = true;
            break;
        }
        if ((t + 1) % cfg.eval_every == 0) {
            res.error_trace.emplace_back(t + 1, normalized_error_pe(state.v, v_exact));
            res.gain_trace.push_back({t + 1, gains.kappa_p, gains.kappa_i, gains.kappa_d});
        }
    }
    return res;
}

/// PID Q-Learning with gain adaptation; same step ordering as the PE runner,
/// indexed by state-action pairs.
inline RunResult run_pid_q_with_ga(const TabularMdp& mdp, const GainAdaptationConfig& ga,
                                   const LearningRunConfig& cfg, const Vec& q_exact, Rng& rng) {
    ga.validate();
    if (cfg.eval_every < 1 || cfg.total_steps < 0) throw std::invalid_argument("run_pid_q_with_ga: bad step config");
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    const double gamma = mdp.gamma();
    QState state = QState::zero(n, m);
    VisitCounts counts(static_cast<std::size_t>(n) * m);
    AdapterState adapter(static_cast<std::size_t>(n) * m);
    Gains gains = ga.initial_gains;
    RunResult res;
    res.error_trace.emplace_back(0, normalized_error_control(state.q, q_exact));
    res.gain_trace.push_back({0, gains.kappa_p, gains.kappa_i, gains.kappa_d});
    int traj_state = cfg.sampling == SamplingMode::trajectory
                         ? static_cast<int>(rng.uniform_int(n)) : 0;
    for (long long t = 0; t < cfg.total_steps; ++t) {
        const TransitionSample smp = detail::next_control_sample(
            mdp, state.q, cfg.sampling, cfg.behavior_epsilon, traj_state, rng);
        gains = ga_q_gain_update(gains, adapter, smp, state.q, state.z, state.q_prev, ga, m, gamma);
        const std::size_t xa = static_cast<std::size_t>(smp.state) * m + smp.action;
        const double delta = br_estimate_control(smp, state.q, m, gamma);
        adapter_commit(adapter, xa, delta, state.q[xa], ga.lambda);
        pid_q_step(state, counts, smp, gains, cfg.schedules, m, gamma);
        if (std::abs(state.q[xa]) > cfg.blow_up) {
            res.diverged = true;
            break;
        }
        if ((t + 1) % cfg.eval_every == 0) {
            res.error_trace.emplace_back(t + 1, normalized_error_control(state.q, q_exact));
            res.gain_trace.push_back({t + 1, gains.kappa_p, gains.kappa_i, gains.kappa_d});
        }
    }
    return res;
}

}  // namespace pidrl

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pidrl/linalg.hpp"
#include "pidrl/rng.hpp"

namespace pidrl {

constexpr double kRowSumTol = 1e-12;

/// One environment interaction: (x, a, r, x').
struct TransitionSample {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
};

/// Finite discounted MDP. Transition probabilities and rewards are stored as
/// flat n*m*n tensors indexed (state, action, next_state); rewards are
/// deterministic per transition, which covers entering-state rewards
/// (Chain Walk, Cliff Walk) and current-state rewards (Garnet) alike.
/// Immutable after construction.
class TabularMdp {
public:
    /// theory_mode additionally enforces reward support within [0, 1].
    TabularMdp(int n_states, int n_actions, Vec transitions, Vec rewards,
               double gamma, bool theory_mode = false)
        : n_(n_states), m_(n_actions), gamma_(gamma),
          p_(std::move(transitions)), r3_(std::move(rewards)) {
        validate(theory_mode);
        mean_r_.assign(static_cast<std::size_t>(n_) * m_, 0.0);
        for (int x = 0; x < n_; ++x)
            for (int a = 0; a < m_; ++a) {
                double s = 0.0;
                const double* row = transition_row(x, a);
                const double* rew = reward_row(x, a);
                for (int y = 0; y < n_; ++y) s += row[y] * rew[y];
                mean_r_[static_cast<std::size_t>(x) * m_ + a] = s;
            }
    }

    int n_states() const { return n_; }
    int n_actions() const { return m_; }
    double gamma() const { return gamma_; }

    /// P(. | x, a) as a pointer into the flat tensor, length n_states().
    const double* transition_row(int x, int a) const {
        return p_.data() + (static_cast<std::size_t>(x) * m_ + a) * n_;
    }

    /// r(x, a, .) as a pointer, length n_states().
    const double* reward_row(int x, int a) const {
        return r3_.data() + (static_cast<std::size_t>(x) * m_ + a) * n_;
    }

    double transition(int x, int a, int y) const { return transition_row(x, a)[y]; }
    double reward(int x, int a, int y) const { return reward_row(x, a)[y]; }

    /// Mean one-step reward r(x, a) = sum_y P(y|x,a) r(x,a,y).
    double mean_reward(int x, int a) const {
        return mean_r_[static_cast<std::size_t>(x) * m_ + a];
    }

    const Vec& transitions() const { return p_; }
    const Vec& rewards() const { return r3_; }

    void check_state(int x) const {
        if (x < 0 || x >= n_) throw std::invalid_argument("invalid state index " + std::to_string(x));
    }
    void check_action(int a) const {
        if (a < 0 || a >= m_) throw std::invalid_argument("invalid action index " + std::to_string(a));
    }

private:
    void validate(bool theory_mode) const {
        if (n_ <= 0 || m_ <= 0) throw std::invalid_argument("TabularMdp: need positive state/action counts");
        if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw std::invalid_argument("TabularMdp: gamma must be in [0,1)");
        const std::size_t want = static_cast<std::size_t>(n_) * m_ * n_;
        if (p_.size() != want || r3_.size() != want)
            throw std::invalid_argument("TabularMdp: tensor size mismatch");
        for (int x = 0; x < n_; ++x)
            for (int a = 0; a < m_; ++a) {
                double s = 0.0;
                const double* row = transition_row(x, a);
                for (int y = 0; y < n_; ++y) {
                    if (row[y] < 0.0) throw std::invalid_argument("TabularMdp: negative transition probability");
                    s += row[y];
                    const double r = reward_row(x, a)[y];
                    if (!std::isfinite(r)) throw std::invalid_argument("TabularMdp: non-finite reward");
                    if (theory_mode && row[y] > 0.0 && (r < 0.0 || r > 1.0))
                        throw std::invalid_argument("TabularMdp: theory_mode requires rewards in [0,1]");
                }
                if (std::abs(s - 1.0) > kRowSumTol)
                    throw std::invalid_argument("TabularMdp: transition row does not sum to 1");
            }
    }

    int n_;
    int m_;
    double gamma_;
    Vec p_;
    Vec r3_;
    Vec mean_r_;
};

/// Stochastic policy: pi(a | x), row-stochastic n x m.
class Policy {
public:
    Policy(int n_states, int n_actions, Vec probs)
        : n_(n_states), m_(n_actions), pi_(std::move(probs)) {
        if (pi_.size() != static_cast<std::size_t>(n_) * m_)
            throw std::invalid_argument("Policy: size mismatch");
        for (int x = 0; x < n_; ++x) {
            double s = 0.0;
            for (int a = 0; a < m_; ++a) {
                if (prob(x, a) < 0.0) throw std::invalid_argument("Policy: negative probability");
                s += prob(x, a);
            }
            if (std::abs(s - 1.0) > kRowSumTol)
                throw std::invalid_argument("Policy: row does not sum to 1");
        }
    }

    /// Policy that puts all mass on one action in every state.
    static Policy constant(int n_states, int n_actions, int action) {
        Vec p(static_cast<std::size_t>(n_states) * n_actions, 0.0);
        for (int x = 0; x < n_states; ++x) p[static_cast<std::size_t>(x) * n_actions + action] = 1.0;
        return Policy(n_states, n_actions, std::move(p));
    }

    static Policy uniform(int n_states, int n_actions) {
        Vec p(static_cast<std::size_t>(n_states) * n_actions, 1.0 / n_actions);
        return Policy(n_states, n_actions, std::move(p));
    }

    int n_states() const { return n_; }
    int n_actions() const { return m_; }
    double prob(int x, int a) const { return pi_[static_cast<std::size_t>(x) * m_ + a]; }
    const double* row(int x) const { return pi_.data() + static_cast<std::size_t>(x) * m_; }

private:
    int n_;
    int m_;
    Vec pi_;
};

inline void check_shapes(const TabularMdp& mdp, const Policy& policy) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw std::invalid_argument("policy/mdp shape mismatch");
}

/// P^pi with entries (x, y) = sum_a pi(a|x) P(y|x,a).
inline Mat policy_kernel(const TabularMdp& mdp, const Policy& policy) {
    check_shapes(mdp, policy);
    const int n = mdp.n_states();
    Mat k(n, n);
    for (int x = 0; x < n; ++x)
        for (int a = 0; a < mdp.n_actions(); ++a) {
            const double pa = policy.prob(x, a);
            if (pa == 0.0) continue;
            const double* row = mdp.transition_row(x, a);
            for (int y = 0; y < n; ++y) k(x, y) += pa * row[y];
        }
    return k;
}

/// r^pi with entries x = sum_a pi(a|x) r(x, a).
inline Vec expected_reward(const TabularMdp& mdp, const Policy& policy) {
    check_shapes(mdp, policy);
    Vec r(mdp.n_states(), 0.0);
    for (int x = 0; x < mdp.n_states(); ++x)
        for (int a = 0; a < mdp.n_actions(); ++a)
            r[x] += policy.prob(x, a) * mdp.mean_reward(x, a);
    return r;
}

/// (T^pi V)(x) = r^pi(x) + gamma sum_y P^pi(y|x) V(y).
inline Vec bellman_pe(const TabularMdp& mdp, const Policy& policy, const Vec& v) {
    check_shapes(mdp, policy);
    const int n = mdp.n_states();
    if (static_cast<int>(v.size()) != n) throw std::invalid_argument("bellman_pe: V size mismatch");
    Vec out(n, 0.0);
    for (int x = 0; x < n; ++x) {
        double acc = 0.0;
        for (int a = 0; a < mdp.n_actions(); ++a) {
            const double pa = policy.prob(x, a);
            if (pa == 0.0) continue;
            double ev = 0.0;
            const double* row = mdp.transition_row(x, a);
            for (int y = 0; y < n; ++y) ev += row[y] * v[y];
            acc += pa * (mdp.mean_reward(x, a) + mdp.gamma() * ev);
        }
        out[x] = acc;
    }
    return out;
}

/// (T* Q)(x,a) = r(x,a) + gamma sum_y P(y|x,a) max_a' Q(y,a').
/// Q is flat n x m, row-major.
inline Vec bellman_control(const TabularMdp& mdp, const Vec& q) {
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    if (q.size() != static_cast<std::size_t>(n) * m)
        throw std::invalid_argument("bellman_control: Q size mismatch");
    Vec maxq(n);
    for (int y = 0; y < n; ++y) {
        double best = q[static_cast<std::size_t>(y) * m];
        for (int a = 1; a < m; ++a) best = std::max(best, q[static_cast<std::size_t>(y) * m + a]);
        maxq[y] = best;
    }
    Vec out(q.size());
    for (int x = 0; x < n; ++x)
        for (int a = 0; a < m; ++a) {
            double ev = 0.0;
            const double* row = mdp.transition_row(x, a);
            for (int y = 0; y < n; ++y) ev += row[y] * maxq[y];
            out[static_cast<std::size_t>(x) * m + a] = mdp.mean_reward(x, a) + mdp.gamma() * ev;
        }
    return out;
}

/// BR^pi V = T^pi V - V.
inline Vec bellman_residual_pe(const TabularMdp& mdp, const Policy& policy, const Vec& v) {
    Vec out = bellman_pe(mdp, policy, v);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= v[i];
    return out;
}

/// BR* Q = T* Q - Q.
inline Vec bellman_residual_control(const TabularMdp& mdp, const Vec& q) {
    Vec out = bellman_control(mdp, q);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= q[i];
    return out;
}

/// V^pi as the solution of (I - gamma P^pi) V = r^pi.
inline Vec exact_value_pe(const TabularMdp& mdp, const Policy& policy) {
    const int n = mdp.n_states();
    Mat a = policy_kernel(mdp, policy);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = (i == j ? 1.0 : 0.0) - mdp.gamma() * a(i, j);
    Vec r = expected_reward(mdp, policy);
    try {
        return solve_linear(std::move(a), std::move(r));
    } catch (const std::runtime_error&) {
        // Cannot happen for gamma < 1 and a stochastic kernel.
        throw std::logic_error("exact_value_pe: singular Bellman system");
    }
}

/// Q* by value iteration, stopped once successive iterates differ by at most
/// tol*(1-gamma)/(2*gamma), which guarantees ||Q - Q*||_inf <= tol.
inline Vec exact_value_control(const TabularMdp& mdp, double tol, long max_iters = 1000000) {
    if (!(tol > 0.0)) throw std::invalid_argument("exact_value_control: tol must be positive");
    const double g = mdp.gamma();
    const double stop = g > 0.0 ? tol * (1.0 - g) / (2.0 * g) : tol;
    Vec q(static_cast<std::size_t>(mdp.n_states()) * mdp.n_actions(), 0.0);
    for (long k = 0; k < max_iters; ++k) {
        Vec next = bellman_control(mdp, q);
        const double diff = max_abs_diff(next, q);
        q = std::move(next);
        if (diff <= stop) return q;
    }
    throw std::runtime_error("exact_value_control: iteration cap exceeded");
}

/// Draws x' ~ P(.|x,a) and the reward of that transition jointly.
inline TransitionSample sample_transition(const TabularMdp& mdp, Rng& rng, int x, int a) {
    mdp.check_state(x);
    mdp.check_action(a);
    const int y = static_cast<int>(rng.categorical(mdp.transition_row(x, a), mdp.n_states()));
    return TransitionSample{x, a, mdp.reward(x, a, y), y};
}

/// Draws an action from pi(.|x).
inline int sample_action(const Policy& policy, Rng& rng, int x) {
    return static_cast<int>(rng.categorical(policy.row(x), policy.n_actions()));
}

}  // namespace pidrl

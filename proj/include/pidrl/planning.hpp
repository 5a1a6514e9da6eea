#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pidrl/mdp.hpp"

namespace pidrl {

/// Controller gains: proportional, integral, derivative, plus the integrator
/// parameters (alpha, beta). (1, 0, 0, *, *) recovers plain value iteration.
struct Gains {
    double kappa_p = 1.0;
    double kappa_i = 0.0;
    double kappa_d = 0.0;
    double alpha = 0.05;
    double beta = 0.95;
};

/// Stacked policy-evaluation iterate [V; z; V'] where z is the running
/// average of Bellman residuals and V' the previous value function.
struct PeState {
    Vec v;
    Vec z;
    Vec v_prev;

    static PeState zero(int n_states) {
        return PeState{Vec(n_states, 0.0), Vec(n_states, 0.0), Vec(n_states, 0.0)};
    }
};

/// Stacked control iterate [Q; z; Q'], each flat n x m.
struct QState {
    Vec q;
    Vec z;
    Vec q_prev;

    static QState zero(int n_states, int n_actions) {
        const std::size_t sz = static_cast<std::size_t>(n_states) * n_actions;
        return QState{Vec(sz, 0.0), Vec(sz, 0.0), Vec(sz, 0.0)};
    }
};

/// One PID VI step for policy evaluation:
///   V_{k+1}  = V + kp*BR + ki*(beta*z + alpha*BR) + kd*(V - V')
///   z_{k+1}  = beta*z + alpha*BR
///   V'_{k+1} = V
inline PeState pid_vi_step_pe(const TabularMdp& mdp, const Policy& policy,
                              const Gains& g, const PeState& s) {
    const std::size_t n = s.v.size();
    if (s.z.size() != n || s.v_prev.size() != n)
        throw std::invalid_argument("pid_vi_step_pe: component size mismatch");
    const Vec br = bellman_residual_pe(mdp, policy, s.v);
    PeState out;
    out.v.resize(n);
    out.z.resize(n);
    out.v_prev = s.v;
    for (std::size_t i = 0; i < n; ++i) {
        out.v[i] = s.v[i] + g.kappa_p * br[i]
                 + g.kappa_i * (g.beta * s.z[i] + g.alpha * br[i])
                 + g.kappa_d * (s.v[i] - s.v_prev[i]);
        out.z[i] = g.beta * s.z[i] + g.alpha * br[i];
    }
    return out;
}

/// One PID VI step for control; same shape with BR* in place of BR^pi.
inline QState pid_vi_step_control(const TabularMdp& mdp, const Gains& g, const QState& s) {
    const std::size_t sz = s.q.size();
    if (s.z.size() != sz || s.q_prev.size() != sz)
        throw std::invalid_argument("pid_vi_step_control: component size mismatch");
    const Vec br = bellman_residual_control(mdp, s.q);
    QState out;
    out.q.resize(sz);
    out.z.resize(sz);
    out.q_prev = s.q;
    for (std::size_t i = 0; i < sz; ++i) {
        out.q[i] = s.q[i] + g.kappa_p * br[i]
                 + g.kappa_i * (g.beta * s.z[i] + g.alpha * br[i])
                 + g.kappa_d * (s.q[i] - s.q_prev[i]);
        out.z[i] = g.beta * s.z[i] + g.alpha * br[i];
    }
    return out;
}

struct PlanIterRecord {
    long iter = 0;
    double br_norm = 0.0;            // sup-norm Bellman residual
    double error = 0.0;              // sup-norm distance to the exact solution, if supplied
    Gains gains;                     // gains in effect at this iterate
};

struct PlanResult {
    std::vector<PlanIterRecord> trace;
    bool converged = false;
    bool diverged = false;
    long iters = 0;
};

constexpr double kBlowUpThreshold = 1e12;

/// Runs PID VI for policy evaluation until the Bellman residual drops below
/// tol or k_max iterations pass. Divergence (iterate sup-norm beyond the
/// blow-up threshold) is flagged, not thrown.
inline PlanResult pid_vi_run_pe(const TabularMdp& mdp, const Policy& policy, const Gains& g,
                                PeState state, long k_max, double tol,
                                const Vec* exact = nullptr,
                                double blow_up = kBlowUpThreshold) {
    if (k_max < 1) throw std::invalid_argument("pid_vi_run_pe: k_max must be >= 1");
    PlanResult res;
    auto record = [&](long k) {
        PlanIterRecord rec;
        rec.iter = k;
        rec.br_norm = norm_inf(bellman_residual_pe(mdp, policy, state.v));
        rec.error = exact ? max_abs_diff(state.v, *exact) : 0.0;
        rec.gains = g;
        res.trace.push_back(rec);
        return rec.br_norm;
    };
    if (record(0) <= tol) {
        res.converged = true;
        return res;
    }
    for (long k = 1; k <= k_max; ++k) {
        state = pid_vi_step_pe(mdp, policy, g, state);
        res.iters = k;
        const double br = record(k);
        if (norm_inf(state.v) > blow_up || norm_inf(state.z) > blow_up) {
            res.diverged = true;
            break;
        }
        if (br <= tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

/// Control counterpart of pid_vi_run_pe.
inline PlanResult pid_vi_run_control(const TabularMdp& mdp, const Gains& g,
                                     QState state, long k_max, double tol,
                                     const Vec* exact = nullptr,
                                     double blow_up = kBlowUpThreshold) {
    if (k_max < 1) throw std::invalid_argument("pid_vi_run_control: k_max must be >= 1");
    PlanResult res;
    auto record = [&](long k) {
        PlanIterRecord rec;
        rec.iter = k;
        rec.br_norm = norm_inf(bellman_residual_control(mdp, state.q));
        rec.error = exact ? max_abs_diff(state.q, *exact) : 0.0;
        rec.gains = g;
        res.trace.push_back(rec);
        return rec.br_norm;
    };
    if (record(0) <= tol) {
        res.converged = true;
        return res;
    }
    for (long k = 1; k <= k_max; ++k) {
        state = pid_vi_step_control(mdp, g, state);
        res.iters = k;
        const double br = record(k);
        if (norm_inf(state.q) > blow_up || norm_inf(state.z) > blow_up) {
            res.diverged = true;
            break;
        }
        if (br <= tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

/// Model-based gain adaptation: one normalized gradient-descent step on the
/// squared Bellman residual of the next iterate,
///   kappa <- kappa - eta / ||BR V_k||_2^2 * <BR V_{k+1}, dBR V_{k+1}/dkappa>,
/// treating V_k, z_k, V_{k-1} as constants. Skipped when ||BR V_k||_2 is
/// (numerically) zero. alpha and beta are not adapted.
inline Gains ga_vi_step(const TabularMdp& mdp, const Policy& policy, const Gains& g,
                        const Vec& v_k, const Vec& v_prev, const Vec& z_k, double eta) {
    const std::size_t n = v_k.size();
    const Vec br_k = bellman_residual_pe(mdp, policy, v_k);
    const double br_sq = dot(br_k, br_k);
    if (br_sq < 1e-12) return g;

    // dV_{k+1}/dkappa for the three gains.
    Vec d_p = br_k;
    Vec d_i(n), d_d(n), v_next(n);
    for (std::size_t i = 0; i < n; ++i) {
        d_i[i] = g.beta * z_k[i] + g.alpha * br_k[i];
        d_d[i] = v_k[i] - v_prev[i];
        v_next[i] = v_k[i] + g.kappa_p * d_p[i] + g.kappa_i * d_i[i] + g.kappa_d * d_d[i];
    }
    const Vec br_next = bellman_residual_pe(mdp, policy, v_next);

    // dBR V_{k+1}/dkappa = (gamma P^pi - I) dV_{k+1}/dkappa; the product with
    // BR V_{k+1} is all we need.
    const Mat kernel = policy_kernel(mdp, policy);
    auto grad_inner = [&](const Vec& dv) {
        Vec pdv = mat_vec(kernel, dv);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += br_next[i] * (mdp.gamma() * pdv[i] - dv[i]);
        return s;
    };

    Gains out = g;
    const double scale = eta / br_sq;
    out.kappa_p -= scale * grad_inner(d_p);
    out.kappa_i -= scale * grad_inner(d_i);
    out.kappa_d -= scale * grad_inner(d_d);
    return out;
}

/// PID VI with gain adaptation: each iteration advances the state with the
/// current gains, then adapts the gains from the pre-step iterate.
inline PlanResult pid_vi_run_pe_adaptive(const TabularMdp& mdp, const Policy& policy,
                                         Gains g, PeState state, long k_max, double tol,
                                         double eta, const Vec* exact = nullptr,
                                         double blow_up = kBlowUpThreshold) {
    if (k_max < 1) throw std::invalid_argument("pid_vi_run_pe_adaptive: k_max must be >= 1");
    PlanResult res;
    auto record = [&](long k) {
        PlanIterRecord rec;
        rec.iter = k;
        rec.br_norm = norm_inf(bellman_residual_pe(mdp, policy, state.v));
        rec.error = exact ? max_abs_diff(state.v, *exact) : 0.0;
        rec.gains = g;
        res.trace.push_back(rec);
        return rec.br_norm;
    };
    if (record(0) <= tol) {
        res.converged = true;
        return res;
    }
    for (long k = 1; k <= k_max; ++k) {
        PeState next = pid_vi_step_pe(mdp, policy, g, state);
        g = ga_vi_step(mdp, policy, g, state.v, state.v_prev, state.z, eta);
        state = std::move(next);
        res.iters = k;
        const double br = record(k);
        if (norm_inf(state.v) > blow_up || norm_inf(state.z) > blow_up) {
            res.diverged = true;
            break;
        }
        if (br <= tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace pidrl

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pidrl/eigen_solver.hpp"
#include "pidrl/mdp.hpp"
#include "pidrl/planning.hpp"

namespace pidrl {

/// Affine decomposition of the policy-evaluation PID VI operator:
/// applying one step to the stacked iterate [V; z; V'] equals A * vtilde + b.
struct PidMatrix {
    Mat a;   // 3n x 3n
    Vec b;   // 3n
};

/// Builds the linear part block by block,
///   [ (1 - kp + kd - ki*a)I + g(kp + ki*a)P   b*ki*I   -kd*I ]
///   [ -a*I + g*a*P                             b*I      0    ]
///   [ I                                        0        0    ],
/// and the constant part as one step applied to the zero iterate.
inline PidMatrix build_pid_matrix(const TabularMdp& mdp, const Policy& policy, const Gains& g) {
    check_shapes(mdp, policy);
    const int n = mdp.n_states();
    const Mat kernel = policy_kernel(mdp, policy);
    const double gamma = mdp.gamma();

    Mat a(3 * static_cast<std::size_t>(n), 3 * static_cast<std::size_t>(n));
    const double diag_v = 1.0 - g.kappa_p + g.kappa_d - g.kappa_i * g.alpha;
    const double kern_v = gamma * (g.kappa_p + g.kappa_i * g.alpha);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            a(i, j) = kern_v * kernel(i, j);
            a(n + i, j) = gamma * g.alpha * kernel(i, j);
        }
        a(i, i) += diag_v;
        a(i, n + i) = g.beta * g.kappa_i;
        a(i, 2 * n + i) = -g.kappa_d;
        a(n + i, i) += -g.alpha;
        a(n + i, n + i) = g.beta;
        a(2 * n + i, i) = 1.0;
    }

    const PeState at_zero = pid_vi_step_pe(mdp, policy, g, PeState::zero(n));
    Vec b(3 * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        b[i] = at_zero.v[i];
        b[n + i] = at_zero.z[i];
        b[2 * n + i] = at_zero.v_prev[i];
    }
    return PidMatrix{std::move(a), std::move(b)};
}

/// Spectral view of the PID VI linear part. PID VI converges iff the
/// spectral radius is below one; the stochastic-approximation counterpart
/// only needs every eigenvalue's real part below one, a strictly weaker
/// condition.
struct SpectralReport {
    double spectral_radius = 0.0;
    double max_real_part = 0.0;
    std::vector<std::complex<double>> eigenvalues;
    bool vi_convergent = false;
    bool td_convergent = false;
};

inline SpectralReport spectral_report_of(const Mat& a) {
    SpectralReport rep;
    rep.eigenvalues = eigenvalues(a);
    rep.max_real_part = -std::numeric_limits<double>::infinity();
    for (const auto& ev : rep.eigenvalues) {
        rep.spectral_radius = std::max(rep.spectral_radius, std::abs(ev));
        rep.max_real_part = std::max(rep.max_real_part, ev.real());
    }
    rep.vi_convergent = rep.spectral_radius < 1.0;
    rep.td_convergent = rep.max_real_part < 1.0;
    return rep;
}

inline SpectralReport spectral_report(const TabularMdp& mdp, const Policy& policy, const Gains& g) {
    return spectral_report_of(build_pid_matrix(mdp, policy, g).a);
}

/// Largest d in [0,1] such that the policy is d-deterministic: every state's
/// reward variance is at most (1-d)/4 and its most likely successor has
/// probability at least d. Rewards here are deterministic per transition,
/// so the variance constraint is slack and d reduces to the transition term.
struct DeterminismReport {
    double d = 0.0;
    double min_max_transition = 0.0;   // min_x max_x' P^pi(x'|x)
    double max_reward_variance = 0.0;  // residual reward noise given (x,a,x'): zero by the data model
};

inline DeterminismReport d_determinism(const TabularMdp& mdp, const Policy& policy) {
    const Mat kernel = policy_kernel(mdp, policy);
    double min_max = 1.0;
    for (std::size_t x = 0; x < kernel.rows(); ++x) {
        double row_max = 0.0;
        for (std::size_t y = 0; y < kernel.cols(); ++y) row_max = std::max(row_max, kernel(x, y));
        min_max = std::min(min_max, row_max);
    }
    DeterminismReport rep;
    rep.min_max_transition = min_max;
    rep.max_reward_variance = 0.0;
    const double reward_d = 1.0 - 4.0 * rep.max_reward_variance;
    rep.d = std::clamp(std::min(reward_d, min_max), 0.0, 1.0);
    return rep;
}

/// Per-state second-moment bound on the TD noise W = R + gamma V(X') - (T V)(x):
/// (1-d)/4 + 5 gamma^2 (1-d) ||V||_inf^2. The (1-d)/4 term assumes rewards
/// spanning a unit range; pass reward_range for wider reward supports.
inline double noise_bound_scalar(double d, double gamma, double v_inf, double reward_range = 1.0) {
    if (!(d >= 0.0 && d <= 1.0)) throw std::invalid_argument("noise_bound_scalar: d must be in [0,1]");
    return reward_range * reward_range * (1.0 - d) / 4.0 + 5.0 * gamma * gamma * (1.0 - d) * v_inf * v_inf;
}

/// Bound on E||W||_inf^2 for a synchronous TD sweep over n states.
inline double noise_bound_td(double d, int n, double gamma, double v_inf, double reward_range = 1.0) {
    return n * noise_bound_scalar(d, gamma, v_inf, reward_range);
}

/// PID gain factor c = max((kp + ki*alpha)^2, alpha^2).
inline double pid_noise_gain(const Gains& g) {
    const double s = g.kappa_p + g.kappa_i * g.alpha;
    return std::max(s * s, g.alpha * g.alpha);
}

/// Bound on E||W~||_inf^2 for a synchronous PID TD sweep (3n components).
inline double noise_bound_pid(double d, int n, double gamma, const Gains& g, double vtilde_inf,
                              double reward_range = 1.0) {
    return 3.0 * n * pid_noise_gain(g) * noise_bound_scalar(d, gamma, vtilde_inf, reward_range);
}

/// Lower bound on the initial optimization/statistical error ratio for
/// synchronous TD. Returns +infinity as d -> 1 (no noise).
inline double opt_stat_ratio_td(double v0_err_inf, double v_inf, int n, double gamma, double d) {
    if (!(d >= 0.0 && d <= 1.0)) throw std::invalid_argument("opt_stat_ratio_td: d must be in [0,1]");
    if (d >= 1.0) return std::numeric_limits<double>::infinity();
    const double g2 = gamma * gamma;
    return v0_err_inf * v0_err_inf * (5.0 * g2 * n * (1.0 - d) + 2.0) /
           (std::exp(1.0) * n * (1.0 - d) * (1.0 + 40.0 * g2 * v_inf * v_inf));
}

/// PID counterpart of opt_stat_ratio_td, with c = max((kp+ki*alpha)^2, alpha^2).
inline double opt_stat_ratio_pid(double v0_err_inf, double v_inf, int n, double gamma, double d,
                              const Gains& gains) {
    if (!(d >= 0.0 && d <= 1.0)) throw std::invalid_argument("opt_stat_ratio_pid: d must be in [0,1]");
    if (d >= 1.0) return std::numeric_limits<double>::infinity();
    const double g2 = gamma * gamma;
    const double c = pid_noise_gain(gains);
    return v0_err_inf * v0_err_inf * (15.0 * c * g2 * n * (1.0 - d) + 2.0) /
           (3.0 * std::exp(1.0) * c * n * (1.0 - d) * (1.0 + 40.0 * g2 * v_inf * v_inf));
}

struct SyncErrorBound {
    double opt_term = 0.0;   // decays like (T/(t+T))^(eps(1-rate))
    double stat_term = 0.0;  // decays like 1/(t+T)
};

/// Evaluates the synchronous-learning error bound at iteration t for the
/// schedule mu(t) = eps/(t+T). `rate` is the contraction modulus: gamma for
/// TD, the PID spectral radius for PID TD, each optionally shifted by a
/// non-diagonalizable allowance. Constants c2..c4 are caller-supplied.
inline SyncErrorBound sync_error_bound(double c2, double c3, double c4, double epsilon, double t_offset,
                                     double rate, double v0_err_inf, double v_inf, double t) {
    const double margin = epsilon * (1.0 - rate);
    if (!(margin > 1.0))
        throw std::invalid_argument("sync_error_bound: requires epsilon*(1-rate) > 1");
    SyncErrorBound out;
    out.opt_term = c2 * v0_err_inf * v0_err_inf * std::pow(t_offset / (t + t_offset), margin);
    out.stat_term = epsilon * (c3 + c4 * v_inf * v_inf) / (margin - 1.0) * (epsilon / (t + t_offset));
    return out;
}

}  // namespace pidrl

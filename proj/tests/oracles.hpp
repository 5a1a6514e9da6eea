#pragma once

// Independent eigenvalue oracle: characteristic polynomial via the
// Faddeev-LeVerrier trace recursion, roots via Durand-Kerner iteration.
// Deliberately shares no code path with the library's QR solver.

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "pidrl/linalg.hpp"

namespace testutil {

using pidrl::Mat;

/// Monic characteristic polynomial coefficients, c[0] = 1.
inline std::vector<double> char_poly(const Mat& a) {
    const std::size_t n = a.rows();
    std::vector<double> traces(n + 1, 0.0);
    Mat power = Mat::identity(n);
    for (std::size_t k = 1; k <= n; ++k) {
        power = pidrl::mat_mul(power, a);
        double tr = 0.0;
        for (std::size_t i = 0; i < n; ++i) tr += power(i, i);
        traces[k] = tr;
    }
    std::vector<double> e(n + 1, 0.0);
    e[0] = 1.0;
    for (std::size_t k = 1; k <= n; ++k) {
        double acc = 0.0;
        double sign = 1.0;
        for (std::size_t i = 1; i <= k; ++i) {
            acc += sign * e[k - i] * traces[i];
            sign = -sign;
        }
        e[k] = acc / double(k);
    }
    std::vector<double> coeff(n + 1);
    double sign = 1.0;
    for (std::size_t k = 0; k <= n; ++k) {
        coeff[k] = sign * e[k];
        sign = -sign;
    }
    return coeff;
}

/// All roots of a monic real polynomial (Durand-Kerner).
inline std::vector<std::complex<double>> poly_roots(const std::vector<double>& coeff) {
    using cplx = std::complex<double>;
    const std::size_t deg = coeff.size() - 1;
    auto eval = [&](cplx z) {
        cplx acc = coeff[0];
        for (std::size_t i = 1; i <= deg; ++i) acc = acc * z + coeff[i];
        return acc;
    };
    std::vector<cplx> roots(deg);
    const cplx seed(0.4, 0.9);
    cplx r(1.0, 0.0);
    for (std::size_t i = 0; i < deg; ++i) {
        r *= seed;
        roots[i] = r;
    }
    for (int it = 0; it < 500; ++it) {
        double moved = 0.0;
        for (std::size_t i = 0; i < deg; ++i) {
            cplx denom(1.0, 0.0);
            for (std::size_t j = 0; j < deg; ++j)
                if (j != i) denom *= roots[i] - roots[j];
            const cplx delta = eval(roots[i]) / denom;
            roots[i] -= delta;
            moved = std::max(moved, std::abs(delta));
        }
        if (moved < 1e-14) break;
    }
    return roots;
}

/// Largest pairing distance under greedy nearest matching; +inf on size
/// mismatch.
inline double multiset_distance(std::vector<std::complex<double>> a,
                                std::vector<std::complex<double>> b) {
    if (a.size() != b.size() || b.empty())
        return a.size() == b.size() ? 0.0 : std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (const auto& x : a) {
        std::size_t best = 0;
        double best_d = std::abs(x - b[0]);
        for (std::size_t j = 1; j < b.size(); ++j) {
            const double d = std::abs(x - b[j]);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        worst = std::max(worst, best_d);
        b.erase(b.begin() + best);
    }
    return worst;
}

}  // namespace testutil

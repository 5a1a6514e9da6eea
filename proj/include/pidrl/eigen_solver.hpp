#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pidrl/linalg.hpp"

namespace pidrl {

namespace detail {

/// Parlett-Reinsch balancing: diagonal similarity scaling by powers of two
/// to equalize row and column norms. Exact in floating point, so it never
/// perturbs the spectrum.
inline void balance(Mat& a) {
    const std::size_t n = a.rows();
    const double radix = 2.0;
    const double sq = radix * radix;
    bool done = false;
    while (!done) {
        done = true;
        for (std::size_t i = 0; i < n; ++i) {
            double r = 0.0, c = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) {
                    c += std::abs(a(j, i));
                    r += std::abs(a(i, j));
                }
            if (c != 0.0 && r != 0.0) {
                double g = r / radix;
                double f = 1.0;
                const double s = c + r;
                while (c < g) {
                    f *= radix;
                    c *= sq;
                }
                g = r * radix;
                while (c > g) {
                    f /= radix;
                    c /= sq;
                }
                if ((c + r) / f < 0.95 * s) {
                    done = false;
                    const double ginv = 1.0 / f;
                    for (std::size_t j = 0; j < n; ++j) a(i, j) *= ginv;
                    for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
                }
            }
        }
    }
}

/// Orthogonal (Householder) reduction to upper Hessenberg form, in place.
inline void hessenberg(Mat& a) {
    const std::size_t n = a.rows();
    if (n < 3) return;
    Vec v(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double scale = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) scale += std::abs(a(i, k));
        if (scale == 0.0) continue;
        double norm_sq = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            v[i] = a(i, k) / scale;
            norm_sq += v[i] * v[i];
        }
        double alpha = std::sqrt(norm_sq);
        if (v[k + 1] > 0.0) alpha = -alpha;
        norm_sq -= v[k + 1] * alpha;
        v[k + 1] -= alpha;
        if (norm_sq == 0.0) continue;

        // A <- H A with H = I - v v^T / norm_sq (v zero up to k).
        for (std::size_t j = k; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) s += v[i] * a(i, j);
            s /= norm_sq;
            for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= s * v[i];
        }
        // A <- A H.
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) s += a(i, j) * v[j];
            s /= norm_sq;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= s * v[j];
        }
        a(k + 1, k) = scale * alpha;
        for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
    }
}

inline double sign_of(double magnitude, double sign_src) {
    return sign_src >= 0.0 ? std::abs(magnitude) : -std::abs(magnitude);
}

}  // namespace detail

/// All eigenvalues (with multiplicity) of a real square matrix: balancing,
/// Hessenberg reduction, then Francis double-shift QR with deflation.
/// Throws if the iteration has not deflated every eigenvalue within
/// 100 * n total sweeps.
inline std::vector<std::complex<double>> eigenvalues(Mat a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("eigenvalues: matrix must be square");
    const std::size_t n = a.rows();
    std::vector<std::complex<double>> out(n);
    if (n == 0) return out;
    if (n == 1) {
        out[0] = a(0, 0);
        return out;
    }

    detail::balance(a);
    detail::hessenberg(a);

    const double eps = std::numeric_limits<double>::epsilon();
    double anorm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = (i > 0 ? i - 1 : 0); j < n; ++j) anorm += std::abs(a(i, j));
    if (anorm == 0.0) return out;  // zero matrix

    const long iter_cap = 100 * static_cast<long>(n);
    long total_iters = 0;
    long nn = static_cast<long>(n) - 1;
    double t = 0.0;
    while (nn >= 0) {
        long its = 0;
        long l;
        do {
            // Find a negligible subdiagonal element.
            for (l = nn; l >= 1; --l) {
                double s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
                if (s == 0.0) s = anorm;
                if (std::abs(a(l, l - 1)) <= eps * s) {
                    a(l, l - 1) = 0.0;
                    break;
                }
            }
            if (l < 0) l = 0;
            double x = a(nn, nn);
            if (l == nn) {
                out[nn] = {x + t, 0.0};
                --nn;
            } else {
                double y = a(nn - 1, nn - 1);
                double w = a(nn, nn - 1) * a(nn - 1, nn);
                if (l == nn - 1) {
                    // 2x2 block: pair of roots.
                    double p = 0.5 * (y - x);
                    double q = p * p + w;
                    double z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + detail::sign_of(z, p);
                        out[nn - 1] = {x + z, 0.0};
                        out[nn] = out[nn - 1];
                        if (z != 0.0) out[nn] = {x - w / z, 0.0};
                    } else {
                        out[nn] = {x + p, z};
                        out[nn - 1] = std::conj(out[nn]);
                    }
                    nn -= 2;
                } else {
                    if (++total_iters > iter_cap)
                        throw std::runtime_error("eigenvalues: QR iteration did not converge");
                    if (its == 10 || its == 20) {
                        // Exceptional shift.
                        t += x;
                        for (long i = 0; i <= nn; ++i) a(i, i) -= x;
                        double s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        w = -0.4375 * s * s;
                    }
                    ++its;
                    // Form the implicit double shift and look for two
                    // consecutive small subdiagonals.
                    long m;
                    double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
                    for (m = nn - 2; m >= l; --m) {
                        z = a(m, m);
                        double rr = x - z;
                        double ss = y - z;
                        p = (rr * ss - w) / a(m + 1, m) + a(m, m + 1);
                        q = a(m + 1, m + 1) - z - rr - ss;
                        r = a(m + 2, m + 1);
                        double scale = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= scale;
                        q /= scale;
                        r /= scale;
                        if (m == l) break;
                        const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
                        const double v = std::abs(p) *
                            (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
                        if (u <= eps * v) break;
                    }
                    for (long i = m + 2; i <= nn; ++i) {
                        a(i, i - 2) = 0.0;
                        if (i != m + 2) a(i, i - 3) = 0.0;
                    }
                    // Double QR sweep on rows l..nn, columns m..nn.
                    for (long k = m; k <= nn - 1; ++k) {
                        if (k != m) {
                            p = a(k, k - 1);
                            q = a(k + 1, k - 1);
                            r = (k != nn - 1) ? a(k + 2, k - 1) : 0.0;
                            x = std::abs(p) + std::abs(q) + std::abs(r);
                            if (x != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        double s = detail::sign_of(std::sqrt(p * p + q * q + r * r), p);
                        if (s == 0.0) continue;
                        if (k == m) {
                            if (l != m) a(k, k - 1) = -a(k, k - 1);
                        } else {
                            a(k, k - 1) = -s * x;
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        z = r / s;
                        q /= p;
                        r /= p;
                        for (long j = k; j <= nn; ++j) {
                            p = a(k, j) + q * a(k + 1, j);
                            if (k != nn - 1) {
                                p += r * a(k + 2, j);
                                a(k + 2, j) -= p * z;
                            }
                            a(k + 1, j) -= p * y;
                            a(k, j) -= p * x;
                        }
                        const long mmin = nn < k + 3 ? nn : k + 3;
                        for (long i = l; i <= mmin; ++i) {
                            p = x * a(i, k) + y * a(i, k + 1);
                            if (k != nn - 1) {
                                p += z * a(i, k + 2);
                                a(i, k + 2) -= p * r;
                            }
                            a(i, k + 1) -= p * q;
                            a(i, k) -= p;
                        }
                    }
                }
            }
        } while (l < nn - 1 && nn >= 0);
    }
    return out;
}

/// Gelfand-formula spectral radius estimate ||A^(2^k)||_inf^(1/2^k) via
/// repeated squaring with renormalization, so very large or tiny powers
/// never overflow.
inline double gelfand_radius_estimate(const Mat& a, int k) {
    if (a.rows() != a.cols()) throw std::invalid_argument("gelfand_radius_estimate: matrix must be square");
    if (k < 1) throw std::invalid_argument("gelfand_radius_estimate: k must be >= 1");
    Mat b = a;
    double c0 = norm_inf(b);
    if (c0 == 0.0) return 0.0;
    double log_norm = std::log(c0);
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) b(i, j) /= c0;
    double weight = 1.0;
    for (int step = 0; step < k; ++step) {
        b = mat_mul(b, b);
        const double c = norm_inf(b);
        if (c == 0.0) return 0.0;  // nilpotent
        weight *= 0.5;
        log_norm = log_norm + weight * std::log(c);
        for (std::size_t i = 0; i < b.rows(); ++i)
            for (std::size_t j = 0; j < b.cols(); ++j) b(i, j) /= c;
    }
    return std::exp(log_norm);
}

}  // namespace pidrl

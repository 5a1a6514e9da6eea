#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pidrl {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. Sized for the tabular setting
/// (a few hundred rows at most), so everything is plain O(n^2)/O(n^3).
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vec data_;
};

inline Vec mat_vec(const Mat& a, const Vec& x) {
    if (a.cols() != x.size()) throw std::invalid_argument("mat_vec: dimension mismatch");
    Vec y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

inline Mat mat_mul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("mat_mul: dimension mismatch");
    Mat c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

inline double norm_inf(const Vec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double norm_1(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

inline double norm_2(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// Max-absolute-row-sum norm.
inline double norm_inf(const Mat& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += std::abs(a(i, j));
        m = std::max(m, s);
    }
    return m;
}

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: dimension mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Solves A x = b by Gaussian elimination with partial pivoting, followed by
/// one pass of iterative refinement. A and b are taken by value; the copies
/// serve as scratch.
inline Vec solve_linear(Mat a, Vec b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n) throw std::invalid_argument("solve_linear: dimension mismatch");

    const Mat a0 = a;
    const Vec b0 = b;

    auto eliminate = [n](Mat& m, Vec& rhs) {
        for (std::size_t col = 0; col < n; ++col) {
            std::size_t piv = col;
            for (std::size_t r = col + 1; r < n; ++r)
                if (std::abs(m(r, col)) > std::abs(m(piv, col))) piv = r;
            if (m(piv, col) == 0.0) throw std::runtime_error("solve_linear: singular matrix");
            if (piv != col) {
                for (std::size_t j = 0; j < n; ++j) std::swap(m(piv, j), m(col, j));
                std::swap(rhs[piv], rhs[col]);
            }
            const double inv = 1.0 / m(col, col);
            for (std::size_t r = col + 1; r < n; ++r) {
                const double f = m(r, col) * inv;
                if (f == 0.0) continue;
                m(r, col) = 0.0;
                for (std::size_t j = col + 1; j < n; ++j) m(r, j) -= f * m(col, j);
                rhs[r] -= f * rhs[col];
            }
        }
        Vec x(n);
        for (std::size_t i = n; i-- > 0;) {
            double s = rhs[i];
            for (std::size_t j = i + 1; j < n; ++j) s -= m(i, j) * x[j];
            x[i] = s / m(i, i);
        }
        return x;
    };

    Vec x = eliminate(a, b);

    // One refinement step knocks the residual down to ~machine epsilon of the
    // solution scale, which the fixed-point tests rely on.
    Vec resid(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b0[i];
        for (std::size_t j = 0; j < n; ++j) s -= a0(i, j) * x[j];
        resid[i] = s;
    }
    Mat a1 = a0;
    Vec corr = eliminate(a1, resid);
    for (std::size_t i = 0; i < n; ++i) x[i] += corr[i];
    return x;
}

}  // namespace pidrl

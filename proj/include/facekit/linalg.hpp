#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "facekit/tensor.hpp"

namespace facekit {

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    check(a.cols() == b.rows(), "matmul shape mismatch: ", a.rows(), "x", a.cols(), " by ",
          b.rows(), "x", b.cols());
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    }
    return out;
}

inline std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
    check(a.cols() == x.size(), "matvec shape mismatch: ", a.rows(), "x", a.cols(),
          " by vector of length ", x.size());
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

inline bool is_symmetric(const Matrix& m, double tol = 1e-9) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.max_abs());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            if (std::abs(m(i, j) - m(j, i)) > tol * scale) return false;
    return true;
}

struct EigenResult {
    std::vector<double> eigenvalues;  // descending
    Matrix eigenvectors;              // columns, orthonormal
};

// Cyclic Jacobi rotations. Adequate for the matrix sizes here (a few hundred
// rows at most).
inline EigenResult sym_eigendecompose(const Matrix& m, int max_sweeps = 100) {
    check(m.rows() == m.cols(), "eigendecompose needs a square matrix, got ", m.rows(), "x",
          m.cols());
    check(is_symmetric(m), "eigendecompose needs a symmetric matrix");
    const std::size_t n = m.rows();
    Matrix a = m;
    Matrix v = Matrix::identity(n);

    auto off_diag_norm = [&]() {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) acc += a(i, j) * a(i, j);
        return std::sqrt(acc);
    };

    const double eps = 1e-14 * std::max(1.0, a.max_abs()) * static_cast<double>(n);
    bool converged = (n <= 1) || off_diag_norm() <= eps;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0)
                                     ? 1.0 / (theta + std::sqrt(1.0 + theta * theta))
                                     : 1.0 / (theta - std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
        converged = off_diag_norm() <= eps;
    }
    check(converged, "jacobi eigensolver did not converge within ", max_sweeps, " sweeps");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    EigenResult res;
    res.eigenvalues.resize(n);
    res.eigenvectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        res.eigenvalues[k] = a(order[k], order[k]);
        for (std::size_t r = 0; r < n; ++r) res.eigenvectors(r, k) = v(r, order[k]);
    }
    return res;
}

// Lower-triangular Cholesky factor of an SPD matrix. A non-positive pivot is
// reported as an error rather than patched over.
inline Matrix cholesky(const Matrix& m) {
    check(m.rows() == m.cols(), "cholesky needs a square matrix, got ", m.rows(), "x", m.cols());
    check(is_symmetric(m), "cholesky needs a symmetric matrix");
    const std::size_t n = m.rows();
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double acc = m(i, j);
            for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
            if (i == j) {
                check(acc > 0.0, "matrix is not positive definite (pivot ", acc, " at row ", i,
                      ")");
                l(i, i) = std::sqrt(acc);
            } else {
                l(i, j) = acc / l(j, j);
            }
        }
    }
    return l;
}

inline std::vector<double> cholesky_solve_vec(const Matrix& l, const std::vector<double>& b) {
    const std::size_t n = l.rows();
    std::vector<double> y(n), x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = b[i];
        for (std::size_t k = 0; k < i; ++k) acc -= l(i, k) * y[k];
        y[i] = acc / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double acc = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) acc -= l(k, ii) * x[k];
        x[ii] = acc / l(ii, ii);
    }
    return x;
}

inline Matrix solve_spd(const Matrix& m, const Matrix& rhs) {
    check(m.rows() == rhs.rows(), "solve_spd shape mismatch: ", m.rows(), "x", m.cols(),
          " vs rhs ", rhs.rows(), "x", rhs.cols());
    const Matrix l = cholesky(m);
    Matrix x(rhs.rows(), rhs.cols());
    std::vector<double> col(rhs.rows());
    for (std::size_t j = 0; j < rhs.cols(); ++j) {
        for (std::size_t i = 0; i < rhs.rows(); ++i) col[i] = rhs(i, j);
        const std::vector<double> sol = cholesky_solve_vec(l, col);
        for (std::size_t i = 0; i < rhs.rows(); ++i) x(i, j) = sol[i];
    }
    return x;
}

inline Matrix inverse_spd(const Matrix& m) { return solve_spd(m, Matrix::identity(m.rows())); }

inline double logdet_spd(const Matrix& m) {
    const Matrix l = cholesky(m);
    double acc = 0.0;
    for (std::size_t i = 0; i < l.rows(); ++i) acc += std::log(l(i, i));
    return 2.0 * acc;
}

}  // namespace facekit

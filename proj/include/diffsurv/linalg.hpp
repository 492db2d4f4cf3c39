#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace diffsurv {

/// Small dense square matrix, row-major. Parameter blocks here are a handful
/// of coefficients, so nothing fancier is warranted.
struct Matrix {
    std::size_t n = 0;
    std::vector<double> a;

    Matrix() = default;
    explicit Matrix(std::size_t n_, double fill = 0.0) : n(n_), a(n_ * n_, fill) {}

    static Matrix identity(std::size_t n_) {
        Matrix m(n_);
        for (std::size_t i = 0; i < n_; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix diagonal(std::span<const double> d) {
        Matrix m(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

/// Lower Cholesky factor of a symmetric positive definite matrix.
inline Matrix cholesky(const Matrix& m) {
    Matrix L(m.n);
    for (std::size_t i = 0; i < m.n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            if (i == j) {
                if (!(s > 0.0))
                    throw std::runtime_error("cholesky: matrix is not positive definite");
                L(i, i) = std::sqrt(s);
            } else {
                L(i, j) = s / L(j, j);
            }
        }
    }
    return L;
}

/// Solve (L L^T) x = b given the lower factor L.
inline std::vector<double> cholesky_solve(const Matrix& L, std::span<const double> b) {
    std::vector<double> y(L.n);
    for (std::size_t i = 0; i < L.n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * y[k];
        y[i] = s / L(i, i);
    }
    std::vector<double> x(L.n);
    for (std::size_t ii = L.n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < L.n; ++k) s -= L(k, ii) * x[k];
        x[ii] = s / L(ii, ii);
    }
    return x;
}

/// Solve L^T x = b (used to draw from N(mu, (L L^T)^{-1})).
inline std::vector<double> upper_solve(const Matrix& L, std::span<const double> b) {
    std::vector<double> x(L.n);
    for (std::size_t ii = L.n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < L.n; ++k) s -= L(k, ii) * x[k];
        x[ii] = s / L(ii, ii);
    }
    return x;
}

/// log det (L L^T) = 2 sum log diag(L).
inline double cholesky_logdet(const Matrix& L) {
    double s = 0.0;
    for (std::size_t i = 0; i < L.n; ++i) s += std::log(L(i, i));
    return 2.0 * s;
}

}  // namespace diffsurv

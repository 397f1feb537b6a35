#include "elcd/autodiff/linalg.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include "elcd/errors.hpp"

namespace elcd::ad {

LuFactorization::LuFactorization(std::span<const double> matrix, std::size_t n)
    : n_(n), lu_(matrix.begin(), matrix.end()), perm_(n) {
    if (matrix.size() != n * n) throw ShapeError("LU: matrix storage does not match n = " + std::to_string(n));
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::abs(lu_[k * n + k]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::abs(lu_[i * n + k]);
            if (v > best) {
                best = v;
                p = i;
            }
        }
        if (!(best > kPivotTolerance)) throw SingularMatrixError(k, best);
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu_[k * n + j], lu_[p * n + j]);
            std::swap(perm_[k], perm_[p]);
        }
        const double pivot = lu_[k * n + k];
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = lu_[i * n + k] / pivot;
            lu_[i * n + k] = f;
            if (f == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) lu_[i * n + j] -= f * lu_[k * n + j];
        }
    }
}

void LuFactorization::solve(std::span<const double> b, std::span<double> y) const {
    const std::size_t n = n_;
    // P A = L U, so A y = b becomes L U y = P b.
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[perm_[i]];
        for (std::size_t j = 0; j < i; ++j) s -= lu_[i * n + j] * y[j];
        y[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = y[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= lu_[i * n + j] * y[j];
        y[i] = s / lu_[i * n + i];
    }
}

void LuFactorization::solve_transposed(std::span<const double> b, std::span<double> y) const {
    const std::size_t n = n_;
    // A^T = U^T L^T P, so solve U^T w = b, L^T u = w, then y = P^T u.
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t j = 0; j < i; ++j) s -= lu_[j * n + i] * w[j];
        w[i] = s / lu_[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = w[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= lu_[j * n + i] * w[j];
        w[i] = s;
    }
    for (std::size_t i = 0; i < n; ++i) y[perm_[i]] = w[i];
}

Tensor solve(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || a.dim(0) != a.dim(1) || b.rank() != 1 || b.dim(0) != a.dim(0)) {
        throw ShapeError("solve: " + shape_string(a.shape()) + " with rhs " + shape_string(b.shape()));
    }
    LuFactorization lu(a.values(), a.dim(0));
    Tensor y(b.shape());
    lu.solve(b.values(), y.values());
    return y;
}

Tensor inverse(const Tensor& a) {
    if (a.rank() != 2 || a.dim(0) != a.dim(1)) throw ShapeError("inverse: " + shape_string(a.shape()));
    const std::size_t n = a.dim(0);
    LuFactorization lu(a.values(), n);
    Tensor inv(Shape{n, n});
    std::vector<double> e(n), col(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[j] = 1.0;
        lu.solve(e, col);
        for (std::size_t i = 0; i < n; ++i) inv.at(i, j) = col[i];
    }
    return inv;
}

double determinant(const Tensor& a) {
    if (a.rank() != 2 || a.dim(0) != a.dim(1)) throw ShapeError("determinant: " + shape_string(a.shape()));
    const std::size_t n = a.dim(0);
    std::vector<double> m(a.values().begin(), a.values().end());
    double det = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(m[i * n + k]) > std::abs(m[p * n + k])) p = i;
        if (m[p * n + k] == 0.0) return 0.0;
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(m[k * n + j], m[p * n + j]);
            det = -det;
        }
        det *= m[k * n + k];
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = m[i * n + k] / m[k * n + k];
            for (std::size_t j = k; j < n; ++j) m[i * n + j] -= f * m[k * n + j];
        }
    }
    return det;
}

}  // namespace elcd::ad

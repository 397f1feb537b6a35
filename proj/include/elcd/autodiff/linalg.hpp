#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "elcd/autodiff/tensor.hpp"

namespace elcd::ad {

/// Pivots smaller than this in magnitude are treated as singular.
inline constexpr double kPivotTolerance = 1e-12;

/// Dense LU factorization with partial pivoting of one n x n matrix.
class LuFactorization {
public:
    /// Throws SingularMatrixError carrying the failing pivot index.
    explicit LuFactorization(std::span<const double> matrix, std::size_t n);

    std::size_t size() const noexcept { return n_; }
    /// Solves A y = b.
    void solve(std::span<const double> b, std::span<double> y) const;
    /// Solves A^T y = b.
    void solve_transposed(std::span<const double> b, std::span<double> y) const;

private:
    std::size_t n_;
    std::vector<double> lu_;
    std::vector<std::size_t> perm_;
};

/// Solves A y = b for a square rank-2 A and rank-1 b.
Tensor solve(const Tensor& a, const Tensor& b);
Tensor inverse(const Tensor& a);
double determinant(const Tensor& a);

}  // namespace elcd::ad

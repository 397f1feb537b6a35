#pragma once

#include <functional>

#include "elcd/autodiff/var.hpp"

namespace elcd::ad {

/// Row-wise batched map: (B, n) -> (B, m), each output row depending only on
/// the matching input row.
using BatchFn = std::function<Var(const Var&)>;

/// Jacobians of a row-wise map at each row of `points` (N, n) -> (N, m, n).
/// One reverse pass: every point is replicated m times and replica i seeds
/// output coordinate i.
Tensor batch_jacobian(const BatchFn& f, const Tensor& points, std::size_t out_dim);

/// Jacobian at a single point (n) -> (m, n).
Tensor jacobian(const BatchFn& f, const Tensor& point, std::size_t out_dim);

}  // namespace elcd::ad

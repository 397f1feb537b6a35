#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "elcd/autodiff/var.hpp"

// Recorded primitives. Shapes must match exactly; the only implicit
// broadcasting is a double scalar against a tensor. Row-wise repetition is
// always spelled out (repeat_rows, repeat_interleave, expand_last).
namespace elcd::ad {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

Var tanh(const Var& a);
Var relu(const Var& a);
Var softplus(const Var& a);
Var sigmoid(const Var& a);
Var square(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
/// max(a, lo); zero gradient where clamped.
Var clamp_min(const Var& a, double lo);

/// Sum of all entries, rank-0 result.
Var sum(const Var& a);
Var mean(const Var& a);
/// Euclidean norm of all entries, rank-0 result.
Var norm(const Var& a);
/// Sums out one axis.
Var sum_axis(const Var& a, std::size_t axis);

Var reshape(const Var& a, Shape shape);
/// Rank 2: swap axes. Rank 3: swap the last two axes of each batch entry.
Var transpose(const Var& a);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end);

/// [n...] -> [count, n...]
Var repeat_rows(const Var& a, std::size_t count);
/// [B, n...] -> [B * count, n...], each leading entry repeated count times.
Var repeat_interleave(const Var& a, std::size_t count);
/// [...] -> [..., n], copying each entry along a new last axis.
Var expand_last(const Var& a, std::size_t n);
/// [..., n] -> [..., n, n] with the vector on the diagonal.
Var diag_embed(const Var& a);

/// (m,k)x(k,n) or batched (B,m,k)x(B,k,n).
Var matmul(const Var& a, const Var& b);
/// (m,n)x(n) or batched (B,m,n)x(B,n).
Var matvec(const Var& a, const Var& x);
/// X W^T + b for X (B,in), W (out,in), b (out); pass an invalid Var for no bias.
Var linear(const Var& x, const Var& w, const Var& b = Var());

/// Solves A y = b by LU with partial pivoting; (n,n),(n) or batched
/// (B,n,n),(B,n). Gradients reach both A and b.
Var linear_solve(const Var& a, const Var& b);

Var softmax_last(const Var& a);
Var cumsum_last(const Var& a);
/// a (R,K), index[r] < K -> (R)
Var gather_last(const Var& a, const std::vector<std::size_t>& index);
/// mask[i] ? a[i] : b[i], same shapes.
Var select(const std::vector<std::uint8_t>& mask, const Var& a, const Var& b);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace elcd::ad

#include "elcd/autodiff/jacobian.hpp"

#include "elcd/autodiff/ops.hpp"
#include "elcd/errors.hpp"

namespace elcd::ad {

Tensor batch_jacobian(const BatchFn& f, const Tensor& points, std::size_t out_dim) {
    if (points.rank() != 2) throw ShapeError("batch_jacobian needs (N, n) points, got " + shape_string(points.shape()));
    const std::size_t count = points.dim(0), n = points.dim(1), m = out_dim;
    Tensor replicated(Shape{count * m, n});
    for (std::size_t p = 0; p < count; ++p)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) replicated[(p * m + i) * n + j] = points[p * n + j];
    Tensor selector(Shape{count * m, m});
    for (std::size_t p = 0; p < count; ++p)
        for (std::size_t i = 0; i < m; ++i) selector[(p * m + i) * m + i] = 1.0;

    const Var x = Var::leaf(std::move(replicated));
    const Var y = f(x);
    if (y.shape() != Shape{count * m, m}) {
        throw ShapeError("batch_jacobian: map returned " + shape_string(y.shape()) + ", expected " +
                         shape_string(Shape{count * m, m}));
    }
    const Var picked = sum(mul(y, Var::constant(std::move(selector))));
    const std::vector<Var> wrt{x};
    Tensor grad = gradients(picked, wrt).front();
    return grad.reshaped(Shape{count, m, n});
}

Tensor jacobian(const BatchFn& f, const Tensor& point, std::size_t out_dim) {
    const std::size_t n = point.size();
    Tensor j = batch_jacobian(f, point.reshaped(Shape{1, n}), out_dim);
    return j.reshaped(Shape{out_dim, n});
}

}  // namespace elcd::ad

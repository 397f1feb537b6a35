#include "elcd/autodiff/ops.hpp"

#include <cmath>
#include <memory>
#include <numeric>

#include "elcd/autodiff/linalg.hpp"
#include "elcd/errors.hpp"

namespace elcd::ad {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    }
}

struct AxisSplit {
    std::size_t outer, n, inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
    AxisSplit s{1, shape.at(axis), 1};
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

// Elementwise map with derivative computed from (input, output).
template <class F, class D>
Var unary(const Var& a, F f, D deriv) {
    const Tensor& x = a.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    auto out_copy = std::make_shared<Tensor>(y);
    NodePtr pa = a.node();
    return Var::record(std::move(y), {a}, [pa, out_copy, deriv](const Tensor& g, std::span<Tensor* const> pg) {
        Tensor& ga = *pg[0];
        const Tensor& x = pa->value;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], (*out_copy)[i]);
    });
}

double softplus_value(double x) {
    // log(1 + e^x) without overflow.
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid_value(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor y = a.value();
    y += b.value();
    return Var::record(std::move(y), {a, b}, [](const Tensor& g, std::span<Tensor* const> pg) {
        if (pg[0]) *pg[0] += g;
        if (pg[1]) *pg[1] += g;
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "subtract");
    Tensor y = a.value();
    y -= b.value();
    return Var::record(std::move(y), {a, b}, [](const Tensor& g, std::span<Tensor* const> pg) {
        if (pg[0]) *pg[0] += g;
        if (pg[1]) *pg[1] -= g;
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "multiply");
    const Tensor& x = a.value();
    const Tensor& z = b.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * z[i];
    NodePtr pa = a.node(), pb = b.node();
    return Var::record(std::move(y), {a, b}, [pa, pb](const Tensor& g, std::span<Tensor* const> pg) {
        if (pg[0])
            for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * pb->value[i];
        if (pg[1])
            for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] += g[i] * pa->value[i];
    });
}

Var div(const Var& a, const Var& b) {
    require_same_shape(a, b, "divide");
    const Tensor& x = a.value();
    const Tensor& z = b.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] / z[i];
    NodePtr pa = a.node(), pb = b.node();
    return Var::record(std::move(y), {a, b}, [pa, pb](const Tensor& g, std::span<Tensor* const> pg) {
        const Tensor& x = pa->value;
        const Tensor& z = pb->value;
        if (pg[0])
            for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] / z[i];
        if (pg[1])
            for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] -= g[i] * x[i] / (z[i] * z[i]);
    });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double s) {
    Tensor y = a.value();
    y *= s;
    return Var::record(std::move(y), {a}, [s](const Tensor& g, std::span<Tensor* const> pg) {
        for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += s * g[i];
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor y = a.value();
    for (double& v : y.values()) v += s;
    return Var::record(std::move(y), {a}, [](const Tensor& g, std::span<Tensor* const> pg) { *pg[0] += g; });
}

Var tanh(const Var& a) {
    return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
    return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var softplus(const Var& a) {
    return unary(a, softplus_value, [](double x, double) { return sigmoid_value(x); });
}

Var sigmoid(const Var& a) {
    return unary(a, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Var square(const Var& a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var exp(const Var& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(const Var& a) {
    return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var clamp_min(const Var& a, double lo) {
    return unary(
        a, [lo](double x) { return x > lo ? x : lo; }, [lo](double x, double) { return x > lo ? 1.0 : 0.0; });
}

Var sum(const Var& a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return Var::record(Tensor::scalar(s), {a}, [](const Tensor& g, std::span<Tensor* const> pg) {
        const double gv = g[0];
        for (double& v : pg[0]->values()) v += gv;
    });
}

Var mean(const Var& a) {
    const double n = static_cast<double>(a.size());
    return scale(sum(a), 1.0 / n);
}

Var norm(const Var& a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v * v;
    const double r = std::sqrt(s);
    NodePtr pa = a.node();
    return Var::record(Tensor::scalar(r), {a}, [pa, r](const Tensor& g, std::span<Tensor* const> pg) {
        if (r == 0.0) return;  // subgradient 0 at the origin
        const Tensor& x = pa->value;
        for (std::size_t i = 0; i < x.size(); ++i) (*pg[0])[i] += g[0] * x[i] / r;
    });
}

Var sum_axis(const Var& a, std::size_t axis) {
    const Shape& shape = a.shape();
    if (axis >= shape.size()) throw ShapeError("sum_axis: axis out of range for " + shape_string(shape));
    const auto s = split_axis(shape, axis);
    Shape out_shape = shape;
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    Tensor y(out_shape);
    const Tensor& x = a.value();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t k = 0; k < s.n; ++k)
            for (std::size_t i = 0; i < s.inner; ++i) y[o * s.inner + i] += x[(o * s.n + k) * s.inner + i];
    return Var::record(std::move(y), {a}, [s](const Tensor& g, std::span<Tensor* const> pg) {
        Tensor& ga = *pg[0];
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t k = 0; k < s.n; ++k)
                for (std::size_t i = 0; i < s.inner; ++i) ga[(o * s.n + k) * s.inner + i] += g[o * s.inner + i];
    });
}

Var reshape(const Var& a, Shape shape) {
    Tensor y = a.value().reshaped(std::move(shape));
    return Var::record(std::move(y), {a}, [](const Tensor& g, std::span<Tensor* const> pg) {
        Tensor& ga = *pg[0];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Var transpose(const Var& a) {
    const Shape& shape = a.shape();
    if (shape.size() != 2 && shape.size() != 3) {
        throw ShapeError("transpose needs rank 2 or 3, got " + shape_string(shape));
    }
    const std::size_t batch = shape.size() == 3 ? shape[0] : 1;
    const std::size_t m = shape[shape.size() - 2], n = shape.back();
    Shape out_shape = shape;
    std::swap(out_shape[out_shape.size() - 2], out_shape.back());
    const Tensor& x = a.value();
    Tensor y(out_shape);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) y[b * m * n + j * m + i] = x[b * m * n + i * n + j];
    return Var::record(std::move(y), {a}, [batch, m, n](const Tensor& g, std::span<Tensor* const> pg) {
        Tensor& ga = *pg[0];
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ga[b * m * n + i * n + j] += g[b * m * n + j * m + i];
    });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    const Shape& first = parts[0].shape();
    if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_string(first));
    std::vector<std::size_t> widths;
    Shape out_shape = first;
    out_shape[axis] = 0;
    for (const Var& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
        if (!ok) throw ShapeError("concat: " + shape_string(first) + " vs " + shape_string(s));
        widths.push_back(s[axis]);
        out_shape[axis] += s[axis];
    }
    const auto os = split_axis(out_shape, axis);
    Tensor y(out_shape);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const Tensor& x = parts[p].value();
        const std::size_t w = widths[p];
        for (std::size_t o = 0; o < os.outer; ++o)
            for (std::size_t k = 0; k < w; ++k)
                for (std::size_t i = 0; i < os.inner; ++i)
                    y[(o * os.n + offset + k) * os.inner + i] = x[(o * w + k) * os.inner + i];
        offset += w;
    }
    return Var::record(std::move(y), parts, [os, widths](const Tensor& g, std::span<Tensor* const> pg) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < widths.size(); ++p) {
            const std::size_t w = widths[p];
            if (pg[p]) {
                Tensor& gp = *pg[p];
                for (std::size_t o = 0; o < os.outer; ++o)
                    for (std::size_t k = 0; k < w; ++k)
                        for (std::size_t i = 0; i < os.inner; ++i)
                            gp[(o * w + k) * os.inner + i] += g[(o * os.n + offset + k) * os.inner + i];
            }
            offset += w;
        }
    });
}

Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
    const Shape& shape = a.shape();
    if (axis >= shape.size() || begin > end || end > shape[axis]) {
        throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") on axis " +
                         std::to_string(axis) + " of " + shape_string(shape));
    }
    const auto s = split_axis(shape, axis);
    const std::size_t w = end - begin;
    Shape out_shape = shape;
    out_shape[axis] = w;
    const Tensor& x = a.value();
    Tensor y(out_shape);
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t k = 0; k < w; ++k)
            for (std::size_t i = 0; i < s.inner; ++i)
                y[(o * w + k) * s.inner + i] = x[(o * s.n + begin + k) * s.inner + i];
    return Var::record(std::move(y), {a}, [s, w, begin](const Tensor& g, std::span<Tensor* const> pg) {
        Tensor& ga = *pg[0];
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t k = 0; k < w; ++k)
                for (std::size_t i = 0; i < s.inner; ++i)
                    ga[(o * s.n + begin + k) * s.inner + i] += g[(o * w + k) * s.inner + i];
    });
}

Var repeat_rows(const Var& a, std::size_t count) {
    Shape out_shape = a.shape();
    out_shape.insert(out_shape.begin(), count);
    const Tensor& x = a.value();
    const std::size_t n = x.size();
    Tensor y(out_shape);
    for (std::size_t r = 0; r < count; ++r)
        for (std::size_t i = 0; i < n; ++i) y[r * n + i] = x[i];
    return Var::record(std::move(y), {a}, [count, n](const Tensor& g, std::span<Tensor* const> pg) {
        Tensor& ga = *pg[0];
        for (std::size_t r = 0; r < count; ++r)
            for (std::size_t i = 0; i < n; ++i) ga[i] += g[r * n + i];
    });
}

Var repeat_interleave(const Var& a, std::size_t count) {
    const Shape& shape = a.shape();
    if (shape.empty()) throw ShapeError("repeat_interleave needs rank >= 1");
    Shape out_shape = shape;
    out_shape[0] *= count;
    const std::size_t rows = shape[0];
    const std::size_t n = a.size() / std::max<std::size_t>(rows, 1);
    const Tensor& x = a.value();
    Tensor y(out_shape);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < count; ++c)
            for (std::size_t i = 0; i < n; ++i) y[(r * count + c) * n + i] = x[r * n + i];
    return Var::record(std::move(y), {a}, [rows, count, n](const Tensor& g, std::span<Tensor* const> pg) {
        Tensor& ga = *pg[0];
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < count; ++c)
                for (std::size_t i = 0; i < n; ++i) ga[r * n + i] += g[(r * count + c) * n + i];
    });
}

Var expand_last(const Var& a, std::size_t n) {
    Shape out_shape = a.shape();
    out_shape.push_back(n);
    const Tensor& x = a.value();
    Tensor y(out_shape);
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t k = 0; k < n; ++k) y[i * n + k] = x[i];
    return Var::record(std::move(y), {a}, [n](const Tensor& g, std::span<Tensor* const> pg) {
        Tensor& ga = *pg[0];
        for (std::size_t i = 0; i < ga.size(); ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += g[i * n + k];
            ga[i] += s;
        }
    });
}

Var diag_embed(const Var& a) {
    const Shape& shape = a.shape();
    if (shape.empty()) throw ShapeError("diag_embed needs rank >= 1");
    const std::size_t n = shape.back();
    const std::size_t outer = a.size() / std::max<std::size_t>(n, 1);
    Shape out_shape = shape;
    out_shape.push_back(n);
    const Tensor& x = a.value();
    Tensor y(out_shape);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < n; ++i) y[o * n * n + i * n + i] = x[o * n + i];
    return Var::record(std::move(y), {a}, [outer, n](const Tensor& g, std::span<Tensor* const> pg) {
        Tensor& ga = *pg[0];
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < n; ++i) ga[o * n + i] += g[o * n * n + i * n + i];
    });
}

Var matmul(const Var& a, const Var& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    const bool plain = sa.size() == 2 && sb.size() == 2 && sa[1] == sb[0];
    const bool batched = sa.size() == 3 && sb.size() == 3 && sa[0] == sb[0] && sa[2] == sb[1];
    if (!plain && !batched) throw ShapeError("matmul: " + shape_string(sa) + " x " + shape_string(sb));
    const std::size_t batch = batched ? sa[0] : 1;
    const std::size_t m = sa[sa.size() - 2], k = sa.back(), n = sb.back();
    Tensor y(batched ? Shape{batch, m, n} : Shape{m, n});
    const Tensor& x = a.value();
    const Tensor& z = b.value();
    for (std::size_t bb = 0; bb < batch; ++bb) {
        const double* A = x.raw() + bb * m * k;
        const double* B = z.raw() + bb * k * n;
        double* C = y.raw() + bb * m * n;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = A[i * k + p];
                for (std::size_t j = 0; j < n; ++j) C[i * n + j] += aip * B[p * n + j];
            }
    }
    NodePtr pa = a.node(), pb = b.node();
    return Var::record(std::move(y), {a, b}, [pa, pb, batch, m, k, n](const Tensor& g, std::span<Tensor* const> pg) {
        for (std::size_t bb = 0; bb < batch; ++bb) {
            const double* G = g.raw() + bb * m * n;
            if (pg[0]) {
                // dA = G B^T
                const double* B = pb->value.raw() + bb * k * n;
                double* GA = pg[0]->raw() + bb * m * k;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * B[p * n + j];
                        GA[i * k + p] += s;
                    }
            }
            if (pg[1]) {
                // dB = A^T G
                const double* A = pa->value.raw() + bb * m * k;
                double* GB = pg[1]->raw() + bb * k * n;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = A[i * k + p];
                        for (std::size_t j = 0; j < n; ++j) GB[p * n + j] += aip * G[i * n + j];
                    }
            }
        }
    });
}

Var matvec(const Var& a, const Var& x) {
    const Shape& sa = a.shape();
    const Shape& sx = x.shape();
    const bool plain = sa.size() == 2 && sx.size() == 1 && sa[1] == sx[0];
    const bool batched = sa.size() == 3 && sx.size() == 2 && sa[0] == sx[0] && sa[2] == sx[1];
    if (!plain && !batched) throw ShapeError("matvec: " + shape_string(sa) + " x " + shape_string(sx));
    const std::size_t batch = batched ? sa[0] : 1;
    const std::size_t m = sa[sa.size() - 2], n = sa.back();
    Tensor y(batched ? Shape{batch, m} : Shape{m});
    const Tensor& A = a.value();
    const Tensor& X = x.value();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += A[(b * m + i) * n + j] * X[b * n + j];
            y[b * m + i] = s;
        }
    NodePtr pa = a.node(), px = x.node();
    return Var::record(std::move(y), {a, x}, [pa, px, batch, m, n](const Tensor& g, std::span<Tensor* const> pg) {
        const Tensor& A = pa->value;
        const Tensor& X = px->value;
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < m; ++i) {
                const double gi = g[b * m + i];
                if (pg[0])
                    for (std::size_t j = 0; j < n; ++j) (*pg[0])[(b * m + i) * n + j] += gi * X[b * n + j];
                if (pg[1])
                    for (std::size_t j = 0; j < n; ++j) (*pg[1])[b * n + j] += gi * A[(b * m + i) * n + j];
            }
    });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    const Shape& sx = x.shape();
    const Shape& sw = w.shape();
    if (sx.size() != 2 || sw.size() != 2 || sx[1] != sw[1]) {
        throw ShapeError("linear: input " + shape_string(sx) + " with weight " + shape_string(sw));
    }
    const bool has_bias = b.valid();
    if (has_bias && (b.shape().size() != 1 || b.shape()[0] != sw[0])) {
        throw ShapeError("linear: weight " + shape_string(sw) + " with bias " + shape_string(b.shape()));
    }
    const std::size_t rows = sx[0], in = sx[1], out = sw[0];
    const Tensor& X = x.value();
    const Tensor& W = w.value();
    Tensor y(Shape{rows, out});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out; ++o) {
            double s = has_bias ? b.value()[o] : 0.0;
            for (std::size_t i = 0; i < in; ++i) s += X[r * in + i] * W[o * in + i];
            y[r * out + o] = s;
        }
    std::vector<Var> parents{x, w};
    if (has_bias) parents.push_back(b);
    NodePtr px = x.node(), pw = w.node();
    return Var::record(std::move(y), std::move(parents),
                       [px, pw, rows, in, out, has_bias](const Tensor& g, std::span<Tensor* const> pg) {
                           const Tensor& X = px->value;
                           const Tensor& W = pw->value;
                           if (pg[0])
                               for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t o = 0; o < out; ++o) {
                                       const double gro = g[r * out + o];
                                       for (std::size_t i = 0; i < in; ++i) (*pg[0])[r * in + i] += gro * W[o * in + i];
                                   }
                           if (pg[1])
                               for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t o = 0; o < out; ++o) {
                                       const double gro = g[r * out + o];
                                       for (std::size_t i = 0; i < in; ++i) (*pg[1])[o * in + i] += gro * X[r * in + i];
                                   }
                           if (has_bias && pg[2])
                               for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t o = 0; o < out; ++o) (*pg[2])[o] += g[r * out + o];
                       });
}

Var linear_solve(const Var& a, const Var& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    const bool plain = sa.size() == 2 && sb.size() == 1 && sa[0] == sa[1] && sa[1] == sb[0];
    const bool batched = sa.size() == 3 && sb.size() == 2 && sa[1] == sa[2] && sa[0] == sb[0] && sa[2] == sb[1];
    if (!plain && !batched) throw ShapeError("linear_solve: " + shape_string(sa) + " with rhs " + shape_string(sb));
    const std::size_t batch = batched ? sa[0] : 1;
    const std::size_t n = sa.back();
    auto factors = std::make_shared<std::vector<LuFactorization>>();
    factors->reserve(batch);
    Tensor y(sb);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    for (std::size_t k = 0; k < batch; ++k) {
        factors->emplace_back(std::span<const double>(A.raw() + k * n * n, n * n), n);
        factors->back().solve(std::span<const double>(B.raw() + k * n, n), std::span<double>(y.raw() + k * n, n));
    }
    auto y_copy = std::make_shared<Tensor>(y);
    return Var::record(std::move(y), {a, b}, [factors, y_copy, batch, n](const Tensor& g, std::span<Tensor* const> pg) {
        // Adjoint rule: gb = A^{-T} g, gA = -gb y^T.
        std::vector<double> gb(n);
        for (std::size_t k = 0; k < batch; ++k) {
            (*factors)[k].solve_transposed(std::span<const double>(g.raw() + k * n, n), gb);
            if (pg[1])
                for (std::size_t i = 0; i < n; ++i) (*pg[1])[k * n + i] += gb[i];
            if (pg[0])
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j) (*pg[0])[k * n * n + i * n + j] -= gb[i] * (*y_copy)[k * n + j];
        }
    });
}

Var softmax_last(const Var& a) {
    const Shape& shape = a.shape();
    if (shape.empty()) throw ShapeError("softmax_last needs rank >= 1");
    const std::size_t n = shape.back();
    const std::size_t rows = a.size() / n;
    const Tensor& x = a.value();
    Tensor y(shape);
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = x[r * n];
        for (std::size_t k = 1; k < n; ++k) mx = std::max(mx, x[r * n + k]);
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += (y[r * n + k] = std::exp(x[r * n + k] - mx));
        for (std::size_t k = 0; k < n; ++k) y[r * n + k] /= s;
    }
    auto y_copy = std::make_shared<Tensor>(y);
    return Var::record(std::move(y), {a}, [y_copy, rows, n](const Tensor& g, std::span<Tensor* const> pg) {
        const Tensor& s = *y_copy;
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t k = 0; k < n; ++k) dot += g[r * n + k] * s[r * n + k];
            for (std::size_t k = 0; k < n; ++k) (*pg[0])[r * n + k] += s[r * n + k] * (g[r * n + k] - dot);
        }
    });
}

Var cumsum_last(const Var& a) {
    const Shape& shape = a.shape();
    if (shape.empty()) throw ShapeError("cumsum_last needs rank >= 1");
    const std::size_t n = shape.back();
    const std::size_t rows = a.size() / n;
    const Tensor& x = a.value();
    Tensor y(shape);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) y[r * n + k] = (s += x[r * n + k]);
    }
    return Var::record(std::move(y), {a}, [rows, n](const Tensor& g, std::span<Tensor* const> pg) {
        for (std::size_t r = 0; r < rows; ++r) {
            double s = 0.0;
            for (std::size_t k = n; k-- > 0;) {
                s += g[r * n + k];
                (*pg[0])[r * n + k] += s;
            }
        }
    });
}

Var gather_last(const Var& a, const std::vector<std::size_t>& index) {
    const Shape& shape = a.shape();
    if (shape.size() != 2 || index.size() != shape[0]) {
        throw ShapeError("gather_last: " + shape_string(shape) + " with " + std::to_string(index.size()) + " indices");
    }
    const std::size_t rows = shape[0], n = shape[1];
    const Tensor& x = a.value();
    Tensor y(Shape{rows});
    for (std::size_t r = 0; r < rows; ++r) {
        if (index[r] >= n) throw ShapeError("gather_last: index " + std::to_string(index[r]) + " out of range");
        y[r] = x[r * n + index[r]];
    }
    return Var::record(std::move(y), {a}, [index, n](const Tensor& g, std::span<Tensor* const> pg) {
        for (std::size_t r = 0; r < index.size(); ++r) (*pg[0])[r * n + index[r]] += g[r];
    });
}

Var select(const std::vector<std::uint8_t>& mask, const Var& a, const Var& b) {
    require_same_shape(a, b, "select");
    if (mask.size() != a.size()) throw ShapeError("select: mask size does not match " + shape_string(a.shape()));
    const Tensor& x = a.value();
    const Tensor& z = b.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = mask[i] ? x[i] : z[i];
    return Var::record(std::move(y), {a, b}, [mask](const Tensor& g, std::span<Tensor* const> pg) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (mask[i]) {
                if (pg[0]) (*pg[0])[i] += g[i];
            } else if (pg[1]) {
                (*pg[1])[i] += g[i];
            }
        }
    });
}

}  // namespace elcd::ad

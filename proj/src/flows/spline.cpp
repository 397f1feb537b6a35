#include "elcd/flows/spline.hpp"

#include <algorithm>
#include <cmath>

#include "elcd/errors.hpp"

namespace elcd::flows {

using ad::Shape;
using ad::Tensor;
using ad::Var;
using nn::Dual;

namespace {

// softplus(kDerivativeShift) == 1 - kMinDerivative
const double kDerivativeShift = std::log(std::expm1(1.0 - kMinDerivative));

// softplus(kDerivativeShift) as evaluated by the recorded op, so that
// 1 + softplus(0 + shift) - offset is exactly 1.
double derivative_offset() {
    ad::NoGradGuard guard;
    static const double offset = ad::softplus(Var::constant(Tensor::scalar(kDerivativeShift))).value().item();
    return offset;
}

std::size_t find_bin(const std::vector<double>& knots, double v) {
    // knots[k] <= v < knots[k+1], clamped to a valid bin
    const auto it = std::upper_bound(knots.begin(), knots.end(), v);
    const std::size_t k = static_cast<std::size_t>(it - knots.begin());
    return std::clamp<std::size_t>(k == 0 ? 0 : k - 1, 0, knots.size() - 2);
}

Dual constant_column(std::size_t rows, double value, std::size_t directions) {
    return Dual::constant(Var::constant(Tensor(Shape{rows, 1}, value)), directions);
}

// Positive bin sizes summing to 2 * bound, as knot positions from -bound to bound.
Dual knot_positions(const Dual& raw, double bound) {
    const std::size_t rows = raw.value.dim(0), bins = raw.value.dim(1);
    const std::size_t n = raw.directions();
    const double scale = 1.0 - kMinBinFraction * static_cast<double>(bins);
    Dual frac = nn::dual::add_scalar(nn::dual::scale(nn::dual::softmax_last(raw), scale), kMinBinFraction);
    Dual inner = nn::dual::slice(nn::dual::cumsum_last(frac), 1, 0, bins - 1);
    inner = nn::dual::add_scalar(nn::dual::scale(inner, 2.0 * bound), -bound);
    return nn::dual::concat({constant_column(rows, -bound, n), inner, constant_column(rows, bound, n)}, 1);
}

}  // namespace

SplineKnots spline_knots(std::span<const double> raw, const SplineShape& shape) {
    if (raw.size() != shape.raw_size()) {
        throw ShapeError("spline expects " + std::to_string(shape.raw_size()) + " raw parameters, got " +
                         std::to_string(raw.size()));
    }
    for (double v : raw)
        if (!std::isfinite(v)) throw NumericalError("non-finite spline parameter");
    ad::NoGradGuard guard;
    const Dual row = Dual::constant(Var::constant(Tensor(Shape{1, raw.size()}, std::vector<double>(raw.begin(), raw.end()))), 0);
    const SplineKnotsVar k = spline_knots(row, shape);
    const auto& xs = k.x.value.value().data();
    const auto& ys = k.y.value.value().data();
    const auto& ds = k.d.value.value().data();
    return SplineKnots{xs, ys, ds};
}

SplineKnotsVar spline_knots(const Dual& raw, const SplineShape& shape) {
    const std::size_t k = shape.bins;
    if (raw.value.shape().size() != 2 || raw.value.dim(1) != shape.raw_size()) {
        throw ShapeError("spline parameters " + ad::shape_string(raw.value.shape()) + ", expected (R, " +
                         std::to_string(shape.raw_size()) + ")");
    }
    const std::size_t rows = raw.value.dim(0), n = raw.directions();
    SplineKnotsVar out;
    out.x = knot_positions(nn::dual::slice(raw, 1, 0, k), shape.bound);
    out.y = knot_positions(nn::dual::slice(raw, 1, k, 2 * k), shape.bound);
    Dual inner = nn::dual::slice(raw, 1, 2 * k, 3 * k - 1);
    // 1 + softplus(raw + shift) - softplus(shift): slope 1 at raw 0, bounded below by kMinDerivative
    inner = nn::dual::add_scalar(nn::dual::softplus(nn::dual::add_scalar(inner, kDerivativeShift)),
                                 1.0 - derivative_offset());
    out.d = nn::dual::concat({constant_column(rows, 1.0, n), inner, constant_column(rows, 1.0, n)}, 1);
    return out;
}

std::pair<double, double> spline_forward(double x, const SplineKnots& kn) {
    const double bound = kn.x.back();
    if (!(x > -bound && x < bound)) return {x, 1.0};
    const std::size_t k = find_bin(kn.x, x);
    const double w = kn.x[k + 1] - kn.x[k], h = kn.y[k + 1] - kn.y[k];
    const double s = h / w, xi = (x - kn.x[k]) / w;
    const double d0 = kn.d[k], d1 = kn.d[k + 1];
    const double t = xi * (1.0 - xi);
    // Written as a deviation from the identity so that unit slopes give y == x exactly.
    const double sg = s - 1.0, e0 = d0 - 1.0, e1 = d1 - 1.0;
    const double r = sg * (2.0 * xi * xi - xi) + sg * sg * xi * xi +
                     t * (sg + e0 + sg * e0 - xi * (e0 + e1) + 2.0 * sg * xi);
    const double denom = 1.0 + sg + (e0 + e1 - 2.0 * sg) * t;
    const double y = x + (kn.y[k] - kn.x[k]) + w * r / denom;
    const double dy = s * s * (d1 * xi * xi + 2.0 * s * t + d0 * (1.0 - xi) * (1.0 - xi)) / (denom * denom);
    return {y, dy};
}

double spline_inverse(double y, const SplineKnots& kn) {
    const double bound = kn.y.back();
    if (!(y > -bound && y < bound)) return y;
    const std::size_t k = find_bin(kn.y, y);
    const double w = kn.x[k + 1] - kn.x[k], h = kn.y[k + 1] - kn.y[k];
    const double s = h / w, d0 = kn.d[k], d1 = kn.d[k + 1];
    const double dy = y - kn.y[k];
    const double e = d1 + d0 - 2.0 * s;
    const double a = h * (s - d0) + dy * e;
    const double b = h * d0 - dy * e;
    const double c = -s * dy;
    const double disc = std::max(b * b - 4.0 * a * c, 0.0);
    const double xi = (2.0 * c) / (-b - std::sqrt(disc));
    double x = std::clamp(kn.x[k] + xi * w, kn.x[k], kn.x[k + 1]);
    // Newton polish against the forward map; the closed form loses digits in steep bins.
    double err = spline_forward(x, kn).first - y;
    for (int it = 0; it < 3 && err != 0.0; ++it) {
        const auto [fx, dfx] = spline_forward(x, kn);
        const double cand = x - (fx - y) / dfx;
        const double cand_err = spline_forward(cand, kn).first - y;
        if (!(std::abs(cand_err) < std::abs(err))) break;
        x = cand;
        err = cand_err;
    }
    return x;
}

Dual spline_apply(const Dual& x, const SplineKnotsVar& kn) {
    namespace dl = nn::dual;
    const Tensor& xv = x.value.value();
    const std::size_t rows = xv.size();
    if (xv.rank() != 1 || kn.x.value.dim(0) != rows) {
        throw ShapeError("spline input " + ad::shape_string(xv.shape()) + " with knots " +
                         ad::shape_string(kn.x.value.shape()));
    }
    const std::size_t knots = kn.x.value.dim(1);
    const double bound = kn.x.value.value()[knots - 1];

    std::vector<std::uint8_t> inside(rows);
    std::vector<std::size_t> lo(rows), hi(rows);
    const Tensor& kx = kn.x.value.value();
    std::vector<double> row_knots(knots);
    for (std::size_t r = 0; r < rows; ++r) {
        inside[r] = (xv[r] > -bound && xv[r] < bound) ? 1 : 0;
        for (std::size_t j = 0; j < knots; ++j) row_knots[j] = kx[r * knots + j];
        lo[r] = inside[r] ? find_bin(row_knots, xv[r]) : 0;
        hi[r] = lo[r] + 1;
    }
    // Outside entries run through bin 0 at its left knot so every branch stays finite.
    const Dual left = dl::gather_last(kn.x, lo);
    const Dual xin = dl::select(inside, x, left);
    const Dual x0 = left, x1 = dl::gather_last(kn.x, hi);
    const Dual y0 = dl::gather_last(kn.y, lo), y1 = dl::gather_last(kn.y, hi);
    const Dual d0 = dl::gather_last(kn.d, lo), d1 = dl::gather_last(kn.d, hi);
    const Dual w = dl::sub(x1, x0), h = dl::sub(y1, y0);
    const Dual xi = dl::div(dl::sub(xin, x0), w);
    const Dual t = dl::mul(xi, dl::add_scalar(dl::scale(xi, -1.0), 1.0));
    const Dual sg = dl::add_scalar(dl::div(h, w), -1.0);
    const Dual e0 = dl::add_scalar(d0, -1.0), e1 = dl::add_scalar(d1, -1.0);
    const Dual xi2 = dl::mul(xi, xi);
    const Dual e01 = dl::add(e0, e1);
    Dual r = dl::add(dl::mul(sg, dl::sub(dl::scale(xi2, 2.0), xi)), dl::mul(dl::mul(sg, sg), xi2));
    Dual inner = dl::add(dl::add(sg, e0), dl::mul(sg, e0));
    inner = dl::add(dl::sub(inner, dl::mul(xi, e01)), dl::scale(dl::mul(sg, xi), 2.0));
    r = dl::add(r, dl::mul(t, inner));
    const Dual denom = dl::add_scalar(dl::add(sg, dl::mul(dl::sub(e01, dl::scale(sg, 2.0)), t)), 1.0);
    const Dual y = dl::add(dl::add(xin, dl::sub(y0, x0)), dl::div(dl::mul(w, r), denom));
    return dl::select(inside, y, x);
}

}  // namespace elcd::flows

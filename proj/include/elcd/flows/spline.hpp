#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "elcd/nn/dual.hpp"

namespace elcd::flows {

struct SplineShape {
    std::size_t bins = 10;
    double bound = 10.0;

    /// Raw parameters per transformed coordinate: bins widths, bins heights
    /// and bins - 1 interior derivatives (the two boundary slopes are 1).
    std::size_t raw_size() const { return 3 * bins - 1; }
};

inline constexpr double kMinBinFraction = 1e-3;
inline constexpr double kMinDerivative = 1e-3;

/// Normalized knots of one monotone rational-quadratic spline. Each vector
/// has bins + 1 entries; x and y run from -bound to bound exactly.
struct SplineKnots {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> d;
};

/// Normalizes one raw parameter row (raw_size() entries).
SplineKnots spline_knots(std::span<const double> raw, const SplineShape& shape);

/// Value and slope; identity with slope 1 outside [-bound, bound].
std::pair<double, double> spline_forward(double x, const SplineKnots& knots);
double spline_inverse(double y, const SplineKnots& knots);

/// Normalized knots of R splines as recorded values, each (R, bins + 1).
struct SplineKnotsVar {
    nn::Dual x;
    nn::Dual y;
    nn::Dual d;
};

/// raw: (R, raw_size())
SplineKnotsVar spline_knots(const nn::Dual& raw, const SplineShape& shape);

/// Elementwise spline of x (R) with spline r applied to x[r]. Tangents of
/// both x and the knots are propagated.
nn::Dual spline_apply(const nn::Dual& x, const SplineKnotsVar& knots);

}  // namespace elcd::flows

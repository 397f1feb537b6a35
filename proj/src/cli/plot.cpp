#include "elcd/cli/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "elcd/errors.hpp"
#include "elcd/rollout/rollout.hpp"

namespace elcd::cli {

using ad::Shape;
using ad::Tensor;

void PlotOptions::validate(std::size_t data_dim) const {
    if (data_dim < 2) throw ConfigError("plot needs data of dimension >= 2, got " + std::to_string(data_dim));
    if (dim_x >= data_dim || dim_y >= data_dim || dim_x == dim_y) {
        throw ConfigError("invalid plot dims " + std::to_string(dim_x) + "," + std::to_string(dim_y) +
                          " for dimension " + std::to_string(data_dim));
    }
    if (grid == 0) throw ConfigError("plot grid must be positive");
    if (!(size > 100.0)) throw ConfigError("plot size must exceed 100 px");
}

namespace {

constexpr double kMargin = 40.0;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};

struct Frame {
    double x0, x1, y0, y1, size;
    double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * (size - 2 * kMargin); }
    double py(double y) const { return size - kMargin - (y - y0) / (y1 - y0) * (size - 2 * kMargin); }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

void widen(double& lo, double& hi) {
    if (hi - lo < 1e-12) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.1 * (hi - lo);
    lo -= pad;
    hi += pad;
}

}  // namespace

std::string render_svg(const data::Dataset& raw, const model::DynamicsModel* model, const data::Standardization& stats,
                       const PlotOptions& opts) {
    raw.validate();
    opts.validate(raw.dim());
    const std::size_t d = raw.dim(), i = opts.dim_x, j = opts.dim_y;
    if (model && model->dim() != d) {
        throw ShapeError("plot: model dimension " + std::to_string(model->dim()) + " vs data " + std::to_string(d));
    }

    Tensor target_raw;
    if (model) target_raw = stats.invert_states(model->equilibrium().reshaped(Shape{1, d})).row(0);

    Frame f{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), opts.size};
    auto grow = [&f](double x, double y) {
        f.x0 = std::min(f.x0, x);
        f.x1 = std::max(f.x1, x);
        f.y0 = std::min(f.y0, y);
        f.y1 = std::max(f.y1, y);
    };
    for (const auto& t : raw.trajectories)
        for (std::size_t k = 0; k < t.length(); ++k) grow(t.states.at(k, i), t.states.at(k, j));
    if (model) grow(target_raw[i], target_raw[j]);
    widen(f.x0, f.x1);
    widen(f.y0, f.y1);

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(opts.size) << "\" height=\""
       << num(opts.size) << "\" viewBox=\"0 0 " << num(opts.size) << " " << num(opts.size) << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << num(opts.size) << "\" height=\"" << num(opts.size)
       << "\" fill=\"white\"/>\n";
    os << "<rect x=\"" << num(kMargin) << "\" y=\"" << num(kMargin) << "\" width=\"" << num(opts.size - 2 * kMargin)
       << "\" height=\"" << num(opts.size - 2 * kMargin) << "\" fill=\"none\" stroke=\"#999\"/>\n";
    os << "<text x=\"" << num(opts.size / 2) << "\" y=\"" << num(opts.size - 10) << "\" text-anchor=\"middle\">x" << i
       << "</text>\n";
    os << "<text x=\"12\" y=\"" << num(opts.size / 2) << "\" text-anchor=\"middle\">x" << j << "</text>\n";

    if (model) {
        // Quiver over cell centers.
        const std::size_t g = opts.grid;
        const double cell = (opts.size - 2 * kMargin) / static_cast<double>(g);
        Tensor pts(Shape{g * g, d});
        for (std::size_t a = 0; a < g; ++a)
            for (std::size_t b = 0; b < g; ++b) {
                const std::size_t r = a * g + b;
                for (std::size_t k = 0; k < d; ++k) pts.at(r, k) = target_raw[k];
                pts.at(r, i) = f.x0 + (static_cast<double>(b) + 0.5) / static_cast<double>(g) * (f.x1 - f.x0);
                pts.at(r, j) = f.y0 + (static_cast<double>(a) + 0.5) / static_cast<double>(g) * (f.y1 - f.y0);
            }
        const Tensor vel = stats.invert_velocities(model->predict(stats.apply_states(pts)));
        std::vector<double> dx(g * g), dy(g * g);
        double longest = 0.0;
        for (std::size_t r = 0; r < g * g; ++r) {
            // Pixel-space direction (y axis points down).
            dx[r] = (f.px(pts.at(r, i) + vel.at(r, i)) - f.px(pts.at(r, i)));
            dy[r] = (f.py(pts.at(r, j) + vel.at(r, j)) - f.py(pts.at(r, j)));
            longest = std::max(longest, std::hypot(dx[r], dy[r]));
        }
        const double full = 0.8 * cell;
        os << "<g stroke=\"#555\" fill=\"none\" stroke-width=\"1\">\n";
        for (std::size_t r = 0; r < g * g; ++r) {
            const double n = std::hypot(dx[r], dy[r]);
            double scale = 0.0;
            if (n > 0.0 && std::isfinite(n)) scale = opts.raw_arrows ? full / longest : full / n;
            const double ux = dx[r] * scale, uy = dy[r] * scale;
            const double cx = f.px(pts.at(r, i)) - ux / 2, cy = f.py(pts.at(r, j)) - uy / 2;
            const double tx = cx + ux, ty = cy + uy;
            os << "<path class=\"arrow\" d=\"M" << num(cx) << " " << num(cy) << " L" << num(tx) << " " << num(ty);
            const double len = std::hypot(ux, uy);
            if (len > 0.0) {
                const double h = std::min(0.35 * len, 4.0), bx = -ux / len * h, by = -uy / len * h;
                os << " M" << num(tx + bx - 0.5 * by) << " " << num(ty + by + 0.5 * bx) << " L" << num(tx) << " "
                   << num(ty) << " L" << num(tx + bx + 0.5 * by) << " " << num(ty + by - 0.5 * bx);
            }
            os << "\"/>\n";
        }
        os << "</g>\n";
    }

    for (std::size_t t = 0; t < raw.trajectories.size(); ++t) {
        const auto& tr = raw.trajectories[t];
        os << "<polyline class=\"demo\" fill=\"none\" stroke=\"" << kPalette[t % 8] << "\" stroke-width=\"2\" points=\"";
        for (std::size_t k = 0; k < tr.length(); ++k)
            os << (k ? " " : "") << num(f.px(tr.states.at(k, i))) << "," << num(f.py(tr.states.at(k, j)));
        os << "\"/>\n";
    }

    if (model && opts.rollouts) {
        for (std::size_t t = 0; t < raw.trajectories.size(); ++t) {
            const auto& tr = raw.trajectories[t];
            const double dt = rollout::median_interval(tr);
            const rollout::IntegratorConfig cfg{rollout::Scheme::Rk4, dt, std::max(tr.duration(), dt)};
            const Tensor start = stats.apply_states(tr.states.row(0).reshaped(Shape{1, d})).row(0);
            const Tensor path = stats.invert_states(rollout::integrate(model->field(), start, cfg).states);
            os << "<path class=\"rollout\" fill=\"none\" stroke=\"black\" stroke-dasharray=\"4 3\" d=\"";
            for (std::size_t k = 0; k < path.dim(0); ++k)
                os << (k ? " L" : "M") << num(f.px(path.at(k, i))) << " " << num(f.py(path.at(k, j)));
            os << "\"/>\n";
        }
    }
    if (model) {
        os << "<circle class=\"target\" cx=\"" << num(f.px(target_raw[i])) << "\" cy=\"" << num(f.py(target_raw[j]))
           << "\" r=\"5\" fill=\"black\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace elcd::cli

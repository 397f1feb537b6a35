#pragma once

#include <string>

#include "elcd/data/dataset.hpp"
#include "elcd/model/dynamics.hpp"

namespace elcd::cli {

struct PlotOptions {
    std::size_t dim_x = 0;
    std::size_t dim_y = 1;
    std::size_t grid = 20;    // arrows per side
    bool raw_arrows = false;  // keep relative speeds instead of equal lengths
    bool rollouts = true;     // model rollouts from each demonstration start
    double size = 640.0;      // canvas width and height in px

    void validate(std::size_t data_dim) const;
};

/// SVG 1.1 document: one `polyline.demo` per trajectory, and with a model a
/// `path.rollout` per trajectory plus grid x grid `path.arrow` elements of
/// the field on the (dim_x, dim_y) plane, other coordinates at the
/// equilibrium. `raw` is in raw units; the model works in the coordinates
/// given by `stats`.
std::string render_svg(const data::Dataset& raw, const model::DynamicsModel* model,
                       const data::Standardization& stats, const PlotOptions& opts);

}  // namespace elcd::cli

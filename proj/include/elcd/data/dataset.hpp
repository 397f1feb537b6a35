#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "elcd/autodiff/tensor.hpp"

namespace elcd::data {

struct Trajectory {
    std::vector<double> times;  // strictly increasing
    ad::Tensor states;          // (T, d)
    ad::Tensor velocities;      // (T, d)

    std::size_t length() const { return times.size(); }
    std::size_t dim() const { return states.rank() == 2 ? states.dim(1) : 0; }
    double duration() const { return times.back() - times.front(); }
    /// Throws ShapeError / NumericalError / ConfigError on a broken invariant.
    void validate() const;
};

/// Per-dimension affine map raw = standardized * stddev + mean.
struct Standardization {
    std::vector<double> mean;
    std::vector<double> stddev;

    static Standardization identity(std::size_t d);
    bool is_identity() const;
    /// Rows of raw states -> standardized states.
    ad::Tensor apply_states(const ad::Tensor& raw) const;
    ad::Tensor apply_velocities(const ad::Tensor& raw) const;
    ad::Tensor invert_states(const ad::Tensor& standardized) const;
    ad::Tensor invert_velocities(const ad::Tensor& standardized) const;
    nlohmann::json to_json() const;
    static Standardization from_json(const nlohmann::json& j);
};

struct Dataset {
    std::vector<Trajectory> trajectories;
    /// Transform already applied to the stored values (identity for raw data).
    Standardization stats;
    /// Generator name, config and seed; written to the sidecar.
    nlohmann::json meta = nlohmann::json::object();

    std::size_t dim() const;
    std::size_t sample_count() const;
    /// All states / velocities stacked in trajectory order, (N, d).
    ad::Tensor pooled_states() const;
    ad::Tensor pooled_velocities() const;
    void validate() const;
};

/// Builds a dataset from trajectories, with identity standardization.
Dataset make_dataset(std::vector<Trajectory> trajectories, nlohmann::json meta = nlohmann::json::object());

/// Standardizes with the pooled per-dimension mean and population standard
/// deviation of the current values. Returns the dataset (whose stats now map
/// back to raw units) and the step that was applied.
std::pair<Dataset, Standardization> standardize(const Dataset& dataset);
/// Maps values back to raw units; stats become the identity.
Dataset destandardize(const Dataset& dataset);

/// Drops the first `count` samples of every trajectory.
Dataset trim_initial(const Dataset& dataset, std::size_t count);

/// Stacks state dimensions of time-aligned trajectories: trajectory i of the
/// output concatenates trajectory i of every input, each linearly
/// interpolated on a common grid of `min length` points spanning the common
/// time interval.
Dataset compose(const std::vector<Dataset>& inputs);

/// Sidecar path: same stem with `.meta.json`.
std::filesystem::path meta_path(const std::filesystem::path& csv_path);

/// Trajectory CSV: header traj_id,t,x0..x{d-1},v0..v{d-1}; '#' comments.
/// Also writes / reads the metadata sidecar when present.
void save_csv(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_csv(const std::filesystem::path& path);

}  // namespace elcd::data

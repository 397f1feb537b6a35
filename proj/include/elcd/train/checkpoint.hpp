#pragma once

#include <filesystem>
#include <memory>

#include "elcd/data/dataset.hpp"
#include "elcd/model/dynamics.hpp"

namespace elcd::train {

constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    std::unique_ptr<model::DynamicsModel> model;
    data::Standardization standardization;
    nlohmann::json train_config = nlohmann::json::object();
};

/// Document with sorted keys; parameter data as hexadecimal float64 strings.
nlohmann::json checkpoint_json(const model::DynamicsModel& m, const data::Standardization& stats,
                               const nlohmann::json& train_config = nlohmann::json::object());
std::string checkpoint_text(const model::DynamicsModel& m, const data::Standardization& stats,
                            const nlohmann::json& train_config = nlohmann::json::object());
void save_checkpoint(const std::filesystem::path& path, const model::DynamicsModel& m,
                     const data::Standardization& stats,
                     const nlohmann::json& train_config = nlohmann::json::object());

/// Throws ParseError (corrupt text), ConfigError (version, missing or
/// unknown entries) or ShapeError (naming the parameter).
Checkpoint checkpoint_from_json(const nlohmann::json& j);
Checkpoint parse_checkpoint(const std::string& text);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string hex_double(double v);
double parse_hex_double(const std::string& s);

}  // namespace elcd::train

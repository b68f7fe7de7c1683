#pragma once

#include "minsurro/core/surrogate.hpp"

#include "json.hpp"

#include <filesystem>

namespace minsurro {

constexpr int kModelFormatVersion = 1;

/// Self-describing JSON: dimensions, component and head structure, input
/// map, γ, the flat Θ and free-form metadata.
nlohmann::ordered_json model_to_json(const SurrogateModel& model,
                                     const nlohmann::ordered_json& metadata = nlohmann::ordered_json::object());
/// Throws DataError on a version mismatch, schema violation or non-finite Θ.
SurrogateModel model_from_json(const nlohmann::json& j);

void save_model(const SurrogateModel& model, const std::filesystem::path& path,
                const nlohmann::ordered_json& metadata = nlohmann::ordered_json::object());
SurrogateModel load_model(const std::filesystem::path& path);

} // namespace minsurro

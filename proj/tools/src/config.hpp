#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "bodylift/trainer.hpp"

namespace bodylift::cli {

/// Seed used when neither --seed nor the config file sets one.
/// BODYLIFT_SEED overrides the built-in default of 0.
std::uint64_t default_seed();

/// JSON view of a training config, keys as accepted in --config files.
nlohmann::ordered_json to_json(const train::TrainConfig& config);

/// Applies the keys present in `j` onto `config`. Unknown keys are a ConfigError
/// so typos do not silently fall back to defaults.
void apply_json(const nlohmann::json& j, train::TrainConfig& config);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace bodylift::cli

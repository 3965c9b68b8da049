#pragma once

// JSON forms of specs and configs, shared by the model file, reports and the CLI.

#include "json.hpp"
#include "striatum/classifiers.hpp"

namespace striatum {

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);

std::string_view to_string(Optimizer opt);
std::optional<Optimizer> parse_optimizer(std::string_view text);

}  // namespace striatum

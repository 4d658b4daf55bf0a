#pragma once

// Ingestion and serialization: network.csv, model.json and the JSON encoding
// of Params shared with truth.json.

#include "mlta/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace mlta {

inline constexpr int kModelSchemaVersion = 1;

/// Reads `layer,y1..yR,x1..xJ`. Rows are regrouped by layer in order of first
/// appearance and a constant column is prepended to X. When `R` is given the
/// header must carry exactly that many y columns.
NetworkData load_network(const std::string& path, std::optional<int> R = std::nullopt);

/// Parses CSV text (same format as load_network).
NetworkData parse_network(const std::string& text, std::optional<int> R = std::nullopt);

/// Inverse of load_network: the intercept column is dropped, reals use 17
/// significant digits.
std::string format_network(const NetworkData& data);
void write_network(const NetworkData& data, const std::string& path);

nlohmann::json params_to_json(const Params& p);
Params params_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const FitResult& r);
FitResult model_from_json(const nlohmann::json& j);

void write_model(const FitResult& result, const std::string& path);
FitResult read_model(const std::string& path);

/// Writes `content` to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace mlta

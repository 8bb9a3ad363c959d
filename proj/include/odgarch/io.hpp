#pragma once

#include "odgarch/likelihood.hpp"
#include "odgarch/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace odgarch {

/// Shortest round-trip decimal form, independent of the C locale.
std::string format_number(double v);
/// Locale-independent parse of a complete decimal token. Throws std::invalid_argument.
double parse_number(std::string_view token);

/// NBIN/TING: {"omega","a","b","r"|"tau"}; NM: {"d","gamma","omega","A","b"}.
nlohmann::json params_to_json(const ModelParams& params);
ModelParams params_from_json(ModelKind kind, const nlohmann::json& j);

/// A number for scalar states, an array for NM.
nlohmann::json state_to_json(const State& x);
State state_from_json(const nlohmann::json& j);

/// `k,y[,x_1..x_d]`, one row per time index, LF endings.
std::string series_to_csv(const Series& series);
/// Inverse of series_to_csv. Rejects ragged rows, a missing final newline,
/// non-consecutive k and values outside the model's observation space.
Series series_from_csv(std::string_view text, ModelKind kind);

/// {model, params, seed, n, burn_in, stable}
nlohmann::json series_metadata(const Series& series);

/// Series columns followed by `u[,du_w,du_a,du_b]` (u_1..u_d for NM).
std::string trace_to_csv(const Series& series, const FilterTrace& trace);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a sibling temporary and renames, so readers never see a partial file.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace odgarch

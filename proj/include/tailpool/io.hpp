#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tailpool/filtering.hpp"
#include "tailpool/sample.hpp"

namespace tailpool {

/// Parse the long-format data CSV (header "sample_id,value"): values are
/// grouped by sample id with their file order preserved, which is what the
/// pairwise dependence estimates rely on. Sample order follows first
/// appearance in the file.
std::vector<Series> read_long_csv(std::istream& in);

/// Parse the residual CSV (header "sample_id,residual"), same grouping.
std::vector<Series> read_residual_csv(std::istream& in);

/// Round a double to 10 significant digits, the precision at which reports
/// are printed. Applying this before serialization keeps emitted JSON
/// byte-stable across platforms.
double report_round(double x);

/// Recursively apply report_round to every number in a JSON document.
void round_json_numbers(nlohmann::json& j);

/// Serialize with 2-space indentation, rounded numbers and a trailing
/// newline; the scheme behind every report this tool emits.
std::string report_to_string(nlohmann::json j);

}  // namespace tailpool

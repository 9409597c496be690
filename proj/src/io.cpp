#include "tailpool/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace tailpool {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<Series> read_two_column_csv(std::istream& in, const std::string& value_column) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::invalid_argument("csv: empty input");
  }
  const std::string expected = "sample_id," + value_column;
  if (trim(line) != expected) {
    throw std::invalid_argument("csv: expected header '" + expected + "', got '" + trim(line) + "'");
  }
  std::vector<Series> out;
  std::map<std::string, std::size_t> index;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("csv line " + std::to_string(lineno) + ": expected two columns");
    }
    std::string id = trim(line.substr(0, comma));
    std::string value_text = trim(line.substr(comma + 1));
    if (id.empty()) {
      throw std::invalid_argument("csv line " + std::to_string(lineno) + ": empty sample_id");
    }
    char* end = nullptr;
    double value = std::strtod(value_text.c_str(), &end);
    if (end == value_text.c_str() || *end != '\0') {
      throw std::invalid_argument("csv line " + std::to_string(lineno) + ": malformed value '" +
                                  value_text + "'");
    }
    auto [it, inserted] = index.try_emplace(id, out.size());
    if (inserted) {
      out.push_back(Series{id, {}});
    }
    out[it->second].values.push_back(value);
  }
  if (out.empty()) {
    throw std::invalid_argument("csv: no data rows");
  }
  return out;
}

}  // namespace

std::vector<Series> read_long_csv(std::istream& in) { return read_two_column_csv(in, "value"); }

std::vector<Series> read_residual_csv(std::istream& in) {
  return read_two_column_csv(in, "residual");
}

double report_round(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return std::strtod(buf, nullptr);
}

void round_json_numbers(nlohmann::json& j) {
  if (j.is_number_float()) {
    j = report_round(j.get<double>());
  } else if (j.is_object() || j.is_array()) {
    for (auto& item : j) round_json_numbers(item);
  }
}

std::string report_to_string(nlohmann::json j) {
  round_json_numbers(j);
  return j.dump(2) + "\n";
}

}  // namespace tailpool

#pragma once

// Text serialization helpers shared by the CSV/JSON writers.

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kacov/kernel.hpp"

namespace kacov {

/// Shortest round-trippable decimal form ("%.17g"), locale independent.
std::string format_double(double x);

/// Splits one RFC 4180 record (quoted fields allowed, no embedded newlines).
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);

nlohmann::json to_json(const KernelSpec& k);
KernelSpec kernel_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Point& p);
Point point_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace kacov

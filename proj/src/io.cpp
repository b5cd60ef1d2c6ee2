#include "kacov/io.hpp"

#include <cmath>
#include <cstdio>

#include "kacov/error.hpp"

namespace kacov {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

nlohmann::json to_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw Error(ErrorCode::invalid_argument, "matrix must be a nonempty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::invalid_argument, "matrix rows must have equal length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

nlohmann::json to_json(const KernelSpec& k) {
  return std::visit(
      [](const auto& kv) -> nlohmann::json {
        using K = std::decay_t<decltype(kv)>;
        if constexpr (std::is_same_v<K, GaussianKernel>) {
          return {{"type", "gaussian"}, {"sigma", kv.sigma}};
        } else if constexpr (std::is_same_v<K, LinearKernel>) {
          nlohmann::json j = {{"type", "linear"}};
          if (kv.radius) j["radius"] = *kv.radius;
          return j;
        } else {
          return {{"type", "table"}, {"gram", to_json(kv.gram)}};
        }
      },
      k.variant());
}

KernelSpec kernel_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "gaussian") return KernelSpec::gaussian(j.at("sigma").get<double>());
  if (type == "linear") {
    if (j.contains("radius")) return KernelSpec::linear(j.at("radius").get<double>());
    return KernelSpec::linear();
  }
  if (type == "table") return KernelSpec::table(matrix_from_json(j.at("gram")));
  throw Error(ErrorCode::invalid_argument, "unknown kernel type '" + type + "'");
}

nlohmann::json to_json(const Point& p) {
  if (p.kind() == PointKind::state) return {{"state", p.state_index()}};
  return nlohmann::json(std::vector<double>(p.coords().begin(), p.coords().end()));
}

Point point_from_json(const nlohmann::json& j) {
  if (j.is_object()) return Point::state(j.at("state").get<std::size_t>());
  if (j.is_number()) return Point::at(j.get<double>());
  return Point::at(j.get<std::vector<double>>());
}

}  // namespace kacov

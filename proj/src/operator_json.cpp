#include "ergolab/operator_json.hpp"

#include <cmath>
#include <numbers>

namespace ergolab {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(path + "." + key, "missing field");
  return *it;
}

Index index_from_json(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<Index>();
}

double real_from_json(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

template <class Scalar, class Read>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> matrix_from_json(const json& j,
                                                                        const std::string& path,
                                                                        Read read) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of rows");
  const auto rows = static_cast<Index>(j.size());
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(rows, rows);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    const std::string row_path = path + "[" + std::to_string(i) + "]";
    if (!row.is_array() || static_cast<Index>(row.size()) != rows) {
      throw ConfigError(row_path, "row length must equal the number of rows");
    }
    for (Index k = 0; k < rows; ++k) {
      m(i, k) = read(row[static_cast<std::size_t>(k)], row_path + "[" + std::to_string(k) + "]");
    }
  }
  return m;
}

struct ToJson {
  json operator()(const spec::Dense& s) const {
    return {{"kind", "dense"}, {"entries", matrix_to_json(s.entries)}};
  }
  json operator()(const spec::DiagonalUnitary& s) const {
    return {{"kind", "diagonal_unitary"}, {"angles", s.angles}};
  }
  json operator()(const spec::CyclicShift& s) const {
    return {{"kind", "cyclic_shift"}, {"dim", s.dim}};
  }
  json operator()(const spec::Permutation& s) const {
    return {{"kind", "permutation"}, {"sigma", s.sigma}};
  }
  json operator()(const spec::JordanBlock& s) const {
    return {{"kind", "jordan"}, {"lambda", complex_to_json(s.lambda)}, {"size", s.size}};
  }
  json operator()(const spec::BlockDiag& s) const {
    json blocks = json::array();
    for (const auto& b : s.blocks) blocks.push_back(spec_to_json(b));
    return {{"kind", "block_diag"}, {"blocks", std::move(blocks)}};
  }
  json operator()(const spec::VolterraDiscretization& s) const {
    return {{"kind", "volterra"}, {"nodes", s.nodes}};
  }
  json operator()(const spec::IMinusVolterra& s) const {
    return {{"kind", "i_minus_volterra"}, {"nodes", s.nodes}};
  }
  json operator()(const spec::WeightedShift& s) const {
    json w = json::array();
    for (auto z : s.weights) w.push_back(complex_to_json(z));
    return {{"kind", "weighted_shift"}, {"weights", std::move(w)}};
  }
  json operator()(const spec::Stochastic& s) const {
    json rows = json::array();
    for (Index i = 0; i < s.transition.rows(); ++i) {
      json row = json::array();
      for (Index k = 0; k < s.transition.cols(); ++k) row.push_back(s.transition(i, k));
      rows.push_back(std::move(row));
    }
    return {{"kind", "stochastic"}, {"matrix", std::move(rows)}};
  }
  json operator()(const spec::Scaled& s) const {
    if (!s.inner) throw InvalidArgument("scaled: missing inner operator");
    return {{"kind", "scaled"}, {"lambda", complex_to_json(s.lambda)},
            {"inner", spec_to_json(*s.inner)}};
  }
};

}  // namespace

json complex_to_json(Complex z) { return json::array({z.real(), z.imag()}); }

json matrix_to_json(const Eigen::MatrixXcd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(complex_to_json(m(i, k)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Complex complex_from_json(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return {j[0].get<double>(), j[1].get<double>()};
  }
  throw ConfigError(path, "expected a complex number [re, im]");
}

std::vector<double> golden_angles(Index count) {
  const double phi = std::numbers::phi;
  std::vector<double> angles;
  angles.reserve(static_cast<std::size_t>(std::max<Index>(count, 0)));
  for (Index k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) * phi;
    angles.push_back(2.0 * std::numbers::pi * (t - std::floor(t)));
  }
  return angles;
}

json spec_to_json(const OperatorSpec& s) { return std::visit(ToJson{}, s.kind); }

OperatorSpec spec_from_json(const json& j, const std::string& path) {
  const json& kind_field = field(j, "kind", path);
  if (!kind_field.is_string()) throw ConfigError(path + ".kind", "expected a string");
  const auto kind = kind_field.get<std::string>();

  if (kind == "dense") {
    const std::string p = path + ".entries";
    return {spec::Dense{matrix_from_json<Complex>(field(j, "entries", path), p,
                                                  complex_from_json)}};
  }
  if (kind == "diagonal_unitary") {
    if (j.contains("golden_count")) {
      const Index n = index_from_json(j["golden_count"], path + ".golden_count");
      if (n < 1) throw ConfigError(path + ".golden_count", "must be positive");
      return {spec::DiagonalUnitary{golden_angles(n)}};
    }
    const json& a = field(j, "angles", path);
    if (!a.is_array()) throw ConfigError(path + ".angles", "expected an array");
    spec::DiagonalUnitary s;
    for (std::size_t k = 0; k < a.size(); ++k) {
      s.angles.push_back(real_from_json(a[k], path + ".angles[" + std::to_string(k) + "]"));
    }
    return {s};
  }
  if (kind == "cyclic_shift") {
    return {spec::CyclicShift{index_from_json(field(j, "dim", path), path + ".dim")}};
  }
  if (kind == "permutation") {
    const json& a = field(j, "sigma", path);
    if (!a.is_array()) throw ConfigError(path + ".sigma", "expected an array");
    spec::Permutation s;
    for (std::size_t k = 0; k < a.size(); ++k) {
      s.sigma.push_back(index_from_json(a[k], path + ".sigma[" + std::to_string(k) + "]"));
    }
    return {s};
  }
  if (kind == "jordan") {
    return {spec::JordanBlock{complex_from_json(field(j, "lambda", path), path + ".lambda"),
                              index_from_json(field(j, "size", path), path + ".size")}};
  }
  if (kind == "block_diag") {
    const json& a = field(j, "blocks", path);
    if (!a.is_array()) throw ConfigError(path + ".blocks", "expected an array");
    spec::BlockDiag s;
    for (std::size_t k = 0; k < a.size(); ++k) {
      s.blocks.push_back(spec_from_json(a[k], path + ".blocks[" + std::to_string(k) + "]"));
    }
    return {std::move(s)};
  }
  if (kind == "volterra") {
    return {spec::VolterraDiscretization{index_from_json(field(j, "nodes", path), path + ".nodes")}};
  }
  if (kind == "i_minus_volterra") {
    return {spec::IMinusVolterra{index_from_json(field(j, "nodes", path), path + ".nodes")}};
  }
  if (kind == "weighted_shift") {
    const json& a = field(j, "weights", path);
    if (!a.is_array()) throw ConfigError(path + ".weights", "expected an array");
    spec::WeightedShift s;
    for (std::size_t k = 0; k < a.size(); ++k) {
      s.weights.push_back(complex_from_json(a[k], path + ".weights[" + std::to_string(k) + "]"));
    }
    return {s};
  }
  if (kind == "stochastic") {
    if (j.contains("map")) {
      const json& a = j["map"];
      if (!a.is_array() || a.empty()) throw ConfigError(path + ".map", "expected a non-empty array");
      const auto n = static_cast<Index>(a.size());
      Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
      for (Index i = 0; i < n; ++i) {
        const std::string p_path = path + ".map[" + std::to_string(i) + "]";
        const Index image = index_from_json(a[static_cast<std::size_t>(i)], p_path);
        if (image < 0 || image >= n) throw ConfigError(p_path, "image out of range");
        p(i, image) = 1.0;
      }
      return {spec::Stochastic{std::move(p)}};
    }
    return {spec::Stochastic{matrix_from_json<double>(field(j, "matrix", path), path + ".matrix",
                                                      real_from_json)}};
  }
  if (kind == "scaled") {
    const Complex lambda = complex_from_json(field(j, "lambda", path), path + ".lambda");
    return OperatorSpec::scaled(lambda, spec_from_json(field(j, "inner", path), path + ".inner"));
  }
  throw ConfigError(path + ".kind", "unknown operator kind '" + kind + "'");
}

}  // namespace ergolab

#pragma once

// JSON form of OperatorSpec. Complex numbers are [re, im] pairs.
//
//   {"kind": "dense",            "entries": [[z, ...], ...]}          rows of complex
//   {"kind": "diagonal_unitary", "angles": [theta, ...]}
//   {"kind": "diagonal_unitary", "golden_count": N}     theta_k = 2 pi frac(k phi), k < N
//   {"kind": "cyclic_shift",     "dim": d}
//   {"kind": "permutation",      "sigma": [s0, s1, ...]}              e_k -> e_{s_k}
//   {"kind": "jordan",           "lambda": z, "size": m}
//   {"kind": "block_diag",       "blocks": [spec, ...]}
//   {"kind": "volterra",         "nodes": N}
//   {"kind": "i_minus_volterra", "nodes": N}
//   {"kind": "weighted_shift",   "weights": [z, ...]}
//   {"kind": "stochastic",       "matrix": [[p, ...], ...]}
//   {"kind": "stochastic",       "map": [f0, f1, ...]}               Koopman matrix of f
//   {"kind": "scaled",           "lambda": z, "inner": spec}

#include <string>

#include <json.hpp>

#include "ergolab/operator.hpp"

namespace ergolab {

/// Invalid configuration or operator document. `path` locates the offending field
/// (for example "operator.blocks[1].size").
class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string path, const std::string& message)
      : InvalidArgument(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

nlohmann::json complex_to_json(Complex z);
Complex complex_from_json(const nlohmann::json& j, const std::string& path);
/// Rows of [re, im] pairs.
nlohmann::json matrix_to_json(const Eigen::MatrixXcd& m);

nlohmann::json spec_to_json(const OperatorSpec& spec);
/// Parses and validates field types; semantic invariants are checked by build().
OperatorSpec spec_from_json(const nlohmann::json& j, const std::string& path = "operator");

/// theta_k = 2 pi frac(k phi) for k < count, phi the golden ratio.
std::vector<double> golden_angles(Index count);

}  // namespace ergolab

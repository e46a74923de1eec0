#pragma once

// Scenario configs, task execution, artifacts and run manifests.
//
// A scenario document:
//
//   {
//     "name": "cycle_16",                  filesystem-safe
//     "seed": 0,                           optional
//     "output_dir": "runs",                optional output root
//     "operator": { ...operator spec... },
//     "tasks": [
//       {"kind": "means", "alphas": [0.5, 1], "n_max": 10000,
//        "reference": "projection" | "none", "threshold": 0.1,
//        "stop_at_threshold": false, "norm": "spectral" | "frobenius", "plain": true},
//       {"kind": "eht", "lambdas": [z, ...] | "grid": 64,
//        "vectors": ["basis:0", "worst_basis", "random", [z, ...]],
//        "n_max": 10000, "window": 50, "tol": 1e-8},
//       {"kind": "classify", "n_max": 4096},
//       {"kind": "kalton", "n_max": 4096},
//       {"kind": "decompose"},
//       {"kind": "abel", "rs": [0.9, 0.99], "tol": 1e-10},
//       {"kind": "fractional", "alphas": [0.5], "tol": 1e-6}
//     ]
//   }
//
// A sweep template is the same document with "$NAME" placeholders. A string
// equal to "$NAME" becomes the numeric value; other strings containing it get
// the textual value spliced in.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ergolab/hilbert.hpp"
#include "ergolab/operator.hpp"
#include "ergolab/operator_json.hpp"

namespace ergolab::lab {

inline constexpr const char* kToolVersion = "0.1.0";

struct MeansTask {
  std::vector<double> alphas;  ///< (C, alpha) orders in (0, 1]
  bool plain = true;           ///< also trace M_n(T)
  Index n_max = 10000;
  bool against_projection = true;
  NormKind norm = NormKind::Spectral;
  std::optional<double> threshold;
  bool stop_at_threshold = false;
};

/// Vector selector: basis index, the basis vector with the largest
/// least-squares preimage under I - T, a seeded random unit vector, or
/// explicit entries.
struct WorstBasis {};
struct RandomVector {};
using VectorChoice = std::variant<Index, WorstBasis, RandomVector, Eigen::VectorXcd>;

struct EhtTask {
  std::vector<Complex> lambdas;
  std::optional<Index> grid_points;  ///< default profile grid instead of lambdas
  std::vector<VectorChoice> vectors;
  EhtParams params;
};

struct ClassifyTask {
  Index n_max = 4096;
};
struct KaltonTask {
  Index n_max = 4096;
};
struct DecomposeTask {};
struct AbelTask {
  std::vector<double> rs;
  double tol = 1e-10;
};
struct FractionalTask {
  std::vector<double> alphas;
  double tol = 1e-6;
};

using Task = std::variant<MeansTask, EhtTask, ClassifyTask, KaltonTask, DecomposeTask, AbelTask,
                          FractionalTask>;

const char* task_kind(const Task& task);

struct TaskEntry {
  std::string id;  ///< "<index>_<kind>", unique within the scenario
  Task task;
};

struct SweepInfo {
  std::string param;
  double value = 0.0;
  std::string template_hash;
};

struct ScenarioConfig {
  std::string name;
  std::uint64_t seed = 0;
  std::optional<std::string> output_dir;
  nlohmann::json document;  ///< the parsed document, after substitution
  OperatorSpec op;
  std::vector<TaskEntry> tasks;
  std::optional<SweepInfo> sweep;
};

/// Throws ConfigError carrying the offending field path.
ScenarioConfig parse_config(const nlohmann::json& doc);
ScenarioConfig load_config(const std::filesystem::path& file);

/// FNV-1a 64 of the compact dump, as 16 hex digits.
std::string content_hash(const nlohmann::json& doc);

/// Replace "$param" placeholders (see the file comment).
nlohmann::json substitute(const nlohmann::json& tmpl, const std::string& param, double value);

/// Parses "N=16,64,256". Throws ConfigError on malformed input.
std::pair<std::string, std::vector<double>> parse_param(const std::string& text);

/// --out, then the config's output_dir, then $ERGOLAB_OUT, then ./ergolab_out.
std::filesystem::path resolve_output_root(const std::optional<std::string>& cli_out,
                                          const ScenarioConfig& config);

struct TaskOutcome {
  std::string id;
  std::string kind;
  bool ok = false;
  std::string error;
  std::vector<std::string> artifacts;  ///< relative to the run directory
  nlohmann::json summary;
};

struct RunResult {
  std::filesystem::path dir;
  std::vector<TaskOutcome> tasks;
  nlohmann::json manifest;

  bool all_ok() const;
};

/// Executes every task (up to `jobs` at a time) into <root>/<name>, writes
/// artifacts and finally manifest.json via rename. A failing task is recorded
/// and does not stop the others.
RunResult run(const ScenarioConfig& config, const std::filesystem::path& root, unsigned jobs = 1);

/// One scenario per value, named "<name>" with the placeholder substituted or
/// "<name>_<param><value>" when the name has no placeholder.
std::vector<RunResult> sweep(const nlohmann::json& tmpl, const std::string& param,
                             const std::vector<double>& values,
                             const std::optional<std::string>& cli_out, unsigned jobs = 1);

/// One CSV row per manifest. Throws ConfigError when the manifests come from
/// different templates or a run directory has no readable manifest.
std::string sweep_report(const std::vector<std::filesystem::path>& run_dirs);

/// Static SVG line chart of the second column against the first.
std::string plot_svg(const std::filesystem::path& csv, bool log_y = true);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace ergolab::lab

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ergolab/lab.hpp"

namespace fs = std::filesystem;
namespace lab = ergolab::lab;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kTasksFailed = 3;

int report_run(const lab::RunResult& r) {
  std::cout << r.dir.string() << "\n";
  for (const auto& t : r.tasks) {
    std::cout << "  " << t.id << "  " << (t.ok ? "ok" : "FAILED");
    if (!t.ok) std::cout << "  " << t.error;
    std::cout << "\n";
  }
  return r.all_ok() ? kOk : kTasksFailed;
}

nlohmann::json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ergolab::ConfigError(file.string(), "cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ergolab::ConfigError(file.string(), std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ergolab: operator ergodic theory lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  unsigned jobs = 1;
  auto* run = app.add_subcommand("run", "Run one scenario config");
  run->add_option("config", config_path, "Scenario JSON")->required();
  run->add_option("--out", out_dir, "Output root (overrides output_dir and ERGOLAB_OUT)");
  run->add_option("--jobs", jobs, "Concurrent tasks")->check(CLI::Range(1u, 256u));

  std::string template_path;
  std::string param;
  auto* sweep = app.add_subcommand("sweep", "Run a template once per parameter value");
  sweep->add_option("template", template_path, "Template JSON with $NAME placeholders")->required();
  sweep->add_option("--param", param, "NAME=v1,v2,...")->required();
  sweep->add_option("--out", out_dir, "Output root");
  sweep->add_option("--jobs", jobs, "Concurrent tasks per run")->check(CLI::Range(1u, 256u));

  std::vector<std::string> run_dirs;
  std::optional<std::string> report_file;
  auto* report = app.add_subcommand("report", "Summarize sweep runs as CSV");
  report->add_option("runs", run_dirs, "Run directories")->required();
  report->add_option("--out", report_file, "Write the CSV here instead of stdout");

  std::string csv_path;
  std::optional<std::string> svg_file;
  bool linear = false;
  auto* plot = app.add_subcommand("plot", "Render a trace CSV as an SVG line chart");
  plot->add_option("csv", csv_path, "Trace CSV")->required();
  plot->add_option("--out", svg_file, "SVG path (default: <csv>.svg)");
  plot->add_flag("--linear", linear, "Linear instead of log10 y axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version exit 0; malformed arguments count as config errors.
    return app.exit(e) == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) {
      const auto config = lab::load_config(config_path);
      return report_run(lab::run(config, lab::resolve_output_root(out_dir, config), jobs));
    }
    if (*sweep) {
      const auto [name, values] = lab::parse_param(param);
      const auto results = lab::sweep(read_json(template_path), name, values, out_dir, jobs);
      int code = kOk;
      for (const auto& r : results) {
        if (report_run(r) != kOk) code = kTasksFailed;
      }
      return code;
    }
    if (*report) {
      std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
      const std::string csv = lab::sweep_report(dirs);
      if (report_file) {
        std::ofstream(*report_file, std::ios::binary) << csv;
      } else {
        std::cout << csv;
      }
      return kOk;
    }
    if (*plot) {
      const std::string svg = lab::plot_svg(csv_path, !linear);
      const fs::path target = svg_file ? fs::path(*svg_file) : fs::path(csv_path + ".svg");
      std::ofstream(target, std::ios::binary) << svg;
      std::cout << target.string() << "\n";
      return kOk;
    }
  } catch (const ergolab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kOk;
}

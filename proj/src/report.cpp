#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ergolab/lab.hpp"

namespace ergolab::lab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const json* first_task(const json& manifest, const char* kind) {
  for (const auto& t : manifest.at("tasks")) {
    if (t.at("kind") == kind && t.at("status") == "ok") return &t.at("summary");
  }
  return nullptr;
}

std::string cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) return format_double(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

constexpr const char* kPredicates[] = {"uniformly_ergodic", "rotationally_ue", "power_bounded",
                                       "powers_converge", "norm_powers_vanish", "discordant"};

}  // namespace

std::string sweep_report(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.empty()) throw ConfigError("report", "no run directories given");
  std::vector<json> manifests;
  for (const auto& dir : run_dirs) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ConfigError(dir.string(), "no manifest.json");
    try {
      manifests.push_back(json::parse(in));
    } catch (const json::parse_error& e) {
      throw ConfigError((dir / "manifest.json").string(), std::string("unreadable: ") + e.what());
    }
  }
  auto origin = [](const json& m) {
    const auto& s = m.at("sweep");
    return s.is_null() ? m.at("config_hash").get<std::string>()
                       : s.at("template_hash").get<std::string>();
  };
  const std::string reference = origin(manifests.front());
  for (std::size_t k = 1; k < manifests.size(); ++k) {
    if (origin(manifests[k]) != reference) {
      throw ConfigError(run_dirs[k].string(), "manifest comes from a different template");
    }
  }
  auto sweep_value = [](const json& m) {
    const auto& s = m.at("sweep");
    return s.is_null() ? 0.0 : s.at("value").get<double>();
  };
  std::stable_sort(manifests.begin(), manifests.end(),
                   [&](const json& a, const json& b) { return sweep_value(a) < sweep_value(b); });

  std::ostringstream out;
  out << "run,param,value,dimension,mean_n,mean_distance,first_below,sup_partial_norm";
  for (const char* p : kPredicates) out << ',' << p;
  out << '\n';
  for (const auto& m : manifests) {
    const auto& s = m.at("sweep");
    out << cell(m.at("name")) << ',' << (s.is_null() ? "" : cell(s.at("param"))) << ','
        << (s.is_null() ? "" : cell(s.at("value"))) << ',' << cell(m.at("dimension"));
    json mean_n, mean_distance, first_below, sup;
    if (const json* means = first_task(m, "means"); means && !means->at("orders").empty()) {
      const auto& o = means->at("orders").front();
      mean_n = o.at("final_n");
      mean_distance = o.at("final_value");
      first_below = o.at("first_below");
    }
    if (const json* eht = first_task(m, "eht")) sup = eht->at("sup_partial_norm");
    out << ',' << cell(mean_n) << ',' << cell(mean_distance) << ',' << cell(first_below) << ','
        << cell(sup);
    const json* verdict = first_task(m, "classify");
    for (const char* p : kPredicates) out << ',' << (verdict ? cell(verdict->at(p)) : "");
    out << '\n';
  }
  return out.str();
}

std::string plot_svg(const fs::path& csv, bool log_y) {
  std::ifstream in(csv);
  if (!in) throw ConfigError(csv.string(), "cannot open");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(csv.string(), "empty file");
  const auto comma = line.find(',');
  if (comma == std::string::npos) throw ConfigError(csv.string(), "expected two columns");
  const std::string x_label = line.substr(0, comma);
  const std::string y_label = line.substr(comma + 1);

  std::vector<std::pair<double, double>> points;
  while (std::getline(in, line)) {
    const auto c = line.find(',');
    if (c == std::string::npos) continue;
    const double x = std::stod(line.substr(0, c));
    double y = std::stod(line.substr(c + 1));
    if (log_y) {
      if (!(y > 0.0)) continue;
      y = std::log10(y);
    }
    points.emplace_back(x, y);
  }
  if (points.empty()) throw ConfigError(csv.string(), "no plottable rows");

  constexpr double kWidth = 640, kHeight = 400, kMargin = 50;
  double x0 = points.front().first, x1 = x0, y0 = points.front().second, y1 = y0;
  for (const auto& [x, y] : points) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); };
  auto py = [&](double y) { return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin
      << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
      << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  svg << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  // Thin long traces to at most ~2000 vertices.
  const std::size_t stride = std::max<std::size_t>(1, points.size() / 2000);
  for (std::size_t k = 0; k < points.size(); k += stride) {
    svg << format_double(std::round(px(points[k].first) * 100) / 100) << ','
        << format_double(std::round(py(points[k].second) * 100) / 100) << ' ';
  }
  svg << "\"/>\n";
  auto text = [&](double x, double y, const std::string& s, const char* anchor) {
    svg << "<text x=\"" << x << "\" y=\"" << y << "\" font-family=\"sans-serif\" font-size=\"12\" "
        << "text-anchor=\"" << anchor << "\">" << s << "</text>\n";
  };
  text(kWidth / 2, kHeight - 12, x_label, "middle");
  text(kMargin, kMargin - 10, log_y ? "log10 " + y_label : y_label, "start");
  text(kMargin, kHeight - kMargin + 16, format_double(x0), "middle");
  text(kWidth - kMargin, kHeight - kMargin + 16, format_double(x1), "middle");
  text(kMargin - 4, py(y0), format_double(std::round(y0 * 1000) / 1000), "end");
  text(kMargin - 4, py(y1), format_double(std::round(y1 * 1000) / 1000), "end");
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace ergolab::lab

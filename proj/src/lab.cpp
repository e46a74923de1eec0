#include "ergolab/lab.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "ergolab/cesaro.hpp"
#include "ergolab/sampling.hpp"
#include "ergolab/spectral.hpp"

namespace ergolab::lab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr Index kMaxHorizon = 10'000'000;

// ---------------------------------------------------------------------------
// Field access with paths

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return it.key() == k; });
    if (!known) throw ConfigError(path + "." + it.key(), "unknown field");
  }
}

const json* optional_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double number_field(const json& obj, const char* key, const std::string& path, double fallback) {
  const json* v = optional_field(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError(path + "." + key, "expected a number");
  return v->get<double>();
}

Index index_field(const json& obj, const char* key, const std::string& path, Index fallback,
                  Index lo, Index hi) {
  const json* v = optional_field(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) throw ConfigError(path + "." + key, "expected an integer");
  const auto x = v->get<Index>();
  if (x < lo || x > hi) {
    throw ConfigError(path + "." + key,
                      "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return x;
}

bool bool_field(const json& obj, const char* key, const std::string& path, bool fallback) {
  const json* v = optional_field(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(path + "." + key, "expected a boolean");
  return v->get<bool>();
}

double positive(double x, const std::string& path) {
  if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(path, "must be a positive number");
  return x;
}

std::vector<double> number_list(const json& obj, const char* key, const std::string& path,
                                bool required) {
  const json* v = optional_field(obj, key);
  if (!v) {
    if (required) throw ConfigError(path + "." + key, "missing field");
    return {};
  }
  if (!v->is_array()) throw ConfigError(path + "." + key, "expected a list of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v->size(); ++k) {
    if (!(*v)[k].is_number()) {
      throw ConfigError(path + "." + key + "[" + std::to_string(k) + "]", "expected a number");
    }
    out.push_back((*v)[k].get<double>());
  }
  if (required && out.empty()) throw ConfigError(path + "." + key, "must not be empty");
  return out;
}

void require_in(const std::vector<double>& values, const std::string& path, double lo, double hi,
                bool hi_closed) {
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double a = values[k];
    const bool ok = a > lo && (hi_closed ? a <= hi : a < hi);
    if (!ok) {
      throw ConfigError(path + "[" + std::to_string(k) + "]",
                        "must lie in (" + format_double(lo) + ", " + format_double(hi) +
                            (hi_closed ? "]" : ")"));
    }
  }
}

// ---------------------------------------------------------------------------
// Task parsing

Task parse_task(const json& t, const std::string& path) {
  if (!t.is_object()) throw ConfigError(path, "expected an object");
  const json* kind_field = optional_field(t, "kind");
  if (!kind_field || !kind_field->is_string()) throw ConfigError(path + ".kind", "expected a string");
  const auto kind = kind_field->get<std::string>();

  if (kind == "means") {
    check_keys(t, path, {"kind", "alphas", "plain", "n_max", "reference", "threshold",
                         "stop_at_threshold", "norm"});
    MeansTask m;
    m.alphas = number_list(t, "alphas", path, false);
    require_in(m.alphas, path + ".alphas", 0.0, 1.0, true);
    m.plain = bool_field(t, "plain", path, true);
    if (!m.plain && m.alphas.empty()) throw ConfigError(path, "nothing to compute");
    m.n_max = index_field(t, "n_max", path, m.n_max, 1, kMaxHorizon);
    if (const json* r = optional_field(t, "reference")) {
      if (*r == "projection") {
        m.against_projection = true;
      } else if (*r == "none") {
        m.against_projection = false;
      } else {
        throw ConfigError(path + ".reference", "expected \"projection\" or \"none\"");
      }
    }
    if (const json* n = optional_field(t, "norm")) {
      if (*n == "spectral") {
        m.norm = NormKind::Spectral;
      } else if (*n == "frobenius") {
        m.norm = NormKind::Frobenius;
      } else {
        throw ConfigError(path + ".norm", "expected \"spectral\" or \"frobenius\"");
      }
    }
    if (optional_field(t, "threshold")) {
      m.threshold = positive(number_field(t, "threshold", path, 0.0), path + ".threshold");
    }
    m.stop_at_threshold = bool_field(t, "stop_at_threshold", path, false);
    if (m.stop_at_threshold && !m.threshold) {
      throw ConfigError(path + ".stop_at_threshold", "requires a threshold");
    }
    return m;
  }
  if (kind == "eht") {
    check_keys(t, path, {"kind", "lambdas", "grid", "vectors", "n_max", "window", "tol"});
    EhtTask e;
    if (const json* l = optional_field(t, "lambdas")) {
      if (!l->is_array() || l->empty()) throw ConfigError(path + ".lambdas", "expected a nonempty list");
      for (std::size_t k = 0; k < l->size(); ++k) {
        const auto p = path + ".lambdas[" + std::to_string(k) + "]";
        const Complex z = complex_from_json((*l)[k], p);
        if (std::abs(std::abs(z) - 1.0) > 1e-12) throw ConfigError(p, "must be unimodular");
        e.lambdas.push_back(z);
      }
    }
    if (optional_field(t, "grid")) e.grid_points = index_field(t, "grid", path, 64, 1, 4096);
    if (e.lambdas.empty() && !e.grid_points) e.lambdas.push_back(Complex(1.0, 0.0));
    if (!e.lambdas.empty() && e.grid_points) {
      throw ConfigError(path, "give either lambdas or grid, not both");
    }
    const json* vs = optional_field(t, "vectors");
    if (!vs || !vs->is_array() || vs->empty()) {
      throw ConfigError(path + ".vectors", "expected a nonempty list");
    }
    for (std::size_t k = 0; k < vs->size(); ++k) {
      const auto p = path + ".vectors[" + std::to_string(k) + "]";
      const json& v = (*vs)[k];
      if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "worst_basis") {
          e.vectors.emplace_back(WorstBasis{});
        } else if (s == "random") {
          e.vectors.emplace_back(RandomVector{});
        } else if (s.rfind("basis:", 0) == 0) {
          Index idx = -1;
          const char* first = s.data() + 6;
          const char* last = s.data() + s.size();
          auto [ptr, ec] = std::from_chars(first, last, idx);
          if (ec != std::errc() || ptr != last || idx < 0) throw ConfigError(p, "bad basis index");
          e.vectors.emplace_back(idx);
        } else {
          throw ConfigError(p, "expected \"basis:k\", \"worst_basis\", \"random\" or a list");
        }
      } else if (v.is_array() && !v.empty()) {
        Eigen::VectorXcd x(static_cast<Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) {
          x(static_cast<Index>(i)) = complex_from_json(v[i], p + "[" + std::to_string(i) + "]");
        }
        e.vectors.emplace_back(std::move(x));
      } else {
        throw ConfigError(p, "expected a vector selector");
      }
    }
    e.params.n_max = index_field(t, "n_max", path, e.params.n_max, 4, kMaxHorizon);
    e.params.window = index_field(t, "window", path, e.params.window, 2, e.params.n_max);
    e.params.tol = positive(number_field(t, "tol", path, e.params.tol), path + ".tol");
    return e;
  }
  if (kind == "classify") {
    check_keys(t, path, {"kind", "n_max"});
    return ClassifyTask{index_field(t, "n_max", path, 4096, 8, kMaxHorizon)};
  }
  if (kind == "kalton") {
    check_keys(t, path, {"kind", "n_max"});
    return KaltonTask{index_field(t, "n_max", path, 4096, 100, kMaxHorizon)};
  }
  if (kind == "decompose") {
    check_keys(t, path, {"kind"});
    return DecomposeTask{};
  }
  if (kind == "abel") {
    check_keys(t, path, {"kind", "rs", "tol"});
    AbelTask a;
    a.rs = number_list(t, "rs", path, true);
    require_in(a.rs, path + ".rs", 0.0, 1.0, false);
    a.tol = positive(number_field(t, "tol", path, a.tol), path + ".tol");
    return a;
  }
  if (kind == "fractional") {
    check_keys(t, path, {"kind", "alphas", "tol"});
    FractionalTask f;
    f.alphas = number_list(t, "alphas", path, true);
    require_in(f.alphas, path + ".alphas", 0.0, 1.0, false);
    f.tol = positive(number_field(t, "tol", path, f.tol), path + ".tol");
    return f;
  }
  throw ConfigError(path + ".kind", "unknown task kind \"" + kind + "\"");
}

bool filesystem_safe(const std::string& name) {
  if (name.empty() || name == "." || name == ".." || name.size() > 200) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

// ---------------------------------------------------------------------------
// Artifacts

class ArtifactWriter {
 public:
  ArtifactWriter(fs::path dir, std::string prefix)
      : dir_(std::move(dir)), prefix_(std::move(prefix)) {}

  void csv(const std::string& suffix, const char* header, const std::vector<Index>& n,
           const std::vector<double>& value) {
    std::string text = std::string(header) + "\n";
    for (std::size_t k = 0; k < n.size(); ++k) {
      text += std::to_string(n[k]);
      text += ',';
      text += format_double(value[k]);
      text += '\n';
    }
    write(prefix_ + "." + suffix + ".csv", text);
  }

  void verdict(const std::string& suffix, const json& doc) {
    write(prefix_ + (suffix.empty() ? "" : "." + suffix) + ".verdict.json", doc.dump(2) + "\n");
  }

  std::vector<std::string> take() { return std::move(written_); }

 private:
  void write(const std::string& file, const std::string& text) {
    std::ofstream out(dir_ / file, std::ios::binary | std::ios::trunc);
    out << text;
    out.close();
    if (!out) throw Error("cannot write " + (dir_ / file).string());
    written_.push_back(file);
  }

  fs::path dir_;
  std::string prefix_;
  std::vector<std::string> written_;
};

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json nullable(const std::optional<Index>& v) { return v ? json(*v) : json(nullptr); }
json nullable(const std::optional<bool>& v) { return v ? json(*v) : json(nullptr); }

std::string alpha_label(double a) { return "alpha_" + format_double(a); }

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Task execution

struct Context {
  const ScenarioConfig& config;
  const ComplexMatrix& op;
  fs::path dir;
};

json run_means(const MeansTask& t, const Context& ctx, ArtifactWriter& out) {
  MeanTraceOptions options;
  options.n_max = t.n_max;
  options.norm = t.norm;
  options.threshold = t.threshold;
  json summary = json::object();
  if (t.against_projection) {
    options.reference = ergodic_projection(ctx.op);
    summary["reference"] = options.reference ? "projection" : "none (1 is not a semisimple eigenvalue)";
  } else {
    summary["reference"] = "none";
  }
  auto describe = [&](const MeanTrace& tr) {
    json s;
    s["final_n"] = tr.n.empty() ? 0 : tr.n.back();
    s["final_value"] = tr.value.empty() ? 0.0 : tr.value.back();
    s["first_below"] = nullable(tr.first_below);
    if (tr.extrapolated_limit && options.reference) {
      s["extrapolated_distance"] =
          matrix_norm(*tr.extrapolated_limit - options.reference->matrix(), t.norm);
    } else {
      s["extrapolated_distance"] = nullptr;
    }
    return s;
  };
  json orders = json::array();
  if (t.plain) {
    MeanTraceOptions plain = options;
    plain.stop_at_threshold = t.stop_at_threshold;
    const auto tr = cesaro_trace(ctx.op, plain);
    out.csv("mean", "n,value", tr.n, tr.value);
    json s = describe(tr);
    s["order"] = "mean";
    orders.push_back(std::move(s));
  }
  if (!t.alphas.empty()) {
    const auto traces = calpha_traces(ctx.op, t.alphas, options);
    for (const auto& tr : traces) {
      out.csv(alpha_label(tr.alpha), "n,value", tr.n, tr.value);
      json s = describe(tr);
      s["order"] = tr.alpha;
      orders.push_back(std::move(s));
    }
  }
  summary["orders"] = orders;
  out.verdict("", summary);
  return summary;
}

Eigen::VectorXcd resolve_vector(const VectorChoice& choice, const Context& ctx,
                                const std::string& task_id) {
  const Index dim = ctx.op.dim();
  return std::visit(
      [&](const auto& c) -> Eigen::VectorXcd {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, Index>) {
          if (c >= dim) throw InvalidArgument("basis index " + std::to_string(c) + " out of range");
          return VectorC::basis(dim, c).vector();
        } else if constexpr (std::is_same_v<C, WorstBasis>) {
          const Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(dim, dim) - ctx.op.matrix();
          const auto cod = a.completeOrthogonalDecomposition();
          const Eigen::MatrixXcd pre = cod.solve(Eigen::MatrixXcd::Identity(dim, dim));
          Index best = 0;
          pre.colwise().norm().maxCoeff(&best);
          return VectorC::basis(dim, best).vector();
        } else if constexpr (std::is_same_v<C, RandomVector>) {
          Rng rng(ctx.config.seed ^ fnv1a(task_id));
          std::normal_distribution<double> gauss(0.0, 1.0);
          Eigen::VectorXcd x(dim);
          for (Index k = 0; k < dim; ++k) x(k) = Complex(gauss(rng), gauss(rng));
          return x / x.norm();
        } else {
          if (c.size() != dim) throw InvalidArgument("explicit vector has the wrong dimension");
          return c;
        }
      },
      choice);
}

json run_eht(const EhtTask& t, const Context& ctx, ArtifactWriter& out, const std::string& id) {
  std::vector<Complex> lambdas = t.lambdas;
  if (t.grid_points) lambdas = default_profile_grid(eigen_decompose(ctx.op), *t.grid_points);
  std::vector<Eigen::VectorXcd> vectors;
  for (const auto& v : t.vectors) vectors.push_back(resolve_vector(v, ctx, id));

  json pairs = json::array();
  double sup = 0.0;
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    for (std::size_t vi = 0; vi < vectors.size(); ++vi) {
      const auto trace = eht_partial(ctx.op, lambdas[li], VectorC(vectors[vi]), t.params);
      std::vector<Index> n(trace.partial_norms.size());
      for (std::size_t k = 0; k < n.size(); ++k) n[k] = static_cast<Index>(k + 1);
      const std::string tag = "l" + std::to_string(li) + ".v" + std::to_string(vi);
      out.csv(tag, "n,re_norm", n, trace.partial_norms);
      json verdict;
      verdict["verdict"] = to_string(trace.verdict);
      verdict["limit_norm"] = nullable(trace.limit_norm());
      verdict["sup_partial_norm"] = trace.sup_partial_norm;
      // Only an eigenvector with lambda mu = 1 has a proven (harmonic) divergence
      // rate; every other divergence call rests on the finite-horizon rule.
      if (trace.verdict == EhtVerdict::Diverging) {
        const Eigen::VectorXcd& x = vectors[vi];
        const bool harmonic = (lambdas[li] * (ctx.op.matrix() * x) - x).norm() <= 1e-10 * x.norm();
        verdict["divergence_basis"] = harmonic ? "eigenvector" : "heuristic";
      } else {
        verdict["divergence_basis"] = nullptr;
      }
      out.verdict(tag, verdict);
      sup = std::max(sup, trace.sup_partial_norm);
      json p;
      p["lambda"] = complex_to_json(lambdas[li]);
      p["vector"] = vi;
      p["verdict"] = to_string(trace.verdict);
      p["sup_partial_norm"] = trace.sup_partial_norm;
      pairs.push_back(std::move(p));
    }
  }
  json summary;
  summary["pairs"] = pairs;
  summary["sup_partial_norm"] = sup;
  return summary;
}

json predicate_json(const Predicate& p) {
  json j;
  j["value"] = nullable(p.value);
  j["spectral"] = nullable(p.spectral);
  j["trace"] = p.trace;
  j["discordant"] = p.discordant;
  return j;
}

json report_json(const SpectralReport& r) {
  json j;
  j["dim"] = r.dim;
  j["norm"] = r.norm;
  j["spectral_radius"] = r.spectral_radius;
  j["flagged"] = r.flagged;
  j["flag_reason"] = r.flag_reason;
  json eig = json::array();
  for (const auto& c : r.eigenvalues) {
    json e;
    e["value"] = complex_to_json(c.value);
    e["algebraic"] = c.algebraic;
    e["geometric"] = c.geometric;
    e["pole_order"] = c.pole_order;
    e["semisimple"] = c.semisimple;
    e["unimodular"] = c.unimodular;
    eig.push_back(std::move(e));
  }
  j["eigenvalues"] = eig;
  json unim = json::array();
  for (Complex z : r.unimodular_set) unim.push_back(complex_to_json(z));
  j["unimodular_set"] = unim;
  return j;
}

json run_classify(const ClassifyTask& t, const Context& ctx, ArtifactWriter& out) {
  ClassifyOptions options;
  options.n_max = t.n_max;
  const auto v = classify(ctx.op, options);
  const std::pair<const char*, const Predicate*> fields[] = {
      {"norm_powers_vanish", &v.norm_powers_vanish},
      {"power_bounded", &v.power_bounded},
      {"cesaro_bounded", &v.cesaro_bounded},
      {"powers_over_n_vanish", &v.powers_over_n_vanish},
      {"uniformly_ergodic", &v.uniformly_ergodic},
      {"rotationally_ue", &v.rotationally_ue},
      {"powers_converge", &v.powers_converge},
      {"kt_condition", &v.kt_condition},
      {"kalton_pass", &v.kalton_pass}};
  json doc;
  json summary;
  for (const auto& [name, p] : fields) {
    doc["predicates"][name] = predicate_json(*p);
    summary[name] = nullable(p->value);
  }
  summary["discordant"] = v.discordant();
  doc["discordant"] = v.discordant();
  doc["spectrum"] = report_json(v.spectrum);
  doc["reading"] =
      "finite dimension: (I - T)X is always closed, so uniform ergodicity is read from the spectrum; "
      "dimension sweeps with degrading rates stand in for infinite-dimensional behaviour";
  doc["evidence"] = {{"n_max", v.evidence.n_max},
                     {"power_norm", v.evidence.power_norm},
                     {"mean_norm", v.evidence.mean_norm},
                     {"kt_norm", v.evidence.kt_norm},
                     {"mean_increment", v.evidence.mean_increment},
                     {"kalton_estimate", v.evidence.kalton_estimate}};
  out.verdict("", doc);
  return summary;
}

json run_kalton(const KaltonTask& t, const Context& ctx, ArtifactWriter& out) {
  const auto r = kalton_test(ctx.op, t.n_max);
  json doc = {{"n_max", t.n_max}, {"limsup_estimate", r.limsup_estimate}, {"pass", r.pass}};
  out.verdict("", doc);
  return doc;
}

json run_decompose(const Context& ctx, ArtifactWriter& out) {
  const auto d = decompose_unimodular(ctx.op);
  json doc;
  json comps = json::array();
  for (const auto& c : d.components) {
    json j;
    j["lambda"] = complex_to_json(c.lambda);
    j["rank"] = std::lround(c.projection.matrix().trace().real());
    j["projection"] = matrix_to_json(c.projection.matrix());
    comps.push_back(std::move(j));
  }
  doc["components"] = comps;
  doc["complement_dimension"] = d.complement_basis.cols();
  doc["idempotence_error"] = d.idempotence_error;
  doc["orthogonality_error"] = d.orthogonality_error;
  doc["rank_count_ok"] = d.rank_count_ok;
  out.verdict("", doc);
  json summary = {{"components", d.components.size()},
                  {"complement_dimension", d.complement_basis.cols()},
                  {"rank_count_ok", d.rank_count_ok}};
  return summary;
}

json run_abel(const AbelTask& t, const Context& ctx, ArtifactWriter& out) {
  const auto e = ergodic_projection(ctx.op);
  json rows = json::array();
  json summary = json::array();
  for (double r : t.rs) {
    const auto a = abel_mean(ctx.op, r, t.tol);
    json j;
    j["r"] = r;
    j["terms"] = a.terms;
    j["tail_bound"] = a.tail_bound;
    j["distance_to_projection"] =
        e ? json(operator_norm(Eigen::MatrixXcd(a.value.matrix() - e->matrix()))) : json(nullptr);
    summary.push_back(j);
    j["value"] = matrix_to_json(a.value.matrix());
    rows.push_back(std::move(j));
  }
  out.verdict("", json{{"means", rows}});
  return summary;
}

json run_fractional(const FractionalTask& t, const Context& ctx, ArtifactWriter& out) {
  json rows = json::array();
  json summary = json::array();
  for (double a : t.alphas) {
    const auto f = fractional_power(ctx.op, a, t.tol);
    json j;
    j["alpha"] = a;
    j["terms"] = f.terms;
    j["tail_bound"] = f.tail_bound;
    j["power_bound"] = f.power_bound;
    summary.push_back(j);
    j["value"] = matrix_to_json(f.value.matrix());
    rows.push_back(std::move(j));
  }
  out.verdict("", json{{"powers", rows}});
  return summary;
}

TaskOutcome execute(const TaskEntry& entry, const Context& ctx) {
  TaskOutcome outcome;
  outcome.id = entry.id;
  outcome.kind = task_kind(entry.task);
  ArtifactWriter out(ctx.dir, ctx.config.name + "_" + entry.id);
  try {
    outcome.summary = std::visit(
        [&](const auto& t) -> json {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, MeansTask>) return run_means(t, ctx, out);
          if constexpr (std::is_same_v<T, EhtTask>) return run_eht(t, ctx, out, entry.id);
          if constexpr (std::is_same_v<T, ClassifyTask>) return run_classify(t, ctx, out);
          if constexpr (std::is_same_v<T, KaltonTask>) return run_kalton(t, ctx, out);
          if constexpr (std::is_same_v<T, DecomposeTask>) return run_decompose(ctx, out);
          if constexpr (std::is_same_v<T, AbelTask>) return run_abel(t, ctx, out);
          if constexpr (std::is_same_v<T, FractionalTask>) return run_fractional(t, ctx, out);
        },
        entry.task);
    outcome.ok = true;
  } catch (const std::exception& e) {
    outcome.ok = false;
    outcome.error = e.what();
    outcome.summary = nullptr;
  }
  outcome.artifacts = out.take();
  return outcome;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

}  // namespace

// ---------------------------------------------------------------------------

const char* task_kind(const Task& task) {
  static constexpr const char* names[] = {"means",    "eht",   "classify",  "kalton",
                                          "decompose", "abel", "fractional"};
  return names[task.index()];
}

bool RunResult::all_ok() const {
  return std::all_of(tasks.begin(), tasks.end(), [](const TaskOutcome& t) { return t.ok; });
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

std::string content_hash(const json& doc) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << fnv1a(doc.dump());
  return s.str();
}

ScenarioConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("$", "expected a JSON object");
  check_keys(doc, "$", {"name", "seed", "output_dir", "operator", "tasks"});
  ScenarioConfig c;
  c.document = doc;
  const json* name = optional_field(doc, "name");
  if (!name || !name->is_string()) throw ConfigError("name", "expected a string");
  c.name = name->get<std::string>();
  if (!filesystem_safe(c.name)) {
    throw ConfigError("name", "must be nonempty and use only letters, digits, '_', '-', '.'");
  }
  if (const json* seed = optional_field(doc, "seed")) {
    if (!seed->is_number_unsigned()) throw ConfigError("seed", "expected a nonnegative integer");
    c.seed = seed->get<std::uint64_t>();
  }
  if (const json* out = optional_field(doc, "output_dir")) {
    if (!out->is_string() || out->get<std::string>().empty()) {
      throw ConfigError("output_dir", "expected a nonempty path");
    }
    c.output_dir = out->get<std::string>();
  }
  const json* op = optional_field(doc, "operator");
  if (!op) throw ConfigError("operator", "missing field");
  c.op = spec_from_json(*op, "operator");
  try {
    (void)build(c.op);
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError("operator", e.what());
  }
  const json* tasks = optional_field(doc, "tasks");
  if (!tasks) throw ConfigError("tasks", "missing field");
  if (!tasks->is_array()) throw ConfigError("tasks", "expected a list");
  for (std::size_t k = 0; k < tasks->size(); ++k) {
    Task t = parse_task((*tasks)[k], "tasks[" + std::to_string(k) + "]");
    std::ostringstream id;
    id << std::setw(2) << std::setfill('0') << k << "_" << task_kind(t);
    c.tasks.push_back(TaskEntry{id.str(), std::move(t)});
  }
  return c;
}

ScenarioConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string(), "cannot open");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(file.string(), std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

json substitute(const json& tmpl, const std::string& param, double value) {
  const std::string token = "$" + param;
  const std::string text = format_double(value);
  if (tmpl.is_string()) {
    const auto s = tmpl.get<std::string>();
    if (s == token) {
      if (value == std::floor(value) && std::abs(value) < 9.0e15) {
        return json(static_cast<std::int64_t>(value));
      }
      return json(value);
    }
    std::string out = s;
    for (auto pos = out.find(token); pos != std::string::npos; pos = out.find(token, pos + text.size())) {
      out.replace(pos, token.size(), text);
    }
    return json(out);
  }
  if (tmpl.is_array()) {
    json out = json::array();
    for (const auto& v : tmpl) out.push_back(substitute(v, param, value));
    return out;
  }
  if (tmpl.is_object()) {
    json out = json::object();
    for (auto it = tmpl.begin(); it != tmpl.end(); ++it) out[it.key()] = substitute(it.value(), param, value);
    return out;
  }
  return tmpl;
}

std::pair<std::string, std::vector<double>> parse_param(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--param", "expected NAME=v1,v2,...");
  std::string name = text.substr(0, eq);
  if (!std::all_of(name.begin(), name.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
      })) {
    throw ConfigError("--param", "parameter name must be alphanumeric");
  }
  std::vector<double> values;
  std::string rest = text.substr(eq + 1);
  std::size_t start = 0;
  while (start <= rest.size()) {
    const auto comma = rest.find(',', start);
    const std::string item = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size() || !std::isfinite(v)) {
      throw ConfigError("--param", "bad value \"" + item + "\"");
    }
    values.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (values.empty()) throw ConfigError("--param", "no values");
  return {name, values};
}

fs::path resolve_output_root(const std::optional<std::string>& cli_out, const ScenarioConfig& config) {
  if (cli_out) return *cli_out;
  if (config.output_dir) return *config.output_dir;
  if (const char* env = std::getenv("ERGOLAB_OUT"); env && *env) return env;
  return "ergolab_out";
}

RunResult run(const ScenarioConfig& config, const fs::path& root, unsigned jobs) {
  RunResult result;
  result.dir = root / config.name;
  fs::create_directories(result.dir);
  const std::string started = utc_now();
  const ComplexMatrix op = build(config.op);
  const Context ctx{config, op, result.dir};

  result.tasks.resize(config.tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < config.tasks.size(); k = next++) {
      result.tasks[k] = execute(config.tasks[k], ctx);
    }
  };
  const unsigned threads =
      std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(config.tasks.size())));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  json m;
  m["tool"] = "ergolab";
  m["version"] = kToolVersion;
  m["name"] = config.name;
  m["config_hash"] = content_hash(config.document);
  m["seed"] = config.seed;
  m["started_at"] = started;
  m["finished_at"] = utc_now();
  m["dimension"] = op.dim();
  m["operator"] = config.document.at("operator");
  if (config.sweep) {
    m["sweep"] = {{"param", config.sweep->param},
                  {"value", config.sweep->value},
                  {"template_hash", config.sweep->template_hash}};
  } else {
    m["sweep"] = nullptr;
  }
  json tasks = json::array();
  for (const auto& t : result.tasks) {
    json j;
    j["id"] = t.id;
    j["kind"] = t.kind;
    j["status"] = t.ok ? "ok" : "failed";
    if (!t.ok) j["error"] = t.error;
    j["artifacts"] = t.artifacts;
    j["summary"] = t.summary;
    tasks.push_back(std::move(j));
  }
  m["tasks"] = tasks;
  result.manifest = m;

  const fs::path tmp = result.dir / "manifest.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << m.dump(2) << "\n";
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, result.dir / "manifest.json");
  return result;
}

std::vector<RunResult> sweep(const json& tmpl, const std::string& param,
                             const std::vector<double>& values,
                             const std::optional<std::string>& cli_out, unsigned jobs) {
  const std::string token = "$" + param;
  const std::string template_hash = content_hash(tmpl);
  std::vector<ScenarioConfig> configs;
  for (double v : values) {
    json doc = substitute(tmpl, param, v);
    if (doc.is_object() && doc.contains("name") && doc["name"].is_string() &&
        tmpl["name"].get<std::string>().find(token) == std::string::npos) {
      doc["name"] = doc["name"].get<std::string>() + "_" + param + format_double(v);
    }
    ScenarioConfig c = parse_config(doc);
    c.sweep = SweepInfo{param, v, template_hash};
    configs.push_back(std::move(c));
  }
  std::set<std::string> names;
  for (const auto& c : configs) {
    if (!names.insert(c.name).second) throw ConfigError("name", "sweep values collide on \"" + c.name + "\"");
  }
  std::vector<RunResult> results;
  for (const auto& c : configs) results.push_back(run(c, resolve_output_root(cli_out, c), jobs));
  return results;
}

}  // namespace ergolab::lab

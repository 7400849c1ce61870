#include "localbo/harness.hpp"

#include "localbo/inner_opt.hpp"
#include "localbo/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#ifndef LOCALBO_VERSION
#define LOCALBO_VERSION "0.0.0"
#endif

namespace localbo {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kObjectiveStream = 0x6f626a656374ULL;
constexpr std::uint64_t kFig1NoiseStream = 0x66696731ULL;

// ---------------------------------------------------------------------------
// Config reading

class ConfigContext {
 public:
  ConfigContext(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& key, const std::string& message) const {
    std::ostringstream out;
    out << source_;
    const int line = key.empty() ? 0 : line_of_key(key);
    if (line > 0) out << ":" << line;
    out << ": " << (path.empty() ? std::string("<root>") : path) << ": " << message;
    throw ConfigError(out.str());
  }

 private:
  // Line of the key when it occurs exactly once in the text, else 0.
  int line_of_key(const std::string& key) const {
    const std::string needle = "\"" + key + "\"";
    std::size_t pos = text_.find(needle);
    if (pos == std::string::npos || text_.find(needle, pos + 1) != std::string::npos) return 0;
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<long>(pos), '\n'));
  }

  const std::string& text_;
  std::string source_;
};

std::string join_path(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

class Section {
 public:
  Section(const json& j, std::string path, const ConfigContext& ctx) : j_(j), path_(std::move(path)), ctx_(ctx) {
    if (!j_.is_object()) ctx_.fail(path_, "", "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    ctx_.fail(join_path(path_, key), key, message);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }

  long integer(const std::string& key, long fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<long>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_unsigned()) fail(key, "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }

  std::vector<double> scalar_or_array(const std::string& key, const std::vector<double>& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array() || v.empty()) fail(key, "expected a number or a nonempty array of numbers");
    std::vector<double> out;
    for (const json& e : v) {
      if (!e.is_number()) fail(key, "expected a number or a nonempty array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  void require(bool ok, const std::string& key, const std::string& message) const {
    if (!ok) fail(key, message);
  }

  // Rejects keys that were never read; catches typos.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(it.key(), "unknown key");
    }
  }

  const std::string& path() const { return path_; }
  const ConfigContext& context() const { return ctx_; }

 private:
  const json& j_;
  std::string path_;
  const ConfigContext& ctx_;
  std::set<std::string> seen_;
};

KernelFamily parse_family(Section& s, const std::string& key, KernelFamily fallback) {
  if (!s.has(key)) return fallback;
  const std::string name = s.string(key, "");
  try {
    return kernel_family_from_string(name);
  } catch (const std::exception&) {
    s.fail(key, "unknown kernel family '" + name + "' (expected rbf or matern52)");
  }
}

BatchMode parse_batch_mode(Section& s, const std::string& key) {
  const std::string name = s.string(key, "fixed");
  try {
    return batch_mode_from_string(name);
  } catch (const std::exception&) {
    s.fail(key, "unknown batch mode '" + name + "' (expected fixed, logsq, linear or quadratic)");
  }
}

struct KernelFields {
  KernelFamily family;
  std::vector<double> lengthscale;
  double signal_variance;
};

// Kernel settings appear either flat in the section or under "kernel",
// which may also be just the family name.
KernelFields parse_kernel_fields(Section& s, KernelFields k) {
  auto read_flat = [&k](Section& sec) {
    k.family = parse_family(sec, "family", k.family);
    k.lengthscale = sec.scalar_or_array("lengthscale", k.lengthscale);
    k.signal_variance = sec.number("signal_variance", k.signal_variance);
  };
  if (s.has("kernel")) {
    const json& kj = s.raw("kernel");
    if (kj.is_string()) {
      try {
        k.family = kernel_family_from_string(kj.get<std::string>());
      } catch (const std::exception&) {
        s.fail("kernel", "unknown kernel family '" + kj.get<std::string>() + "' (expected rbf or matern52)");
      }
    } else {
      Section ks(kj, join_path(s.path(), "kernel"), s.context());
      read_flat(ks);
      ks.finish();
    }
  }
  k.lengthscale = s.scalar_or_array("lengthscale", k.lengthscale);
  k.signal_variance = s.number("signal_variance", k.signal_variance);
  for (double l : k.lengthscale) s.require(l > 0.0 && std::isfinite(l), "lengthscale", "must be positive");
  s.require(k.signal_variance > 0.0, "signal_variance", "must be positive");
  return k;
}

InnerOptConfig parse_inner_opt(Section& s, InnerOptConfig c) {
  c.restarts = static_cast<int>(s.integer("restarts", c.restarts));
  c.max_iterations = static_cast<int>(s.integer("max_iterations", c.max_iterations));
  c.gradient_tolerance = s.number("gradient_tolerance", c.gradient_tolerance);
  c.explore_restarts = static_cast<int>(s.integer("explore_restarts", c.explore_restarts));
  c.explore_max_iterations = static_cast<int>(s.integer("explore_max_iterations", c.explore_max_iterations));
  c.perturbation = s.number("perturbation", c.perturbation);
  s.require(c.restarts >= 1, "restarts", "must be >= 1");
  s.require(c.max_iterations >= 1, "max_iterations", "must be >= 1");
  s.require(c.gradient_tolerance > 0.0, "gradient_tolerance", "must be positive");
  s.require(c.explore_restarts >= 1, "explore_restarts", "must be >= 1");
  s.require(c.explore_max_iterations >= 1, "explore_max_iterations", "must be >= 1");
  s.require(c.perturbation > 0.0, "perturbation", "must be positive");
  s.finish();
  return c;
}

ObjectiveConfig parse_objective(const json& j, const ConfigContext& ctx) {
  ObjectiveConfig c;
  if (j.is_string()) {
    json wrapped = {{"kind", j.get<std::string>()}};
    return parse_objective(wrapped, ctx);
  }
  Section s(j, "objective", ctx);
  c.kind = s.string("kind", c.kind);
  const std::set<std::string> kinds{"synthetic", "sphere", "rosenbrock", "cartpole"};
  if (!kinds.count(c.kind)) s.fail("kind", "unknown objective '" + c.kind + "'");
  c.dim = static_cast<int>(s.integer("dim", c.kind == "cartpole" ? 4 : c.dim));
  s.require(c.dim >= 1, "dim", "must be >= 1");
  if (c.kind == "cartpole") s.require(c.dim == 4, "dim", "cartpole policies have 4 parameters");
  if (c.kind == "rosenbrock") s.require(c.dim >= 2, "dim", "rosenbrock needs dim >= 2");

  const double default_half = c.kind == "sphere" ? 5.0 : c.kind == "rosenbrock" ? 2.0 : 1.0;
  if (c.kind == "synthetic") {
    const KernelFields k = parse_kernel_fields(s, {c.family, c.lengthscale, c.signal_variance});
    c.family = k.family;
    c.lengthscale = k.lengthscale;
    c.signal_variance = k.signal_variance;
    if (c.lengthscale.size() != 1 && static_cast<int>(c.lengthscale.size()) != c.dim)
      s.fail("lengthscale", "needs 1 or dim entries");
    c.num_features = static_cast<int>(s.integer("num_features", c.num_features));
    s.require(c.num_features >= 1, "num_features", "must be >= 1");
    c.noise_sigma = s.number("noise_sigma", 0.1 * std::sqrt(c.signal_variance));
  } else {
    c.half_width = s.number("half_width", default_half);
    s.require(c.half_width > 0.0, "half_width", "must be positive");
    c.noise_sigma = s.number("noise_sigma", 0.0);
    if (c.kind == "cartpole") s.require(c.noise_sigma == 0.0, "noise_sigma", "cartpole noise comes from the episode seed");
  }
  s.require(c.noise_sigma >= 0.0, "noise_sigma", "must be nonnegative");
  s.finish();
  return c;
}

ModelConfig default_model(const ObjectiveConfig& obj) {
  ModelConfig m;
  if (obj.kind == "synthetic") {
    m.family = obj.family;
    m.lengthscale = obj.lengthscale;
    m.signal_variance = obj.signal_variance;
    m.noise_sigma = std::max(obj.noise_sigma, 1e-3);
  } else {
    m.lengthscale = {0.2 * 2.0 * obj.half_width};
    m.noise_sigma = 0.1;
  }
  return m;
}

ModelConfig parse_model(const json& j, const ConfigContext& ctx, const ObjectiveConfig& obj) {
  ModelConfig m = default_model(obj);
  Section s(j, "model", ctx);
  const KernelFields k = parse_kernel_fields(s, {m.family, m.lengthscale, m.signal_variance});
  m.family = k.family;
  m.lengthscale = k.lengthscale;
  m.signal_variance = k.signal_variance;
  if (m.lengthscale.size() != 1 && static_cast<int>(m.lengthscale.size()) != obj.dim)
    s.fail("lengthscale", "needs 1 or dim entries");
  m.noise_sigma = s.number("noise_sigma", m.noise_sigma);
  s.require(m.noise_sigma > 0.0, "noise_sigma", "must be positive");
  s.finish();
  return m;
}

AlgorithmConfig parse_algorithm(const json& j, const std::string& path, const ConfigContext& ctx, int dim,
                                const InnerOptConfig& inner) {
  AlgorithmConfig a;
  Section s(j, path, ctx);
  if (!s.has("name")) s.fail("name", "missing algorithm name");
  a.kind = s.string("name", "");
  const std::set<std::string> kinds{"gibo", "minucb", "la_minucb", "random"};
  if (!kinds.count(a.kind)) s.fail("name", "unknown algorithm '" + a.kind + "'");
  a.label = s.string("label", a.kind);
  s.require(!a.label.empty() && std::all_of(a.label.begin(), a.label.end(),
                                             [](char ch) {
                                               return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' ||
                                                      ch == '-' || ch == '.';
                                             }),
            "label", "must be nonempty and use only letters, digits, '_', '-' or '.'");

  ScheduleSpec& sch = a.schedule;
  if (s.has("beta") && s.raw("beta").is_string()) {
    if (s.raw("beta").get<std::string>() != "theoretical") s.fail("beta", "expected a number or \"theoretical\"");
    sch.beta_mode = BetaMode::theoretical;
  } else {
    sch.beta = s.number("beta", sch.beta);
    s.require(sch.beta >= 0.0, "beta", "must be nonnegative");
  }
  sch.delta = s.number("delta", sch.delta);
  s.require(sch.delta > 0.0 && sch.delta < 1.0, "delta", "must lie in (0, 1)");
  sch.b1_mode = parse_batch_mode(s, "b1_mode");
  sch.b1 = static_cast<int>(s.integer("b1", 1));
  sch.b2_mode = parse_batch_mode(s, "b2_mode");
  sch.b2 = static_cast<int>(s.integer("b2", sch.b2_mode == BatchMode::fixed ? dim : 1));
  s.require(sch.b1 >= 0, "b1", "must be nonnegative");
  s.require(sch.b2 >= 0, "b2", "must be nonnegative");
  sch.b_lookahead = static_cast<int>(s.integer("batch", 1));
  s.require(sch.b_lookahead >= 1, "batch", "must be >= 1");

  a.eta = s.number("eta", a.eta);
  s.require(a.eta > 0.0, "eta", "must be positive");
  a.eta_decay = s.boolean("eta_decay", a.eta_decay);
  a.lookahead.num_fantasies = static_cast<int>(s.integer("num_fantasies", a.lookahead.num_fantasies));
  s.require(a.lookahead.num_fantasies >= 1, "num_fantasies", "must be >= 1");
  a.lookahead.inner_restarts = static_cast<int>(s.integer("inner_restarts", a.lookahead.inner_restarts));
  s.require(a.lookahead.inner_restarts >= 1, "inner_restarts", "must be >= 1");
  a.max_iterations = static_cast<int>(s.integer("max_iterations", 0));
  s.require(a.max_iterations >= 0, "max_iterations", "must be nonnegative");

  a.inner_opt = inner;
  if (s.has("inner_opt")) {
    Section is(s.raw("inner_opt"), join_path(path, "inner_opt"), ctx);
    a.inner_opt = parse_inner_opt(is, inner);
  }

  if (a.kind == "gibo" || a.kind == "minucb") {
    const int b1 = a.kind == "gibo" ? 0 : sch.b1_at(1);
    if (b1 + sch.b2_at(1, dim) == 0 && a.max_iterations == 0)
      s.fail(sch.b2_mode == BatchMode::fixed ? "b2" : "b2_mode", "the schedule never queries anything");
  }
  s.finish();
  return a;
}

long first_batch(const AlgorithmConfig& a, int dim) {
  if (a.kind == "gibo") return a.schedule.b2_at(1, dim);
  if (a.kind == "minucb") return a.schedule.b1_at(1) + a.schedule.b2_at(1, dim);
  if (a.kind == "la_minucb") return a.schedule.b_lookahead + 1;
  return a.schedule.b_lookahead;
}

// ---------------------------------------------------------------------------
// Files

void write_file_atomic(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ojson vector_json(const Vector& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

ojson matrix_json(const Matrix& m) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i).transpose()));
  return a;
}

const char* sense_name(Sense s) { return s == Sense::maximize ? "maximize" : "minimize"; }

std::string versions_string() {
  std::ostringstream out;
  out << "localbo " << LOCALBO_VERSION << "; eigen " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "."
      << EIGEN_MINOR_VERSION << "; nlohmann_json " << NLOHMANN_JSON_VERSION_MAJOR << "."
      << NLOHMANN_JSON_VERSION_MINOR << "." << NLOHMANN_JSON_VERSION_PATCH << "; compiler " << __VERSION__;
  return out.str();
}

}  // namespace

// ---------------------------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source_name) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source_name + ": syntax error: " + e.what());
  }
  const ConfigContext ctx(text, source_name);
  Section s(root, "", ctx);
  ExperimentConfig cfg;
  cfg.source_text = text;

  if (!s.has("objective")) s.fail("objective", "missing objective");
  cfg.objective = parse_objective(s.raw("objective"), ctx);
  if (s.has("model")) {
    cfg.model = parse_model(s.raw("model"), ctx, cfg.objective);
  } else {
    cfg.model = default_model(cfg.objective);
  }
  if (s.has("inner_opt")) {
    Section is(s.raw("inner_opt"), "inner_opt", ctx);
    cfg.inner_opt = parse_inner_opt(is, cfg.inner_opt);
  }

  if (!s.has("budget")) s.fail("budget", "missing budget");
  cfg.budget = s.integer("budget", 0);
  s.require(cfg.budget >= 1, "budget", "must be >= 1");
  cfg.replications = static_cast<int>(s.integer("replications", 1));
  s.require(cfg.replications >= 1, "replications", "must be >= 1");
  cfg.base_seed = s.unsigned_integer("base_seed", 0);
  cfg.output_dir = s.string("output_dir", "results");
  s.require(!cfg.output_dir.empty(), "output_dir", "must be nonempty");

  if (!s.has("algorithms")) s.fail("algorithms", "missing algorithm list");
  const json& algs = s.raw("algorithms");
  if (!algs.is_array() || algs.empty()) s.fail("algorithms", "expected a nonempty array");
  std::set<std::string> labels;
  long smallest = std::numeric_limits<long>::max();
  for (std::size_t i = 0; i < algs.size(); ++i) {
    const std::string path = "algorithms[" + std::to_string(i) + "]";
    AlgorithmConfig a = parse_algorithm(algs[i], path, ctx, cfg.objective.dim, cfg.inner_opt);
    if (!labels.insert(a.label).second) ctx.fail(path, "label", "duplicate label '" + a.label + "'");
    smallest = std::min(smallest, first_batch(a, cfg.objective.dim));
    cfg.algorithms.push_back(std::move(a));
  }
  if (cfg.budget < smallest)
    s.fail("budget", "smaller than the first batch of every algorithm (" + std::to_string(smallest) + ")");
  s.finish();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.string());
}

KernelSpec model_kernel(const ModelConfig& cfg, int dim) {
  Vector ls(dim);
  for (int i = 0; i < dim; ++i) ls[i] = cfg.lengthscale.size() == 1 ? cfg.lengthscale[0] : cfg.lengthscale.at(i);
  return KernelSpec(cfg.family, ls, cfg.signal_variance);
}

std::unique_ptr<Objective> make_objective(const ObjectiveConfig& cfg, std::uint64_t seed) {
  if (cfg.kind == "synthetic") {
    ModelConfig k;
    k.family = cfg.family;
    k.lengthscale = cfg.lengthscale;
    k.signal_variance = cfg.signal_variance;
    return make_synthetic(model_kernel(k, cfg.dim), cfg.noise_sigma, cfg.num_features, seed);
  }
  if (cfg.kind == "sphere") return std::make_unique<Sphere>(cfg.dim, cfg.half_width, cfg.noise_sigma);
  if (cfg.kind == "rosenbrock") return std::make_unique<Rosenbrock>(cfg.dim, cfg.half_width, cfg.noise_sigma);
  if (cfg.kind == "cartpole") return std::make_unique<CartPole>(cfg.half_width);
  throw ConfigError("unknown objective '" + cfg.kind + "'");
}

std::uint64_t objective_seed(std::uint64_t replication_seed) {
  return derive_seed(replication_seed, kObjectiveStream);
}

Vector start_point(const Box& box, std::uint64_t base_seed, int replications, int r) {
  const Matrix u = scrambled_sobol(replications, box.dim(), base_seed);
  return box.from_unit(u.row(r).transpose());
}

RunTrace run_replication(const ExperimentConfig& cfg, const AlgorithmConfig& alg, int r) {
  const std::uint64_t seed = replication_seed(cfg.base_seed, r);
  const auto objective = make_objective(cfg.objective, objective_seed(seed));
  const int d = objective->dim();
  const Vector x1 = start_point(objective->box(), cfg.base_seed, cfg.replications, r);

  if (alg.kind == "random") return run_random_search(*objective, cfg.budget, seed, alg.schedule.b_lookahead);

  LocalOptions local;
  local.schedule = alg.schedule;
  local.kernel = model_kernel(cfg.model, d);
  local.model_noise = cfg.model.noise_sigma;
  local.exploit_opt.restarts = alg.inner_opt.restarts;
  local.exploit_opt.max_iterations = alg.inner_opt.max_iterations;
  local.exploit_opt.gradient_tolerance = alg.inner_opt.gradient_tolerance;
  local.explore_opt.restarts = alg.inner_opt.explore_restarts;
  local.explore_opt.max_iterations = alg.inner_opt.explore_max_iterations;
  local.explore_opt.gradient_tolerance = alg.inner_opt.gradient_tolerance;
  local.perturbation = alg.inner_opt.perturbation;
  local.max_iterations = alg.max_iterations;

  if (alg.kind == "gibo") {
    GiboConfig g;
    g.local = local;
    g.eta = alg.eta;
    g.eta_decay = alg.eta_decay;
    return run_gibo(*objective, x1, g, cfg.budget, seed);
  }
  if (alg.kind == "minucb") return run_minucb(*objective, x1, local, cfg.budget, seed);
  LaMinUcbConfig la;
  la.local = local;
  la.lookahead = alg.lookahead;
  return run_la_minucb(*objective, x1, la, cfg.budget, seed);
}

fs::path resolve_output_dir(const ExperimentConfig& cfg) {
  fs::path dir(cfg.output_dir);
  if (dir.is_absolute()) return dir;
  if (const char* root = std::getenv("LOCALBO_OUTPUT_ROOT"); root != nullptr && *root != '\0') return fs::path(root) / dir;
  return dir;
}

std::string trace_to_jsonl(const RunTrace& trace, const std::string& label, int replication) {
  std::string out;
  for (const IterationRecord& rec : trace.records) {
    ojson j;
    j["algorithm"] = label;
    j["replication"] = replication;
    j["t"] = rec.t;
    j["n"] = rec.n;
    j["x_t"] = vector_json(rec.x_t);
    j["queried"] = matrix_json(rec.queried);
    j["observed"] = vector_json(rec.observed);
    if (rec.true_values.size() > 0) j["true_values"] = vector_json(rec.true_values);
    j["incumbent_estimate"] = rec.incumbent_estimate;
    j["incumbent_true"] = rec.incumbent_true ? ojson(*rec.incumbent_true) : ojson(nullptr);
    j["best_observed"] = rec.best_observed;
    j["beta"] = rec.beta;
    j["b1"] = rec.b1;
    j["b2"] = rec.b2;
    out += j.dump();
    out += '\n';
  }
  ojson fin;
  fin["algorithm"] = label;
  fin["replication"] = replication;
  fin["final"] = true;
  fin["kind"] = trace.algorithm;
  fin["seed"] = trace.seed;
  fin["sense"] = sense_name(trace.sense);
  fin["total_queries"] = trace.total_queries();
  fin["x_final"] = vector_json(trace.x_final);
  out += fin.dump();
  out += '\n';
  return out;
}

std::vector<double> best_so_far_from_jsonl(const fs::path& file, std::string* label) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::vector<double> values;
  std::string line;
  bool complete = false;
  Sense sense = Sense::minimize;
  std::string name;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    name = j.at("algorithm").get<std::string>();
    if (j.value("final", false)) {
      complete = true;
      sense = j.at("sense").get<std::string>() == "maximize" ? Sense::maximize : Sense::minimize;
      continue;
    }
    // Noise-free values when the objective has them, else the observations.
    const json& src = j.contains("true_values") ? j.at("true_values") : j.at("observed");
    for (const json& v : src) values.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
  }
  if (!complete) throw std::runtime_error(file.string() + ": incomplete trace (no final record)");
  if (label) *label = name;
  const double sign = sense == Sense::maximize ? -1.0 : 1.0;
  double best = std::numeric_limits<double>::infinity();
  for (double& v : values) {
    if (sign * v < best) best = sign * v;
    v = sign * best;
  }
  return values;
}

std::vector<SummaryRow> summarize(const fs::path& dir) {
  fs::path traces = dir / "traces";
  if (!fs::is_directory(traces)) traces = dir;
  if (!fs::is_directory(traces)) throw std::runtime_error(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(traces)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no trace files in " + traces.string());

  std::map<std::string, std::vector<std::vector<double>>> groups;
  for (const fs::path& f : files) {
    std::string label;
    std::vector<double> best = best_so_far_from_jsonl(f, &label);
    groups[label].push_back(std::move(best));
  }

  std::vector<SummaryRow> rows;
  for (const auto& [label, reps] : groups) {
    std::size_t grid = std::numeric_limits<std::size_t>::max();
    for (const auto& r : reps) grid = std::min(grid, r.size());
    for (std::size_t n = 1; n <= grid; ++n) {
      SummaryRow row;
      row.algorithm = label;
      row.n = static_cast<long>(n);
      row.count = static_cast<int>(reps.size());
      double sum = 0.0;
      for (const auto& r : reps) sum += r[n - 1];
      row.mean = sum / row.count;
      double ss = 0.0;
      for (const auto& r : reps) ss += (r[n - 1] - row.mean) * (r[n - 1] - row.mean);
      row.sd = row.count > 1 ? std::sqrt(ss / (row.count - 1)) : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "algorithm,n,mean,sd,count\n";
  for (const SummaryRow& r : rows) {
    out += r.algorithm + "," + std::to_string(r.n) + "," + format_double(r.mean) + "," + format_double(r.sd) + "," +
           std::to_string(r.count) + "\n";
  }
  return out;
}

void run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  const fs::path dir = resolve_output_dir(cfg);
  if (fs::exists(dir) && !fs::is_directory(dir)) throw ConfigError(dir.string() + " exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!options.overwrite)
      throw ConfigError("output directory " + dir.string() + " is not empty; pass --overwrite to replace it");
    fs::remove_all(dir / "traces");
    fs::remove(dir / "summary.csv");
    fs::remove(dir / "manifest.json");
  }
  fs::create_directories(dir / "traces");

  struct Job {
    int alg = 0;
    int rep = 0;
    std::string status = "pending";
    std::string error;
    double wall_time = 0.0;
  };
  std::vector<Job> jobs;
  for (int r = 0; r < cfg.replications; ++r)
    for (int a = 0; a < static_cast<int>(cfg.algorithms.size()); ++a) {
      Job job;
      job.alg = a;
      job.rep = r;
      jobs.push_back(job);
    }

  ojson manifest;
  manifest["config_hash"] = "fnv1a64:" + config_hash(cfg.source_text);
  manifest["config"] = ojson::parse(cfg.source_text);
  manifest["versions"] = versions_string();
  manifest["base_seed"] = cfg.base_seed;
  ojson seeds = ojson::array();
  for (int r = 0; r < cfg.replications; ++r) {
    const std::uint64_t s = replication_seed(cfg.base_seed, r);
    seeds.push_back({{"replication", r}, {"seed", s}, {"objective_seed", objective_seed(s)}});
  }
  manifest["seeds"] = seeds;
  auto write_manifest = [&](bool complete) {
    ojson m = manifest;
    m["complete"] = complete;
    ojson js = ojson::array();
    for (const Job& j : jobs) {
      ojson e = {{"algorithm", cfg.algorithms[j.alg].label}, {"replication", j.rep}, {"status", j.status},
                 {"wall_time_s", j.wall_time}};
      if (!j.error.empty()) e["error"] = j.error;
      js.push_back(e);
    }
    m["runs"] = js;
    write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
  };
  write_manifest(false);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mutex;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size() || failed.load()) return;
      Job& job = jobs[i];
      const AlgorithmConfig& alg = cfg.algorithms[job.alg];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const RunTrace trace = run_replication(cfg, alg, job.rep);
        const fs::path file = dir / "traces" / (alg.label + "_rep" + std::to_string(job.rep) + ".jsonl");
        write_file_atomic(file, trace_to_jsonl(trace, alg.label, job.rep));
        job.status = "complete";
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mutex);
        job.status = "failed";
        job.error = e.what();
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
      }
      job.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const int threads = std::max(1, std::min<int>(options.jobs, static_cast<int>(jobs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (first_error) {
    write_manifest(false);
    std::rethrow_exception(first_error);
  }
  write_file_atomic(dir / "summary.csv", summary_to_csv(summarize(dir)));
  write_manifest(true);
}

// ---------------------------------------------------------------------------

Fig1Result compute_fig1(std::uint64_t seed) {
  constexpr int kGrid = 501;
  constexpr double kLo = -10.0;
  constexpr double kHi = 10.0;
  constexpr double kSigma = 0.05;
  constexpr double kHalfStep = 0.75;
  constexpr double kBeta = 3.0;

  const KernelSpec kernel = KernelSpec::isotropic(KernelFamily::rbf, 1, std::sqrt(2.0));
  const GpPath path = sample_prior_path(kernel, 1024, seed);

  Fig1Result r;
  r.x0 = 0.0;
  Vector x0(1);
  x0 << r.x0;
  r.data_x.resize(2, 1);
  r.data_x << r.x0 - kHalfStep, r.x0 + kHalfStep;
  Rng rng(derive_seed(seed, kFig1NoiseStream));
  r.data_y.resize(2);
  for (int i = 0; i < 2; ++i) r.data_y[i] = path.value(r.data_x.row(i).transpose()) + kSigma * rng.normal();
  const GpModel model = fit(kernel, Dataset(r.data_x, r.data_y, kSigma));

  r.grid.resize(kGrid);
  for (int i = 0; i < kGrid; ++i) r.grid[i] = (kLo * (kGrid - 1) + (kHi - kLo) * i) / (kGrid - 1);
  r.f.resize(kGrid);
  r.ucb.resize(kGrid);
  r.posterior_mean.resize(kGrid);
  r.lipschitz = 0.0;
  for (int i = 0; i < kGrid; ++i) {
    const Vector x = Vector::Constant(1, r.grid[i]);
    r.f[i] = path.value(x);
    r.posterior_mean[i] = model.posterior_mean(x);
    r.ucb[i] = r.posterior_mean[i] + kBeta * model.posterior_sd(x);
    r.lipschitz = std::max(r.lipschitz, std::abs(path.hessian(x)(0, 0)));
  }

  const double f0 = path.value(x0);
  const Vector g_true = path.gradient(x0);
  const Vector g_mu = model.posterior_mean_grad(x0);
  r.grad_true = g_true[0];
  r.grad_mu = g_mu[0];
  r.quadratic_bound.resize(kGrid);
  r.gibo_bound.resize(kGrid);
  const double eta_max = 1.0 / r.lipschitz;
  for (int i = 0; i < kGrid; ++i) {
    const Vector x = Vector::Constant(1, r.grid[i]);
    r.quadratic_bound[i] = quadratic_upper_bound(f0, g_true, r.lipschitz, x0, x);
    // The gradient-step bound lives on the ray x0 - eta * grad_mu, eta in [0, 1/L].
    double value = std::numeric_limits<double>::quiet_NaN();
    if (r.grad_mu != 0.0) {
      const double eta = (r.x0 - r.grid[i]) / r.grad_mu;
      if (eta >= 0.0 && eta <= eta_max * (1.0 + 1e-12)) value = gibo_upper_bound(f0, g_true, g_mu, eta);
    }
    r.gibo_bound[i] = value;
  }

  r.x_gradient_step = std::clamp(r.x0 - r.grad_mu / r.lipschitz, kLo, kHi);
  Eigen::Index argmin = 0;
  r.ucb.minCoeff(&argmin);
  r.x_ucb_min = r.grid[argmin];
  r.f_gradient_step = path.value(Vector::Constant(1, r.x_gradient_step));
  r.f_ucb_min = r.f[argmin];
  r.coverage = (r.f.array() <= r.ucb.array()).cast<double>().mean();
  return r;
}

std::string fig1_to_csv(const Fig1Result& r) {
  std::string out = "x,f,quadratic_bound,gibo_bound,ucb,posterior_mean\n";
  for (Eigen::Index i = 0; i < r.grid.size(); ++i) {
    out += format_double(r.grid[i]) + "," + format_double(r.f[i]) + "," + format_double(r.quadratic_bound[i]) + "," +
           format_double(r.gibo_bound[i]) + "," + format_double(r.ucb[i]) + "," + format_double(r.posterior_mean[i]) +
           "\n";
  }
  return out;
}

Fig1Result fig1_demo(std::uint64_t seed, const fs::path& out_path) {
  Fig1Result r = compute_fig1(seed);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_file_atomic(out_path, fig1_to_csv(r));
  return r;
}

}  // namespace localbo

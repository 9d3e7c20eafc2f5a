#pragma once

// Config-driven experiment runner behind the attnclust command line tool.

#include <openssl/evp.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "attnclust/attnclust.hpp"
#include "attnclust/moment_checks.hpp"

namespace attnclust::harness {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kZLimit = 4.0;        // |MC - closed form| <= 4 SE
inline constexpr double kExactTol = 1e-12;    // enumeration vs formula
inline constexpr double kRestrictionTol = 1e-10;
inline constexpr int kMaxEnumerationLength = 16;

// ---------------------------------------------------------------------------
// Names
// ---------------------------------------------------------------------------

enum class Experiment { Train, VerifyRisk, VerifyMoments, SweepReg, SweepDim, CtxStats, Embed, CriticalPoints };
enum class Method { Psgd, Pgd, PgdAmbient };

template <class E>
using NameTable = std::vector<std::pair<E, const char*>>;

inline const NameTable<Experiment>& experiment_names() {
  static const NameTable<Experiment> t = {{Experiment::Train, "train"},
                                          {Experiment::VerifyRisk, "verify-risk"},
                                          {Experiment::VerifyMoments, "verify-moments"},
                                          {Experiment::SweepReg, "sweep-reg"},
                                          {Experiment::SweepDim, "sweep-dim"},
                                          {Experiment::CtxStats, "ctx-stats"},
                                          {Experiment::Embed, "embed"},
                                          {Experiment::CriticalPoints, "critical-points"}};
  return t;
}

inline const NameTable<Method>& method_names() {
  static const NameTable<Method> t = {{Method::Psgd, "psgd"}, {Method::Pgd, "pgd"}, {Method::PgdAmbient, "pgd-ambient"}};
  return t;
}

inline const NameTable<MixtureKind>& mixture_names() {
  static const NameTable<MixtureKind> t = {
      {MixtureKind::Dirac, "dirac"}, {MixtureKind::Gaussian, "gaussian"}, {MixtureKind::InContext, "incontext"}};
  return t;
}

inline const NameTable<CentroidPlacement>& placement_names() {
  static const NameTable<CentroidPlacement> t = {{CentroidPlacement::Canonical, "canonical"},
                                                 {CentroidPlacement::Random, "random"}};
  return t;
}

inline const NameTable<PredictorKind>& predictor_names() {
  static const NameTable<PredictorKind> t = {{PredictorKind::LinearMultiHead, "linear"},
                                             {PredictorKind::ShapedSoftmax, "softmax"},
                                             {PredictorKind::InContext, "incontext"}};
  return t;
}

inline const NameTable<Projection>& projection_names() {
  static const NameTable<Projection> t = {{Projection::Riemannian, "riemannian"}, {Projection::Euclidean, "euclidean"}};
  return t;
}

inline const NameTable<InitKind>& init_names() {
  static const NameTable<InitKind> t = {
      {InitKind::OnManifold, "manifold"}, {InitKind::UniformSphere, "sphere"}, {InitKind::Explicit, "explicit"}};
  return t;
}

inline const NameTable<RegularizerForm>& regularizer_names() {
  static const NameTable<RegularizerForm> t = {{RegularizerForm::Pairwise, "pairwise"},
                                               {RegularizerForm::Product, "product"}};
  return t;
}

template <class E>
const char* name_of(const NameTable<E>& table, E value) {
  for (const auto& [v, n] : table)
    if (v == value) return n;
  throw ConfigError("unnamed enum value");
}

template <class E>
E parse_name(const NameTable<E>& table, const std::string& name, const std::string& key) {
  for (const auto& [v, n] : table)
    if (name == n) return v;
  std::string options;
  for (const auto& entry : table) options += std::string(options.empty() ? "" : ", ") + entry.second;
  throw ConfigError("config key '" + key + "': unknown value '" + name + "' (expected one of " + options + ")");
}

inline const char* to_string(Experiment e) { return name_of(experiment_names(), e); }

inline Experiment parse_experiment(const std::string& name) { return parse_name(experiment_names(), name, "experiment"); }

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

// A temperature given as a number or as a rule evaluated for the setting at
// hand (noise level, dimension, sequence length, predictor).
struct Temperature {
  enum class Rule { Fixed, LambdaStar, Unbiased, UnbiasedLimit, Optimal };
  Rule rule = Rule::Fixed;
  double value = 0.6;

  static Temperature fixed(double v) { return {Rule::Fixed, v}; }
  static Temperature of(Rule r) { return {r, 0.0}; }

  double resolve(double sigma, int d, int L, PredictorKind kind) const {
    const bool ctx = kind == PredictorKind::InContext;
    switch (rule) {
      case Rule::Fixed: return value;
      case Rule::LambdaStar: return lambda_star(sigma, d, L);
      case Rule::Unbiased:
        return ctx ? ctx_statistics(sigma, d, L, 1.0).unbiasing_lambda : oracle_unbiasing_lambda(L, sigma);
      case Rule::UnbiasedLimit: return 1.0 / (1.0 + 2.0 * sigma * sigma);
      case Rule::Optimal: return ctx ? ctx_statistics(sigma, d, L, 1.0).optimal_lambda : oracle_optimal_lambda(sigma);
    }
    throw ConfigError("unknown temperature rule");
  }
};

inline const NameTable<Temperature::Rule>& temperature_rule_names() {
  static const NameTable<Temperature::Rule> t = {{Temperature::Rule::LambdaStar, "lambda-star"},
                                                 {Temperature::Rule::Unbiased, "unbiased"},
                                                 {Temperature::Rule::UnbiasedLimit, "unbiased-limit"},
                                                 {Temperature::Rule::Optimal, "optimal"}};
  return t;
}

struct MixtureConfig {
  MixtureKind kind = MixtureKind::Gaussian;
  int d = 5;
  int K = 2;
  double sigma = 0.3;
  CentroidPlacement placement = CentroidPlacement::Canonical;
};

// Cells of the risk verification grid.
struct RiskGrid {
  std::vector<double> sigma{0.3, 1.0};
  std::vector<int> d{3, 5};
  std::vector<int> L{5, 30};
  std::vector<Temperature> lambda{Temperature::of(Temperature::Rule::LambdaStar)};
  int placements = 2;  // even placements start on the manifold, odd ones anywhere on the sphere
};

struct ExperimentConfig {
  Experiment experiment = Experiment::Train;
  MixtureConfig mixture;
  int L = 30;
  PredictorKind predictor = PredictorKind::LinearMultiHead;
  Temperature lambda = Temperature::fixed(0.6);
  Method method = Method::Psgd;
  OptimizerConfig optimizer;
  int runs = 10;
  std::uint64_t seed = 0;
  std::size_t samples = 100000;
  std::vector<double> rho_values;
  std::vector<int> dims;
  RiskGrid grid;
  std::string out = "results";

  void validate() const;
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* a : allowed) known = known || it.key() == a;
    if (!known) throw ConfigError("unknown config key '" + where + (where.empty() ? "" : ".") + it.key() + "'");
  }
}

inline std::string key_path(const std::string& where, const char* key) {
  return where.empty() ? std::string(key) : where + "." + key;
}

inline void read_number(const json& j, const char* key, double& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_number()) throw ConfigError("config key '" + key_path(where, key) + "' must be a number");
  out = j.at(key).get<double>();
}

template <class Int>
void read_integer(const json& j, const char* key, Int& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError("config key '" + key_path(where, key) + "' must be an integer");
  if constexpr (std::is_unsigned_v<Int>) {
    if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)
      throw ConfigError("config key '" + key_path(where, key) + "' must be nonnegative");
    out = v.get<Int>();
  } else {
    const auto x = v.get<std::int64_t>();
    if (x < std::numeric_limits<Int>::min() || x > std::numeric_limits<Int>::max())
      throw ConfigError("config key '" + key_path(where, key) + "' is out of range");
    out = static_cast<Int>(x);
  }
}

inline void read_bool(const json& j, const char* key, bool& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_boolean()) throw ConfigError("config key '" + key_path(where, key) + "' must be true or false");
  out = j.at(key).get<bool>();
}

inline void read_string(const json& j, const char* key, std::string& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_string()) throw ConfigError("config key '" + key_path(where, key) + "' must be a string");
  out = j.at(key).get<std::string>();
}

template <class E>
void read_enum(const json& j, const char* key, E& out, const NameTable<E>& table, const std::string& where) {
  if (!j.contains(key)) return;
  std::string s;
  read_string(j, key, s, where);
  out = parse_name(table, s, key_path(where, key));
}

inline Temperature parse_temperature(const json& v, const std::string& key) {
  if (v.is_number()) return Temperature::fixed(v.get<double>());
  if (v.is_string()) return Temperature::of(parse_name(temperature_rule_names(), v.get<std::string>(), key));
  throw ConfigError("config key '" + key + "' must be a number or a temperature rule name");
}

inline json temperature_json(const Temperature& t) {
  if (t.rule == Temperature::Rule::Fixed) return t.value;
  return name_of(temperature_rule_names(), t.rule);
}

template <class T>
std::vector<T> read_list(const json& j, const char* key, const std::string& where, std::vector<T> fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  const std::string path = key_path(where, key);
  if (!v.is_array()) throw ConfigError("config key '" + path + "' must be a list");
  std::vector<T> out;
  for (const auto& e : v) {
    if constexpr (std::is_integral_v<T>) {
      if (!e.is_number_integer()) throw ConfigError("config key '" + path + "' must list integers");
    } else {
      if (!e.is_number()) throw ConfigError("config key '" + path + "' must list numbers");
    }
    out.push_back(e.get<T>());
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  using namespace detail;
  reject_unknown(j,
                 {"experiment", "mixture", "L", "predictor", "lambda", "method", "optimizer", "runs", "seed", "samples",
                  "rho_values", "dims", "grid", "out"},
                 "");
  ExperimentConfig c;
  read_enum(j, "experiment", c.experiment, experiment_names(), "");
  if (j.contains("mixture")) {
    const json& m = j.at("mixture");
    reject_unknown(m, {"kind", "d", "K", "sigma", "placement"}, "mixture");
    read_enum(m, "kind", c.mixture.kind, mixture_names(), "mixture");
    read_integer(m, "d", c.mixture.d, "mixture");
    read_integer(m, "K", c.mixture.K, "mixture");
    read_number(m, "sigma", c.mixture.sigma, "mixture");
    read_enum(m, "placement", c.mixture.placement, placement_names(), "mixture");
  }
  read_integer(j, "L", c.L, "");
  read_enum(j, "predictor", c.predictor, predictor_names(), "");
  if (j.contains("lambda")) c.lambda = parse_temperature(j.at("lambda"), "lambda");
  read_enum(j, "method", c.method, method_names(), "");
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    const std::string w = "optimizer";
    reject_unknown(o,
                   {"gamma", "iterations", "batch_size", "rho", "projection", "init", "initial_heads", "train_psi",
                    "train_lambda", "psi0", "lambda0", "record_every", "regularizer"},
                   w);
    auto& opt = c.optimizer;
    read_number(o, "gamma", opt.gamma, w);
    read_integer(o, "iterations", opt.iterations, w);
    read_integer(o, "batch_size", opt.batch_size, w);
    read_number(o, "rho", opt.rho, w);
    read_enum(o, "projection", opt.projection, projection_names(), w);
    read_enum(o, "init", opt.init, init_names(), w);
    if (o.contains("initial_heads")) {
      const json& h = o.at("initial_heads");
      if (!h.is_array()) throw ConfigError("config key 'optimizer.initial_heads' must be a list of vectors");
      opt.initial_heads.clear();
      for (const auto& v : h) {
        if (!v.is_array() || v.empty()) throw ConfigError("config key 'optimizer.initial_heads' must list vectors");
        Vec x(static_cast<Eigen::Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (!v[i].is_number()) throw ConfigError("config key 'optimizer.initial_heads' must hold numbers");
          x(static_cast<Eigen::Index>(i)) = v[i].get<double>();
        }
        opt.initial_heads.push_back(std::move(x));
      }
    }
    read_bool(o, "train_psi", opt.train_psi, w);
    read_bool(o, "train_lambda", opt.train_lambda, w);
    read_number(o, "psi0", opt.psi0, w);
    read_number(o, "lambda0", opt.lambda0, w);
    read_integer(o, "record_every", opt.record_every, w);
    read_enum(o, "regularizer", opt.regularizer, regularizer_names(), w);
  }
  read_integer(j, "runs", c.runs, "");
  read_integer(j, "seed", c.seed, "");
  read_integer(j, "samples", c.samples, "");
  c.rho_values = read_list<double>(j, "rho_values", "", c.rho_values);
  c.dims = read_list<int>(j, "dims", "", c.dims);
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    reject_unknown(g, {"sigma", "d", "L", "lambda", "placements"}, "grid");
    c.grid.sigma = read_list<double>(g, "sigma", "grid", c.grid.sigma);
    c.grid.d = read_list<int>(g, "d", "grid", c.grid.d);
    c.grid.L = read_list<int>(g, "L", "grid", c.grid.L);
    if (g.contains("lambda")) {
      if (!g.at("lambda").is_array()) throw ConfigError("config key 'grid.lambda' must be a list");
      c.grid.lambda.clear();
      for (const auto& v : g.at("lambda")) c.grid.lambda.push_back(parse_temperature(v, "grid.lambda"));
    }
    read_integer(g, "placements", c.grid.placements, "grid");
  }
  read_string(j, "out", c.out, "");
  c.validate();
  return c;
}

// Fully resolved config in a fixed key order; its dump is what gets hashed.
inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  j["mixture"] = {{"kind", name_of(mixture_names(), c.mixture.kind)},
                  {"d", c.mixture.d},
                  {"K", c.mixture.K},
                  {"sigma", c.mixture.sigma},
                  {"placement", name_of(placement_names(), c.mixture.placement)}};
  j["L"] = c.L;
  j["predictor"] = name_of(predictor_names(), c.predictor);
  j["lambda"] = detail::temperature_json(c.lambda);
  j["method"] = name_of(method_names(), c.method);
  const auto& o = c.optimizer;
  json heads = json::array();
  for (const auto& h : o.initial_heads) heads.push_back(std::vector<double>(h.data(), h.data() + h.size()));
  j["optimizer"] = {{"gamma", o.gamma},
                    {"iterations", o.iterations},
                    {"batch_size", o.batch_size},
                    {"rho", o.rho},
                    {"projection", name_of(projection_names(), o.projection)},
                    {"init", name_of(init_names(), o.init)},
                    {"initial_heads", heads},
                    {"train_psi", o.train_psi},
                    {"train_lambda", o.train_lambda},
                    {"psi0", o.psi0},
                    {"lambda0", o.lambda0},
                    {"record_every", o.record_every},
                    {"regularizer", name_of(regularizer_names(), o.regularizer)}};
  j["runs"] = c.runs;
  j["seed"] = c.seed;
  j["samples"] = c.samples;
  j["rho_values"] = c.rho_values;
  j["dims"] = c.dims;
  json lambdas = json::array();
  for (const auto& t : c.grid.lambda) lambdas.push_back(detail::temperature_json(t));
  j["grid"] = {{"sigma", c.grid.sigma},
               {"d", c.grid.d},
               {"L", c.grid.L},
               {"lambda", lambdas},
               {"placements", c.grid.placements}};
  j["out"] = c.out;
  return j;
}

inline void ExperimentConfig::validate() const {
  const auto& m = mixture;
  if (m.d < 2) throw ConfigError("mixture.d must be at least 2");
  if (m.K < 1 || m.K > m.d) throw ConfigError("mixture.K must lie in [1, d]");
  if (!(m.sigma >= 0) || !std::isfinite(m.sigma)) throw ConfigError("mixture.sigma must be finite and nonnegative");
  if (m.kind == MixtureKind::Dirac && m.sigma != 0) throw ConfigError("a dirac mixture needs mixture.sigma = 0");
  if (m.kind == MixtureKind::InContext && m.K != 2) throw ConfigError("in-context mixtures have two centroids");
  if (L < 1) throw ConfigError("L must be positive");
  if (runs < 1) throw ConfigError("runs must be positive");
  if (samples < 1) throw ConfigError("samples must be positive");
  if (lambda.rule == Temperature::Rule::Fixed && (!(lambda.value >= 0) || !std::isfinite(lambda.value)))
    throw ConfigError("lambda must be finite and nonnegative");
  optimizer.validate();

  const bool trains = experiment == Experiment::Train || experiment == Experiment::SweepReg ||
                      experiment == Experiment::SweepDim;
  if (trains) {
    if (m.kind == MixtureKind::InContext) throw ConfigError("training needs a fixed-centroid mixture");
    if (predictor == PredictorKind::InContext) throw ConfigError("the in-context layer has no parameters to train");
    if (predictor == PredictorKind::ShapedSoftmax && m.K != 2)
      throw ConfigError("the shaped softmax predictor has two heads");
    if (predictor == PredictorKind::ShapedSoftmax && method != Method::Psgd)
      throw ConfigError("the shaped softmax predictor trains with psgd only");
    if (method == Method::Pgd && m.K != 2) throw ConfigError("the reduced dynamics has two heads");
    if (method == Method::Pgd && optimizer.init == InitKind::UniformSphere)
      throw ConfigError("the reduced dynamics needs a start on the manifold");
    if (method != Method::Psgd && m.placement != CentroidPlacement::Canonical)
      throw ConfigError("closed-form descent uses the canonical centroids");
  }
  if (experiment == Experiment::SweepReg && rho_values.empty()) throw ConfigError("sweep-reg needs rho_values");
  if (experiment == Experiment::SweepDim) {
    if (dims.empty()) throw ConfigError("sweep-dim needs dims");
    for (int d : dims)
      if (d < std::max(2, m.K)) throw ConfigError("every swept dimension must hold the centroids");
  }
  for (double r : rho_values)
    if (!(r >= 0) || !std::isfinite(r)) throw ConfigError("rho_values must be finite and nonnegative");
  if (experiment == Experiment::VerifyRisk) {
    if (grid.sigma.empty() || grid.d.empty() || grid.L.empty() || grid.lambda.empty())
      throw ConfigError("every grid axis needs at least one value");
    if (grid.placements < 1) throw ConfigError("grid.placements must be positive");
    for (double s : grid.sigma)
      if (!(s >= 0) || !std::isfinite(s)) throw ConfigError("grid.sigma must be finite and nonnegative");
    for (int d : grid.d)
      if (d < 2) throw ConfigError("grid.d must be at least 2");
    for (int l : grid.L)
      if (l < 1) throw ConfigError("grid.L must be positive");
  }
  if (experiment == Experiment::CtxStats || experiment == Experiment::Embed) {
    if (predictor == PredictorKind::ShapedSoftmax) throw ConfigError("statistics cover the linear and in-context layers");
    if (predictor == PredictorKind::InContext && m.kind != MixtureKind::InContext)
      throw ConfigError("the in-context layer is studied on in-context data");
    if (predictor == PredictorKind::LinearMultiHead && m.kind == MixtureKind::InContext)
      throw ConfigError("oracle heads need fixed centroids");
  }
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

struct Preset {
  const char* name;
  const char* description;
  const char* config;  // JSON, applied over the defaults
};

inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> p = {
      {"fig-linear-manifold", "linear heads, Gaussian mixture sigma=0.3, start on the manifold",
       R"({"experiment": "train", "mixture": {"kind": "gaussian", "d": 5, "K": 2, "sigma": 0.3}, "L": 30,
           "lambda": 0.6, "optimizer": {"gamma": 0.01, "iterations": 10000, "batch_size": 256, "rho": 0,
           "init": "manifold"}, "runs": 10})"},
      {"fig-linear-manifold-high-noise", "linear heads, Gaussian mixture sigma=1, start on the manifold",
       R"({"experiment": "train", "mixture": {"kind": "gaussian", "d": 5, "K": 2, "sigma": 1.0}, "L": 30,
           "lambda": 0.2, "optimizer": {"gamma": 0.01, "iterations": 10000, "batch_size": 256, "rho": 0,
           "init": "manifold"}, "runs": 10})"},
      {"fig-linear-sphere", "linear heads, sigma=0.3, uniform start, no regularization",
       R"({"experiment": "train", "mixture": {"kind": "gaussian", "d": 5, "K": 2, "sigma": 0.3}, "L": 30,
           "lambda": 0.6, "optimizer": {"gamma": 0.01, "iterations": 10000, "batch_size": 256, "rho": 0,
           "init": "sphere"}, "runs": 10})"},
      {"fig-linear-sphere-reg", "linear heads, sigma=0.3, uniform start, rho=0.2",
       R"({"experiment": "train", "mixture": {"kind": "gaussian", "d": 5, "K": 2, "sigma": 0.3}, "L": 30,
           "lambda": 0.6, "optimizer": {"gamma": 0.01, "iterations": 10000, "batch_size": 256, "rho": 0.2,
           "init": "sphere"}, "runs": 10})"},
      {"fig-linear-sphere-reg-high-noise", "linear heads, sigma=1, uniform start, rho=0.2",
       R"({"experiment": "train", "mixture": {"kind": "gaussian", "d": 5, "K": 2, "sigma": 1.0}, "L": 30,
           "lambda": 0.2, "optimizer": {"gamma": 0.01, "iterations": 10000, "batch_size": 256, "rho": 0.2,
           "init": "sphere"}, "runs": 10})"},
      {"fig-dirac-manifold", "linear heads, Dirac mixture, start on the manifold",
       R"({"experiment": "train", "mixture": {"kind": "dirac", "d": 5, "K": 2, "sigma": 0}, "L": 30,
           "lambda": 0.6, "optimizer": {"gamma": 0.01, "iterations": 10000, "batch_size": 256, "rho": 0,
           "init": "manifold"}, "runs": 10})"},
      {"fig-dirac-sphere", "linear heads, Dirac mixture, uniform start, no regularization",
       R"({"experiment": "train", "mixture": {"kind": "dirac", "d": 5, "K": 2, "sigma": 0}, "L": 30,
           "lambda": 0.6, "optimizer": {"gamma": 0.01, "iterations": 10000, "batch_size": 256, "rho": 0,
           "init": "sphere"}, "runs": 10})"},
      {"fig-dirac-sphere-reg", "linear heads, Dirac mixture, uniform start, rho=0.1",
       R"({"experiment": "train", "mixture": {"kind": "dirac", "d": 5, "K": 2, "sigma": 0}, "L": 30,
           "lambda": 0.6, "optimizer": {"gamma": 0.01, "iterations": 10000, "batch_size": 256, "rho": 0.1,
           "init": "sphere"}, "runs": 10})"},
      {"fig-softmax", "shaped softmax heads with trainable psi and lambda, sigma=0.3, rho0=0.5",
       R"({"experiment": "train", "mixture": {"kind": "gaussian", "d": 5, "K": 2, "sigma": 0.3}, "L": 30,
           "predictor": "softmax", "optimizer": {"gamma": 0.01, "iterations": 10000, "batch_size": 256,
           "rho": 0.5, "init": "sphere", "psi0": 2, "lambda0": 3}, "runs": 10})"},
      {"fig-three-heads", "three linear heads in d=6, pairwise regularizer rho=0.2",
       R"({"experiment": "train", "mixture": {"kind": "gaussian", "d": 6, "K": 3, "sigma": 0.3}, "L": 30,
           "lambda": 0.6, "optimizer": {"gamma": 0.01, "iterations": 20000, "batch_size": 256, "rho": 0.2,
           "init": "sphere", "regularizer": "pairwise"}, "runs": 10})"},
      {"fig-three-heads-product", "three linear heads in d=6, product regularizer rho=0.2",
       R"({"experiment": "train", "mixture": {"kind": "gaussian", "d": 6, "K": 3, "sigma": 0.3}, "L": 30,
           "lambda": 0.6, "optimizer": {"gamma": 0.01, "iterations": 20000, "batch_size": 256, "rho": 0.2,
           "init": "sphere", "regularizer": "product"}, "runs": 10})"},
      {"sweep-reg-dirac", "final distance vs rho on the Dirac mixture, 15 values in [0, 0.3]",
       R"({"experiment": "sweep-reg", "mixture": {"kind": "dirac", "d": 5, "K": 2, "sigma": 0}, "L": 30,
           "lambda": 0.6, "optimizer": {"gamma": 0.01, "iterations": 5000, "batch_size": 256, "init": "sphere"},
           "runs": 10, "rho_values": [0, 0.02142857142857143, 0.04285714285714286, 0.06428571428571428,
           0.08571428571428572, 0.10714285714285714, 0.12857142857142856, 0.15, 0.17142857142857143,
           0.19285714285714287, 0.21428571428571427, 0.23571428571428571, 0.2571428571428571,
           0.2785714285714286, 0.3]})"},
      {"sweep-reg-gaussian", "final distance vs rho at sigma=0.3, 30 values in [0, 3]",
       R"({"experiment": "sweep-reg", "mixture": {"kind": "gaussian", "d": 5, "K": 2, "sigma": 0.3}, "L": 30,
           "lambda": 0.6, "optimizer": {"gamma": 0.01, "iterations": 5000, "batch_size": 256, "init": "sphere"},
           "runs": 10, "rho_values": [0, 0.10344827586206896, 0.20689655172413793, 0.3103448275862069,
           0.41379310344827586, 0.5172413793103449, 0.6206896551724138, 0.7241379310344828,
           0.8275862068965517, 0.9310344827586207, 1.0344827586206897, 1.1379310344827587,
           1.2413793103448276, 1.3448275862068966, 1.4482758620689655, 1.5517241379310345,
           1.6551724137931034, 1.7586206896551724, 1.8620689655172413, 1.9655172413793103,
           2.0689655172413794, 2.1724137931034484, 2.2758620689655173, 2.3793103448275863,
           2.4827586206896552, 2.586206896551724, 2.689655172413793, 2.793103448275862,
           2.896551724137931, 3]})"},
      {"sweep-dim-manifold", "minimal RMSE after 5000 iterations vs dimension, start on the manifold",
       R"({"experiment": "sweep-dim", "mixture": {"kind": "gaussian", "K": 2, "sigma": 0.3}, "L": 30,
           "lambda": 0.6, "optimizer": {"gamma": 0.01, "iterations": 5000, "batch_size": 256, "rho": 0,
           "init": "manifold"}, "runs": 10, "dims": [4, 10, 25, 50, 100, 200]})"},
      {"verify-risk-degenerate", "closed-form risk vs exhaustive enumeration on the Dirac mixture",
       R"({"experiment": "verify-risk", "mixture": {"kind": "dirac", "sigma": 0},
           "grid": {"sigma": [0], "d": [5], "L": [2, 3, 5], "lambda": [0.3, "lambda-star"], "placements": 4}})"},
      {"verify-risk-gaussian", "closed-form risk vs Monte Carlo on Gaussian mixtures",
       R"({"experiment": "verify-risk", "samples": 1000000,
           "grid": {"sigma": [0.3, 1], "d": [3, 5], "L": [5, 30], "lambda": ["lambda-star"], "placements": 2}})"},
      {"verify-moments", "Gaussian moment identities vs Monte Carlo on random vector configurations",
       R"({"experiment": "verify-moments", "runs": 10, "samples": 10000000})"},
      {"ctx-stats", "in-context layer statistics on in-context data, d=10, sigma=0.3, L=500",
       R"({"experiment": "ctx-stats", "mixture": {"kind": "incontext", "d": 10, "K": 2, "sigma": 0.3}, "L": 500,
           "predictor": "incontext", "lambda": "unbiased", "runs": 1, "samples": 200000})"},
      {"oracle-stats", "oracle linear predictor statistics, d=10, sigma=0.3, L=500",
       R"({"experiment": "ctx-stats", "mixture": {"kind": "gaussian", "d": 10, "K": 2, "sigma": 0.3}, "L": 500,
           "predictor": "linear", "lambda": "optimal", "runs": 1, "samples": 200000})"},
      {"embed-oracle", "PCA view of inputs and oracle linear embeddings, d=10, sigma=0.3, L=500",
       R"({"experiment": "embed", "mixture": {"kind": "gaussian", "d": 10, "K": 2, "sigma": 0.3}, "L": 500,
           "predictor": "linear", "lambda": "unbiased-limit", "runs": 10})"},
      {"embed-ctx", "PCA view of inputs and in-context embeddings, d=10, sigma=0.3, L=500",
       R"({"experiment": "embed", "mixture": {"kind": "incontext", "d": 10, "K": 2, "sigma": 0.3}, "L": 500,
           "predictor": "incontext", "lambda": "unbiased-limit", "runs": 10})"},
      {"critical-points", "critical points of the Dirac risk at the optimal temperature, L=30",
       R"({"experiment": "critical-points", "mixture": {"kind": "dirac", "sigma": 0}, "L": 30,
           "lambda": "lambda-star"})"},
  };
  return p;
}

inline const Preset& find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (name == p.name) return p;
  throw ConfigError("unknown preset '" + name + "'");
}

inline json preset_json(const std::string& name) { return json::parse(find_preset(name).config); }

inline const char* default_preset(Experiment e) {
  switch (e) {
    case Experiment::Train: return "fig-linear-manifold";
    case Experiment::VerifyRisk: return "verify-risk-gaussian";
    case Experiment::VerifyMoments: return "verify-moments";
    case Experiment::SweepReg: return "sweep-reg-dirac";
    case Experiment::SweepDim: return "sweep-dim-manifold";
    case Experiment::CtxStats: return "ctx-stats";
    case Experiment::Embed: return "embed-oracle";
    case Experiment::CriticalPoints: return "critical-points";
  }
  throw ConfigError("unknown experiment");
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

struct ResultRow {
  int run = 0;
  long iteration = 0;
  std::string metric;
  double value = kNaN;
  double se = kNaN;  // NaN when not applicable
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  json summary;
  std::vector<int> flagged_runs;  // runs with a non-finite metric
  std::vector<std::pair<std::string, std::string>> extra_files;
  bool passed = true;  // verdict of the verification experiments
};

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline json provenance(const ExperimentConfig& cfg) {
  json c = config_to_json(cfg);
  c.erase("out");  // where results go does not change them
  return {{"tool", "attnclust"},
          {"version", kVersion},
          {"experiment", to_string(cfg.experiment)},
          {"config_sha256", sha256_hex(c.dump())},
          {"seeds", {{"first", cfg.seed}, {"count", cfg.runs}}},
          {"config", c}};
}

// Shortest decimal form that reads back to the same double.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string rows_csv(const std::vector<ResultRow>& rows) {
  std::string out = "run,iteration,metric,value,se\n";
  for (const auto& r : rows) {
    out += std::to_string(r.run) + ',' + std::to_string(r.iteration) + ',' + r.metric + ',' + format_number(r.value) +
           ',' + (std::isnan(r.se) ? std::string() : format_number(r.se)) + '\n';
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

inline void write_outputs(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "rows.csv", rows_csv(r.rows));
  write_text(dir / "summary.json", r.summary.dump(2) + "\n");
  for (const auto& [name, text] : r.extra_files) write_text(dir / name, text);
}

// Percentile with linear interpolation between order statistics.
inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline json band(const std::vector<double>& values) {
  std::vector<double> finite;
  for (double v : values)
    if (std::isfinite(v)) finite.push_back(v);
  return {{"p2.5", percentile(finite, 2.5)},
          {"median", percentile(finite, 50)},
          {"p97.5", percentile(finite, 97.5)},
          {"n", finite.size()}};
}

namespace detail {

inline std::vector<int> non_finite_runs(const std::vector<ResultRow>& rows) {
  std::vector<int> out;
  for (const auto& r : rows)
    if (!std::isfinite(r.value) && (out.empty() || out.back() != r.run)) out.push_back(r.run);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

// Per-iteration percentile bands of every metric over the unflagged runs.
inline json iteration_bands(const std::vector<ResultRow>& rows, const std::vector<int>& flagged) {
  std::vector<std::string> order;
  std::map<std::string, std::map<long, std::vector<double>>> by_metric;
  for (const auto& r : rows) {
    if (contains(flagged, r.run)) continue;
    if (!by_metric.count(r.metric)) order.push_back(r.metric);
    by_metric[r.metric][r.iteration].push_back(r.value);
  }
  json out = json::object();
  for (const auto& metric : order) {
    json iters = json::array(), lo = json::array(), mid = json::array(), hi = json::array();
    for (const auto& [k, values] : by_metric[metric]) {
      const json b = band(values);
      iters.push_back(k);
      lo.push_back(b["p2.5"]);
      mid.push_back(b["median"]);
      hi.push_back(b["p97.5"]);
    }
    out[metric] = {{"iteration", iters}, {"p2.5", lo}, {"median", mid}, {"p97.5", hi}};
  }
  return out;
}

inline SeedStream run_stream(const ExperimentConfig& cfg, int i) { return SeedStream(cfg.seed + static_cast<std::uint64_t>(i)); }

inline MixtureSpec make_spec(const MixtureConfig& m, const SeedStream& stream) {
  if (m.kind == MixtureKind::InContext) return MixtureSpec::in_context(m.d, m.sigma);
  auto cents = make_orthonormal_centroids(m.d, m.K, m.placement, stream.split(2));
  return m.kind == MixtureKind::Dirac ? MixtureSpec::dirac(std::move(cents)) : MixtureSpec::gaussian(std::move(cents), m.sigma);
}

struct TrainOutcome {
  TrainTrace trace;
  std::vector<Vec> centroids;
};

inline TrainOutcome train_once(const ExperimentConfig& cfg, const SeedStream& stream) {
  const MixtureSpec spec = make_spec(cfg.mixture, stream);
  TrainOutcome out{{}, spec.centroids};
  if (cfg.predictor == PredictorKind::ShapedSoftmax) {
    out.trace = psgd_soft_run(spec, cfg.L, cfg.optimizer, stream);
    return out;
  }
  const double lambda = cfg.lambda.resolve(spec.sigma, spec.d, cfg.L, cfg.predictor);
  switch (cfg.method) {
    case Method::Psgd: out.trace = psgd_run(spec, cfg.L, lambda, cfg.optimizer, stream); break;
    case Method::Pgd:
      out.trace = pgd_run(ClosedFormObjective{spec.centroids, spec.sigma, spec.d, cfg.L, lambda}, cfg.optimizer, stream);
      break;
    case Method::PgdAmbient:
      out.trace =
          pgd_run_ambient(ClosedFormObjective{spec.centroids, spec.sigma, spec.d, cfg.L, lambda}, cfg.optimizer, stream);
      break;
  }
  return out;
}

inline void append_record_rows(std::vector<ResultRow>& rows, int run, const TraceRecord& r, int d, bool softmax) {
  auto add = [&](const std::string& metric, double v) { rows.push_back({run, r.iteration, metric, v, kNaN}); };
  add("distance", r.distance);
  add("signed_distance", r.signed_distance);
  add("minimal_rmse", r.distance / std::sqrt(static_cast<double>(d)));
  add("objective", r.objective);
  for (std::size_t i = 0; i < r.kappa.size(); ++i) add("kappa_" + std::to_string(i), r.kappa[i]);
  if (softmax) {
    add("psi", r.psi);
    add("lambda", r.lambda);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

inline ExperimentResult run_train(const ExperimentConfig& cfg) {
  std::vector<detail::TrainOutcome> outcomes(cfg.runs);
  parallel_for(cfg.runs, [&](std::size_t i) {
    outcomes[i] = detail::train_once(cfg, detail::run_stream(cfg, static_cast<int>(i)));
  });
  ExperimentResult res;
  const bool softmax = cfg.predictor == PredictorKind::ShapedSoftmax;
  for (int i = 0; i < cfg.runs; ++i)
    for (const auto& rec : outcomes[i].trace.records)
      detail::append_record_rows(res.rows, i, rec, cfg.mixture.d, softmax);
  res.flagged_runs = detail::non_finite_runs(res.rows);

  json final_metrics = json::object();
  for (const char* metric : {"distance", "signed_distance", "minimal_rmse", "objective"}) {
    std::vector<double> values;
    for (int i = 0; i < cfg.runs; ++i) {
      if (detail::contains(res.flagged_runs, i)) continue;
      const auto& r = outcomes[i].trace.final();
      const double v = std::string(metric) == "distance"          ? r.distance
                       : std::string(metric) == "signed_distance" ? r.signed_distance
                       : std::string(metric) == "minimal_rmse"    ? r.distance / std::sqrt(double(cfg.mixture.d))
                                                                  : r.objective;
      values.push_back(v);
    }
    final_metrics[metric] = band(values);
    final_metrics[metric]["values"] = values;
  }
  json diverged = json::array();
  for (int i = 0; i < cfg.runs; ++i)
    if (outcomes[i].trace.diverged) diverged.push_back({{"run", i}, {"iteration", outcomes[i].trace.diverged_at}});

  res.summary["provenance"] = provenance(cfg);
  res.summary["flagged_runs"] = res.flagged_runs;
  res.summary["diverged"] = diverged;
  res.summary["final"] = final_metrics;
  res.summary["bands"] = detail::iteration_bands(res.rows, res.flagged_runs);
  return res;
}

namespace detail {

// Trains every (sweep point, run) pair; run i of each point uses seed base+i.
template <class Apply>
ExperimentResult run_sweep(const ExperimentConfig& cfg, const char* parameter, const std::vector<double>& values,
                           Apply&& apply) {
  const int P = static_cast<int>(values.size()), R = cfg.runs;
  std::vector<TrainOutcome> outcomes(static_cast<std::size_t>(P) * R);
  std::vector<int> dims(P);
  for (int p = 0; p < P; ++p) {
    ExperimentConfig c = cfg;
    apply(c, values[p]);
    dims[p] = c.mixture.d;
  }
  parallel_for(outcomes.size(), [&](std::size_t g) {
    ExperimentConfig c = cfg;
    apply(c, values[g / R]);
    outcomes[g] = train_once(c, run_stream(cfg, static_cast<int>(g % R)));
  });
  ExperimentResult res;
  for (std::size_t g = 0; g < outcomes.size(); ++g) {
    const auto& rec = outcomes[g].trace.final();
    const int run = static_cast<int>(g);
    const double d = dims[g / R];
    res.rows.push_back({run, rec.iteration, parameter, values[g / R], kNaN});
    res.rows.push_back({run, rec.iteration, "distance", rec.distance, kNaN});
    res.rows.push_back({run, rec.iteration, "signed_distance", rec.signed_distance, kNaN});
    res.rows.push_back({run, rec.iteration, "minimal_rmse", rec.distance / std::sqrt(d), kNaN});
    res.rows.push_back({run, rec.iteration, "objective", rec.objective, kNaN});
  }
  res.flagged_runs = non_finite_runs(res.rows);
  json points = json::array();
  double best_value = kNaN, best_median = std::numeric_limits<double>::infinity();
  for (int p = 0; p < P; ++p) {
    std::vector<double> dist, rmse;
    json runs = json::array();
    for (int i = 0; i < R; ++i) {
      const int g = p * R + i;
      runs.push_back(g);
      if (contains(res.flagged_runs, g)) continue;
      dist.push_back(outcomes[g].trace.final().distance);
      rmse.push_back(outcomes[g].trace.final().distance / std::sqrt(double(dims[p])));
    }
    const json b = band(dist);
    if (b["n"].get<std::size_t>() > 0 && b["median"].get<double>() < best_median) {
      best_median = b["median"].get<double>();
      best_value = values[p];
    }
    points.push_back({{parameter, values[p]}, {"runs", runs}, {"distance", b}, {"minimal_rmse", band(rmse)}});
  }
  res.summary["provenance"] = provenance(cfg);
  res.summary["flagged_runs"] = res.flagged_runs;
  res.summary["points"] = points;
  res.summary["best"] = {{parameter, best_value}, {"median_distance", best_median}};
  return res;
}

}  // namespace detail

inline ExperimentResult run_sweep_reg(const ExperimentConfig& cfg) {
  return detail::run_sweep(cfg, "rho", cfg.rho_values, [](ExperimentConfig& c, double rho) { c.optimizer.rho = rho; });
}

inline ExperimentResult run_sweep_dim(const ExperimentConfig& cfg) {
  std::vector<double> values(cfg.dims.begin(), cfg.dims.end());
  return detail::run_sweep(cfg, "d", values,
                           [](ExperimentConfig& c, double d) { c.mixture.d = static_cast<int>(d); });
}

inline ExperimentResult run_verify_risk(const ExperimentConfig& cfg) {
  const auto& g = cfg.grid;
  ExperimentResult res;
  json cells = json::array();
  double worst_exact = 0, worst_z = 0, worst_gap = 0;
  int run = 0;
  for (double sigma : g.sigma)
    for (int d : g.d)
      for (int L : g.L)
        for (const auto& temp : g.lambda)
          for (int p = 0; p < g.placements; ++p, ++run) {
            const SeedStream stream = detail::run_stream(cfg, run);
            const double lambda = temp.resolve(sigma, d, L, PredictorKind::LinearMultiHead);
            const auto cents = make_orthonormal_centroids(d, 2, cfg.mixture.placement, stream.split(2));
            OptimizerConfig placement;
            placement.init = p % 2 == 0 ? InitKind::OnManifold : InitKind::UniformSphere;
            Engine eng = stream.split(0).engine();
            const auto heads = initial_heads(cents, placement, eng);
            const double closed = closed_form_risk_gaussian_general(heads, cents, sigma, d, L, lambda);
            json cell = {{"run", run},        {"sigma", sigma},
                         {"d", d},            {"L", L},
                         {"lambda", lambda},  {"placement", to_string(placement.init)},
                         {"closed_form", closed}};
            bool ok = true;
            auto add = [&](const char* metric, double v, double se = kNaN) { res.rows.push_back({run, 0, metric, v, se}); };
            add("closed_form", closed);
            if (sigma == 0 && L <= kMaxEnumerationLength) {
              const double exact = dirac_risk_by_enumeration(heads, cents, lambda, L);
              const double err = std::abs(exact - closed);
              add("reference", exact);
              add("abs_error", err);
              cell["method"] = "enumeration";
              cell["reference"] = exact;
              cell["abs_error"] = err;
              ok = err <= kExactTol;
              worst_exact = std::max(worst_exact, err);
            } else {
              const MixtureSpec spec = sigma == 0 ? MixtureSpec::dirac(cents) : MixtureSpec::gaussian(cents, sigma);
              const Predictor pred{PredictorKind::LinearMultiHead, HeadBank{heads, lambda, 0.0}};
              const Estimate e = empirical_risk(pred, spec, L, cfg.samples, stream.split(3));
              const double z = e.se > 0 ? (e.mean - closed) / e.se : (e.mean == closed ? 0.0 : kNaN);
              add("reference", e.mean, e.se);
              add("z", z);
              cell["method"] = "monte-carlo";
              cell["reference"] = e.mean;
              cell["se"] = e.se;
              cell["z"] = z;
              ok = e.agrees_with(closed, kZLimit);
              worst_z = std::max(worst_z, std::abs(z));
            }
            if (placement.init == InitKind::OnManifold) {
              const auto c = reparam(heads[0], heads[1], cents[0], cents[1]);
              const double gap =
                  std::abs(closed_form_risk_gaussian_manifold(c.kappa0, c.kappa1, sigma, d, L, lambda) - closed);
              add("manifold_gap", gap);
              cell["manifold_gap"] = gap;
              ok = ok && gap <= kRestrictionTol;
              worst_gap = std::max(worst_gap, gap);
            }
            cell["pass"] = ok;
            res.passed = res.passed && ok;
            cells.push_back(cell);
          }
  res.flagged_runs = detail::non_finite_runs(res.rows);
  res.passed = res.passed && res.flagged_runs.empty();
  res.summary["provenance"] = provenance(cfg);
  res.summary["pass"] = res.passed;
  res.summary["flagged_runs"] = res.flagged_runs;
  res.summary["worst"] = {{"enumeration_abs_error", worst_exact}, {"monte_carlo_abs_z", worst_z},
                          {"manifold_gap", worst_gap}};
  res.summary["cells"] = cells;
  return res;
}

inline ExperimentResult run_verify_moments(const ExperimentConfig& cfg) {
  ExperimentResult res;
  json configs = json::array();
  double worst = 0;
  for (int i = 0; i < cfg.runs; ++i) {
    const auto mc = random_moment_config(cfg.seed + static_cast<std::uint64_t>(i));
    const auto checks = moment_checks(mc, cfg.samples, detail::run_stream(cfg, i).split(3));
    double worst_here = 0;
    bool ok = true;
    json items = json::array();
    for (const auto& c : checks) {
      const double z = c.estimate.se > 0 ? (c.estimate.mean - c.closed_form) / c.estimate.se : 0.0;
      res.rows.push_back({i, 0, c.name + ".closed_form", c.closed_form, kNaN});
      res.rows.push_back({i, 0, c.name + ".monte_carlo", c.estimate.mean, c.estimate.se});
      res.rows.push_back({i, 0, c.name + ".z", z, kNaN});
      const bool agrees = c.estimate.agrees_with(c.closed_form, kZLimit);
      ok = ok && agrees;
      worst_here = std::max(worst_here, std::abs(z));
      items.push_back({{"name", c.name}, {"closed_form", c.closed_form}, {"monte_carlo", c.estimate.mean},
                       {"se", c.estimate.se}, {"z", z}, {"pass", agrees}});
    }
    worst = std::max(worst, worst_here);
    res.passed = res.passed && ok;
    configs.push_back({{"run", i}, {"sigma", mc.sigma}, {"d", mc.d}, {"max_abs_z", worst_here}, {"pass", ok},
                       {"checks", items}});
  }
  res.flagged_runs = detail::non_finite_runs(res.rows);
  res.passed = res.passed && res.flagged_runs.empty();
  res.summary["provenance"] = provenance(cfg);
  res.summary["pass"] = res.passed;
  res.summary["flagged_runs"] = res.flagged_runs;
  res.summary["max_abs_z"] = worst;
  res.summary["configurations"] = configs;
  return res;
}

// Conditional statistics of the first output row given its cluster: the
// coordinate along the drawn centroid (mean factor), along the other centroid
// (zero), the conditional variance trace and the risk.
struct LayerStatistics {
  double lambda = 0;
  Estimate mean_factor, cross_mean, variance, risk;
  double mean_factor_formula = 0, variance_formula = 0, risk_formula = 0;
};

inline LayerStatistics layer_statistics(const ExperimentConfig& cfg, const SeedStream& stream) {
  const auto& m = cfg.mixture;
  const bool ctx = cfg.predictor == PredictorKind::InContext;
  const MixtureSpec spec = detail::make_spec(m, stream);
  LayerStatistics s;
  s.lambda = cfg.lambda.resolve(m.sigma, m.d, cfg.L, cfg.predictor);
  if (ctx) {
    const auto f = ctx_statistics(m.sigma, m.d, cfg.L, s.lambda);
    s.mean_factor_formula = f.mean_factor;
    s.variance_formula = f.finite_variance;
    s.risk_formula = f.finite_risk;
  } else {
    s.mean_factor_formula = oracle_mean_factor(cfg.L, m.sigma, s.lambda);
    s.variance_formula = oracle_variance(m.sigma, m.d, cfg.L, s.lambda);
    s.risk_formula = oracle_risk(m.sigma, m.d, cfg.L, s.lambda);
  }
  const Predictor pred{cfg.predictor, HeadBank{spec.centroids, s.lambda, 0.0}};
  const double factor = s.mean_factor_formula;
  const auto est = mc_estimate(cfg.samples, 4, stream.split(3), [&] {
    return [&, seq = TokenSequence{}](Engine& eng, double* out) mutable {
      sample_sequence_into(spec, cfg.L, eng, seq);
      const Vec row = pred.first_row(seq.tokens);
      const auto& cents = ctx ? seq.centroids_used : spec.centroids;
      const int z = seq.labels[0];
      out[0] = row.dot(cents[z]);
      out[1] = row.dot(cents[1 - z]);
      out[2] = (row - factor * cents[z]).squaredNorm();
      out[3] = (Vec(seq.tokens.row(0).transpose()) - row).squaredNorm();
    };
  });
  s.mean_factor = est[0];
  s.cross_mean = est[1];
  s.variance = est[2];
  s.risk = est[3];
  return s;
}

inline ExperimentResult run_ctx_stats(const ExperimentConfig& cfg) {
  const auto& m = cfg.mixture;
  const bool ctx = cfg.predictor == PredictorKind::InContext;
  ExperimentResult res;
  json runs = json::array();
  double lambda = 0;
  for (int i = 0; i < cfg.runs; ++i) {
    const auto s = layer_statistics(cfg, detail::run_stream(cfg, i));
    lambda = s.lambda;
    json checks = json::array();
    bool ok = true;
    auto check = [&](const char* name, const Estimate& e, double target) {
      const double z = e.se > 0 ? (e.mean - target) / e.se : 0.0;
      res.rows.push_back({i, 0, std::string(name) + ".formula", target, kNaN});
      res.rows.push_back({i, 0, std::string(name) + ".monte_carlo", e.mean, e.se});
      res.rows.push_back({i, 0, std::string(name) + ".z", z, kNaN});
      const bool agrees = e.agrees_with(target, kZLimit);
      ok = ok && agrees;
      checks.push_back({{"name", name}, {"formula", target}, {"monte_carlo", e.mean}, {"se", e.se}, {"z", z},
                        {"pass", agrees}});
    };
    check("mean_factor", s.mean_factor, s.mean_factor_formula);
    check("cross_mean", s.cross_mean, 0.0);
    check("variance", s.variance, s.variance_formula);
    check("risk", s.risk, s.risk_formula);
    res.passed = res.passed && ok;
    runs.push_back({{"run", i}, {"pass", ok}, {"checks", checks}});
  }
  json limits;
  const double bound = m.sigma * m.sigma * (m.d - 2);
  if (ctx) {
    const auto f = ctx_statistics(m.sigma, m.d, cfg.L, lambda);
    limits = {{"asymptotic_risk", f.asymptotic_risk},
              {"asymptotic_variance", f.asymptotic_variance},
              {"optimal_lambda", f.optimal_lambda},
              {"asymptotic_risk_at_optimal", f.asymptotic_risk_at_optimal},
              {"oracle_risk_limit", bound},
              {"beats_oracle_limit", f.asymptotic_risk_at_optimal <= bound}};
  } else {
    const auto a = oracle_asymptotics(m.sigma, m.d, lambda);
    limits = {{"risk_limit_at_optimal", a.risk_limit},
              {"risk_limit_at_lambda", a.risk_limit_at_lambda},
              {"variance_limit", a.variance_limit}};
  }
  res.flagged_runs = detail::non_finite_runs(res.rows);
  res.passed = res.passed && res.flagged_runs.empty();
  res.summary["provenance"] = provenance(cfg);
  res.summary["pass"] = res.passed;
  res.summary["flagged_runs"] = res.flagged_runs;
  res.summary["lambda"] = lambda;
  res.summary["limits"] = limits;
  res.summary["runs"] = runs;
  return res;
}

// Two-dimensional PCA view of one sequence and its embedding.
struct Embedding {
  Mat inputs;   // L x 2
  Mat outputs;  // L x 2
  std::vector<int> labels;
  double input_variance = 0;
  double output_variance = 0;
  double within_cluster_spread = 0;  // largest RMS distance to a cluster's output mean
};

namespace detail {

inline double cloud_variance(const Mat& P) {
  const Eigen::RowVectorXd mean = P.colwise().mean();
  return (P.rowwise() - mean).squaredNorm() / static_cast<double>(P.rows());
}

}  // namespace detail

inline Embedding embed_sequence(const Predictor& pred, const TokenSequence& seq) {
  const Tokens& X = seq.tokens;
  const Tokens Y = pred.forward(X);
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Mat centered = X.rowwise() - mean;
  const Mat cov = centered.transpose() * centered / static_cast<double>(X.rows());
  const Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  const int d = static_cast<int>(cov.rows());
  Mat V(d, 2);
  for (int k = 0; k < 2; ++k) {
    Vec v = eig.eigenvectors().col(d - 1 - k);  // eigenvalues come in increasing order
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0) v = -v;
    V.col(k) = v;
  }
  Embedding e;
  e.inputs = centered * V;
  e.outputs = (Y.rowwise() - mean) * V;
  e.labels = seq.labels;
  e.input_variance = detail::cloud_variance(e.inputs);
  e.output_variance = detail::cloud_variance(e.outputs);
  const int K = *std::max_element(seq.labels.begin(), seq.labels.end()) + 1;
  for (int c = 0; c < K; ++c) {
    std::vector<Eigen::Index> idx;
    for (std::size_t l = 0; l < seq.labels.size(); ++l)
      if (seq.labels[l] == c) idx.push_back(static_cast<Eigen::Index>(l));
    if (idx.empty()) continue;
    Mat P(static_cast<Eigen::Index>(idx.size()), 2);
    for (std::size_t r = 0; r < idx.size(); ++r) P.row(static_cast<Eigen::Index>(r)) = e.outputs.row(idx[r]);
    e.within_cluster_spread = std::max(e.within_cluster_spread, std::sqrt(detail::cloud_variance(P)));
  }
  return e;
}

inline Embedding embed_run(const ExperimentConfig& cfg, const SeedStream& stream) {
  const auto& m = cfg.mixture;
  const MixtureSpec spec = detail::make_spec(m, stream);
  const double lambda = cfg.lambda.resolve(m.sigma, m.d, cfg.L, cfg.predictor);
  const Predictor pred{cfg.predictor, HeadBank{spec.centroids, lambda, 0.0}};
  const SeedStream data = stream.split(3);
  return embed_sequence(pred, m.kind == MixtureKind::InContext ? sample_incontext_sequence(m.d, m.sigma, cfg.L, data)
                                                               : sample_sequence(spec, cfg.L, data));
}

inline ExperimentResult run_embed(const ExperimentConfig& cfg) {
  std::vector<Embedding> embeddings(cfg.runs);
  parallel_for(cfg.runs, [&](std::size_t i) {
    embeddings[i] = embed_run(cfg, detail::run_stream(cfg, static_cast<int>(i)));
  });
  ExperimentResult res;
  std::string points = "run,token,label,input_pc1,input_pc2,output_pc1,output_pc2\n";
  int reduced = 0;
  json runs = json::array();
  for (int i = 0; i < cfg.runs; ++i) {
    const auto& e = embeddings[i];
    res.rows.push_back({i, 0, "input_variance", e.input_variance, kNaN});
    res.rows.push_back({i, 0, "output_variance", e.output_variance, kNaN});
    res.rows.push_back({i, 0, "within_cluster_spread", e.within_cluster_spread, kNaN});
    const bool lower = e.output_variance < e.input_variance;
    reduced += lower;
    runs.push_back({{"run", i},
                    {"input_variance", e.input_variance},
                    {"output_variance", e.output_variance},
                    {"within_cluster_spread", e.within_cluster_spread},
                    {"variance_reduced", lower}});
    for (Eigen::Index l = 0; l < e.inputs.rows(); ++l)
      points += std::to_string(i) + ',' + std::to_string(l) + ',' + std::to_string(e.labels[l]) + ',' +
                format_number(e.inputs(l, 0)) + ',' + format_number(e.inputs(l, 1)) + ',' +
                format_number(e.outputs(l, 0)) + ',' + format_number(e.outputs(l, 1)) + '\n';
  }
  res.flagged_runs = detail::non_finite_runs(res.rows);
  res.extra_files.push_back({"embedding.csv", points});
  res.summary["provenance"] = provenance(cfg);
  res.summary["flagged_runs"] = res.flagged_runs;
  res.summary["runs_with_lower_output_variance"] = reduced;
  res.summary["runs"] = runs;
  return res;
}

inline ExperimentResult run_critical_points(const ExperimentConfig& cfg) {
  const double lambda = cfg.lambda.resolve(0.0, cfg.mixture.d, cfg.L, PredictorKind::LinearMultiHead);
  const auto families = critical_points_dirac(cfg.L);
  ExperimentResult res;
  json fams = json::array();
  double max_grad = 0;
  std::map<CriticalKind, std::pair<double, double>> range;  // min, max risk per kind
  for (std::size_t f = 0; f < families.size(); ++f) {
    const auto& fam = families[f];
    double fam_grad = 0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t p = 0; p < fam.points.size(); ++p) {
      const auto& c = fam.points[p];
      const double risk = exact_risk_dirac(c, lambda, cfg.L);
      const auto g = exact_risk_dirac_gradient(c, lambda, cfg.L);
      const double gn = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2] + g[3] * g[3]);
      res.rows.push_back({static_cast<int>(f), static_cast<long>(p), "risk", risk, kNaN});
      res.rows.push_back({static_cast<int>(f), static_cast<long>(p), "gradient_norm", gn, kNaN});
      fam_grad = std::max(fam_grad, gn);
      lo = std::min(lo, risk);
      hi = std::max(hi, risk);
    }
    max_grad = std::max(max_grad, fam_grad);
    auto [it, fresh] = range.try_emplace(fam.kind, lo, hi);
    if (!fresh) it->second = {std::min(it->second.first, lo), std::max(it->second.second, hi)};
    fams.push_back({{"family", fam.description}, {"kind", to_string(fam.kind)}, {"points", fam.points.size()},
                    {"max_gradient_norm", fam_grad}, {"risk_min", lo}, {"risk_max", hi}});
  }
  double saddle_lo = std::numeric_limits<double>::infinity(), saddle_hi = -saddle_lo;
  for (auto k : {CriticalKind::StrictSaddle, CriticalKind::Saddle}) {
    saddle_lo = std::min(saddle_lo, range.at(k).first);
    saddle_hi = std::max(saddle_hi, range.at(k).second);
  }
  const bool ordered = range.at(CriticalKind::LocalMax).first > saddle_hi &&
                       saddle_lo > range.at(CriticalKind::GlobalMin).second;
  const bool stationary = max_grad <= kExactTol;
  res.passed = ordered && stationary;
  res.flagged_runs = detail::non_finite_runs(res.rows);
  res.summary["provenance"] = provenance(cfg);
  res.summary["pass"] = res.passed;
  res.summary["lambda"] = lambda;
  res.summary["max_gradient_norm"] = max_grad;
  res.summary["ordering_holds"] = ordered;
  res.summary["families"] = fams;
  return res;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  switch (cfg.experiment) {
    case Experiment::Train: return run_train(cfg);
    case Experiment::VerifyRisk: return run_verify_risk(cfg);
    case Experiment::VerifyMoments: return run_verify_moments(cfg);
    case Experiment::SweepReg: return run_sweep_reg(cfg);
    case Experiment::SweepDim: return run_sweep_dim(cfg);
    case Experiment::CtxStats: return run_ctx_stats(cfg);
    case Experiment::Embed: return run_embed(cfg);
    case Experiment::CriticalPoints: return run_critical_points(cfg);
  }
  throw ConfigError("unknown experiment");
}

// Preset (or the experiment's default preset), then the config file, then
// command-line overrides. The experiment named by each layer must agree.
struct ConfigSources {
  Experiment experiment = Experiment::Train;
  std::optional<std::string> preset;
  std::optional<json> file;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<std::string> out;
};

inline ExperimentConfig resolve_config(const ConfigSources& src) {
  const std::string preset = src.preset.value_or(default_preset(src.experiment));
  json j = preset_json(preset);
  const std::string want = to_string(src.experiment);
  if (j.value("experiment", want) != want)
    throw ConfigError("preset '" + preset + "' is a " + j.value("experiment", want) + " preset, not " + want);
  if (src.file) {
    if (!src.file->is_object()) throw ConfigError("the config file must hold a JSON object");
    if (src.file->contains("experiment") && src.file->at("experiment") != want)
      throw ConfigError("the config file describes a different experiment than '" + want + "'");
    j.merge_patch(*src.file);
  }
  j["experiment"] = want;
  if (src.seed) j["seed"] = *src.seed;
  if (src.runs) j["runs"] = *src.runs;
  if (src.out) j["out"] = *src.out;
  return parse_config(j);
}

}  // namespace attnclust::harness

#pragma once

// Experiment configuration: one JSON document with a section per module.
// Every field has a default; a config file only needs the keys it changes.
// Unknown keys are rejected so typos cannot silently fall back to defaults.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lga/label_alignment.hpp"
#include "lga/linreg_lab.hpp"
#include "lga/models.hpp"
#include "lga/synthdata.hpp"

namespace lga {

using Json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelSection {
  std::size_t hidden_dim = 64;
  std::size_t num_hidden_layers = 3;
};

struct LearnspeedConfig {
  std::vector<double> grid{0.1, 0.3, 1.0};
  double lambda_fixed = 1.0;
  double b = 1.0;
  std::size_t n_l = 16;
  std::size_t n_u = 4;
  double lr_theta = 1e-3;
  double lr_w = 1e-3;
  double eps_norm = 1e-3;
  std::size_t k_max = 200000;
  std::size_t record_every = 100;
  linreg::NormMode mode = linreg::NormMode::kFullNormalized;
  /// Iteration window over which c must be strictly ordered by eigenvalue.
  std::size_t window_begin = 1000;
  std::size_t window_end = 20000;
  double converge_tol = 1e-3;
};

struct PropcheckConfig {
  std::size_t dim = 3;
  std::size_t n_l = 16;
  std::size_t n_u = 100;
  std::size_t k_max = 10000;
  double lr_theta = 1e-3;
  double lr_w = 1e-3;
  double eps_norm = 1e-3;
  std::vector<double> perturb_values{0.5, 2.0};
  double independence_tol = 1e-10;
  /// The own-coordinate control multiplies lambda_u_i by this factor.
  double control_factor = 0.25;
  double control_min_deviation = 1e-3;
  std::size_t fixed_point_problems = 10;
  double fixed_point_tol = 1e-6;
  double c_tol = 1e-3;
  std::size_t max_iters = 1000000;
};

struct GradcheckConfig {
  std::size_t instances = 100;
  std::size_t max_params = 200;
  std::size_t max_rows = 32;
  double tol_grad = 1e-6;
  double tol_jvp = 1e-6;
  double tol_contraction = 1e-5;
  double tol_hvp = 1e-5;
};

struct LinregOracleConfig {
  std::size_t problems = 20;
  std::size_t max_dim = 10;
  std::size_t max_k = 1000;
  double tol = 1e-8;
};

struct RunConfig {
  std::string experiment = "rings";
  std::string preset = "desk";
  std::uint64_t seed = 0;
  std::size_t trials = 5;
  /// Worker threads for independent trials; 0 uses the hardware count.
  std::size_t threads = 0;
  RingsConfig rings;
  ModelSection model;
  LgaConfig lga;
  LearnspeedConfig learnspeed;
  PropcheckConfig propcheck;
  GradcheckConfig gradcheck;
  LinregOracleConfig linreg_oracle;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"learnspeed", "rings", "propcheck", "gradcheck",
                                              "linreg-oracle"};
  return names;
}

/// Defaults for a named preset. "desk" runs in minutes on one core; "paper"
/// uses the full dataset size, width, and trial count.
inline RunConfig preset_config(const std::string& preset) {
  RunConfig cfg;
  cfg.preset = preset;
  cfg.lga.lr_theta = 5e-5;
  cfg.lga.lr_w = 0.3;
  cfg.lga.batch_labeled = 100;
  cfg.lga.batch_unlabeled = 100;
  cfg.lga.iterations = 4000;
  cfg.lga.record_every = 50;
  cfg.lga.track_alignment = true;
  cfg.lga.probe_rows = 1000;
  if (preset == "desk") return cfg;
  if (preset == "paper") {
    cfg.rings.n_labeled = 5000;
    cfg.model.hidden_dim = 128;
    cfg.trials = 25;
    cfg.lga.iterations = 20000;
    cfg.lga.record_every = 500;
    cfg.lga.probe_rows = 2000;
    return cfg;
  }
  throw ConfigError("unknown preset '" + preset + "' (expected desk or paper)");
}

namespace config_detail {

template <class E>
struct EnumNames;

template <>
struct EnumNames<ScheduleKind> {
  static constexpr std::pair<ScheduleKind, const char*> items[] = {
      {ScheduleKind::kConstant, "constant"}, {ScheduleKind::kLinearRamp, "linear-ramp"}};
};
template <>
struct EnumNames<OptimizerKind> {
  static constexpr std::pair<OptimizerKind, const char*> items[] = {{OptimizerKind::kAdam, "adam"},
                                                                    {OptimizerKind::kSgd, "sgd"}};
};
template <>
struct EnumNames<LabelParam> {
  static constexpr std::pair<LabelParam, const char*> items[] = {
      {LabelParam::kIdentity, "identity"}, {LabelParam::kSoftmax, "softmax"}};
};
template <>
struct EnumNames<AlignmentUpdate> {
  static constexpr std::pair<AlignmentUpdate, const char*> items[] = {
      {AlignmentUpdate::kDisplacement, "displacement"}, {AlignmentUpdate::kGradient, "gradient"}};
};
template <>
struct EnumNames<linreg::NormMode> {
  static constexpr std::pair<linreg::NormMode, const char*> items[] = {
      {linreg::NormMode::kStopGradient, "stopgrad"}, {linreg::NormMode::kFullNormalized, "full"}};
};

template <class T>
concept NamedEnum = requires { EnumNames<T>::items; };

// Reads fields from a JSON object onto existing values, tracking which keys
// were consumed.
class Reader {
 public:
  Reader(const Json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw ConfigError(context_ + ": expected an object");
  }

  template <class T>
  void operator()(const char* key, T& value) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const Json& v = j_.at(key);
    const std::string where = context_.empty() ? key : context_ + "." + key;
    try {
      if constexpr (NamedEnum<T>) {
        const auto s = v.get<std::string>();
        for (const auto& [e, name] : EnumNames<T>::items) {
          if (s == name) {
            value = e;
            return;
          }
        }
        throw ConfigError(where + ": unknown value '" + s + "'");
      } else if constexpr (std::is_class_v<T> && !std::is_same_v<T, std::string> &&
                           !std::is_same_v<T, std::vector<double>>) {
        Reader sub(v, where);
        visit(sub, value);
        sub.finish();
      } else {
        if constexpr (std::is_same_v<T, bool>) {
          if (!v.is_boolean()) throw ConfigError(where + ": expected true or false");
        } else if constexpr (std::is_unsigned_v<T>) {
          if (!v.is_number_unsigned()) throw ConfigError(where + ": expected a non-negative integer");
        }
        value = v.get<T>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError((context_.empty() ? "" : context_ + ": ") + "unknown key '" + k + "'");
    }
  }

 private:
  const Json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  explicit Writer(Json& j) : j_(j) { j_ = Json::object(); }

  template <class T>
  void operator()(const char* key, const T& value) {
    if constexpr (NamedEnum<T>) {
      for (const auto& [e, name] : EnumNames<T>::items) {
        if (e == value) j_[key] = name;
      }
    } else if constexpr (std::is_class_v<T> && !std::is_same_v<T, std::string> &&
                         !std::is_same_v<T, std::vector<double>>) {
      Json sub;
      Writer w(sub);
      visit(w, const_cast<T&>(value));
      j_[key] = std::move(sub);
    } else {
      j_[key] = value;
    }
  }

 private:
  Json& j_;
};

}  // namespace config_detail

// Field lists, shared by reading and writing.

template <class V>
void visit(V& v, ScheduleConfig& c) {
  v("kind", c.kind);
  v("t_max", c.t_max);
  v("warmup_iters", c.warmup_iters);
}
template <class V>
void visit(V& v, AdamConfig& c) {
  v("beta1", c.beta1);
  v("beta2", c.beta2);
  v("epsilon", c.epsilon);
}
template <class V>
void visit(V& v, PowerBudget& c) {
  v("iters", c.iters);
  v("tol", c.tol);
  v("seed", c.seed);
}
template <class V>
void visit(V& v, LgaConfig& c) {
  v("lr_theta", c.lr_theta);
  v("lr_w", c.lr_w);
  v("batch_labeled", c.batch_labeled);
  v("batch_unlabeled", c.batch_unlabeled);
  v("iterations", c.iterations);
  v("eps_norm", c.eps_norm);
  v("ema_grad_decay", c.ema_grad_decay);
  v("ema_norm_decay", c.ema_norm_decay);
  v("schedule", c.schedule);
  v("adam", c.adam);
  v("optimizer", c.optimizer);
  v("label_param", c.label_param);
  v("record_every", c.record_every);
  v("track_alignment", c.track_alignment);
  v("alignment_update", c.alignment_update);
  v("probe", c.probe);
  v("probe_rows", c.probe_rows);
}
template <class V>
void visit(V& v, RingsConfig& c) {
  v("dim", c.dim);
  v("n_labeled", c.n_labeled);
  v("unlabeled_multiplier", c.unlabeled_multiplier);
  v("n_test", c.n_test);
}
template <class V>
void visit(V& v, ModelSection& c) {
  v("hidden_dim", c.hidden_dim);
  v("num_hidden_layers", c.num_hidden_layers);
}
template <class V>
void visit(V& v, LearnspeedConfig& c) {
  v("grid", c.grid);
  v("lambda_fixed", c.lambda_fixed);
  v("b", c.b);
  v("n_l", c.n_l);
  v("n_u", c.n_u);
  v("lr_theta", c.lr_theta);
  v("lr_w", c.lr_w);
  v("eps_norm", c.eps_norm);
  v("k_max", c.k_max);
  v("record_every", c.record_every);
  v("mode", c.mode);
  v("window_begin", c.window_begin);
  v("window_end", c.window_end);
  v("converge_tol", c.converge_tol);
}
template <class V>
void visit(V& v, PropcheckConfig& c) {
  v("dim", c.dim);
  v("n_l", c.n_l);
  v("n_u", c.n_u);
  v("k_max", c.k_max);
  v("lr_theta", c.lr_theta);
  v("lr_w", c.lr_w);
  v("eps_norm", c.eps_norm);
  v("perturb_values", c.perturb_values);
  v("independence_tol", c.independence_tol);
  v("control_factor", c.control_factor);
  v("control_min_deviation", c.control_min_deviation);
  v("fixed_point_problems", c.fixed_point_problems);
  v("fixed_point_tol", c.fixed_point_tol);
  v("c_tol", c.c_tol);
  v("max_iters", c.max_iters);
}
template <class V>
void visit(V& v, GradcheckConfig& c) {
  v("instances", c.instances);
  v("max_params", c.max_params);
  v("max_rows", c.max_rows);
  v("tol_grad", c.tol_grad);
  v("tol_jvp", c.tol_jvp);
  v("tol_contraction", c.tol_contraction);
  v("tol_hvp", c.tol_hvp);
}
template <class V>
void visit(V& v, LinregOracleConfig& c) {
  v("problems", c.problems);
  v("max_dim", c.max_dim);
  v("max_k", c.max_k);
  v("tol", c.tol);
}
template <class V>
void visit(V& v, RunConfig& c) {
  v("experiment", c.experiment);
  v("preset", c.preset);
  v("seed", c.seed);
  v("trials", c.trials);
  v("threads", c.threads);
  v("rings", c.rings);
  v("model", c.model);
  v("lga", c.lga);
  v("learnspeed", c.learnspeed);
  v("propcheck", c.propcheck);
  v("gradcheck", c.gradcheck);
  v("linreg_oracle", c.linreg_oracle);
}

inline Json to_json(const RunConfig& cfg) {
  Json j;
  config_detail::Writer w(j);
  visit(w, const_cast<RunConfig&>(cfg));
  return j;
}

/// Applies the keys of `j` on top of `base`.
inline RunConfig apply_json(RunConfig base, const Json& j) {
  config_detail::Reader r(j, "");
  visit(r, base);
  r.finish();
  return base;
}

inline void validate(const RunConfig& cfg) {
  bool known = false;
  for (const auto& n : experiment_names()) known = known || n == cfg.experiment;
  if (!known) throw ConfigError("unknown experiment '" + cfg.experiment + "'");
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  if (cfg.learnspeed.grid.size() < 2) throw ConfigError("learnspeed.grid needs at least two values");
  if (cfg.learnspeed.window_begin > cfg.learnspeed.window_end ||
      cfg.learnspeed.window_end > cfg.learnspeed.k_max) {
    throw ConfigError("learnspeed: need window_begin <= window_end <= k_max");
  }
  if (cfg.propcheck.dim < 2) throw ConfigError("propcheck.dim must be >= 2");
  if (cfg.lga.iterations < 1) throw ConfigError("lga.iterations must be >= 1");
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace lga

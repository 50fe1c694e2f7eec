#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "uot/error.hpp"
#include "uot/experiments.hpp"

namespace uot {

namespace {

const char* metric_name(Metric m) {
  return m == Metric::SquaredEuclidean ? "squared_euclidean" : "euclidean";
}

Metric parse_metric(const std::string& s) {
  if (s == "squared_euclidean") return Metric::SquaredEuclidean;
  if (s == "euclidean") return Metric::Euclidean;
  throw_invalid("unknown metric '" + s + "' (expected squared_euclidean or euclidean)");
}

template <class T>
bool unsigned_ok(const Json& v) {
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    return v.is_number_unsigned();
  } else if constexpr (requires { typename T::value_type; } && !std::is_same_v<T, std::string>) {
    if (!v.is_array()) return true;
    return std::all_of(v.begin(), v.end(),
                       [](const Json& e) { return unsigned_ok<typename T::value_type>(e); });
  } else {
    return true;
  }
}

/// Reads keys of one JSON object, rejecting anything not consumed.
class Reader {
 public:
  Reader(const Json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw_invalid(where_ + " must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    if (!unsigned_ok<T>(*it)) throw_invalid(where_ + "." + key + " must be a non-negative integer");
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw_invalid(where_ + "." + key + " has the wrong type");
    }
  }

  template <class Parse, class T>
  void get_enum(const char* key, T& out, Parse parse) {
    std::string s;
    bool present = obj_.contains(key);
    get(key, s);
    if (present) out = parse(s);
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw_invalid("unknown key '" + where_ + "." + it.key() + "'");
    }
  }

 private:
  const Json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig default_config(const std::string& experiment) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), experiment) == names.end()) {
    throw_invalid("unknown experiment '" + experiment + "'");
  }
  ExperimentConfig c;
  c.experiment = experiment;
  c.params.epsilon = 0.01;
  if (experiment == "anag_scale" || experiment == "baselines") {
    c.params.rho1 = c.params.rho2 = 10.0;
  } else if (experiment == "color_transfer") {
    c.params.epsilon = 5e-3;
    c.solver.schedule = StepSchedule::InverseOffsetPoly;
    c.solver.c_scales = {1.0};
    c.solver.batch_size = 32;
    c.solver.max_iters = 10000;
    c.data.n = 4096;
    c.data.dim = 3;
  } else if (experiment == "eps_sweep") {
    c.solver.c_scales = {1.0};
    c.data.n = 500;
    c.data.n_source = 2000;
  }
  if (experiment == "baselines") c.data.sizes = {200};
  return c;
}

ExperimentConfig parse_config(const Json& j) {
  Reader top(j, "config");
  std::string experiment;
  top.get("experiment", experiment);
  if (experiment.empty()) throw_invalid("config.experiment is required");
  ExperimentConfig c = default_config(experiment);

  if (const Json* p = top.child("params")) {
    Reader r(*p, "params");
    r.get("epsilon", c.params.epsilon);
    r.get("rho1", c.params.rho1);
    r.get("rho2", c.params.rho2);
    r.get_enum("source", c.params.source, parse_source_divergence);
    r.get("margin_project", c.params.margin_project);
    r.get("margin_safeguard", c.params.margin_safeguard);
    r.finish();
  }
  c.params.validate();

  if (const Json* s = top.child("solver")) {
    Reader r(*s, "solver");
    auto& v = c.solver;
    r.get_enum("schedule", v.schedule, parse_step_schedule);
    r.get("c_scales", v.c_scales);
    r.get("exponent_gamma", v.exponent_gamma);
    r.get("batch_size", v.batch_size);
    r.get_enum("averaging", v.averaging, parse_averaging);
    r.get("max_iters", v.max_iters);
    r.get("checkpoints_per_decade", v.checkpoints_per_decade);
    r.get("tol", v.tol);
    r.get("full_max_iters", v.full_max_iters);
    r.get_enum("restart_mode", v.restart_mode, parse_restart_mode);
    r.get("ground_truth_tol", v.ground_truth_tol);
    r.get("ground_truth_max_iters", v.ground_truth_max_iters);
    r.get("trace_every", v.trace_every);
    r.get("methods", v.methods);
    r.finish();
  }
  if (c.solver.c_scales.empty()) throw_invalid("solver.c_scales must not be empty");
  for (double s : c.solver.c_scales) {
    if (!(s > 0.0)) throw_invalid("solver.c_scales entries must be > 0");
  }
  if (!(c.solver.tol > 0.0) || !(c.solver.ground_truth_tol > 0.0)) {
    throw_invalid("solver tolerances must be > 0");
  }
  if (c.solver.checkpoints_per_decade == 0) throw_invalid("solver.checkpoints_per_decade must be >= 1");
  for (const auto& m : c.solver.methods) {
    if (m != "anag" && m != "adaptive_gd" && m != "gd" && m != "nag") {
      throw_invalid("unknown method '" + m + "' in solver.methods");
    }
  }
  if (c.solver.trace_every == 0) throw_invalid("solver.trace_every must be >= 1");

  if (const Json* d = top.child("data")) {
    Reader r(*d, "data");
    auto& v = c.data;
    r.get("n", v.n);
    r.get("n_source", v.n_source);
    r.get("dim", v.dim);
    r.get("modes", v.modes);
    r.get("covariance_scale", v.covariance_scale);
    r.get("mixture_seed", v.mixture_seed);
    r.get("sample_seed", v.sample_seed);
    r.get_enum("metric", v.metric, parse_metric);
    r.get("sizes", v.sizes);
    r.get("epsilons", v.epsilons);
    r.get("rhos", v.rhos);
    r.get("source_image", v.source_image);
    r.get("target_image", v.target_image);
    r.finish();
  }
  if (c.data.n == 0 || c.data.n_source == 0 || c.data.dim == 0 || c.data.modes == 0) {
    throw_invalid("data sizes must be >= 1");
  }

  top.get("seeds", c.seeds);
  if (c.seeds.empty()) throw_invalid("config.seeds must not be empty");
  std::string out = c.output_dir.string();
  top.get("output_dir", out);
  c.output_dir = out;
  top.get("record_clock", c.record_clock);
  top.finish();
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw_invalid(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

Json to_json(const ExperimentConfig& c) {
  const auto& s = c.solver;
  const auto& d = c.data;
  return Json{
      {"experiment", c.experiment},
      {"params",
       {{"epsilon", c.params.epsilon},
        {"rho1", c.params.rho1},
        {"rho2", c.params.rho2},
        {"source", to_string(c.params.source)},
        {"margin_project", c.params.margin_project},
        {"margin_safeguard", c.params.margin_safeguard}}},
      {"solver",
       {{"schedule", to_string(s.schedule)},
        {"c_scales", s.c_scales},
        {"exponent_gamma", s.exponent_gamma},
        {"batch_size", s.batch_size},
        {"averaging", to_string(s.averaging)},
        {"max_iters", s.max_iters},
        {"checkpoints_per_decade", s.checkpoints_per_decade},
        {"tol", s.tol},
        {"full_max_iters", s.full_max_iters},
        {"restart_mode", to_string(s.restart_mode)},
        {"ground_truth_tol", s.ground_truth_tol},
        {"ground_truth_max_iters", s.ground_truth_max_iters},
        {"trace_every", s.trace_every},
        {"methods", s.methods}}},
      {"data",
       {{"n", d.n},
        {"n_source", d.n_source},
        {"dim", d.dim},
        {"modes", d.modes},
        {"covariance_scale", d.covariance_scale},
        {"mixture_seed", d.mixture_seed},
        {"sample_seed", d.sample_seed},
        {"metric", metric_name(d.metric)},
        {"sizes", d.sizes},
        {"epsilons", d.epsilons},
        {"rhos", d.rhos},
        {"source_image", d.source_image},
        {"target_image", d.target_image}}},
      {"seeds", c.seeds},
      {"output_dir", c.output_dir.string()},
      {"record_clock", c.record_clock}};
}

}  // namespace uot

#include "nhvmc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

namespace nhvmc {

ConfigError::ConfigError(std::string path, const std::string& message)
    : ValidationError(path + ": " + message), path_(std::move(path)) {}

std::string to_string(AnchorKind a) {
  switch (a) {
    case AnchorKind::printed: return "printed";
    case AnchorKind::spectral_bound: return "spectral_bound";
    case AnchorKind::explicit_value: return "explicit";
  }
  return "?";
}

std::string to_string(Chaining c) {
  switch (c) {
    case Chaining::independent: return "independent";
    case Chaining::warm_forward: return "warm_forward";
    case Chaining::warm_backward: return "warm_backward";
    case Chaining::combined_fixed_then_warm: return "combined_fixed_then_warm";
  }
  return "?";
}

Chaining chaining_from_string(const std::string& s) {
  for (auto c : {Chaining::independent, Chaining::warm_forward, Chaining::warm_backward,
                 Chaining::combined_fixed_then_warm}) {
    if (to_string(c) == s) return c;
  }
  throw ValidationError("unknown chaining rule '" + s + "'");
}

namespace {

// Typed access to one object of the tree. Unknown keys are errors so typos do not pass silently.
class Node {
 public:
  Node(const json& j, std::string path, std::initializer_list<const char*> allowed) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j_.items()) {
      if (!ok.count(key)) throw ConfigError(at(key), "unknown key");
    }
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& raw(const char* key) const { return j_.at(key); }

  double number(const char* key, double def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(at(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(at(key), "must be finite");
    return x;
  }

  std::optional<double> optional_number(const char* key, std::optional<double> def) const {
    if (!j_.contains(key)) return def;
    if (j_.at(key).is_null()) return std::nullopt;
    return number(key, 0.0);
  }

  int integer(const char* key, int def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(at(key), "expected an integer");
    const auto x = v.get<long long>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
      throw ConfigError(at(key), "out of range");
    }
    return static_cast<int>(x);
  }

  std::uint64_t seed(const char* key, std::uint64_t def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    throw ConfigError(at(key), "expected a non-negative integer");
  }

  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(at(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const char* key, const std::string& def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(at(key), "expected a string");
    return v.get<std::string>();
  }

  template <class E, class F>
  E enumeration(const char* key, E def, F&& from_string) const {
    if (!has(key)) return def;
    const auto s = string(key, "");
    try {
      return from_string(s);
    } catch (const ValidationError& e) {
      throw ConfigError(at(key), e.what());
    }
  }

  std::vector<double> numbers(const char* key, const std::vector<double>& def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
        throw ConfigError(at(key) + "[" + std::to_string(i) + "]", "expected a finite number");
      }
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::vector<int> integers(const char* key, const std::vector<int>& def) const {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(at(key), "expected an array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer()) {
        throw ConfigError(at(key) + "[" + std::to_string(i) + "]", "expected an integer");
      }
      out.push_back(v[i].get<int>());
    }
    return out;
  }

  Node child(const char* key, std::initializer_list<const char*> allowed) const {
    static const json empty = json::object();
    return Node(has(key) ? j_.at(key) : empty, at(key), allowed);
  }

 private:
  const json& j_;
  std::string path_;
};

json opt_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Rethrows plain validation errors from library validators under a config path.
template <class F>
void under(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ConfigError(path, e.what());
  }
}

RunConfig parse_run_config_at(const json& j, const std::string& root) {
  Node top(j, root,
           {"model", "ansatz", "sampler", "estimator", "optimizer", "schedule", "observables", "output", "ed"});
  RunConfig c;

  const auto model = top.child("model", {"lattice", "lambda", "h", "k", "h_z", "nh_scale"});
  const auto lat = model.child("lattice", {"kind", "extent", "periodic"});
  c.model.kind = lat.enumeration("kind", c.model.kind, lattice_kind_from_string);
  c.model.extent = lat.integers("extent", c.model.extent);
  c.model.periodic = lat.boolean("periodic", c.model.periodic);
  auto& hp = c.model.params;
  hp.lambda = model.number("lambda", hp.lambda);
  hp.h = model.number("h", hp.h);
  hp.k = model.number("k", hp.k);
  hp.h_z = model.number("h_z", hp.h_z);
  hp.nh_scale = model.number("nh_scale", hp.nh_scale);

  const auto an = top.child("ansatz", {"alpha", "seed", "init_scale", "dual_mode"});
  c.ansatz.alpha = an.integer("alpha", c.ansatz.alpha);
  c.ansatz.seed = an.seed("seed", c.ansatz.seed);
  c.ansatz.init_scale = an.number("init_scale", c.ansatz.init_scale);
  c.ansatz.dual_mode = an.enumeration("dual_mode", c.ansatz.dual_mode, dual_mode_from_string);

  auto& sc = c.estimator.sampler;
  const auto sa = top.child("sampler", {"n_chains", "n_samples_per_chain", "n_burnin", "thinning", "seed",
                                        "distribution"});
  sc.n_chains = sa.integer("n_chains", sc.n_chains);
  sc.n_samples_per_chain = sa.integer("n_samples_per_chain", sc.n_samples_per_chain);
  sc.n_burnin = sa.integer("n_burnin", sc.n_burnin);
  sc.thinning = sa.integer("thinning", sc.thinning);
  sc.seed = sa.seed("seed", sc.seed);
  sc.distribution = sa.enumeration("distribution", sc.distribution, distribution_from_string);

  const auto es = top.child("estimator", {"mode", "blocks_per_chain", "continued_burnin"});
  c.estimator.mode = es.enumeration("mode", c.estimator.mode, estimator_mode_from_string);
  c.estimator.blocks_per_chain = es.integer("blocks_per_chain", c.estimator.blocks_per_chain);
  c.estimator.continued_burnin = es.integer("continued_burnin", c.estimator.continued_burnin);

  auto& oc = c.optimizer;
  const auto op = top.child("optimizer", {"update_rule", "learning_rate", "sr_shift", "max_grad_norm", "seed",
                                          "adam_beta1", "adam_beta2", "adam_epsilon"});
  oc.update_rule = op.enumeration("update_rule", oc.update_rule, update_rule_from_string);
  oc.learning_rate = op.number("learning_rate", oc.learning_rate);
  oc.sr_shift = op.number("sr_shift", oc.sr_shift);
  oc.max_grad_norm = op.optional_number("max_grad_norm", oc.max_grad_norm);
  oc.seed = op.seed("seed", oc.seed);
  oc.adam_beta1 = op.number("adam_beta1", oc.adam_beta1);
  oc.adam_beta2 = op.number("adam_beta2", oc.adam_beta2);
  oc.adam_epsilon = op.number("adam_epsilon", oc.adam_epsilon);

  auto& s = c.schedule;
  const auto sh = top.child("schedule", {"mode", "M", "F", "T", "anchor", "warm_k_grid", "direction", "eps_stride",
                                         "eps_learning_rate", "two_step", "two_step_steps", "hermitian_steps",
                                         "convergence_loss"});
  s.mode = sh.enumeration("mode", s.mode, schedule_mode_from_string);
  s.M = sh.integer("M", s.M);
  s.F = sh.integer("F", s.F);
  s.T = sh.integer("T", s.T);
  if (sh.has("anchor")) {
    const auto& a = sh.raw("anchor");
    if (a.is_string()) {
      const auto name = a.get<std::string>();
      if (name == "printed") {
        c.anchor = AnchorKind::printed;
      } else if (name == "spectral_bound") {
        c.anchor = AnchorKind::spectral_bound;
      } else {
        throw ConfigError(sh.at("anchor"), "expected \"printed\", \"spectral_bound\" or [re, im]");
      }
    } else if (a.is_array() && a.size() == 2 && a[0].is_number() && a[1].is_number()) {
      c.anchor = AnchorKind::explicit_value;
      s.e0_anchor = cplx(a[0].get<double>(), a[1].get<double>());
    } else {
      throw ConfigError(sh.at("anchor"), "expected \"printed\", \"spectral_bound\" or [re, im]");
    }
  }
  s.warm_k_grid = sh.numbers("warm_k_grid", s.warm_k_grid);
  s.direction = sh.enumeration("direction", s.direction, sweep_direction_from_string);
  s.eps_stride = sh.integer("eps_stride", s.eps_stride);
  s.eps_learning_rate = sh.optional_number("eps_learning_rate", s.eps_learning_rate);
  s.two_step = sh.boolean("two_step", s.two_step);
  s.two_step_steps = sh.integer("two_step_steps", s.two_step_steps);
  s.hermitian_steps = sh.integer("hermitian_steps", s.hermitian_steps);
  s.convergence_loss = sh.number("convergence_loss", s.convergence_loss);

  const auto ob = top.child("observables", {"enabled", "mode", "correlations", "floor"});
  c.observables.enabled = ob.boolean("enabled", c.observables.enabled);
  c.observables.mode = ob.enumeration("mode", c.observables.mode, expectation_mode_from_string);
  c.observables.correlations = ob.boolean("correlations", c.observables.correlations);
  c.observables.floor = ob.number("floor", c.observables.floor);

  const auto ou = top.child("output", {"directory", "snapshot_stride"});
  c.output.directory = ou.string("directory", c.output.directory);
  c.output.snapshot_stride = ou.integer("snapshot_stride", c.output.snapshot_stride);

  const auto ed = top.child("ed", {"k_grid", "observables"});
  c.ed.k_grid = ed.numbers("k_grid", c.ed.k_grid);
  c.ed.observables = ed.boolean("observables", c.ed.observables);

  const std::string pre = root.empty() ? "" : root + ".";
  try {
    c.validate();
  } catch (const ConfigError& e) {
    if (pre.empty()) throw;
    throw ConfigError(pre + e.path(), std::string(e.what()).substr(e.path().size() + 2));
  }
  return c;
}

}  // namespace

LatticeSpec RunConfig::lattice() const {
  if (model.kind == LatticeKind::chain1d && model.extent == std::vector<int>{1}) return single_site();
  return build_lattice(model.kind, model.extent, model.periodic);
}

Hamiltonian RunConfig::hamiltonian() const { return Hamiltonian(lattice(), model.params); }

ScheduleConfig RunConfig::resolved_schedule() const {
  ScheduleConfig s = schedule;
  const auto lat = lattice();
  switch (anchor) {
    case AnchorKind::printed: s.e0_anchor = lower_bound_anchor(lat, model.params); break;
    case AnchorKind::spectral_bound: s.e0_anchor = spectral_bound_anchor(lat, model.params); break;
    case AnchorKind::explicit_value: break;
  }
  return s;
}

void RunConfig::validate() const {
  LatticeSpec lat;
  under("model.lattice", [&] { lat = lattice(); });
  under("model", [&] { nhvmc::validate(model.params); });
  if (ansatz.alpha < 1) throw ConfigError("ansatz.alpha", "must be >= 1");
  if (!(ansatz.init_scale >= 0.0)) throw ConfigError("ansatz.init_scale", "must be >= 0");
  under("ansatz.dual_mode", [&] { check_dual_mode(ansatz.dual_mode, model.params); });
  under("sampler", [&] { estimator.sampler.validate(); });
  under("estimator", [&] { estimator.validate(); });
  if (estimator.mode == EstimatorMode::full_summation && lat.num_sites > kDefaultEnumerationCap) {
    throw ConfigError("estimator.mode", "full_summation needs N <= " + std::to_string(kDefaultEnumerationCap) +
                                            " (N = " + std::to_string(lat.num_sites) + ")");
  }
  under("optimizer", [&] { optimizer.validate(); });
  under("schedule", [&] { schedule.validate(); });
  if (anchor == AnchorKind::explicit_value && !schedule.e0_anchor) {
    throw ConfigError("schedule.anchor", "explicit anchor without a value");
  }
  if (!(schedule.convergence_loss > 0.0)) throw ConfigError("schedule.convergence_loss", "must be > 0");
  if (!(observables.floor >= 0.0)) throw ConfigError("observables.floor", "must be >= 0");
  if (output.directory.empty()) throw ConfigError("output.directory", "must not be empty");
  if (output.snapshot_stride < 0) throw ConfigError("output.snapshot_stride", "must be >= 0");
}

RunConfig parse_run_config(const json& j) { return parse_run_config_at(j, ""); }

json to_json(const RunConfig& c) {
  json j;
  j["model"] = {{"lattice", {{"kind", to_string(c.model.kind)}, {"extent", c.model.extent},
                             {"periodic", c.model.periodic}}},
                {"lambda", c.model.params.lambda},
                {"h", c.model.params.h},
                {"k", c.model.params.k},
                {"h_z", c.model.params.h_z},
                {"nh_scale", c.model.params.nh_scale}};
  j["ansatz"] = {{"alpha", c.ansatz.alpha},
                 {"seed", c.ansatz.seed},
                 {"init_scale", c.ansatz.init_scale},
                 {"dual_mode", to_string(c.ansatz.dual_mode)}};
  const auto& sc = c.estimator.sampler;
  j["sampler"] = {{"n_chains", sc.n_chains},   {"n_samples_per_chain", sc.n_samples_per_chain},
                  {"n_burnin", sc.n_burnin},   {"thinning", sc.thinning},
                  {"seed", sc.seed},           {"distribution", to_string(sc.distribution)}};
  j["estimator"] = {{"mode", to_string(c.estimator.mode)},
                    {"blocks_per_chain", c.estimator.blocks_per_chain},
                    {"continued_burnin", c.estimator.continued_burnin}};
  const auto& o = c.optimizer;
  j["optimizer"] = {{"update_rule", to_string(o.update_rule)},
                    {"learning_rate", o.learning_rate},
                    {"sr_shift", o.sr_shift},
                    {"max_grad_norm", opt_number(o.max_grad_norm)},
                    {"seed", o.seed},
                    {"adam_beta1", o.adam_beta1},
                    {"adam_beta2", o.adam_beta2},
                    {"adam_epsilon", o.adam_epsilon}};
  const auto& s = c.schedule;
  json anchor;
  if (c.anchor == AnchorKind::explicit_value) {
    anchor = json::array({s.e0_anchor->real(), s.e0_anchor->imag()});
  } else {
    anchor = to_string(c.anchor);
  }
  j["schedule"] = {{"mode", to_string(s.mode)},
                   {"M", s.M},
                   {"F", s.F},
                   {"T", s.T},
                   {"anchor", anchor},
                   {"warm_k_grid", s.warm_k_grid},
                   {"direction", to_string(s.direction)},
                   {"eps_stride", s.eps_stride},
                   {"eps_learning_rate", opt_number(s.eps_learning_rate)},
                   {"two_step", s.two_step},
                   {"two_step_steps", s.two_step_steps},
                   {"hermitian_steps", s.hermitian_steps},
                   {"convergence_loss", s.convergence_loss}};
  j["observables"] = {{"enabled", c.observables.enabled},
                      {"mode", to_string(c.observables.mode)},
                      {"correlations", c.observables.correlations},
                      {"floor", c.observables.floor}};
  j["output"] = {{"directory", c.output.directory}, {"snapshot_stride", c.output.snapshot_stride}};
  j["ed"] = {{"k_grid", c.ed.k_grid}, {"observables", c.ed.observables}};
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_json_file(path)); }

std::vector<double> SweepConfig::h_axis() const {
  return h_values.empty() ? std::vector<double>{base.model.params.h} : h_values;
}

std::vector<double> SweepConfig::k_axis() const {
  return k_values.empty() ? std::vector<double>{base.model.params.k} : k_values;
}

void SweepConfig::validate() const {
  base.validate();
  const auto ks = k_axis();
  for (std::size_t i = 1; i < ks.size(); ++i) {
    const double d = ks[i] - ks[i - 1];
    bool bad = false;
    switch (chaining) {
      case Chaining::independent: break;
      case Chaining::warm_forward: bad = !(d > 0.0); break;
      case Chaining::warm_backward: bad = !(d < 0.0); break;
      case Chaining::combined_fixed_then_warm:
        bad = base.schedule.direction == SweepDirection::forward ? !(d > 0.0) : !(d < 0.0);
        break;
    }
    if (bad) throw ConfigError("axes.k", "must be strictly monotone in the direction of " + to_string(chaining));
  }
  // Each point must itself be a valid run.
  for (double h : h_axis()) {
    for (double k : ks) {
      RunConfig c = base;
      c.model.params.h = h;
      c.model.params.k = k;
      try {
        c.validate();
      } catch (const ConfigError& e) {
        throw ConfigError("base." + e.path(), std::string(e.what()).substr(e.path().size() + 2) + " (at h = " +
                                                  std::to_string(h) + ", k = " + std::to_string(k) + ")");
      }
    }
  }
}

SweepConfig parse_sweep_config(const json& j) {
  Node top(j, "", {"base", "axes", "chaining"});
  SweepConfig s;
  if (!top.has("base")) throw ConfigError("base", "missing");
  s.base = parse_run_config_at(top.raw("base"), "base");
  const auto ax = top.child("axes", {"h", "k"});
  s.h_values = ax.numbers("h", {});
  s.k_values = ax.numbers("k", {});
  if (ax.has("h") && s.h_values.empty()) throw ConfigError("axes.h", "must not be empty");
  if (ax.has("k") && s.k_values.empty()) throw ConfigError("axes.k", "must not be empty");
  if (top.has("axes") && s.h_values.empty() && s.k_values.empty()) throw ConfigError("axes", "no values");
  s.chaining = top.enumeration("chaining", s.chaining, chaining_from_string);
  s.validate();
  return s;
}

json to_json(const SweepConfig& c) {
  json j;
  j["base"] = to_json(c.base);
  j["axes"] = {{"h", c.h_axis()}, {"k", c.k_axis()}};
  j["chaining"] = to_string(c.chaining);
  return j;
}

SweepConfig load_sweep_config(const std::string& path) { return parse_sweep_config(read_json_file(path)); }

LandscapeConfig parse_landscape_config(const json& j) {
  Node n(j, "landscape", {"eps_min", "eps_max", "theta_min", "theta_max", "resolution", "csv_stride"});
  LandscapeConfig c;
  c.eps_min = n.number("eps_min", c.eps_min);
  c.eps_max = n.number("eps_max", c.eps_max);
  c.theta_min = n.number("theta_min", c.theta_min);
  c.theta_max = n.number("theta_max", c.theta_max);
  c.resolution = n.number("resolution", c.resolution);
  c.csv_stride = n.integer("csv_stride", c.csv_stride);
  under("landscape", [&] { c.validate(); });
  return c;
}

json to_json(const LandscapeConfig& c) {
  return {{"eps_min", c.eps_min},       {"eps_max", c.eps_max},       {"theta_min", c.theta_min},
          {"theta_max", c.theta_max}, {"resolution", c.resolution}, {"csv_stride", c.csv_stride}};
}

}  // namespace nhvmc

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "nhvmc/ansatz.hpp"
#include "nhvmc/hamiltonian.hpp"
#include "nhvmc/lattice.hpp"
#include "nhvmc/landscape.hpp"
#include "nhvmc/observables.hpp"
#include "nhvmc/optimizer.hpp"

namespace nhvmc {

using json = nlohmann::ordered_json;

/// Validation failure tied to a location in the config tree, e.g. "model.lattice.extent[1]".
class ConfigError : public ValidationError {
 public:
  ConfigError(std::string path, const std::string& message);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct ModelConfig {
  LatticeKind kind = LatticeKind::chain1d;
  std::vector<int> extent{9};
  bool periodic = true;
  HamiltonianParams params;
};

struct AnsatzConfig {
  int alpha = 1;
  std::uint64_t seed = 1;
  double init_scale = 0.01;
  DualMode dual_mode = DualMode::pt_conjugate;
};

/// How the fixed-start anchor is chosen: the closed-form expression, the strict spectral bound,
/// or an explicit value (schedule.e0_anchor).
enum class AnchorKind { printed, spectral_bound, explicit_value };
std::string to_string(AnchorKind a);

struct ObservablesConfig {
  bool enabled = true;
  ExpectationMode mode = ExpectationMode::lr;
  bool correlations = true;
  double floor = kCorrelationFloor;
};

struct OutputConfig {
  std::string directory = "run";
  /// Intermediate snapshots every this many steps (0: final snapshot only).
  int snapshot_stride = 0;
};

struct EdConfig {
  /// When nonempty, cmd_ed also scans these k values (gap, ground energy and fidelity per k).
  std::vector<double> k_grid;
  bool observables = true;
};

struct RunConfig {
  ModelConfig model;
  AnsatzConfig ansatz;
  EstimatorConfig estimator;  // includes the sampler block
  OptimizerConfig optimizer;
  ScheduleConfig schedule;
  AnchorKind anchor = AnchorKind::printed;
  ObservablesConfig observables;
  OutputConfig output;
  EdConfig ed;

  /// Chains of extent 1 map to single_site().
  LatticeSpec lattice() const;
  Hamiltonian hamiltonian() const;
  /// Schedule with e0_anchor resolved from `anchor`.
  ScheduleConfig resolved_schedule() const;

  /// Cross-field checks; throws ConfigError.
  void validate() const;
};

RunConfig parse_run_config(const json& j);
json to_json(const RunConfig& c);
RunConfig load_run_config(const std::string& path);

enum class Chaining { independent, warm_forward, warm_backward, combined_fixed_then_warm };
std::string to_string(Chaining c);
Chaining chaining_from_string(const std::string& s);

/// Grid over h and k; a missing axis takes the base value. Chained rules walk the k axis in
/// the given order for every h, so k must be strictly monotone in the chaining direction.
struct SweepConfig {
  RunConfig base;
  std::vector<double> h_values;
  std::vector<double> k_values;
  Chaining chaining = Chaining::independent;

  std::vector<double> h_axis() const;
  std::vector<double> k_axis() const;
  void validate() const;
};

SweepConfig parse_sweep_config(const json& j);
json to_json(const SweepConfig& c);
SweepConfig load_sweep_config(const std::string& path);

LandscapeConfig parse_landscape_config(const json& j);
json to_json(const LandscapeConfig& c);

json read_json_file(const std::string& path);

}  // namespace nhvmc

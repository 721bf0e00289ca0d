#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nhvmc/ansatz.hpp"
#include "nhvmc/estimators.hpp"
#include "nhvmc/hamiltonian.hpp"
#include "nhvmc/sampler.hpp"

namespace nhvmc {

enum class UpdateRule { sr, adam, sgd };
std::string to_string(UpdateRule r);
UpdateRule update_rule_from_string(const std::string& s);

struct OptimizerConfig {
  UpdateRule update_rule = UpdateRule::sr;
  double learning_rate = 5e-3;
  double sr_shift = 1e-3;
  /// Caps the norm of the update direction (after preconditioning).
  std::optional<double> max_grad_norm = 10.0;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

enum class ScheduleMode { self_consistent, fixed_start, warm_start, energy_as_parameter };
std::string to_string(ScheduleMode m);
ScheduleMode schedule_mode_from_string(const std::string& s);

enum class SweepDirection { forward, backward };
std::string to_string(SweepDirection d);
SweepDirection sweep_direction_from_string(const std::string& s);

struct ScheduleConfig {
  ScheduleMode mode = ScheduleMode::fixed_start;
  int M = 5000;  // self-consistent steps (per grid point for warm starts)
  int F = 0;     // steps at eps = E0
  int T = 0;     // transition steps
  /// Fixed-start anchor; lower_bound_anchor of the model when unset.
  std::optional<cplx> e0_anchor;
  std::vector<double> warm_k_grid;  // nh_scale values
  SweepDirection direction = SweepDirection::forward;
  /// eps is re-estimated every `eps_stride` steps.
  int eps_stride = 1;
  /// Energy-as-a-parameter: step size of the eps update (the optimizer learning rate when unset).
  std::optional<double> eps_learning_rate;
  /// Two-step variant: for the first `two_step_steps` steps only Im eps moves, Re eps stays at Re E0.
  bool two_step = false;
  int two_step_steps = 0;
  /// Energy-minimization steps at nh_scale = 0 in warm starts; M when negative.
  int hermitian_steps = -1;
  /// A run counts as converged when the final loss (total) is below this value.
  double convergence_loss = 1e-4;

  void validate() const;
};

enum class EstimatorMode { full_summation, sampled };
std::string to_string(EstimatorMode m);
EstimatorMode estimator_mode_from_string(const std::string& s);

struct EstimatorConfig {
  EstimatorMode mode = EstimatorMode::sampled;
  SamplerConfig sampler;
  int blocks_per_chain = 4;
  /// Burn-in sweeps when chains continue from the previous step's positions.
  int continued_burnin = 10;

  void validate() const;
};

struct RunRecord {
  long step = 0;
  std::string phase;
  cplx epsilon{};           // value used in the loss
  Estimate epsilon_estimate;  // biorthogonal estimate at this step's parameters
  bool eps_frozen = false;  // overlap collapse or stride: estimate not used
  LossValue loss;
  double acceptance_rate = 1.0;
  double grad_norm = 0.0;
  double learning_rate = 0.0;
  bool rejected = false;
  bool sr_fallback = false;
  double wall_time = 0.0;  // seconds spent in this step
};

/// Everything needed to continue training: parameters, eps, optimizer moments and chain positions.
struct TrainState {
  DualMode mode = DualMode::pt_conjugate;
  std::vector<AnsatzParams> params;  // right, then left for independent duals
  cplx eps{};
  bool has_eps = false;
  long step = 0;
  std::uint64_t seed = 0;
  double lr_scale = 1.0;
  bool lr_halved = false;
  std::vector<std::vector<double>> optimizer_state;
  std::vector<SpinConfig> chains_right;
  std::vector<SpinConfig> chains_left;

  static TrainState initial(DualMode mode, int num_sites, int alpha, std::uint64_t seed, double init_scale);

  StatePair pair() const;
  std::size_t num_params() const;
  std::vector<cplx> flat_params() const;
  void set_flat_params(const std::vector<cplx>& flat);
  /// FNV-1a over the parameter bytes.
  std::uint64_t parameter_hash() const;

  Snapshot to_snapshot() const;
  static TrainState from_snapshot(const Snapshot& snap);
};

/// Called after every step.
using RecordSink = std::function<void(const RunRecord&, const TrainState&)>;

struct SrResult {
  Eigen::VectorXcd x;
  bool fallback = false;
};

/// Solves (S + delta I) x = g. Falls back to x = g / delta when the solve fails.
SrResult sr_precondition(const Eigen::VectorXcd& g, const Eigen::MatrixXcd& s, double delta);
/// Same with S built from log-derivative samples (rows) and normalized weights.
SrResult sr_precondition(const Eigen::VectorXcd& g, const Eigen::MatrixXcd& o, const Eigen::VectorXd& weights,
                         double delta);

/// Estimates at fixed parameters, for run summaries.
struct StateReport {
  std::optional<Estimate> eps;  // empty on overlap collapse
  cplx loss_eps{};              // eps at which `loss` was evaluated
  LossValue loss;
  Ensemble right;  // |psi|^2 ensemble (the full basis for full summation)
  double acceptance_rate = 1.0;
};

/// Steps of the optimization loops for one Hamiltonian.
class VarianceOptimizer {
 public:
  VarianceOptimizer(Hamiltonian ham, OptimizerConfig opt, EstimatorConfig est);

  const Hamiltonian& hamiltonian() const { return ham_; }
  const OptimizerConfig& optimizer() const { return opt_; }
  const EstimatorConfig& estimator() const { return est_; }

  /// eps from the current parameters, then one update of L = L_R + L_L at that eps.
  /// On overlap collapse eps keeps its previous value.
  RunRecord self_consistent_step(TrainState& state, int eps_stride = 1) const;

  /// One update at an externally chosen eps. `eps_of` maps this step's estimate (empty on
  /// collapse) to the eps used.
  using EpsPolicy = std::function<cplx(const std::optional<Estimate>& estimate, const TrainState& state)>;
  RunRecord policy_step(TrainState& state, const EpsPolicy& eps_of, const std::string& phase) const;

  /// eps <- eps - eta dL/d(eps) with the real and imaginary parts treated alike, then a parameter
  /// update at the new eps. `pin_real` keeps Re eps at `pinned_real` (two-step variant).
  RunRecord energy_as_parameter_step(TrainState& state, double eps_learning_rate, bool pin_real = false,
                                     double pinned_real = 0.0) const;

  /// Plain energy minimization (Hermitian models), used at nh_scale = 0 in warm starts.
  RunRecord energy_step(TrainState& state) const;

  /// eps and losses at the current parameters. Uses its own sampling stream, so training
  /// trajectories do not depend on whether reports are taken. Falls back to state.eps on collapse.
  StateReport report(const TrainState& state) const;

 private:
  struct Sides;
  Sides evaluate(TrainState& state, bool need_left) const;
  std::vector<cplx> direction(const Sides& sides, const Eigen::VectorXcd& g_right,
                              const Eigen::VectorXcd& g_left, bool& fallback) const;
  void apply_update(TrainState& state, const std::vector<cplx>& dir, RunRecord& rec) const;

  Hamiltonian ham_;
  OptimizerConfig opt_;
  EstimatorConfig est_;
  std::optional<Ensemble> full_;
};

std::vector<RunRecord> run_self_consistent(TrainState& state, const VarianceOptimizer& vo, const ScheduleConfig& sched,
                                           const RecordSink& sink = {});

/// F steps at eps = E0, T transition steps with eps = a_i E0 + (1 - a_i) eps_i, a_i = (T - i)/T, then M
/// self-consistent steps. Phases are tagged fixed, transition, self_consistent.
std::vector<RunRecord> run_fixed_start(TrainState& state, const VarianceOptimizer& vo, const ScheduleConfig& sched,
                                       const RecordSink& sink = {});

/// M energy-as-a-parameter steps, eps starting at E0 unless the state already carries one.
std::vector<RunRecord> run_energy_as_parameter(TrainState& state, const VarianceOptimizer& vo,
                                               const ScheduleConfig& sched, const RecordSink& sink = {});

/// The configured schedule (self_consistent, fixed_start or energy_as_parameter) continued from
/// position state.step, so a state restored from a snapshot picks up where it stopped.
std::vector<RunRecord> run_schedule(TrainState& state, const VarianceOptimizer& vo, const ScheduleConfig& sched,
                                    const RecordSink& sink = {});

struct WarmPoint {
  double nh_scale = 0.0;
  TrainState state;
  std::vector<RunRecord> records;
  std::uint64_t initial_hash = 0;  // parameter hash before the point's first step
};

/// Runs the grid in order (validated against the direction). A point at nh_scale = 0 uses energy
/// minimization; all other points run M self-consistent steps starting from the previous point.
/// `initial` may come from an earlier fixed-start run (combined method).
std::vector<WarmPoint> run_warm_start(const Hamiltonian& base, TrainState initial, const ScheduleConfig& sched,
                                      const OptimizerConfig& opt, const EstimatorConfig& est,
                                      const std::function<void(double, const RunRecord&, const TrainState&)>& sink = {});

/// 1 - |<phi|psi>|^2 / (<phi|phi><psi|psi>) by full summation.
double infidelity(const Eigen::VectorXcd& target, const Ansatz& psi);
double infidelity(const Eigen::VectorXcd& target, const Eigen::VectorXcd& state);

struct InfidelityFit {
  AnsatzParams params;  // best parameters seen
  double infidelity = 1.0;
  int steps = 0;
  bool converged = false;  // reached `tolerance` before the budget ran out
  std::vector<double> history;
};

InfidelityFit run_infidelity_fit(const Eigen::VectorXcd& target, const AnsatzParams& init, const OptimizerConfig& opt,
                                 int steps, double tolerance = 0.0);

}  // namespace nhvmc

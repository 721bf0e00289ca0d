#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nhvmc/config.hpp"
#include "nhvmc/exact.hpp"
#include "nhvmc/optimizer.hpp"

namespace nhvmc {

namespace fs = std::filesystem;

// Process exit codes. 1 marks a run that finished without meeting its convergence threshold.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNotConverged = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitPartialSweep = 4;

/// One row of summary.csv (and of a sweep's aggregate.csv).
struct RunSummary {
  double h = 0.0;
  double k = 0.0;
  double nh_scale = 1.0;
  Estimate eps;
  bool eps_collapsed = false;  // overlap collapse at the final parameters; eps is the last value used
  LossValue loss;
  Estimate m_z;
  Estimate m_x;
  ExpectationMode observable_mode = ExpectationMode::lr;
  long steps = 0;
  std::uint64_t initial_hash = 0;  // parameter hash before the first step (shows inheritance)
  std::uint64_t final_hash = 0;
  bool converged = false;
  std::string status = "not_run";  // converged, not_converged, failed
  std::string message;
};

std::vector<std::string> summary_header();
std::vector<std::string> summary_fields(const RunSummary& s);
void write_summary_csv(const fs::path& path, const RunSummary& s);

/// Ground-state data of one exact diagonalization.
struct EdPoint {
  std::string method;  // dense or translation_sector
  Eigen::VectorXcd eigenvalues;  // sorted
  std::optional<EDResult> dense;
  GroundPair ground;
  double gap = 0.0;
  double lr_fidelity = 1.0;
  double pairing_condition = 1.0;
  bool ep_suspect = false;
};

/// Dense diagonalization up to kDenseEigenCap sites, translation sectors for periodic chains up
/// to kMatvecCap. Throws ValidationError naming the caps beyond that.
EdPoint ed_point(const Hamiltonian& ham);

/// How a run point is driven.
enum class PointKind {
  configured,  // the schedule in the config (warm_start walks schedule.warm_k_grid)
  warm,        // energy minimization at k = 0, otherwise M self-consistent steps from the given state
};

struct PointResult {
  RunSummary summary;
  TrainState state;
};

/// Runs one configuration and writes config.resolved.json, records.jsonl, params.snapshot and
/// summary.csv into `dir`. `init` replaces the fresh initial state; `append_records` keeps an
/// existing records.jsonl (resume).
PointResult run_point(const RunConfig& cfg, const fs::path& dir, std::optional<TrainState> init, PointKind kind,
                      bool append_records = false);

/// Final estimates at fixed parameters: eps, losses, M_z and M_x in the configured mode.
RunSummary summarize(const RunConfig& cfg, const TrainState& state);

int cmd_ed(const RunConfig& cfg, const fs::path& out);
int cmd_vmc(const RunConfig& cfg, const fs::path& out, const std::optional<std::string>& resume = std::nullopt);
int cmd_sweep(const SweepConfig& cfg, const fs::path& out, int workers);
int cmd_landscape(const LandscapeConfig& cfg, const fs::path& out);
int cmd_observables(const RunConfig& cfg, const fs::path& out, const std::string& snapshot);

/// Snapshot compatibility with a config (site count, alpha, dual mode).
TrainState state_from_snapshot(const RunConfig& cfg, const std::string& path);

/// Sweep point directory name, e.g. p003_h2.5_k0.1.
std::string point_name(std::size_t index, double h, double k);

}  // namespace nhvmc

#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nhvmc/estimators.hpp"
#include "nhvmc/lattice.hpp"

namespace nhvmc {

/// Minimum-image Manhattan distance shells of a periodic lattice.
struct ShellTable {
  int num_sites = 0;
  int r_max = 0;
  /// shell_size[r] = number of sites at distance r from a given site (index 0 unused).
  std::vector<int> shell_size;
  /// Offsets (dx, dy) per shell.
  std::vector<std::vector<std::pair<int, int>>> offsets;
  /// Ordered site pairs (i, j) per shell; N * shell_size[r] entries each.
  std::vector<std::vector<std::pair<int, int>>> pairs;
};

int manhattan_distance(const LatticeSpec& lattice, int i, int j);
ShellTable shell_table(const LatticeSpec& lattice);

/// M_axis = (1/N) sum_i sigma_i^axis as a row-access operator.
enum class Axis { x, z };
RowAccessor magnetization_operator(int num_sites, Axis axis);
/// sigma_i^z sigma_j^z
RowAccessor zz_operator(int num_sites, int i, int j);
RowAccessor sigma_z_operator(int num_sites, int i);

Estimate magnetization(const StatePair& pair, const Ensemble& ens, Axis axis, ExpectationMode mode);

inline constexpr double kCorrelationFloor = 5e-5;

struct CorrelationPoint {
  int r = 0;
  int shell_size = 0;
  Estimate value;
  bool below_floor = false;
};

struct CorrelationResult {
  ExpectationMode mode = ExpectationMode::lr;
  double floor = kCorrelationFloor;
  std::vector<CorrelationPoint> points;  // r = 1 .. r_max
};

/// C_z(r) = 1/(N N_r) sum over ordered pairs at distance r of <s_i s_j> - <s_i><s_j>.
CorrelationResult connected_correlation_z(const StatePair& pair, const Ensemble& ens, const ShellTable& shells,
                                          ExpectationMode mode, double floor = kCorrelationFloor);

/// Same quantity from explicit state vectors (exact path, independent of the walkers).
CorrelationResult connected_correlation_z(const Eigen::VectorXcd& right, const Eigen::VectorXcd& left,
                                          const ShellTable& shells, ExpectationMode mode,
                                          double floor = kCorrelationFloor);

/// CSV columns r,N_r,re,im,stderr_re,stderr_im,mode,truncation_flag.
void write_correlation_csv(std::ostream& os, const CorrelationResult& c);

}  // namespace nhvmc

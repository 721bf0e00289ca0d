#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nhvmc/types.hpp"

namespace nhvmc {

// Single-qubit variance landscape for H = sz and psi = sin(theta)|up> + cos(theta)|down>:
//   L(eps, theta) = 1 + 2 eps cos(2 theta) + eps^2   (real eps).

double landscape_loss(double eps, double theta);
/// (dL/deps, dL/dtheta)
std::pair<double, double> landscape_gradient(double eps, double theta);
/// (L_ee, L_et, L_tt)
struct Hessian2 {
  double ee = 0.0, et = 0.0, tt = 0.0;
  double det() const { return ee * tt - et * et; }
};
Hessian2 landscape_hessian(double eps, double theta);

struct LandscapeConfig {
  double eps_min = -2.0;
  double eps_max = 2.0;
  double theta_min = 0.0;
  double theta_max = kPi / 2;
  double resolution = 1e-3;
  /// Every csv_stride-th grid line is written to the CSV; the scan itself uses the full grid.
  int csv_stride = 10;

  void validate() const;
};

struct StationaryPoint {
  double eps = 0.0;
  double theta = 0.0;
  double value = 0.0;
  double grad_norm = 0.0;
  Hessian2 hessian;
  /// Hessian determinant from central differences of grid values (independent of the analytic form).
  double fd_hessian_det = 0.0;
  std::string kind;  // minimum, maximum, saddle, degenerate
};

struct LandscapeZero {
  double eps = 0.0;
  double theta = 0.0;
  double value = 0.0;
};

struct LandscapeResult {
  LandscapeConfig config;
  int n_eps = 0;
  int n_theta = 0;
  double d_eps = 0.0;
  double d_theta = 0.0;
  double grid_min = 0.0;
  double grid_max = 0.0;
  std::vector<StationaryPoint> stationary;
  std::vector<LandscapeZero> zeros;  // grid local minima with L below the zero tolerance
  double min_over_theta_at_eps_minus_one = 0.0;
  double value_at_quoted_minimum = 0.0;  // L(-1, pi/2)
  double seconds = 0.0;
};

/// Grid scan, stationary-point search (grid candidates refined by Newton steps) and zero search.
LandscapeResult scan_landscape(const LandscapeConfig& cfg = {});

/// CSV columns eps,theta,loss on the strided grid.
void write_landscape_csv(std::ostream& os, const LandscapeResult& r);
void write_landscape_report(std::ostream& os, const LandscapeResult& r);

}  // namespace nhvmc

#include "nhvmc/landscape.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace nhvmc {

double landscape_loss(double eps, double theta) { return 1.0 + 2.0 * eps * std::cos(2.0 * theta) + eps * eps; }

std::pair<double, double> landscape_gradient(double eps, double theta) {
  return {2.0 * std::cos(2.0 * theta) + 2.0 * eps, -4.0 * eps * std::sin(2.0 * theta)};
}

Hessian2 landscape_hessian(double eps, double theta) {
  return {2.0, -4.0 * std::sin(2.0 * theta), -8.0 * eps * std::cos(2.0 * theta)};
}

void LandscapeConfig::validate() const {
  if (!(eps_max > eps_min) || !(theta_max > theta_min)) throw ValidationError("landscape: empty domain");
  if (!(resolution > 0.0)) throw ValidationError("landscape: resolution must be > 0");
  if (csv_stride < 1) throw ValidationError("landscape: csv_stride must be >= 1");
}

namespace {

std::string kind_of(const Hessian2& h) {
  const double d = h.det();
  if (std::abs(d) < 1e-12) return "degenerate";
  if (d < 0.0) return "saddle";
  return h.ee > 0.0 ? "minimum" : "maximum";
}

double fd_det(double e, double t, double step) {
  const auto f = landscape_loss;
  const double l0 = f(e, t);
  const double ee = (f(e + step, t) - 2.0 * l0 + f(e - step, t)) / (step * step);
  const double tt = (f(e, t + step) - 2.0 * l0 + f(e, t - step)) / (step * step);
  const double et =
      (f(e + step, t + step) - f(e + step, t - step) - f(e - step, t + step) + f(e - step, t - step)) /
      (4.0 * step * step);
  return ee * tt - et * et;
}

}  // namespace

LandscapeResult scan_landscape(const LandscapeConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  LandscapeResult r;
  r.config = cfg;
  // Endpoints are grid points; spacing is at most the requested resolution.
  r.n_eps = static_cast<int>(std::ceil((cfg.eps_max - cfg.eps_min) / cfg.resolution - 1e-9)) + 1;
  r.n_theta = static_cast<int>(std::ceil((cfg.theta_max - cfg.theta_min) / cfg.resolution - 1e-9)) + 1;
  r.d_eps = (cfg.eps_max - cfg.eps_min) / (r.n_eps - 1);
  r.d_theta = (cfg.theta_max - cfg.theta_min) / (r.n_theta - 1);
  const int ne = r.n_eps, nt = r.n_theta;
  const auto eps_at = [&](int i) { return i == ne - 1 ? cfg.eps_max : cfg.eps_min + i * r.d_eps; };
  const auto theta_at = [&](int j) { return j == nt - 1 ? cfg.theta_max : cfg.theta_min + j * r.d_theta; };

  std::vector<double> val(static_cast<std::size_t>(ne) * nt);
  const auto at = [&](int i, int j) -> double& { return val[static_cast<std::size_t>(i) * nt + j]; };
  std::vector<double> c2(nt);
  for (int j = 0; j < nt; ++j) c2[j] = std::cos(2.0 * theta_at(j));
  for (int i = 0; i < ne; ++i) {
    const double e = eps_at(i);
    for (int j = 0; j < nt; ++j) at(i, j) = 1.0 + 2.0 * e * c2[j] + e * e;
  }
  const auto [mn, mx] = std::minmax_element(val.begin(), val.end());
  r.grid_min = *mn;
  r.grid_max = *mx;

  // Squared finite-difference gradient from grid values; one-sided on the edges.
  std::vector<double> g2(val.size());
  for (int i = 0; i < ne; ++i) {
    const int ia = std::max(i - 1, 0), ib = std::min(i + 1, ne - 1);
    for (int j = 0; j < nt; ++j) {
      const int ja = std::max(j - 1, 0), jb = std::min(j + 1, nt - 1);
      const double ge = (at(ib, j) - at(ia, j)) / ((ib - ia) * r.d_eps);
      const double gt = (at(i, jb) - at(i, ja)) / ((jb - ja) * r.d_theta);
      g2[static_cast<std::size_t>(i) * nt + j] = ge * ge + gt * gt;
    }
  }
  const auto local_min = [&](const std::vector<double>& f, int i, int j) {
    const double c = f[static_cast<std::size_t>(i) * nt + j];
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        const int a = i + di, b = j + dj;
        if ((di == 0 && dj == 0) || a < 0 || b < 0 || a >= ne || b >= nt) continue;
        if (f[static_cast<std::size_t>(a) * nt + b] < c) return false;
      }
    }
    return true;
  };

  const double grad_tol = 50.0 * std::max(r.d_eps, r.d_theta);
  for (int i = 0; i < ne; ++i) {
    for (int j = 0; j < nt; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * nt + j;
      if (g2[idx] < grad_tol * grad_tol && local_min(g2, i, j)) {
        double e = eps_at(i), t = theta_at(j);
        for (int it = 0; it < 100; ++it) {
          const auto [ge, gt] = landscape_gradient(e, t);
          if (std::hypot(ge, gt) < 1e-15) break;
          const auto h = landscape_hessian(e, t);
          const double d = h.det();
          if (std::abs(d) < 1e-14) break;
          e -= (h.tt * ge - h.et * gt) / d;
          t -= (-h.et * ge + h.ee * gt) / d;
        }
        const auto [ge, gt] = landscape_gradient(e, t);
        const double gn = std::hypot(ge, gt);
        const bool inside = e >= cfg.eps_min - 1e-12 && e <= cfg.eps_max + 1e-12 && t >= cfg.theta_min - 1e-12 &&
                            t <= cfg.theta_max + 1e-12;
        if (gn > 1e-10 || !inside) continue;
        const bool seen = std::any_of(r.stationary.begin(), r.stationary.end(), [&](const StationaryPoint& p) {
          return std::abs(p.eps - e) < 1e-6 && std::abs(p.theta - t) < 1e-6;
        });
        if (seen) continue;
        StationaryPoint p;
        p.eps = std::abs(e) < 1e-15 ? 0.0 : e;
        p.theta = std::abs(t) < 1e-15 ? 0.0 : t;
        p.value = landscape_loss(p.eps, p.theta);
        p.grad_norm = gn;
        p.hessian = landscape_hessian(p.eps, p.theta);
        p.fd_hessian_det = fd_det(p.eps, p.theta, std::max(r.d_eps, r.d_theta));
        p.kind = kind_of(p.hessian);
        r.stationary.push_back(p);
      }
      if (val[idx] < 1e-5 && local_min(val, i, j)) r.zeros.push_back({eps_at(i), theta_at(j), val[idx]});
    }
  }
  std::sort(r.stationary.begin(), r.stationary.end(),
            [](const StationaryPoint& a, const StationaryPoint& b) { return a.eps < b.eps; });

  double m = landscape_loss(-1.0, cfg.theta_min);
  for (int j = 0; j < nt; ++j) m = std::min(m, landscape_loss(-1.0, theta_at(j)));
  r.min_over_theta_at_eps_minus_one = m;
  r.value_at_quoted_minimum = landscape_loss(-1.0, kPi / 2);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

void write_landscape_csv(std::ostream& os, const LandscapeResult& r) {
  const auto& c = r.config;
  char buf[96];
  os << "eps,theta,loss\n";
  for (int i = 0; i < r.n_eps; i += c.csv_stride) {
    const double e = c.eps_min + i * r.d_eps;
    for (int j = 0; j < r.n_theta; j += c.csv_stride) {
      const double t = c.theta_min + j * r.d_theta;
      std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.10g\n", e, t, landscape_loss(e, t));
      os << buf;
    }
  }
}

void write_landscape_report(std::ostream& os, const LandscapeResult& r) {
  char buf[256];
  os << "loss: L(eps, theta) = 1 + 2 eps cos(2 theta) + eps^2\n";
  os << "state: psi = sin(theta)|up> + cos(theta)|down>, H = sigma_z\n";
  std::snprintf(buf, sizeof buf, "domain: eps in [%g, %g], theta in [%g, %.6f]\n", r.config.eps_min,
                r.config.eps_max, r.config.theta_min, r.config.theta_max);
  os << buf;
  std::snprintf(buf, sizeof buf, "grid: %d x %d, d_eps = %.3g, d_theta = %.6g\n", r.n_eps, r.n_theta, r.d_eps,
                r.d_theta);
  os << buf;
  std::snprintf(buf, sizeof buf, "grid range: min %.3e, max %.6g\n", r.grid_min, r.grid_max);
  os << buf;
  os << "\nstationary points (analytic Hessian [L_ee L_et; L_et L_tt]):\n";
  os << "eps,theta,theta/pi,loss,grad_norm,H_ee,H_et,H_tt,det,det_fd,kind\n";
  for (const auto& p : r.stationary) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.3e,%.12g,%.12g,%.12g,%.12g,%.8g,%s\n", p.eps, p.theta,
                  p.theta / kPi, p.value, p.grad_norm, p.hessian.ee, p.hessian.et, p.hessian.tt, p.hessian.det(),
                  p.fd_hessian_det, p.kind.c_str());
    os << buf;
  }
  os << "\nzeros (grid local minima with L < 1e-5):\n";
  os << "eps,theta,theta/pi,loss\n";
  for (const auto& z : r.zeros) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.3e\n", z.eps, z.theta, z.theta / kPi, z.value);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "\nmin over theta at eps = -1: %.3e\n", r.min_over_theta_at_eps_minus_one);
  os << buf;
  std::snprintf(buf, sizeof buf, "%.6g", r.value_at_quoted_minimum);
  os << "\nnote: a global minimum is sometimes quoted at (eps, theta) = (-1, pi/2). With this loss\n"
     << "L(-1, pi/2) = " << buf << ", so that point is not a zero. The zeros are (-1, 0), where psi = |down>\n"
     << "with sigma_z eigenvalue -1, and (+1, pi/2), where psi = |up> with eigenvalue +1. The quoted\n"
     << "location would pair eps = -1 with the +1 eigenstate; the two choices are not reconciled here.\n";
  std::snprintf(buf, sizeof buf, "\nscan time: %.3f s\n", r.seconds);
  os << buf;
}

}  // namespace nhvmc

#include "nhvmc/observables.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <ostream>

#include "nhvmc/exact.hpp"

namespace nhvmc {

namespace {

int wrap(int d, int l) {
  d = ((d % l) + l) % l;
  return std::min(d, l - d);
}

}  // namespace

int manhattan_distance(const LatticeSpec& lattice, int i, int j) {
  const auto [xi, yi] = lattice.coords(i);
  const auto [xj, yj] = lattice.coords(j);
  int d = wrap(xj - xi, lattice.extent[0]);
  if (lattice.dimension() > 1) d += wrap(yj - yi, lattice.extent[1]);
  return d;
}

ShellTable shell_table(const LatticeSpec& lattice) {
  if (!lattice.periodic) throw ValidationError("shell_table: lattice must be periodic");
  ShellTable t;
  t.num_sites = lattice.num_sites;
  const int lx = lattice.extent[0];
  const int ly = lattice.dimension() > 1 ? lattice.extent[1] : 1;
  std::map<int, std::vector<std::pair<int, int>>> by_r;
  for (int dy = 0; dy < ly; ++dy) {
    for (int dx = 0; dx < lx; ++dx) {
      if (dx == 0 && dy == 0) continue;
      by_r[wrap(dx, lx) + (ly > 1 ? wrap(dy, ly) : 0)].push_back({dx, dy});
    }
  }
  t.r_max = by_r.empty() ? 0 : by_r.rbegin()->first;
  t.shell_size.assign(t.r_max + 1, 0);
  t.offsets.assign(t.r_max + 1, {});
  t.pairs.assign(t.r_max + 1, {});
  for (auto& [r, offs] : by_r) {
    t.shell_size[r] = static_cast<int>(offs.size());
    t.offsets[r] = offs;
  }
  for (int i = 0; i < lattice.num_sites; ++i) {
    const auto [x, y] = lattice.coords(i);
    for (int r = 1; r <= t.r_max; ++r) {
      for (const auto& [dx, dy] : t.offsets[r]) {
        t.pairs[r].push_back({i, lattice.site_at((x + dx) % lx, (y + dy) % ly)});
      }
    }
  }
  return t;
}

RowAccessor magnetization_operator(int num_sites, Axis axis) {
  const double inv = 1.0 / num_sites;
  if (axis == Axis::z) {
    return [inv](SpinView c) {
      HamiltonianRow row;
      double s = 0.0;
      for (auto v : c) s += v;
      row.diag = s * inv;
      return row;
    };
  }
  return [inv, num_sites](SpinView) {
    HamiltonianRow row;
    row.offdiag.reserve(num_sites);
    for (int i = 0; i < num_sites; ++i) row.offdiag.push_back({i, cplx(inv)});
    return row;
  };
}

RowAccessor zz_operator(int, int i, int j) {
  return [i, j](SpinView c) {
    HamiltonianRow row;
    row.diag = static_cast<double>(c[i] * c[j]);
    return row;
  };
}

RowAccessor sigma_z_operator(int, int i) {
  return [i](SpinView c) {
    HamiltonianRow row;
    row.diag = static_cast<double>(c[i]);
    return row;
  };
}

Estimate magnetization(const StatePair& pair, const Ensemble& ens, Axis axis, ExpectationMode mode) {
  const int n = pair.num_sites();
  const auto local = [n, axis](SpinView c, const Walker& w, std::span<cplx> out) {
    cplx acc{};
    if (axis == Axis::z) {
      for (auto v : c) acc += static_cast<double>(v);
    } else {
      for (int i = 0; i < n; ++i) acc += w.flip_ratio(i);
    }
    out[0] = acc / static_cast<double>(n);
  };
  return biorthogonal_functional(
      pair, ens, mode, 1, local, [](const std::vector<cplx>& m, std::vector<cplx>& o) { o[0] = m[0]; }, 1)[0];
}

namespace {

// Channels: <s_i> for every site, then the pair sums S_r per shell.
void correlation_from_means(const ShellTable& shells, const std::vector<cplx>& m, std::vector<cplx>& o) {
  const int n = shells.num_sites;
  for (int r = 1; r <= shells.r_max; ++r) {
    cplx disconnected{};
    for (const auto& [i, j] : shells.pairs[r]) disconnected += m[i] * m[j];
    o[r - 1] = (m[n + r - 1] - disconnected) / static_cast<double>(n * shells.shell_size[r]);
  }
}

CorrelationResult finish(const ShellTable& shells, const std::vector<Estimate>& est, ExpectationMode mode,
                         double floor) {
  CorrelationResult out;
  out.mode = mode;
  out.floor = floor;
  for (int r = 1; r <= shells.r_max; ++r) {
    CorrelationPoint p;
    p.r = r;
    p.shell_size = shells.shell_size[r];
    p.value = est[r - 1];
    p.below_floor = std::abs(p.value.value) < floor;
    out.points.push_back(p);
  }
  return out;
}

}  // namespace

CorrelationResult connected_correlation_z(const StatePair& pair, const Ensemble& ens, const ShellTable& shells,
                                          ExpectationMode mode, double floor) {
  const int n = shells.num_sites;
  if (pair.num_sites() != n) throw ValidationError("connected_correlation_z: shell table does not match the state");
  const std::size_t channels = static_cast<std::size_t>(n + shells.r_max);
  const auto local = [&](SpinView c, const Walker&, std::span<cplx> out) {
    for (int i = 0; i < n; ++i) out[i] = static_cast<double>(c[i]);
    for (int r = 1; r <= shells.r_max; ++r) {
      int s = 0;
      for (const auto& [i, j] : shells.pairs[r]) s += c[i] * c[j];
      out[n + r - 1] = static_cast<double>(s);
    }
  };
  const auto est = biorthogonal_functional(
      pair, ens, mode, channels, local,
      [&](const std::vector<cplx>& m, std::vector<cplx>& o) { correlation_from_means(shells, m, o); },
      static_cast<std::size_t>(shells.r_max));
  return finish(shells, est, mode, floor);
}

CorrelationResult connected_correlation_z(const Eigen::VectorXcd& right, const Eigen::VectorXcd& left,
                                          const ShellTable& shells, ExpectationMode mode, double floor) {
  const int n = shells.num_sites;
  std::vector<cplx> m(static_cast<std::size_t>(n + shells.r_max));
  for (int i = 0; i < n; ++i) m[i] = exact_observable(right, left, sigma_z_operator(n, i), n, mode);
  for (int r = 1; r <= shells.r_max; ++r) {
    cplx s{};
    for (const auto& [i, j] : shells.pairs[r]) s += exact_observable(right, left, zz_operator(n, i, j), n, mode);
    m[n + r - 1] = s;
  }
  std::vector<cplx> o(static_cast<std::size_t>(shells.r_max));
  correlation_from_means(shells, m, o);
  std::vector<Estimate> est(o.size());
  for (std::size_t r = 0; r < o.size(); ++r) est[r].value = o[r];
  return finish(shells, est, mode, floor);
}

void write_correlation_csv(std::ostream& os, const CorrelationResult& c) {
  const auto old = os.precision(17);
  os << "r,N_r,re,im,stderr_re,stderr_im,mode,truncation_flag\n";
  for (const auto& p : c.points) {
    os << p.r << ',' << p.shell_size << ',' << p.value.value.real() << ',' << p.value.value.imag() << ','
       << p.value.stderr_re << ',' << p.value.stderr_im << ',' << to_string(c.mode) << ',' << (p.below_floor ? 1 : 0)
       << '\n';
  }
  os.precision(old);
}

}  // namespace nhvmc

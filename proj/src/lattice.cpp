#include "nhvmc/lattice.hpp"

#include <algorithm>
#include <set>

namespace nhvmc {

std::string to_string(LatticeKind kind) {
  switch (kind) {
    case LatticeKind::chain1d:
      return "chain1d";
    case LatticeKind::square2d:
      return "square2d";
  }
  return "unknown";
}

LatticeKind lattice_kind_from_string(const std::string& name) {
  if (name == "chain1d") return LatticeKind::chain1d;
  if (name == "square2d") return LatticeKind::square2d;
  throw ValidationError("unknown lattice kind '" + name + "' (expected chain1d or square2d)");
}

std::pair<int, int> LatticeSpec::coords(int site) const {
  const int lx = extent.at(0);
  return {site % lx, site / lx};
}

int LatticeSpec::site_at(int x, int y) const {
  const int lx = extent.at(0);
  const int ly = dimension() > 1 ? extent[1] : 1;
  x = ((x % lx) + lx) % lx;
  y = ((y % ly) + ly) % ly;
  return x + lx * y;
}

LatticeSpec build_lattice(LatticeKind kind, std::vector<int> extent, bool periodic) {
  const std::size_t want_dims = kind == LatticeKind::chain1d ? 1 : 2;
  if (extent.size() != want_dims) {
    throw ValidationError(to_string(kind) + " needs " + std::to_string(want_dims) + " extent value(s)");
  }
  for (int e : extent) {
    if (e < 2) throw ValidationError("lattice extent must be >= 2 in every dimension");
  }
  if (kind == LatticeKind::square2d && !periodic) {
    throw ValidationError("square2d lattices are only supported with periodic boundaries");
  }

  LatticeSpec lat;
  lat.kind = kind;
  lat.extent = std::move(extent);
  lat.periodic = periodic;
  const int lx = lat.extent[0];
  const int ly = lat.dimension() > 1 ? lat.extent[1] : 1;
  lat.num_sites = lx * ly;

  std::set<std::pair<int, int>> seen;
  auto add = [&](int i, int j) {
    auto bond = std::minmax(i, j);
    if (i == j || !seen.insert(bond).second) return;
    lat.bonds.emplace_back(bond.first, bond.second);
  };
  for (int y = 0; y < ly; ++y) {
    for (int x = 0; x < lx; ++x) {
      const int s = x + lx * y;
      if (periodic || x + 1 < lx) add(s, lat.site_at(x + 1, y));
      if (lat.dimension() > 1) add(s, lat.site_at(x, y + 1));
    }
  }

  // Coordination of a bulk site: count bonds touching site 0 on periodic lattices.
  if (periodic) {
    lat.coordination = static_cast<int>(std::count_if(lat.bonds.begin(), lat.bonds.end(),
                                                      [](const auto& b) { return b.first == 0 || b.second == 0; }));
  } else {
    lat.coordination = 2;
  }
  return lat;
}

LatticeSpec single_site() {
  LatticeSpec spec;
  spec.kind = LatticeKind::chain1d;
  spec.extent = {1};
  spec.periodic = true;
  spec.num_sites = 1;
  spec.coordination = 0;
  return spec;
}

void check_config(const LatticeSpec& lattice, SpinView config) {
  if (static_cast<int>(config.size()) != lattice.num_sites) {
    throw ValidationError("spin configuration has " + std::to_string(config.size()) + " entries, lattice has " +
                          std::to_string(lattice.num_sites) + " sites");
  }
  for (Spin s : config) {
    if (s != 1 && s != -1) throw ValidationError("spin entries must be +1 or -1");
  }
}

}  // namespace nhvmc

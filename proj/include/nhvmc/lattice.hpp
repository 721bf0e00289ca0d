#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nhvmc/types.hpp"

namespace nhvmc {

enum class LatticeKind { chain1d, square2d };

std::string to_string(LatticeKind kind);
LatticeKind lattice_kind_from_string(const std::string& name);

/// Lattice geometry with its nearest-neighbour bond list.
///
/// Sites are indexed row-major (x fastest). Bonds are stored with i < j and are
/// enumerated per site as the +x neighbour followed by the +y neighbour, so the
/// order is reproducible. Extents of 2 with periodic wrapping would produce the
/// same bond twice; such duplicates are kept only once and the coordination
/// number is reduced accordingly.
struct LatticeSpec {
  LatticeKind kind = LatticeKind::chain1d;
  std::vector<int> extent;
  bool periodic = true;
  int num_sites = 0;
  int coordination = 0;
  std::vector<std::pair<int, int>> bonds;

  int dimension() const { return static_cast<int>(extent.size()); }
  /// Lattice coordinates (x, y) of a site; y is 0 for chains.
  std::pair<int, int> coords(int site) const;
  int site_at(int x, int y) const;
};

LatticeSpec build_lattice(LatticeKind kind, std::vector<int> extent, bool periodic = true);

inline LatticeSpec chain(int length, bool periodic = true) {
  return build_lattice(LatticeKind::chain1d, {length}, periodic);
}

inline LatticeSpec square(int side) { return build_lattice(LatticeKind::square2d, {side, side}, true); }

/// One isolated site without bonds. Not reachable through build_lattice (extent >= 2);
/// used by exact-diagonalization checks against the 2x2 closed form.
LatticeSpec single_site();

/// Throws ValidationError unless `config` has one +/-1 entry per site.
void check_config(const LatticeSpec& lattice, SpinView config);

}  // namespace nhvmc

#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "nhvmc/lattice.hpp"
#include "nhvmc/types.hpp"

namespace nhvmc {

/// Couplings of the non-Hermitian transverse-field Ising model
///
///   H = -lambda sum_<ij> sz_i sz_j - h sum_i sx_i - i k nh_scale sum_i sz_i - h_z sum_i sz_i.
///
/// `nh_scale` multiplies only the imaginary longitudinal field; warm-start sweeps ramp it
/// from 0 to 1. `h_z` is a real longitudinal field used for Hermitian-counterpart runs.
struct HamiltonianParams {
  double lambda = 0.5;
  double h = 1.0;
  double k = 0.0;
  double nh_scale = 1.0;
  double h_z = 0.0;

  double effective_k() const { return k * nh_scale; }
  bool is_hermitian() const { return effective_k() == 0.0; }
  /// PT symmetric with the anti-linear metric given by complex conjugation in the sz basis.
  bool is_pt_symmetric() const { return h_z == 0.0; }
};

void validate(const HamiltonianParams& params);

/// One row of H in the sz basis: diagonal element plus single-spin-flip entries.
struct HamiltonianRow {
  cplx diag{};
  std::vector<std::pair<int, cplx>> offdiag;
};

/// Diagonal element <s|H|s>.
cplx hamiltonian_diagonal(const LatticeSpec& lattice, const HamiltonianParams& params, SpinView config);

HamiltonianRow hamiltonian_row(const LatticeSpec& lattice, const HamiltonianParams& params, SpinView config);

/// Row of H^dagger; only the diagonal changes (conjugated) because the flip terms are real.
HamiltonianRow dagger_row(const LatticeSpec& lattice, const HamiltonianParams& params, SpinView config);

/// Spectral anchor  E_0 = -N (lambda xi / 2 - h - i k)  used to start fixed-start schedules.
///
/// The expression is returned exactly as written; for h > lambda xi / 2 its real part is positive
/// and it is no longer below the spectrum, so callers can pass an explicit `override_value`.
cplx lower_bound_anchor(const LatticeSpec& lattice, const HamiltonianParams& params,
                        std::optional<cplx> override_value = std::nullopt);

/// A strict lower bound on Re(E) and matching imaginary offset: -N (lambda xi / 2 + |h| + |h_z|) - i k N.
cplx spectral_bound_anchor(const LatticeSpec& lattice, const HamiltonianParams& params);

/// Bundles a lattice with couplings. Immutable after construction.
class Hamiltonian {
 public:
  Hamiltonian(LatticeSpec lattice, HamiltonianParams params);

  const LatticeSpec& lattice() const { return lattice_; }
  const HamiltonianParams& params() const { return params_; }
  int num_sites() const { return lattice_.num_sites; }

  cplx diagonal(SpinView config) const { return hamiltonian_diagonal(lattice_, params_, config); }
  /// Off-diagonal element for flipping `site` (identical for H and H^dagger).
  cplx flip_element(int /*site*/) const { return cplx(-params_.h, 0.0); }
  HamiltonianRow row(SpinView config) const { return hamiltonian_row(lattice_, params_, config); }
  HamiltonianRow adjoint_row(SpinView config) const { return dagger_row(lattice_, params_, config); }

  Hamiltonian with_params(const HamiltonianParams& params) const { return Hamiltonian(lattice_, params); }

 private:
  LatticeSpec lattice_;
  HamiltonianParams params_;
};

// Basis indexing shared by exact enumeration and dense matrices: bit i of the index is set
// when spin i points down.
std::uint64_t config_to_index(SpinView config);
SpinConfig index_to_config(std::uint64_t index, int num_sites);

}  // namespace nhvmc

#include "nhvmc/hamiltonian.hpp"

#include <cmath>

namespace nhvmc {

void validate(const HamiltonianParams& p) {
  for (double v : {p.lambda, p.h, p.k, p.nh_scale, p.h_z}) {
    if (!std::isfinite(v)) throw ValidationError("Hamiltonian couplings must be finite");
  }
}

cplx hamiltonian_diagonal(const LatticeSpec& lattice, const HamiltonianParams& params, SpinView config) {
  double zz = 0.0;
  for (const auto& [i, j] : lattice.bonds) zz += config[i] * config[j];
  double mz = 0.0;
  for (Spin s : config) mz += s;
  return {-params.lambda * zz - params.h_z * mz, -params.effective_k() * mz};
}

HamiltonianRow hamiltonian_row(const LatticeSpec& lattice, const HamiltonianParams& params, SpinView config) {
  check_config(lattice, config);
  HamiltonianRow row;
  row.diag = hamiltonian_diagonal(lattice, params, config);
  row.offdiag.reserve(config.size());
  for (int i = 0; i < lattice.num_sites; ++i) row.offdiag.emplace_back(i, cplx(-params.h, 0.0));
  return row;
}

HamiltonianRow dagger_row(const LatticeSpec& lattice, const HamiltonianParams& params, SpinView config) {
  HamiltonianRow row = hamiltonian_row(lattice, params, config);
  row.diag = std::conj(row.diag);
  return row;
}

cplx lower_bound_anchor(const LatticeSpec& lattice, const HamiltonianParams& params, std::optional<cplx> override_value) {
  if (override_value) return *override_value;
  const double n = lattice.num_sites;
  const double xi = lattice.coordination;
  return -n * cplx(params.lambda * xi / 2.0 - params.h, -params.effective_k());
}

cplx spectral_bound_anchor(const LatticeSpec& lattice, const HamiltonianParams& params) {
  const double n = lattice.num_sites;
  const double xi = lattice.coordination;
  return {-n * (std::abs(params.lambda) * xi / 2.0 + std::abs(params.h) + std::abs(params.h_z)),
          -n * params.effective_k()};
}

Hamiltonian::Hamiltonian(LatticeSpec lattice, HamiltonianParams params)
    : lattice_(std::move(lattice)), params_(params) {
  validate(params_);
}

std::uint64_t config_to_index(SpinView config) {
  std::uint64_t idx = 0;
  for (std::size_t i = 0; i < config.size(); ++i) {
    if (config[i] < 0) idx |= std::uint64_t{1} << i;
  }
  return idx;
}

SpinConfig index_to_config(std::uint64_t index, int num_sites) {
  SpinConfig c(num_sites);
  for (int i = 0; i < num_sites; ++i) c[i] = (index >> i) & 1U ? Spin{-1} : Spin{1};
  return c;
}

}  // namespace nhvmc

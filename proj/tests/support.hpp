#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "nhvmc/ansatz.hpp"
#include "nhvmc/hamiltonian.hpp"
#include "nhvmc/lattice.hpp"
#include "nhvmc/sampler.hpp"

namespace nhvmc::testing {

inline Hamiltonian tfim_chain(int n, double h, double k, double lambda = 0.5) {
  HamiltonianParams p;
  p.lambda = lambda;
  p.h = h;
  p.k = k;
  return Hamiltonian(chain(n), p);
}

inline std::shared_ptr<Rbm> random_rbm(int n, std::uint64_t seed, double scale = 0.3, int alpha = 1) {
  return std::make_shared<Rbm>(init_params(n, alpha, seed, scale));
}

inline Eigen::VectorXcd random_vector(Eigen::Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = cplx(g(rng), g(rng));
  return v;
}

/// psi as a dense vector in config_to_index order (unnormalized).
inline Eigen::VectorXcd dense_state(const Ansatz& psi) {
  const int n = psi.num_sites();
  Eigen::VectorXcd v(Eigen::Index{1} << n);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::exp(psi.log_psi(index_to_config(i, n)));
  return v;
}

inline std::vector<cplx> to_std(const Eigen::VectorXcd& v) { return {v.data(), v.data() + v.size()}; }

inline double rel_err(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace nhvmc::testing

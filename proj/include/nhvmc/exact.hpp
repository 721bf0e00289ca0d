#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nhvmc/estimators.hpp"
#include "nhvmc/hamiltonian.hpp"

namespace nhvmc {

inline constexpr int kDenseEigenCap = 12;
inline constexpr int kMatvecCap = 14;

/// Dense 2^N x 2^N matrix of H in the config_to_index basis.
Eigen::MatrixXcd dense_matrix(const Hamiltonian& ham, int cap = kDenseEigenCap);

/// Dense matrix of a row-access operator.
Eigen::MatrixXcd dense_operator(const RowAccessor& op, int num_sites, int cap = kDenseEigenCap);

/// y = H x without forming the matrix.
Eigen::VectorXcd apply_hamiltonian(const Hamiltonian& ham, const Eigen::VectorXcd& x, bool adjoint = false);
Eigen::VectorXcd apply_operator(const RowAccessor& op, int num_sites, const Eigen::VectorXcd& x);

inline constexpr const char* kSortConvention =
    "ascending real part; equal real parts (within 1e-9 relative) by ascending imaginary part";

/// Full spectrum with biorthogonally paired eigenvectors: left.adjoint() * right = I
/// (nondegenerate or re-paired clusters), right columns have unit norm.
struct EDResult {
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXcd right;
  Eigen::MatrixXcd left;
  /// |1 / <L^|R^>| for unit-normalized vectors; infinite at an exact EP.
  std::vector<double> pairing_condition;
  std::vector<bool> ep_suspect;
  std::string sort_convention = kSortConvention;

  Eigen::Index size() const { return eigenvalues.size(); }
  bool has_vectors() const { return right.cols() == eigenvalues.size(); }
};

/// General eigendecomposition. Eigenvalues only when `vectors` is false.
EDResult diagonalize(const Eigen::MatrixXcd& h, bool vectors = true);

/// Sorts eigenvalues by the kSortConvention rule and returns the permutation.
std::vector<Eigen::Index> sort_spectrum(const Eigen::VectorXcd& values);

struct GroundPair {
  cplx energy;
  Eigen::VectorXcd right;
  Eigen::VectorXcd left;
  Eigen::Index index = 0;
};
GroundPair ground_state(const EDResult& ed);

/// Delta = min_{n >= 2} |E_n - E_0| under the sorted order.
struct GapResult {
  double delta = 0.0;
  Eigen::Index ground_index = 0;
  Eigen::Index excluded_index = 1;
};
GapResult spectral_gap(const Eigen::VectorXcd& sorted_eigenvalues);
inline GapResult spectral_gap(const EDResult& ed) { return spectral_gap(ed.eigenvalues); }

/// |<L_0|R_0>|^2 with both vectors unit-normalized.
double lr_fidelity(const Eigen::VectorXcd& right, const Eigen::VectorXcd& left);
double lr_fidelity(const EDResult& ed);

cplx exact_observable(const Eigen::VectorXcd& right, const Eigen::VectorXcd& left, const Eigen::MatrixXcd& op,
                      ExpectationMode mode);
cplx exact_observable(const Eigen::VectorXcd& right, const Eigen::VectorXcd& left, const RowAccessor& op,
                      int num_sites, ExpectationMode mode);
cplx exact_observable(const EDResult& ed, const Eigen::MatrixXcd& op, ExpectationMode mode);

/// Spectrum of a Hermitian matrix via a self-adjoint solver, ascending.
Eigen::VectorXd hermitian_eigenvalues(const Eigen::MatrixXcd& h);

/// CSV columns n,re,im,lr_overlap (lr_overlap = |<L^|R^>| of unit vectors).
void write_spectrum_csv(std::ostream& os, const EDResult& ed);

/// Translation-sector diagonalization of a periodic chain. Results match the dense
/// path but scale to the L <= 14 sweeps needed for gap and fidelity curves.
struct SectorResult {
  Eigen::VectorXcd eigenvalues;  // all sectors, sorted by kSortConvention
  cplx ground_energy;
  int ground_momentum = 0;       // q = 2 pi m / L
  double ground_fidelity = 1.0;  // |<L_0|R_0>|^2
  Eigen::VectorXcd ground_right; // full-space vectors (filled when requested)
  Eigen::VectorXcd ground_left;
};
SectorResult translation_sector_ed(const Hamiltonian& ham, bool ground_vectors = false, int cap = kMatvecCap);

}  // namespace nhvmc

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nhvmc/ansatz.hpp"
#include "nhvmc/hamiltonian.hpp"
#include "nhvmc/sampler.hpp"
#include "nhvmc/stats.hpp"

namespace nhvmc {

/// Variance losses  L_R = <psi|(H^+ - eps^*)(H - eps)|psi>/<psi|psi>  and the mirror L_L on psi~.
struct LossValue {
  double l_right = 0.0;
  double l_left = 0.0;
  double total = 0.0;
  double stderr = 0.0;
};

/// The <psi~|psi> estimate is consistent with zero at the 5 sigma level.
class OverlapCollapseError : public NumericalError {
 public:
  OverlapCollapseError(double magnitude, double stderr);
  double magnitude;
  double stderr;
};

/// Row-access operator: diagonal plus single-spin-flip matrix elements.
using RowAccessor = std::function<HamiltonianRow(SpinView)>;

/// O_loc(s) = sum_s' <s|O|s'> psi(s') / psi(s) from a row and a walker positioned at s.
cplx local_value(const HamiltonianRow& row, const Walker& walker);

/// E_loc(s) = (H psi)(s) / psi(s).
cplx local_energy(const Walker& walker, const Hamiltonian& ham);
cplx local_energy(const Ansatz& psi, const Hamiltonian& ham, SpinView config);
/// (H^dagger psi)(s) / psi(s).
cplx local_energy_adjoint(const Walker& walker, const Hamiltonian& ham);

/// Normalized importance weights that turn an ensemble drawn from exp(log_q) into
/// averages over the density exp(log_target). Weights sum to one.
std::vector<double> reweight(const Ensemble& ens, std::span<const double> log_target);

/// E_{|psi|^2} |E_loc - eps|^2, exact on full ensembles, jackknife error bars otherwise.
LossValue variance_loss_right(const Ansatz& psi, const Hamiltonian& ham, cplx eps, const Ensemble& ens);
/// E_{|psi~|^2} |E~_loc - eps^*|^2 with E~_loc the local value of H^dagger on psi~.
LossValue variance_loss_left(const Ansatz& dual, const Hamiltonian& ham, cplx eps, const Ensemble& ens);
LossValue variance_loss(const StatePair& pair, const Hamiltonian& ham, cplx eps, const Ensemble& right_ens,
                        const Ensemble& left_ens);

/// eps = <psi~|H|psi>/<psi~|psi>, estimated from whichever density produced `ens`
/// (|psi|^2, |psi~|^2 or |psi~ psi|; the reweighting reproduces the matching ratio estimator).
/// Throws OverlapCollapseError when the overlap estimate is consistent with zero.
Estimate biorthogonal_energy(const StatePair& pair, const Hamiltonian& ham, const Ensemble& ens);

struct ObservableEstimate {
  Estimate lr;  // <psi~|O|psi>/<psi~|psi>
  Estimate rr;  // <psi|O|psi>/<psi|psi>
};

ObservableEstimate biorthogonal_observable(const StatePair& pair, const RowAccessor& op, const Ensemble& ens);

/// LR: weights psi~^* psi; RR: weights |psi|^2.
enum class ExpectationMode { lr, rr };
std::string to_string(ExpectationMode m);
ExpectationMode expectation_mode_from_string(const std::string& s);

/// Per-configuration local quantities, written into `out` (one entry per channel).
using LocalChannels = std::function<void(SpinView config, const Walker& right, std::span<cplx> out)>;

/// Jackknifed functional of the weighted channel averages <X_c> under the given mode.
/// `f` receives the averages and fills `num_outputs` values.
std::vector<Estimate> biorthogonal_functional(const StatePair& pair, const Ensemble& ens, ExpectationMode mode,
                                              std::size_t num_channels, const LocalChannels& local,
                                              const BlockAccumulator::Functional& f, std::size_t num_outputs);

/// Wirtinger gradient dL_R/dtheta^* at fixed eps for a single state:
///   E[conj(dE_loc) (E_loc - eps)] + Cov(O^*, |E_loc - eps|^2).
std::vector<cplx> gradient_variance_right(const Ansatz& psi, const Hamiltonian& ham, cplx eps, const Ensemble& ens);

/// Same for L_L[psi~] with respect to the conjugated parameters of psi~.
std::vector<cplx> gradient_variance_left(const Ansatz& dual, const Hamiltonian& ham, cplx eps, const Ensemble& ens);

/// Gradient of L = L_R + L_L at fixed eps with respect to the conjugate trainable parameters.
/// pt_conjugate: one parameter set theta with psi~ = psi_{theta^*}; independent: (theta, theta').
std::vector<cplx> gradient_variance(const StatePair& pair, const Hamiltonian& ham, cplx eps, const Ensemble& right_ens,
                                    const Ensemble& left_ens);

/// Per-configuration data of one state needed for loss, gradient and SR.
struct SideData {
  Eigen::VectorXcd e_loc;   // local energy of H (or H^dagger for the left side)
  Eigen::VectorXcd log_psi;
  Eigen::VectorXd weight;   // normalized weights for |state|^2
  Eigen::MatrixXcd O;       // log derivatives, one row per configuration
  Eigen::MatrixXcd D;       // d E_loc / d theta, one row per configuration
  std::vector<int> block;
  int num_blocks = 1;
};

/// Evaluates `state` on every configuration of `ens`. `adjoint` selects H^dagger.
/// Derivative matrices are filled only when `with_derivatives` is set.
SideData evaluate_side(const Ansatz& state, const Hamiltonian& ham, bool adjoint, const Ensemble& ens,
                       bool with_derivatives);

/// Loss, gradient and mean of O from precomputed side data at energy `target` (eps, or eps^* on the left).
struct SideGradient {
  double loss = 0.0;
  double loss_stderr = 0.0;
  Eigen::VectorXcd gradient;
  cplx mean_local{};  // E[E_loc]
};
SideGradient side_gradient(const SideData& side, cplx target, bool with_gradient = true);

/// eps from right-side data and log psi~ on the same configurations; no extra walker pass.
/// `exact` selects the full-summation overlap-collapse rule.
Estimate biorthogonal_energy(const SideData& right, std::span<const cplx> log_dual, bool exact);

/// dE/dtheta^* = E[O^* (E_loc - <E_loc>)] for plain energy minimization (Hermitian H).
Eigen::VectorXcd energy_gradient(const SideData& side);

/// Regularized-free quantum geometric tensor S_jk = <O_j^* O_k> - <O_j^*><O_k> from side data.
Eigen::MatrixXcd quantum_geometric_tensor(const SideData& side);

}  // namespace nhvmc

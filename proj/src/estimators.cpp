#include "nhvmc/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nhvmc {

OverlapCollapseError::OverlapCollapseError(double mag, double err)
    : NumericalError("overlap <psi~|psi> is consistent with zero (|estimate| = " + std::to_string(mag) +
                     ", stderr = " + std::to_string(err) + ")"),
      magnitude(mag),
      stderr(err) {}

cplx local_value(const HamiltonianRow& row, const Walker& walker) {
  cplx acc = row.diag;
  for (const auto& [site, elem] : row.offdiag) {
    if (elem != cplx{}) acc += elem * walker.flip_ratio(site);
  }
  return acc;
}

namespace {

// Local energy together with the per-flip coefficients H_{s,s^i} psi(s^i)/psi(s).
cplx local_energy_with_coeffs(const Walker& walker, const Hamiltonian& ham, bool adjoint, std::vector<cplx>& coeff) {
  const int n = ham.num_sites();
  coeff.resize(n);
  walker.flip_ratios(coeff);
  cplx diag = ham.diagonal(walker.spins());
  if (adjoint) diag = std::conj(diag);
  cplx acc = diag;
  for (int i = 0; i < n; ++i) {
    // Flip elements are real, so H and H^dagger share them.
    coeff[i] *= ham.flip_element(i);
    acc += coeff[i];
  }
  return acc;
}

constexpr double kCollapseSigmas = 5.0;
constexpr double kExactCollapse = 1e-12;

double max_or_zero(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  return std::isfinite(m) ? m : 0.0;
}

}  // namespace

cplx local_energy(const Walker& walker, const Hamiltonian& ham) {
  std::vector<cplx> coeff;
  return local_energy_with_coeffs(walker, ham, false, coeff);
}

cplx local_energy(const Ansatz& psi, const Hamiltonian& ham, SpinView config) {
  check_config(ham.lattice(), config);
  const auto w = psi.walker(config);
  return local_energy(*w, ham);
}

cplx local_energy_adjoint(const Walker& walker, const Hamiltonian& ham) {
  std::vector<cplx> coeff;
  return local_energy_with_coeffs(walker, ham, true, coeff);
}

std::vector<double> reweight(const Ensemble& ens, std::span<const double> log_target) {
  if (ens.size() == 0) throw ValidationError("empty ensemble");
  std::vector<double> x(ens.size());
  for (std::size_t s = 0; s < ens.size(); ++s) x[s] = log_target[s] - ens.log_q[s];
  const double shift = max_or_zero(x);
  double total = 0.0;
  for (auto& v : x) {
    v = std::exp(v - shift);
    total += v;
  }
  for (auto& v : x) v /= total;
  return x;
}

SideData evaluate_side(const Ansatz& state, const Hamiltonian& ham, bool adjoint, const Ensemble& ens,
                       bool with_derivatives) {
  if (ens.size() == 0) throw ValidationError("empty ensemble");
  if (with_derivatives && !state.has_derivatives()) {
    throw ValidationError("gradient requested for an ansatz without parameter derivatives");
  }
  const std::size_t ns = ens.size();
  const std::size_t np = state.num_params();
  SideData side;
  side.e_loc.resize(static_cast<Eigen::Index>(ns));
  side.log_psi.resize(static_cast<Eigen::Index>(ns));
  side.block = ens.block;
  side.num_blocks = ens.num_blocks;
  if (with_derivatives) {
    side.O.resize(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(np));
    side.D.resize(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(np));
  }
  std::vector<double> log_target(ns);
  std::vector<cplx> coeff;
  Eigen::VectorXcd row(static_cast<Eigen::Index>(np));
  for (std::size_t s = 0; s < ns; ++s) {
    const auto w = state.walker(ens.configs[s]);
    const cplx lp = w->log_psi();
    log_target[s] = 2.0 * lp.real();
    const auto idx = static_cast<Eigen::Index>(s);
    side.log_psi(idx) = lp;
    side.e_loc(idx) = local_energy_with_coeffs(*w, ham, adjoint, coeff);
    if (with_derivatives) {
      w->log_derivatives(std::span<cplx>(row.data(), np));
      side.O.row(idx) = row.transpose();
      w->flip_derivative_sum(coeff, std::span<cplx>(row.data(), np));
      side.D.row(idx) = row.transpose();
    }
  }
  const auto wts = reweight(ens, log_target);
  side.weight = Eigen::Map<const Eigen::VectorXd>(wts.data(), static_cast<Eigen::Index>(ns));
  return side;
}

SideGradient side_gradient(const SideData& side, cplx target, bool with_gradient) {
  SideGradient out;
  const Eigen::Index ns = side.e_loc.size();
  Eigen::VectorXcd dev = side.e_loc.array() - target;
  Eigen::VectorXd dev2 = dev.cwiseAbs2();
  out.loss = side.weight.dot(dev2);
  out.mean_local = (side.weight.cast<cplx>().array() * side.e_loc.array()).sum();

  if (side.num_blocks > 1) {
    BlockAccumulator acc(side.num_blocks, 2);
    for (Eigen::Index s = 0; s < ns; ++s) {
      const int b = side.block[static_cast<std::size_t>(s)];
      acc.add(b, 0, side.weight(s));
      acc.add(b, 1, side.weight(s) * dev2(s));
      acc.count(b);
    }
    const auto est = acc.jackknife(
        [](const std::vector<cplx>& m, std::vector<cplx>& o) { o[0] = m[1] / m[0]; }, 1);
    out.loss_stderr = est[0].stderr_re;
  }

  if (with_gradient) {
    const Eigen::VectorXcd wc = side.weight.cast<cplx>();
    const Eigen::VectorXcd a = wc.cwiseProduct(dev);
    const Eigen::VectorXcd b = (side.weight.cwiseProduct(dev2)).cast<cplx>();
    out.gradient = side.D.adjoint() * a + side.O.adjoint() * b - out.loss * (side.O.adjoint() * wc);
  }
  return out;
}

Eigen::VectorXcd energy_gradient(const SideData& side) {
  const Eigen::VectorXcd wc = side.weight.cast<cplx>();
  const cplx mean = (wc.array() * side.e_loc.array()).sum();
  return side.O.adjoint() * wc.cwiseProduct((side.e_loc.array() - mean).matrix());
}

Eigen::MatrixXcd quantum_geometric_tensor(const SideData& side) {
  const Eigen::VectorXcd wc = side.weight.cast<cplx>();
  const Eigen::RowVectorXcd mean = (side.O.transpose() * wc).transpose();
  Eigen::MatrixXcd x = side.O.rowwise() - mean;
  x.array().colwise() *= side.weight.cwiseSqrt().cast<cplx>().array();
  const Eigen::Index np = side.O.cols();
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(np, np);
  s.selfadjointView<Eigen::Lower>().rankUpdate(x.adjoint());
  s.triangularView<Eigen::StrictlyUpper>() = s.adjoint();
  return s;
}

LossValue variance_loss_right(const Ansatz& psi, const Hamiltonian& ham, cplx eps, const Ensemble& ens) {
  const auto side = evaluate_side(psi, ham, false, ens, false);
  const auto g = side_gradient(side, eps, false);
  LossValue out;
  out.l_right = g.loss;
  out.total = g.loss;
  out.stderr = g.loss_stderr;
  return out;
}

LossValue variance_loss_left(const Ansatz& dual, const Hamiltonian& ham, cplx eps, const Ensemble& ens) {
  const auto side = evaluate_side(dual, ham, true, ens, false);
  const auto g = side_gradient(side, std::conj(eps), false);
  LossValue out;
  out.l_left = g.loss;
  out.total = g.loss;
  out.stderr = g.loss_stderr;
  return out;
}

LossValue variance_loss(const StatePair& pair, const Hamiltonian& ham, cplx eps, const Ensemble& right_ens,
                        const Ensemble& left_ens) {
  const auto r = variance_loss_right(pair.right(), ham, eps, right_ens);
  const auto l = variance_loss_left(pair.left(), ham, eps, left_ens);
  LossValue out;
  out.l_right = r.l_right;
  out.l_left = l.l_left;
  out.total = r.l_right + l.l_left;
  out.stderr = std::hypot(r.stderr, l.stderr);
  return out;
}

namespace {

struct BiorthogonalTerms {
  std::vector<cplx> z;       // psi~^* psi / q, rescaled
  std::vector<double> w_rr;  // |psi|^2 / q, rescaled
  double abs_mean = 0.0;     // mean |z|, the round-off scale of the overlap
};

BiorthogonalTerms biorthogonal_weights(const std::vector<cplx>& log_psi, const std::vector<cplx>& log_dual,
                                       const Ensemble& ens) {
  const std::size_t ns = ens.size();
  std::vector<cplx> x(ns);
  std::vector<double> xr(ns), xrr(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    x[s] = std::conj(log_dual[s]) + log_psi[s] - ens.log_q[s];
    xr[s] = x[s].real();
    xrr[s] = 2.0 * log_psi[s].real() - ens.log_q[s];
  }
  const double shift = max_or_zero(xr);
  const double shift_rr = max_or_zero(xrr);
  BiorthogonalTerms t;
  t.z.resize(ns);
  t.w_rr.resize(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    t.z[s] = std::exp(x[s] - shift);
    t.w_rr[s] = std::exp(xrr[s] - shift_rr);
    t.abs_mean += std::abs(t.z[s]);
  }
  if (ns > 0) t.abs_mean /= static_cast<double>(ns);
  return t;
}

// Exact ensembles: a cancellation down to round-off counts as a zero overlap.
void check_overlap(const BlockAccumulator& acc, std::size_t channel, bool exact, double abs_mean) {
  const auto est = acc.jackknife(
      [channel](const std::vector<cplx>& m, std::vector<cplx>& o) { o[0] = m[channel]; }, 1);
  const double mag = std::abs(est[0].value);
  const double err = est[0].stderr_abs();
  if (exact ? mag <= kExactCollapse * abs_mean : mag < kCollapseSigmas * err) throw OverlapCollapseError(mag, err);
}

}  // namespace

Estimate biorthogonal_energy(const StatePair& pair, const Hamiltonian& ham, const Ensemble& ens) {
  if (ens.size() == 0) throw ValidationError("empty ensemble");
  const std::size_t ns = ens.size();
  std::vector<cplx> lp(ns), ld(ns), eloc(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    const auto w = pair.right().walker(ens.configs[s]);
    lp[s] = w->log_psi();
    ld[s] = pair.mode() == DualMode::pt_conjugate ? std::conj(lp[s]) : pair.left().log_psi(ens.configs[s]);
    eloc[s] = local_energy(*w, ham);
  }
  const auto t = biorthogonal_weights(lp, ld, ens);
  BlockAccumulator acc(ens.num_blocks, 2);
  for (std::size_t s = 0; s < ns; ++s) {
    acc.add(ens.block[s], 0, t.z[s]);
    acc.add(ens.block[s], 1, t.z[s] * eloc[s]);
    acc.count(ens.block[s]);
  }
  check_overlap(acc, 0, ens.exact, t.abs_mean);
  return acc.jackknife([](const std::vector<cplx>& m, std::vector<cplx>& o) { o[0] = m[1] / m[0]; }, 1)[0];
}

ObservableEstimate biorthogonal_observable(const StatePair& pair, const RowAccessor& op, const Ensemble& ens) {
  if (ens.size() == 0) throw ValidationError("empty ensemble");
  const std::size_t ns = ens.size();
  std::vector<cplx> lp(ns), ld(ns), oloc(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    const auto w = pair.right().walker(ens.configs[s]);
    lp[s] = w->log_psi();
    ld[s] = pair.mode() == DualMode::pt_conjugate ? std::conj(lp[s]) : pair.left().log_psi(ens.configs[s]);
    oloc[s] = local_value(op(ens.configs[s]), *w);
  }
  const auto t = biorthogonal_weights(lp, ld, ens);
  BlockAccumulator acc(ens.num_blocks, 4);
  for (std::size_t s = 0; s < ns; ++s) {
    const int b = ens.block[s];
    acc.add(b, 0, t.z[s]);
    acc.add(b, 1, t.z[s] * oloc[s]);
    acc.add(b, 2, t.w_rr[s]);
    acc.add(b, 3, t.w_rr[s] * oloc[s]);
    acc.count(b);
  }
  check_overlap(acc, 0, ens.exact, t.abs_mean);
  const auto est = acc.jackknife(
      [](const std::vector<cplx>& m, std::vector<cplx>& o) {
        o[0] = m[1] / m[0];
        o[1] = m[3] / m[2];
      },
      2);
  return {est[0], est[1]};
}

std::string to_string(ExpectationMode m) { return m == ExpectationMode::lr ? "LR" : "RR"; }

ExpectationMode expectation_mode_from_string(const std::string& s) {
  if (s == "LR" || s == "lr") return ExpectationMode::lr;
  if (s == "RR" || s == "rr") return ExpectationMode::rr;
  throw ValidationError("unknown expectation mode '" + s + "' (expected LR or RR)");
}

std::vector<Estimate> biorthogonal_functional(const StatePair& pair, const Ensemble& ens, ExpectationMode mode,
                                              std::size_t num_channels, const LocalChannels& local,
                                              const BlockAccumulator::Functional& f, std::size_t num_outputs) {
  if (ens.size() == 0) throw ValidationError("empty ensemble");
  const std::size_t ns = ens.size();
  std::vector<cplx> lp(ns), ld(ns);
  std::vector<cplx> values(ns * num_channels);
  for (std::size_t s = 0; s < ns; ++s) {
    const auto w = pair.right().walker(ens.configs[s]);
    lp[s] = w->log_psi();
    if (mode == ExpectationMode::lr) {
      ld[s] = pair.mode() == DualMode::pt_conjugate ? std::conj(lp[s]) : pair.left().log_psi(ens.configs[s]);
    }
    local(ens.configs[s], *w, std::span<cplx>(values.data() + s * num_channels, num_channels));
  }
  const auto t = biorthogonal_weights(lp, ld, ens);
  BlockAccumulator acc(ens.num_blocks, num_channels + 1);
  for (std::size_t s = 0; s < ns; ++s) {
    const int b = ens.block[s];
    const cplx wt = mode == ExpectationMode::lr ? t.z[s] : cplx(t.w_rr[s]);
    acc.add(b, 0, wt);
    for (std::size_t c = 0; c < num_channels; ++c) acc.add(b, c + 1, wt * values[s * num_channels + c]);
    acc.count(b);
  }
  if (mode == ExpectationMode::lr) check_overlap(acc, 0, ens.exact, t.abs_mean);
  std::vector<cplx> avg(num_channels);
  return acc.jackknife(
      [&](const std::vector<cplx>& m, std::vector<cplx>& o) {
        for (std::size_t c = 0; c < num_channels; ++c) avg[c] = m[c + 1] / m[0];
        f(avg, o);
      },
      num_outputs);
}

Estimate biorthogonal_energy(const SideData& right, std::span<const cplx> log_dual, bool exact) {
  const Eigen::Index ns = right.e_loc.size();
  if (static_cast<Eigen::Index>(log_dual.size()) != ns) throw ValidationError("log_dual size mismatch");
  // z_s = w_s psi~^*(s) / psi^*(s): the |psi|^2 weights turned into psi~^* psi weights.
  std::vector<cplx> x(static_cast<std::size_t>(ns));
  double shift = -std::numeric_limits<double>::infinity();
  for (Eigen::Index s = 0; s < ns; ++s) {
    x[static_cast<std::size_t>(s)] = std::conj(log_dual[static_cast<std::size_t>(s)] - right.log_psi(s));
    shift = std::max(shift, x[static_cast<std::size_t>(s)].real());
  }
  BlockAccumulator acc(right.num_blocks, 2);
  double abs_mean = 0.0;
  for (Eigen::Index s = 0; s < ns; ++s) {
    const cplx z = right.weight(s) * std::exp(x[static_cast<std::size_t>(s)] - shift);
    const int b = right.block[static_cast<std::size_t>(s)];
    acc.add(b, 0, z);
    acc.add(b, 1, z * right.e_loc(s));
    acc.count(b);
    abs_mean += std::abs(z);
  }
  check_overlap(acc, 0, exact, abs_mean / static_cast<double>(std::max<Eigen::Index>(ns, 1)));
  return acc.jackknife([](const std::vector<cplx>& m, std::vector<cplx>& o) { o[0] = m[1] / m[0]; }, 1)[0];
}

std::vector<cplx> gradient_variance_right(const Ansatz& psi, const Hamiltonian& ham, cplx eps, const Ensemble& ens) {
  const auto side = evaluate_side(psi, ham, false, ens, true);
  const auto g = side_gradient(side, eps);
  return {g.gradient.data(), g.gradient.data() + g.gradient.size()};
}

std::vector<cplx> gradient_variance_left(const Ansatz& dual, const Hamiltonian& ham, cplx eps, const Ensemble& ens) {
  const auto side = evaluate_side(dual, ham, true, ens, true);
  const auto g = side_gradient(side, std::conj(eps));
  return {g.gradient.data(), g.gradient.data() + g.gradient.size()};
}

std::vector<cplx> gradient_variance(const StatePair& pair, const Hamiltonian& ham, cplx eps, const Ensemble& right_ens,
                                    const Ensemble& left_ens) {
  auto gr = gradient_variance_right(pair.right(), ham, eps, right_ens);
  const auto gl = gradient_variance_left(pair.left(), ham, eps, left_ens);
  if (pair.mode() == DualMode::pt_conjugate) {
    // psi~ = psi_{theta^*}: d/dtheta^* of L_L[psi_{theta^*}] is the conjugate of its own Wirtinger gradient.
    for (std::size_t k = 0; k < gr.size(); ++k) gr[k] += std::conj(gl[k]);
    return gr;
  }
  gr.insert(gr.end(), gl.begin(), gl.end());
  return gr;
}

}  // namespace nhvmc

#include "nhvmc/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include "nhvmc/lattice.hpp"

namespace nhvmc {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t step_seed(std::uint64_t seed, long step, int side) {
  return splitmix(splitmix(seed ^ 0x5851f42d4c957f2dULL) + static_cast<std::uint64_t>(step) * 2 +
                  static_cast<std::uint64_t>(side));
}

// Sampling streams depend on the ansatz seed, the optimizer seed and the sampler seed.
std::uint64_t stream_base(std::uint64_t state_seed, const OptimizerConfig& opt, const EstimatorConfig& est) {
  return state_seed ^ opt.seed ^ (est.sampler.seed ? splitmix(est.sampler.seed) : 0);
}

bool all_finite(const std::vector<cplx>& v) {
  return std::all_of(v.begin(), v.end(), [](cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

bool all_finite(const Eigen::VectorXcd& v) { return v.allFinite(); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class E>
E enum_from(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
  for (const auto& [name, v] : table) {
    if (s == name) return v;
  }
  throw ValidationError(std::string("unknown ") + what + " '" + s + "'");
}

}  // namespace

std::string to_string(UpdateRule r) {
  switch (r) {
    case UpdateRule::sr: return "sr";
    case UpdateRule::adam: return "adam";
    case UpdateRule::sgd: return "sgd";
  }
  return "?";
}

UpdateRule update_rule_from_string(const std::string& s) {
  return enum_from<UpdateRule>(s, {{"sr", UpdateRule::sr}, {"adam", UpdateRule::adam}, {"sgd", UpdateRule::sgd}},
                               "update rule");
}

std::string to_string(ScheduleMode m) {
  switch (m) {
    case ScheduleMode::self_consistent: return "self_consistent";
    case ScheduleMode::fixed_start: return "fixed_start";
    case ScheduleMode::warm_start: return "warm_start";
    case ScheduleMode::energy_as_parameter: return "energy_as_parameter";
  }
  return "?";
}

ScheduleMode schedule_mode_from_string(const std::string& s) {
  return enum_from<ScheduleMode>(s,
                                 {{"self_consistent", ScheduleMode::self_consistent},
                                  {"fixed_start", ScheduleMode::fixed_start},
                                  {"warm_start", ScheduleMode::warm_start},
                                  {"energy_as_parameter", ScheduleMode::energy_as_parameter}},
                                 "schedule mode");
}

std::string to_string(SweepDirection d) { return d == SweepDirection::forward ? "forward" : "backward"; }

SweepDirection sweep_direction_from_string(const std::string& s) {
  return enum_from<SweepDirection>(s, {{"forward", SweepDirection::forward}, {"backward", SweepDirection::backward}},
                                   "direction");
}

std::string to_string(EstimatorMode m) { return m == EstimatorMode::full_summation ? "full_summation" : "sampled"; }

EstimatorMode estimator_mode_from_string(const std::string& s) {
  return enum_from<EstimatorMode>(
      s, {{"full_summation", EstimatorMode::full_summation}, {"sampled", EstimatorMode::sampled}}, "estimator mode");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be > 0");
  if (update_rule == UpdateRule::sr && !(sr_shift > 0.0)) throw ValidationError("sr_shift must be > 0");
  if (max_grad_norm && !(*max_grad_norm > 0.0)) throw ValidationError("max_grad_norm must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ValidationError("adam_epsilon must be > 0");
}

void ScheduleConfig::validate() const {
  if (M < 0 || F < 0 || T < 0) throw ValidationError("M, F, T must be >= 0");
  if (eps_stride < 1) throw ValidationError("eps_stride must be >= 1");
  if (two_step_steps < 0) throw ValidationError("two_step_steps must be >= 0");
  if (e0_anchor && !(std::isfinite(e0_anchor->real()) && std::isfinite(e0_anchor->imag()))) {
    throw ValidationError("E0_anchor must be finite");
  }
  if (eps_learning_rate && !(*eps_learning_rate > 0.0)) throw ValidationError("eps_learning_rate must be > 0");
  for (std::size_t i = 1; i < warm_k_grid.size(); ++i) {
    const double d = warm_k_grid[i] - warm_k_grid[i - 1];
    if ((direction == SweepDirection::forward && !(d > 0.0)) || (direction == SweepDirection::backward && !(d < 0.0))) {
      throw ValidationError("warm_k_grid must be strictly monotone in the declared direction");
    }
  }
  if (mode == ScheduleMode::warm_start && warm_k_grid.empty()) throw ValidationError("warm_k_grid is empty");
}

void EstimatorConfig::validate() const {
  sampler.validate();
  if (blocks_per_chain < 1) throw ValidationError("blocks_per_chain must be >= 1");
  if (continued_burnin < 0) throw ValidationError("continued_burnin must be >= 0");
}

// ---------------------------------------------------------------------------------------------
// TrainState

TrainState TrainState::initial(DualMode mode, int num_sites, int alpha, std::uint64_t seed, double init_scale) {
  TrainState s;
  s.mode = mode;
  s.seed = seed;
  s.params.push_back(init_params(num_sites, alpha, seed, init_scale));
  if (mode == DualMode::independent) s.params.push_back(init_params(num_sites, alpha, splitmix(seed), init_scale));
  return s;
}

StatePair TrainState::pair() const {
  if (params.empty()) throw ValidationError("TrainState has no parameters");
  auto right = std::make_shared<Rbm>(params[0]);
  if (mode == DualMode::pt_conjugate) return StatePair::pt_conjugate(right);
  if (params.size() != 2) throw ValidationError("independent duals need two parameter sets");
  return StatePair::independent(right, std::make_shared<Rbm>(params[1]));
}

std::size_t TrainState::num_params() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.num_params();
  return n;
}

std::vector<cplx> TrainState::flat_params() const {
  std::vector<cplx> out;
  for (const auto& p : params) {
    const auto f = p.flatten();
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

void TrainState::set_flat_params(const std::vector<cplx>& flat) {
  if (flat.size() != num_params()) throw ValidationError("parameter vector size mismatch");
  std::size_t off = 0;
  for (auto& p : params) {
    const std::size_t n = p.num_params();
    p = AnsatzParams::unflatten(p.num_visible, p.alpha, std::span<const cplx>(flat).subspan(off, n));
    off += n;
  }
}

std::uint64_t TrainState::parameter_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& z : flat_params()) {
    unsigned char bytes[sizeof(cplx)];
    std::memcpy(bytes, &z, sizeof(cplx));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

// optimizer_state[0] holds {lr_scale, lr_halved, number of right chains}; moments follow.
Snapshot TrainState::to_snapshot() const {
  Snapshot s;
  s.num_visible = params.at(0).num_visible;
  s.alpha = params.at(0).alpha;
  s.mode = mode;
  s.seed = seed;
  s.step = step;
  if (has_eps) s.epsilon = eps;
  s.params = params;
  s.chain_configs = chains_right;
  s.chain_configs.insert(s.chain_configs.end(), chains_left.begin(), chains_left.end());
  s.optimizer_state.push_back({lr_scale, lr_halved ? 1.0 : 0.0, static_cast<double>(chains_right.size())});
  s.optimizer_state.insert(s.optimizer_state.end(), optimizer_state.begin(), optimizer_state.end());
  return s;
}

TrainState TrainState::from_snapshot(const Snapshot& snap) {
  TrainState t;
  t.mode = snap.mode;
  t.seed = snap.seed;
  t.step = snap.step;
  t.has_eps = snap.epsilon.has_value();
  t.eps = snap.epsilon.value_or(cplx{});
  t.params = snap.params;
  if (t.params.size() != (t.mode == DualMode::pt_conjugate ? 1u : 2u)) {
    throw ValidationError("snapshot parameter sets do not match the dual mode");
  }
  std::size_t n_right = snap.chain_configs.size();
  if (!snap.optimizer_state.empty()) {
    const auto& ctl = snap.optimizer_state[0];
    if (ctl.size() != 3) throw ValidationError("snapshot optimizer control block malformed");
    t.lr_scale = ctl[0];
    t.lr_halved = ctl[1] != 0.0;
    n_right = std::min(n_right, static_cast<std::size_t>(ctl[2]));
    t.optimizer_state.assign(snap.optimizer_state.begin() + 1, snap.optimizer_state.end());
  }
  t.chains_right.assign(snap.chain_configs.begin(), snap.chain_configs.begin() + static_cast<long>(n_right));
  t.chains_left.assign(snap.chain_configs.begin() + static_cast<long>(n_right), snap.chain_configs.end());
  return t;
}

// ---------------------------------------------------------------------------------------------
// SR

SrResult sr_precondition(const Eigen::VectorXcd& g, const Eigen::MatrixXcd& s, double delta) {
  if (!(delta > 0.0)) throw ValidationError("sr_precondition: delta must be > 0");
  SrResult out;
  Eigen::MatrixXcd a = s;
  a.diagonal().array() += delta;
  Eigen::LDLT<Eigen::MatrixXcd> ldlt(a);
  if (ldlt.info() == Eigen::Success) {
    out.x = ldlt.solve(g);
    if (ldlt.info() == Eigen::Success && out.x.allFinite()) return out;
  }
  out.x = g / delta;
  out.fallback = true;
  return out;
}

SrResult sr_precondition(const Eigen::VectorXcd& g, const Eigen::MatrixXcd& o, const Eigen::VectorXd& weights,
                         double delta) {
  SideData side;
  side.O = o;
  side.weight = weights;
  return sr_precondition(g, quantum_geometric_tensor(side), delta);
}

// ---------------------------------------------------------------------------------------------
// Steps

struct VarianceOptimizer::Sides {
  SideData right;
  std::optional<SideData> left;  // independent duals only
  std::optional<Estimate> eps;   // empty on overlap collapse
  double acceptance = 1.0;
};

VarianceOptimizer::VarianceOptimizer(Hamiltonian ham, OptimizerConfig opt, EstimatorConfig est)
    : ham_(std::move(ham)), opt_(std::move(opt)), est_(std::move(est)) {
  opt_.validate();
  est_.validate();
  if (est_.mode == EstimatorMode::full_summation) full_ = Ensemble::full(ham_.num_sites());
}

VarianceOptimizer::Sides VarianceOptimizer::evaluate(TrainState& state, bool need_left) const {
  const auto pair = state.pair();
  check_dual_mode(pair.mode(), ham_.params());
  const bool independent = pair.mode() == DualMode::independent;
  Sides out;
  Ensemble ens_r, ens_l;
  const Ensemble* er = nullptr;
  const Ensemble* el = nullptr;
  if (full_) {
    er = el = &*full_;
  } else {
    SamplerConfig cfg = est_.sampler;
    cfg.seed = step_seed(stream_base(state.seed, opt_, est_), state.step, 0);
    if (!state.chains_right.empty()) cfg.n_burnin = est_.continued_burnin;
    const auto batch = run_chains(pair, cfg, state.chains_right);
    state.chains_right = batch.final_configs;
    ens_r = Ensemble::from_batch(batch, est_.blocks_per_chain);
    er = &ens_r;
    out.acceptance = batch.acceptance_rate;
    if (independent && need_left) {
      SamplerConfig cl = est_.sampler;
      cl.distribution = Distribution::born_left;
      cl.seed = step_seed(stream_base(state.seed, opt_, est_), state.step, 1);
      if (!state.chains_left.empty()) cl.n_burnin = est_.continued_burnin;
      const auto bl = run_chains(pair, cl, state.chains_left);
      state.chains_left = bl.final_configs;
      ens_l = Ensemble::from_batch(bl, est_.blocks_per_chain);
      out.acceptance = 0.5 * (out.acceptance + bl.acceptance_rate);
    }
    el = &ens_l;
  }

  out.right = evaluate_side(pair.right(), ham_, false, *er, true);
  std::vector<cplx> ld(er->size());
  if (independent) {
    for (std::size_t s = 0; s < ld.size(); ++s) ld[s] = pair.left().log_psi(er->configs[s]);
  } else {
    for (std::size_t s = 0; s < ld.size(); ++s) ld[s] = std::conj(out.right.log_psi(static_cast<Eigen::Index>(s)));
  }
  try {
    out.eps = biorthogonal_energy(out.right, ld, er->exact);
  } catch (const OverlapCollapseError&) {
    out.eps.reset();
  }
  if (independent && need_left) out.left = evaluate_side(pair.left(), ham_, true, *el, true);
  return out;
}

std::vector<cplx> VarianceOptimizer::direction(const Sides& sides,
                                               const Eigen::VectorXcd& g_right, const Eigen::VectorXcd& g_left,
                                               bool& fallback) const {
  fallback = false;
  Eigen::VectorXcd x_right, x_left;
  if (opt_.update_rule == UpdateRule::sr) {
    const auto a = sr_precondition(g_right, quantum_geometric_tensor(sides.right), opt_.sr_shift);
    x_right = a.x;
    fallback = a.fallback;
    if (sides.left) {
      const auto b = sr_precondition(g_left, quantum_geometric_tensor(*sides.left), opt_.sr_shift);
      x_left = b.x;
      fallback = fallback || b.fallback;
    }
  } else {
    x_right = g_right;
    if (sides.left) x_left = g_left;
  }
  std::vector<cplx> dir(x_right.data(), x_right.data() + x_right.size());
  if (sides.left) dir.insert(dir.end(), x_left.data(), x_left.data() + x_left.size());

  if (opt_.max_grad_norm) {
    double norm = 0.0;
    for (auto z : dir) norm += std::norm(z);
    norm = std::sqrt(norm);
    if (norm > *opt_.max_grad_norm) {
      const double f = *opt_.max_grad_norm / norm;
      for (auto& z : dir) z *= f;
    }
  }
  return dir;
}

void VarianceOptimizer::apply_update(TrainState& state, const std::vector<cplx>& dir, RunRecord& rec) const {
  const double lr = opt_.learning_rate * state.lr_scale;
  rec.learning_rate = lr;
  auto theta = state.flat_params();
  std::vector<cplx> step(dir.size());
  std::vector<std::vector<double>> new_moments;

  if (opt_.update_rule == UpdateRule::adam) {
    // Complex parameters as pairs of reals; moments stored as [m (2n), v (2n), t].
    const std::size_t n = dir.size();
    std::vector<double> m(2 * n, 0.0), v(2 * n, 0.0);
    double t = 0.0;
    if (state.optimizer_state.size() == 3 && state.optimizer_state[0].size() == 2 * n) {
      m = state.optimizer_state[0];
      v = state.optimizer_state[1];
      t = state.optimizer_state[2].at(0);
    }
    t += 1.0;
    const double b1 = opt_.adam_beta1, b2 = opt_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
    for (std::size_t k = 0; k < n; ++k) {
      const double g[2] = {dir[k].real(), dir[k].imag()};
      double u[2];
      for (int c = 0; c < 2; ++c) {
        double& mk = m[2 * k + c];
        double& vk = v[2 * k + c];
        mk = b1 * mk + (1.0 - b1) * g[c];
        vk = b2 * vk + (1.0 - b2) * g[c] * g[c];
        u[c] = (mk / c1) / (std::sqrt(vk / c2) + opt_.adam_epsilon);
      }
      step[k] = cplx(u[0], u[1]);
    }
    new_moments = {std::move(m), std::move(v), {t}};
  } else {
    step = dir;
  }

  bool ok = all_finite(step);
  if (ok) {
    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= lr * step[k];
    ok = all_finite(theta);
  }
  if (!ok) {
    rec.rejected = true;
    if (state.lr_halved) throw NumericalError("non-finite update after the learning rate was already halved");
    state.lr_halved = true;
    state.lr_scale *= 0.5;
    return;
  }
  state.set_flat_params(theta);
  if (opt_.update_rule == UpdateRule::adam) state.optimizer_state = std::move(new_moments);
}

RunRecord VarianceOptimizer::policy_step(TrainState& state, const EpsPolicy& eps_of, const std::string& phase) const {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.step = state.step;
  rec.phase = phase;
  const bool independent = state.mode == DualMode::independent;
  const auto sides = evaluate(state, true);
  rec.acceptance_rate = sides.acceptance;
  if (sides.eps) rec.epsilon_estimate = *sides.eps;
  rec.eps_frozen = !sides.eps.has_value();

  const cplx eps = eps_of(sides.eps, state);
  rec.epsilon = eps;
  state.eps = eps;
  state.has_eps = true;

  const auto gr = side_gradient(sides.right, eps);
  Eigen::VectorXcd g_right, g_left;
  if (independent) {
    const auto gl = side_gradient(*sides.left, std::conj(eps));
    rec.loss.l_right = gr.loss;
    rec.loss.l_left = gl.loss;
    rec.loss.stderr = std::hypot(gr.loss_stderr, gl.loss_stderr);
    g_right = gr.gradient;
    g_left = gl.gradient;
  } else {
    // Complex-symmetric H: L_L[psi^*] equals L_R[psi] configuration by configuration, so the
    // left side needs no separate pass and the total gradient is twice the right one.
    rec.loss.l_right = rec.loss.l_left = gr.loss;
    rec.loss.stderr = 2.0 * gr.loss_stderr;
    g_right = 2.0 * gr.gradient;
  }
  rec.loss.total = rec.loss.l_right + rec.loss.l_left;
  rec.grad_norm = std::sqrt(g_right.squaredNorm() + (independent ? g_left.squaredNorm() : 0.0));

  if (!all_finite(g_right) || (independent && !all_finite(g_left)) || !std::isfinite(rec.loss.total)) {
    rec.rejected = true;
    rec.learning_rate = opt_.learning_rate * state.lr_scale;
    if (state.lr_halved) throw NumericalError("non-finite gradient after the learning rate was already halved");
    state.lr_halved = true;
    state.lr_scale *= 0.5;
  } else {
    bool fallback = false;
    const auto dir = direction(sides, g_right, g_left, fallback);
    rec.sr_fallback = fallback;
    apply_update(state, dir, rec);
  }
  ++state.step;
  rec.wall_time = seconds_since(t0);
  return rec;
}

RunRecord VarianceOptimizer::self_consistent_step(TrainState& state, int eps_stride) const {
  const long step = state.step;
  return policy_step(
      state,
      [eps_stride, step](const std::optional<Estimate>& est, const TrainState& s) {
        const bool refresh = !s.has_eps || step % eps_stride == 0;
        if (est && refresh) return est->value;
        return s.has_eps ? s.eps : (est ? est->value : cplx{});
      },
      "self_consistent");
}

RunRecord VarianceOptimizer::energy_as_parameter_step(TrainState& state, double eps_learning_rate, bool pin_real,
                                                      double pinned_real) const {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.step = state.step;
  rec.phase = pin_real ? "energy_as_parameter_imag" : "energy_as_parameter";
  const bool independent = state.mode == DualMode::independent;
  const auto sides = evaluate(state, true);
  rec.acceptance_rate = sides.acceptance;
  if (sides.eps) rec.epsilon_estimate = *sides.eps;
  rec.eps_frozen = true;

  cplx eps = state.has_eps ? state.eps : (sides.eps ? sides.eps->value : cplx{});
  if (pin_real) eps.real(pinned_real);
  // dL/d(eps^*) for L = L_R + L_L: (eps - <E_loc>_R) + (eps - conj<E~_loc>_L). The real gradient
  // (dL/dRe, dL/dIm) is 2 dL/d(eps^*) read as a complex number.
  const cplx mean_r = (sides.right.weight.cast<cplx>().array() * sides.right.e_loc.array()).sum();
  cplx d_eps;
  if (independent) {
    const cplx mean_l = (sides.left->weight.cast<cplx>().array() * sides.left->e_loc.array()).sum();
    d_eps = (eps - mean_r) + (eps - std::conj(mean_l));
  } else {
    d_eps = 2.0 * (eps - mean_r);
  }
  cplx step = 2.0 * eps_learning_rate * d_eps;
  if (pin_real) step.real(0.0);
  eps -= step;
  state.eps = eps;
  state.has_eps = true;
  rec.epsilon = eps;

  const auto gr = side_gradient(sides.right, eps);
  Eigen::VectorXcd g_right, g_left;
  if (independent) {
    const auto gl = side_gradient(*sides.left, std::conj(eps));
    rec.loss.l_right = gr.loss;
    rec.loss.l_left = gl.loss;
    rec.loss.stderr = std::hypot(gr.loss_stderr, gl.loss_stderr);
    g_right = gr.gradient;
    g_left = gl.gradient;
  } else {
    rec.loss.l_right = rec.loss.l_left = gr.loss;
    rec.loss.stderr = 2.0 * gr.loss_stderr;
    g_right = 2.0 * gr.gradient;
  }
  rec.loss.total = rec.loss.l_right + rec.loss.l_left;
  rec.grad_norm = std::sqrt(g_right.squaredNorm() + (independent ? g_left.squaredNorm() : 0.0));
  if (!all_finite(g_right) || (independent && !all_finite(g_left)) || !std::isfinite(rec.loss.total)) {
    rec.rejected = true;
    if (state.lr_halved) throw NumericalError("non-finite gradient after the learning rate was already halved");
    state.lr_halved = true;
    state.lr_scale *= 0.5;
  } else {
    bool fallback = false;
    const auto dir = direction(sides, g_right, g_left, fallback);
    rec.sr_fallback = fallback;
    apply_update(state, dir, rec);
  }
  ++state.step;
  rec.wall_time = seconds_since(t0);
  return rec;
}

RunRecord VarianceOptimizer::energy_step(TrainState& state) const {
  if (!ham_.params().is_hermitian()) throw ValidationError("energy minimization needs a Hermitian model");
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.step = state.step;
  rec.phase = "hermitian";
  const bool independent = state.mode == DualMode::independent;
  const auto sides = evaluate(state, true);
  rec.acceptance_rate = sides.acceptance;
  if (sides.eps) rec.epsilon_estimate = *sides.eps;
  const cplx mean_r = (sides.right.weight.cast<cplx>().array() * sides.right.e_loc.array()).sum();
  rec.epsilon = sides.eps ? sides.eps->value : mean_r;
  state.eps = rec.epsilon;
  state.has_eps = true;
  const auto lr = side_gradient(sides.right, rec.epsilon, false);
  rec.loss.l_right = rec.loss.l_left = lr.loss;
  rec.loss.total = 2.0 * lr.loss;

  Eigen::VectorXcd g_right = energy_gradient(sides.right);
  Eigen::VectorXcd g_left;
  if (independent) {
    g_left = energy_gradient(*sides.left);
    rec.loss.l_left = side_gradient(*sides.left, std::conj(rec.epsilon), false).loss;
    rec.loss.total = rec.loss.l_right + rec.loss.l_left;
  }
  rec.grad_norm = std::sqrt(g_right.squaredNorm() + (independent ? g_left.squaredNorm() : 0.0));
  if (!all_finite(g_right) || (independent && !all_finite(g_left))) {
    rec.rejected = true;
    if (state.lr_halved) throw NumericalError("non-finite gradient after the learning rate was already halved");
    state.lr_halved = true;
    state.lr_scale *= 0.5;
  } else {
    bool fallback = false;
    const auto dir = direction(sides, g_right, g_left, fallback);
    rec.sr_fallback = fallback;
    apply_update(state, dir, rec);
  }
  ++state.step;
  rec.wall_time = seconds_since(t0);
  return rec;
}

StateReport VarianceOptimizer::report(const TrainState& state) const {
  const auto pair = state.pair();
  check_dual_mode(pair.mode(), ham_.params());
  StateReport out;
  Ensemble left;
  if (full_) {
    out.right = *full_;
    left = *full_;
  } else {
    SamplerConfig cfg = est_.sampler;
    cfg.seed = step_seed(stream_base(state.seed, opt_, est_) ^ 0x7265706f7274ULL, state.step, 2);
    if (!state.chains_right.empty()) cfg.n_burnin = std::max(cfg.n_burnin, est_.continued_burnin);
    const auto batch = run_chains(pair, cfg, state.chains_right);
    out.right = Ensemble::from_batch(batch, est_.blocks_per_chain);
    out.acceptance_rate = batch.acceptance_rate;
    if (pair.mode() == DualMode::independent) {
      cfg.distribution = Distribution::born_left;
      cfg.seed = step_seed(stream_base(state.seed, opt_, est_) ^ 0x7265706f7274ULL, state.step, 3);
      const auto bl = run_chains(pair, cfg, state.chains_left);
      left = Ensemble::from_batch(bl, est_.blocks_per_chain);
    } else {
      left = out.right;  // |psi~|^2 = |psi|^2
    }
  }
  try {
    out.eps = biorthogonal_energy(pair, ham_, out.right);
  } catch (const OverlapCollapseError&) {
    out.eps.reset();
  }
  out.loss_eps = out.eps ? out.eps->value : state.eps;
  out.loss = variance_loss(pair, ham_, out.loss_eps, out.right, left);
  return out;
}

// ---------------------------------------------------------------------------------------------
// Schedules

namespace {

void emit(std::vector<RunRecord>& out, const RunRecord& r, const TrainState& s, const RecordSink& sink) {
  out.push_back(r);
  if (sink) sink(r, s);
}

cplx anchor_of(const VarianceOptimizer& vo, const ScheduleConfig& sched) {
  return sched.e0_anchor ? *sched.e0_anchor
                         : lower_bound_anchor(vo.hamiltonian().lattice(), vo.hamiltonian().params());
}

}  // namespace

std::vector<RunRecord> run_self_consistent(TrainState& state, const VarianceOptimizer& vo, const ScheduleConfig& sched,
                                           const RecordSink& sink) {
  sched.validate();
  std::vector<RunRecord> out;
  for (int m = 0; m < sched.M; ++m) emit(out, vo.self_consistent_step(state, sched.eps_stride), state, sink);
  return out;
}

std::vector<RunRecord> run_fixed_start(TrainState& state, const VarianceOptimizer& vo, const ScheduleConfig& sched,
                                       const RecordSink& sink) {
  sched.validate();
  const cplx e0 = anchor_of(vo, sched);
  if (!(std::isfinite(e0.real()) && std::isfinite(e0.imag()))) throw ValidationError("E0 anchor is not finite");
  std::vector<RunRecord> out;
  const auto fixed = [e0](const std::optional<Estimate>&, const TrainState&) { return e0; };
  for (int f = 0; f < sched.F; ++f) emit(out, vo.policy_step(state, fixed, "fixed"), state, sink);
  for (int i = 1; i <= sched.T; ++i) {
    const double a = static_cast<double>(sched.T - i) / sched.T;
    const auto mix = [a, e0](const std::optional<Estimate>& est, const TrainState& s) {
      // Collapse: keep interpolating from the last eps used.
      const cplx eps_i = est ? est->value : (s.has_eps ? s.eps : e0);
      return a * e0 + (1.0 - a) * eps_i;
    };
    emit(out, vo.policy_step(state, mix, "transition"), state, sink);
  }
  for (int m = 0; m < sched.M; ++m) emit(out, vo.self_consistent_step(state, sched.eps_stride), state, sink);
  return out;
}

std::vector<RunRecord> run_energy_as_parameter(TrainState& state, const VarianceOptimizer& vo,
                                               const ScheduleConfig& sched, const RecordSink& sink) {
  sched.validate();
  const cplx e0 = anchor_of(vo, sched);
  if (!state.has_eps) {
    state.eps = e0;
    state.has_eps = true;
  }
  const double eta = sched.eps_learning_rate.value_or(vo.optimizer().learning_rate);
  std::vector<RunRecord> out;
  for (int m = 0; m < sched.M; ++m) {
    const bool pin = sched.two_step && m < sched.two_step_steps;
    emit(out, vo.energy_as_parameter_step(state, eta, pin, e0.real()), state, sink);
  }
  return out;
}

std::vector<RunRecord> run_schedule(TrainState& state, const VarianceOptimizer& vo, const ScheduleConfig& sched,
                                    const RecordSink& sink) {
  sched.validate();
  std::vector<RunRecord> out;
  switch (sched.mode) {
    case ScheduleMode::self_consistent:
      while (state.step < sched.M) emit(out, vo.self_consistent_step(state, sched.eps_stride), state, sink);
      break;
    case ScheduleMode::fixed_start: {
      const cplx e0 = anchor_of(vo, sched);
      if (!(std::isfinite(e0.real()) && std::isfinite(e0.imag()))) throw ValidationError("E0 anchor is not finite");
      const long total = static_cast<long>(sched.F) + sched.T + sched.M;
      while (state.step < total) {
        const long s = state.step;
        if (s < sched.F) {
          emit(out, vo.policy_step(state, [e0](const std::optional<Estimate>&, const TrainState&) { return e0; },
                                   "fixed"),
               state, sink);
        } else if (s < sched.F + sched.T) {
          const long i = s - sched.F + 1;
          const double a = static_cast<double>(sched.T - i) / sched.T;
          const auto mix = [a, e0](const std::optional<Estimate>& est, const TrainState& st) {
            const cplx eps_i = est ? est->value : (st.has_eps ? st.eps : e0);
            return a * e0 + (1.0 - a) * eps_i;
          };
          emit(out, vo.policy_step(state, mix, "transition"), state, sink);
        } else {
          emit(out, vo.self_consistent_step(state, sched.eps_stride), state, sink);
        }
      }
      break;
    }
    case ScheduleMode::energy_as_parameter: {
      const cplx e0 = anchor_of(vo, sched);
      if (!state.has_eps) {
        state.eps = e0;
        state.has_eps = true;
      }
      const double eta = sched.eps_learning_rate.value_or(vo.optimizer().learning_rate);
      while (state.step < sched.M) {
        const bool pin = sched.two_step && state.step < sched.two_step_steps;
        emit(out, vo.energy_as_parameter_step(state, eta, pin, e0.real()), state, sink);
      }
      break;
    }
    case ScheduleMode::warm_start:
      throw ValidationError("run_schedule does not handle warm_start; use run_warm_start");
  }
  return out;
}

std::vector<WarmPoint> run_warm_start(const Hamiltonian& base, TrainState initial, const ScheduleConfig& sched,
                                      const OptimizerConfig& opt, const EstimatorConfig& est,
                                      const std::function<void(double, const RunRecord&, const TrainState&)>& sink) {
  sched.validate();
  if (sched.warm_k_grid.empty()) throw ValidationError("warm_k_grid is empty");
  std::vector<WarmPoint> out;
  TrainState state = std::move(initial);
  const int herm_steps = sched.hermitian_steps < 0 ? sched.M : sched.hermitian_steps;
  for (double scale : sched.warm_k_grid) {
    HamiltonianParams p = base.params();
    p.nh_scale = scale;
    const VarianceOptimizer vo(base.with_params(p), opt, est);
    WarmPoint wp;
    wp.nh_scale = scale;
    wp.initial_hash = state.parameter_hash();
    const RecordSink inner = [&](const RunRecord& r, const TrainState& s) {
      if (sink) sink(scale, r, s);
    };
    // eps from the previous point belongs to another Hamiltonian.
    state.has_eps = false;
    if (p.is_hermitian()) {
      for (int m = 0; m < herm_steps; ++m) emit(wp.records, vo.energy_step(state), state, inner);
    } else {
      for (int m = 0; m < sched.M; ++m) emit(wp.records, vo.self_consistent_step(state, sched.eps_stride), state, inner);
    }
    wp.state = state;
    out.push_back(std::move(wp));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Infidelity

namespace {

struct FullEval {
  Eigen::VectorXcd psi;  // amplitudes rescaled by a common factor
  Eigen::MatrixXcd O;
};

FullEval full_eval(const AnsatzParams& p, bool with_o) {
  const int n = p.num_visible;
  const Eigen::Index dim = Eigen::Index{1} << n;
  const auto np = static_cast<Eigen::Index>(p.num_params());
  std::vector<cplx> lp(static_cast<std::size_t>(dim));
  FullEval out;
  if (with_o) out.O.resize(dim, np);
  Eigen::VectorXcd row(np);
  double shift = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < dim; ++i) {
    const auto c = index_to_config(static_cast<std::uint64_t>(i), n);
    lp[static_cast<std::size_t>(i)] = log_psi(p, c);
    shift = std::max(shift, lp[static_cast<std::size_t>(i)].real());
    if (with_o) {
      log_derivatives(p, c, std::span<cplx>(row.data(), static_cast<std::size_t>(np)));
      out.O.row(i) = row.transpose();
    }
  }
  out.psi.resize(dim);
  for (Eigen::Index i = 0; i < dim; ++i) out.psi(i) = std::exp(lp[static_cast<std::size_t>(i)] - shift);
  return out;
}

double infidelity_of(const Eigen::VectorXcd& target, const Eigen::VectorXcd& psi) {
  const double f = std::norm(target.dot(psi)) / (target.squaredNorm() * psi.squaredNorm());
  return std::max(0.0, 1.0 - f);
}

}  // namespace

double infidelity(const Eigen::VectorXcd& target, const Ansatz& psi) {
  const int n = psi.num_sites();
  if (target.size() != (Eigen::Index{1} << n)) throw ValidationError("target vector has the wrong dimension");
  std::vector<cplx> lp(static_cast<std::size_t>(target.size()));
  double shift = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    lp[static_cast<std::size_t>(i)] = psi.log_psi(index_to_config(static_cast<std::uint64_t>(i), n));
    shift = std::max(shift, lp[static_cast<std::size_t>(i)].real());
  }
  Eigen::VectorXcd v(target.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::exp(lp[static_cast<std::size_t>(i)] - shift);
  return infidelity_of(target, v);
}

double infidelity(const Eigen::VectorXcd& target, const Eigen::VectorXcd& state) {
  if (target.size() != state.size()) throw ValidationError("infidelity: dimension mismatch");
  return infidelity_of(target, state);
}

InfidelityFit run_infidelity_fit(const Eigen::VectorXcd& target, const AnsatzParams& init, const OptimizerConfig& opt,
                                 int steps, double tolerance) {
  opt.validate();
  init.validate();
  if (target.size() != (Eigen::Index{1} << init.num_visible)) {
    throw ValidationError("target vector has the wrong dimension");
  }
  full_summation_enumerate(init.num_visible);
  InfidelityFit fit;
  fit.params = init;
  AnsatzParams p = init;
  double lr_scale = 1.0;
  bool halved = false;
  std::vector<double> m, v;
  double t = 0.0;
  const double tn = target.squaredNorm();

  for (int it = 0; it <= steps; ++it) {
    const auto ev = full_eval(p, it < steps);
    const double inf = infidelity_of(target, ev.psi);
    fit.history.push_back(inf);
    if (inf < fit.infidelity || it == 0) {
      fit.infidelity = inf;
      fit.params = p;
    }
    fit.steps = it;
    if (inf <= tolerance) {
      fit.converged = true;
      break;
    }
    if (it == steps) break;

    // dI/dtheta^* = -F (conj<O>_phi - <O^*>_psi): <O>_phi weighted by phi^* psi, <O^*>_psi by |psi|^2.
    const double pn = ev.psi.squaredNorm();
    const cplx a = target.dot(ev.psi);
    const double f = std::norm(a) / (tn * pn);
    const Eigen::VectorXcd wphi = target.conjugate().cwiseProduct(ev.psi) / a;
    const Eigen::VectorXd wpsi = ev.psi.cwiseAbs2() / pn;
    const Eigen::VectorXcd o_phi = ev.O.transpose() * wphi;
    const Eigen::VectorXcd o_psi = ev.O.adjoint() * wpsi.cast<cplx>();
    Eigen::VectorXcd g = -f * (o_phi.conjugate() - o_psi);

    Eigen::VectorXcd x = g;
    if (opt.update_rule == UpdateRule::sr) x = sr_precondition(g, ev.O, wpsi, opt.sr_shift).x;
    if (opt.max_grad_norm && x.norm() > *opt.max_grad_norm) x *= *opt.max_grad_norm / x.norm();
    if (opt.update_rule == UpdateRule::adam) {
      const auto n = static_cast<std::size_t>(x.size());
      if (m.empty()) m.assign(2 * n, 0.0), v.assign(2 * n, 0.0);
      t += 1.0;
      const double c1 = 1.0 - std::pow(opt.adam_beta1, t), c2 = 1.0 - std::pow(opt.adam_beta2, t);
      for (std::size_t k = 0; k < n; ++k) {
        const double gg[2] = {x(static_cast<Eigen::Index>(k)).real(), x(static_cast<Eigen::Index>(k)).imag()};
        double u[2];
        for (int c = 0; c < 2; ++c) {
          m[2 * k + c] = opt.adam_beta1 * m[2 * k + c] + (1 - opt.adam_beta1) * gg[c];
          v[2 * k + c] = opt.adam_beta2 * v[2 * k + c] + (1 - opt.adam_beta2) * gg[c] * gg[c];
          u[c] = (m[2 * k + c] / c1) / (std::sqrt(v[2 * k + c] / c2) + opt.adam_epsilon);
        }
        x(static_cast<Eigen::Index>(k)) = cplx(u[0], u[1]);
      }
    }
    auto flat = p.flatten();
    for (std::size_t k = 0; k < flat.size(); ++k) flat[k] -= opt.learning_rate * lr_scale * x(static_cast<Eigen::Index>(k));
    if (!all_finite(flat)) {
      if (halved) throw NumericalError("run_infidelity_fit: non-finite update after halving the learning rate");
      halved = true;
      lr_scale *= 0.5;
      continue;
    }
    p = AnsatzParams::unflatten(p.num_visible, p.alpha, flat);
  }
  return fit;
}

}  // namespace nhvmc

#include "nhvmc/ansatz.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "nhvmc/kernels.hpp"

namespace nhvmc {

std::size_t AnsatzParams::num_params() const {
  const std::size_t n = num_visible;
  const std::size_t m = static_cast<std::size_t>(num_hidden());
  return n + m + m * n;
}

std::vector<cplx> AnsatzParams::flatten() const {
  std::vector<cplx> flat;
  flat.reserve(num_params());
  flat.insert(flat.end(), a.begin(), a.end());
  flat.insert(flat.end(), b.begin(), b.end());
  flat.insert(flat.end(), w.begin(), w.end());
  return flat;
}

AnsatzParams AnsatzParams::unflatten(int num_visible, int alpha, std::span<const cplx> flat) {
  AnsatzParams p = zero_params(num_visible, alpha);
  if (flat.size() != p.num_params()) {
    throw ValidationError("flat parameter vector has " + std::to_string(flat.size()) + " entries, expected " +
                          std::to_string(p.num_params()));
  }
  auto it = flat.begin();
  std::copy(it, it + p.a.size(), p.a.begin());
  it += static_cast<std::ptrdiff_t>(p.a.size());
  std::copy(it, it + p.b.size(), p.b.begin());
  it += static_cast<std::ptrdiff_t>(p.b.size());
  std::copy(it, flat.end(), p.w.begin());
  return p;
}

AnsatzParams AnsatzParams::conjugated() const {
  AnsatzParams c = *this;
  for (auto* v : {&c.a, &c.b, &c.w}) {
    for (auto& x : *v) x = std::conj(x);
  }
  return c;
}

void AnsatzParams::validate() const {
  if (num_visible < 1) throw ValidationError("RBM needs at least one visible unit");
  if (alpha < 1) throw ValidationError("RBM hidden-unit density alpha must be >= 1");
  const std::size_t m = static_cast<std::size_t>(num_hidden());
  if (a.size() != static_cast<std::size_t>(num_visible) || b.size() != m || w.size() != m * num_visible) {
    throw ValidationError("RBM parameter dimensions are inconsistent");
  }
  for (const auto* v : {&a, &b, &w}) {
    for (const cplx& x : *v) {
      if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) throw ValidationError("RBM parameters must be finite");
    }
  }
}

AnsatzParams zero_params(int num_visible, int alpha) {
  AnsatzParams p;
  p.num_visible = num_visible;
  p.alpha = alpha;
  p.a.assign(num_visible, cplx{});
  p.b.assign(static_cast<std::size_t>(alpha) * num_visible, cplx{});
  p.w.assign(static_cast<std::size_t>(alpha) * num_visible * num_visible, cplx{});
  return p;
}

AnsatzParams init_params(int num_visible, int alpha, std::uint64_t seed, double scale) {
  if (!(scale > 0.0)) throw ValidationError("initialization scale must be positive");
  AnsatzParams p = zero_params(num_visible, alpha);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, scale);
  for (auto* v : {&p.a, &p.b, &p.w}) {
    for (auto& x : *v) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      x = {re, im};
    }
  }
  return p;
}

cplx log_2cosh(cplx z) {
  const double s = z.real() >= 0.0 ? 1.0 : -1.0;
  return s * z + std::log(1.0 + std::exp(-2.0 * s * z));
}

namespace {

void theta(const AnsatzParams& p, SpinView config, std::vector<cplx>& out) {
  const int n = p.num_visible;
  out.assign(p.b.begin(), p.b.end());
  for (int j = 0; j < p.num_hidden(); ++j) {
    cplx acc = out[j];
    for (int i = 0; i < n; ++i) acc += p.weight(j, i) * static_cast<double>(config[i]);
    out[j] = acc;
  }
}

void check_dims(const AnsatzParams& p, SpinView config) {
  if (static_cast<int>(config.size()) != p.num_visible) {
    throw ValidationError("configuration length " + std::to_string(config.size()) + " does not match RBM with " +
                          std::to_string(p.num_visible) + " visible units");
  }
}

}  // namespace

cplx log_psi(const AnsatzParams& params, SpinView config) {
  check_dims(params, config);
  std::vector<cplx> th;
  theta(params, config, th);
  cplx acc{};
  for (int i = 0; i < params.num_visible; ++i) acc += params.a[i] * static_cast<double>(config[i]);
  for (const cplx& t : th) acc += log_2cosh(t);
  return acc;
}

void log_derivatives(const AnsatzParams& params, SpinView config, std::span<cplx> out) {
  check_dims(params, config);
  if (out.size() != params.num_params()) throw ValidationError("derivative buffer has the wrong length");
  const int n = params.num_visible;
  const int m = params.num_hidden();
  std::vector<cplx> th;
  theta(params, config, th);
  for (int i = 0; i < n; ++i) out[i] = static_cast<double>(config[i]);
  for (int j = 0; j < m; ++j) {
    const cplx t = std::tanh(th[j]);
    out[n + j] = t;
    for (int i = 0; i < n; ++i) out[n + m + static_cast<std::size_t>(j) * n + i] = t * static_cast<double>(config[i]);
  }
}

void Walker::flip_ratios(std::span<cplx> out) const {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = flip_ratio(static_cast<int>(i));
}

// ---------------------------------------------------------------------------
// Rbm

Rbm::Rbm(AnsatzParams params) : params_(std::move(params)) {
  params_.validate();
  const int n = params_.num_visible;
  const int m = params_.num_hidden();
  const std::size_t sz = static_cast<std::size_t>(n) * m;
  w_re_.resize(sz);
  w_im_.resize(sz);
  p_re_.resize(sz);
  p_im_.resize(sz);
  q_re_.resize(sz);
  q_im_.resize(sz);
  product_site_.assign(n, 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const cplx wji = params_.weight(j, i);
      const std::size_t c = static_cast<std::size_t>(i) * m + j;
      w_re_[c] = wji.real();
      w_im_[c] = wji.imag();
      const cplx ep = std::exp(2.0 * wji);
      const cplx eq = std::exp(-2.0 * wji);
      if (!std::isfinite(std::abs(ep)) || !std::isfinite(std::abs(eq)) || std::abs(ep) == 0.0 || std::abs(eq) == 0.0) {
        product_site_[i] = 0;
      }
      p_re_[c] = ep.real();
      p_im_[c] = ep.imag();
      q_re_[c] = eq.real();
      q_im_[c] = eq.imag();
    }
  }
}

class RbmWalker final : public Walker {
 public:
  RbmWalker(const Rbm& rbm, SpinView config) : rbm_(&rbm), spins_(config.begin(), config.end()) {
    const AnsatzParams& p = rbm.params_;
    if (static_cast<int>(spins_.size()) != p.num_visible) {
      throw ValidationError("configuration length does not match RBM visible units");
    }
    const int m = p.num_hidden();
    th_re_.resize(m);
    th_im_.resize(m);
    for (int j = 0; j < m; ++j) {
      th_re_[j] = p.b[j].real();
      th_im_[j] = p.b[j].imag();
    }
    const auto& k = kernels::active();
    for (int i = 0; i < p.num_visible; ++i) {
      const std::size_t c = static_cast<std::size_t>(i) * m;
      k.axpy(static_cast<double>(spins_[i]), rbm.w_re_.data() + c, rbm.w_im_.data() + c, th_re_.data(), th_im_.data(),
             m);
    }
    refresh_hidden();
    refresh_log_psi();
  }

  SpinView spins() const override { return spins_; }
  cplx log_psi() const override { return log_psi_; }

  cplx flip_ratio(int site) const override {
    const AnsatzParams& p = rbm_->params_;
    const int m = p.num_hidden();
    const double s = spins_[site];
    if (rbm_->product_site_[site]) {
      const std::size_t c = static_cast<std::size_t>(site) * m;
      const cplx prod = kernels::active().flip_factor(cache(), rbm_->p_re_.data() + c, rbm_->p_im_.data() + c,
                                                      rbm_->q_re_.data() + c, rbm_->q_im_.data() + c, s, nullptr,
                                                      nullptr, m);
      return std::exp(-2.0 * s * p.a[site]) * prod;
    }
    cplx delta = -2.0 * s * p.a[site];
    for (int j = 0; j < m; ++j) {
      const cplx th(th_re_[j], th_im_[j]);
      delta += log_2cosh(th - 2.0 * s * p.weight(j, site)) - log_2cosh(th);
    }
    return std::exp(delta);
  }

  void flip(int site) override {
    const int m = rbm_->params_.num_hidden();
    const std::size_t c = static_cast<std::size_t>(site) * m;
    const cplx ratio = flip_ratio(site);
    kernels::active().axpy(-2.0 * spins_[site], rbm_->w_re_.data() + c, rbm_->w_im_.data() + c, th_re_.data(),
                           th_im_.data(), m);
    spins_[site] = static_cast<Spin>(-spins_[site]);
    refresh_hidden();
    // log psi follows the ratio and is recomputed from scratch periodically.
    const cplx next = log_psi_ + std::log(ratio);
    if (++since_refresh_ >= kRefreshInterval || !std::isfinite(next.real()) || !std::isfinite(next.imag())) {
      refresh_log_psi();
    } else {
      log_psi_ = next;
    }
  }

  void log_derivatives(std::span<cplx> out) const override {
    const AnsatzParams& p = rbm_->params_;
    const int n = p.num_visible;
    const int m = p.num_hidden();
    if (out.size() != p.num_params()) throw ValidationError("derivative buffer has the wrong length");
    for (int i = 0; i < n; ++i) out[i] = static_cast<double>(spins_[i]);
    for (int j = 0; j < m; ++j) {
      const cplx t = tanh_theta(j);
      out[n + j] = t;
      cplx* row = out.data() + n + m + static_cast<std::size_t>(j) * n;
      for (int i = 0; i < n; ++i) row[i] = spins_[i] > 0 ? t : -t;
    }
  }

  void flip_derivative_sum(std::span<const cplx> coeff, std::span<cplx> out) const override {
    const AnsatzParams& p = rbm_->params_;
    const int n = p.num_visible;
    const int m = p.num_hidden();
    if (out.size() != p.num_params() || coeff.size() != static_cast<std::size_t>(n)) {
      throw ValidationError("flip_derivative_sum buffer sizes do not match the RBM");
    }
    // tp[i*m + j] = tanh(theta_j) after flipping spin i.
    tp_re_.resize(static_cast<std::size_t>(n) * m);
    tp_im_.resize(static_cast<std::size_t>(n) * m);
    std::vector<cplx> t(m);
    for (int j = 0; j < m; ++j) t[j] = tanh_theta(j);
    std::vector<cplx> u(m, cplx{});
    const auto& k = kernels::active();
    for (int i = 0; i < n; ++i) {
      const double s = spins_[i];
      const std::size_t c = static_cast<std::size_t>(i) * m;
      if (rbm_->product_site_[i]) {
        k.flip_factor(cache(), rbm_->p_re_.data() + c, rbm_->p_im_.data() + c, rbm_->q_re_.data() + c,
                      rbm_->q_im_.data() + c, s, tp_re_.data() + c, tp_im_.data() + c, m);
      } else {
        for (int j = 0; j < m; ++j) {
          const cplx tn = std::tanh(cplx(th_re_[j], th_im_[j]) - 2.0 * s * p.weight(j, i));
          tp_re_[c + j] = tn.real();
          tp_im_[c + j] = tn.imag();
        }
      }
      const cplx ci = coeff[i];
      if (ci == cplx{}) continue;
      for (int j = 0; j < m; ++j) u[j] += ci * (cplx(tp_re_[c + j], tp_im_[c + j]) - t[j]);
    }
    for (int i = 0; i < n; ++i) out[i] = -2.0 * static_cast<double>(spins_[i]) * coeff[i];
    for (int j = 0; j < m; ++j) out[n + j] = u[j];
    for (int j = 0; j < m; ++j) {
      cplx* row = out.data() + n + m + static_cast<std::size_t>(j) * n;
      for (int l = 0; l < n; ++l) {
        const double sl = spins_[l];
        const std::size_t c = static_cast<std::size_t>(l) * m + j;
        row[l] = sl * (u[j] - 2.0 * coeff[l] * cplx(tp_re_[c], tp_im_[c]));
      }
    }
  }

  std::unique_ptr<Walker> clone() const override { return std::make_unique<RbmWalker>(*this); }

 private:
  kernels::HiddenCache cache() const { return {u_re_.data(), u_im_.data(), w_re_.data(), w_im_.data(), g_.data()}; }

  // tanh(theta) = g (1 - u) / (1 + u) = g (1 - u) w
  cplx tanh_theta(int j) const { return g_[j] * (1.0 - cplx(u_re_[j], u_im_[j])) * cplx(w_re_[j], w_im_[j]); }

  void refresh_hidden() {
    const int m = rbm_->params_.num_hidden();
    u_re_.resize(m);
    u_im_.resize(m);
    w_re_.resize(m);
    w_im_.resize(m);
    g_.resize(m);
    for (int j = 0; j < m; ++j) {
      const double g = th_re_[j] >= 0.0 ? 1.0 : -1.0;
      const cplx u = std::exp(-2.0 * g * cplx(th_re_[j], th_im_[j]));
      const cplx w = 1.0 / (1.0 + u);
      g_[j] = g;
      u_re_[j] = u.real();
      u_im_[j] = u.imag();
      w_re_[j] = w.real();
      w_im_[j] = w.imag();
    }
  }

  void refresh_log_psi() {
    const AnsatzParams& p = rbm_->params_;
    cplx acc{};
    for (int i = 0; i < p.num_visible; ++i) acc += p.a[i] * static_cast<double>(spins_[i]);
    for (int j = 0; j < p.num_hidden(); ++j) acc += log_2cosh(cplx(th_re_[j], th_im_[j]));
    log_psi_ = acc;
    since_refresh_ = 0;
  }

  static constexpr int kRefreshInterval = 32;

  const Rbm* rbm_;
  SpinConfig spins_;
  std::vector<double> th_re_, th_im_;
  std::vector<double> u_re_, u_im_, w_re_, w_im_, g_;
  mutable std::vector<double> tp_re_, tp_im_;
  cplx log_psi_{};
  int since_refresh_ = 0;
};

cplx Rbm::log_psi(SpinView config) const { return nhvmc::log_psi(params_, config); }

void Rbm::log_derivatives(SpinView config, std::span<cplx> out) const {
  nhvmc::log_derivatives(params_, config, out);
}

std::unique_ptr<Walker> Rbm::walker(SpinView config) const { return std::make_unique<RbmWalker>(*this, config); }

// ---------------------------------------------------------------------------
// ExactVectorAnsatz

namespace {

class ExactWalker final : public Walker {
 public:
  ExactWalker(const ExactVectorAnsatz& owner, SpinView config)
      : owner_(&owner), spins_(config.begin(), config.end()), index_(config_to_index(config)) {
    log_psi_ = owner.log_psi(spins_);
  }

  SpinView spins() const override { return spins_; }
  cplx log_psi() const override { return log_psi_; }
  cplx flip_ratio(int site) const override {
    const cplx num = owner_->amplitudes()[index_ ^ (std::uint64_t{1} << site)];
    return num / owner_->amplitudes()[index_];
  }
  void flip(int site) override {
    spins_[site] = static_cast<Spin>(-spins_[site]);
    index_ ^= std::uint64_t{1} << site;
    log_psi_ = owner_->log_psi(spins_);
  }
  void log_derivatives(std::span<cplx>) const override {
    throw ValidationError("exact-vector ansatz has no parameters to differentiate");
  }
  void flip_derivative_sum(std::span<const cplx>, std::span<cplx>) const override {
    throw ValidationError("exact-vector ansatz has no parameters to differentiate");
  }
  std::unique_ptr<Walker> clone() const override { return std::make_unique<ExactWalker>(*this); }

 private:
  const ExactVectorAnsatz* owner_;
  SpinConfig spins_;
  std::uint64_t index_;
  cplx log_psi_{};
};

class ConjugateWalker final : public Walker {
 public:
  explicit ConjugateWalker(std::unique_ptr<Walker> inner) : inner_(std::move(inner)) {}

  SpinView spins() const override { return inner_->spins(); }
  cplx log_psi() const override { return std::conj(inner_->log_psi()); }
  cplx flip_ratio(int site) const override { return std::conj(inner_->flip_ratio(site)); }
  void flip_ratios(std::span<cplx> out) const override {
    inner_->flip_ratios(out);
    for (auto& x : out) x = std::conj(x);
  }
  void flip(int site) override { inner_->flip(site); }
  void log_derivatives(std::span<cplx> out) const override {
    inner_->log_derivatives(out);
    for (auto& x : out) x = std::conj(x);
  }
  void flip_derivative_sum(std::span<const cplx> coeff, std::span<cplx> out) const override {
    std::vector<cplx> cc(coeff.begin(), coeff.end());
    for (auto& x : cc) x = std::conj(x);
    inner_->flip_derivative_sum(cc, out);
    for (auto& x : out) x = std::conj(x);
  }
  std::unique_ptr<Walker> clone() const override { return std::make_unique<ConjugateWalker>(inner_->clone()); }

 private:
  std::unique_ptr<Walker> inner_;
};

}  // namespace

ExactVectorAnsatz::ExactVectorAnsatz(int num_sites, std::vector<cplx> amplitudes)
    : n_(num_sites), amps_(std::move(amplitudes)) {
  if (num_sites < 1 || num_sites > 30) throw ValidationError("exact-vector ansatz supports 1..30 sites");
  if (amps_.size() != (std::size_t{1} << num_sites)) {
    throw ValidationError("exact-vector ansatz needs 2^N amplitudes");
  }
  for (const cplx& x : amps_) {
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) throw ValidationError("amplitudes must be finite");
    if (x == cplx{}) ++zeros_;
  }
}

cplx ExactVectorAnsatz::log_psi(SpinView config) const {
  if (static_cast<int>(config.size()) != n_) throw ValidationError("configuration length mismatch");
  const cplx amp = amps_[config_to_index(config)];
  if (amp == cplx{}) throw NumericalError("exact-vector ansatz has zero amplitude at the queried configuration");
  return std::log(amp);
}

void ExactVectorAnsatz::log_derivatives(SpinView, std::span<cplx>) const {
  throw ValidationError("exact-vector ansatz has no parameters to differentiate");
}

std::unique_ptr<Walker> ExactVectorAnsatz::walker(SpinView config) const {
  return std::make_unique<ExactWalker>(*this, config);
}

std::shared_ptr<const ExactVectorAnsatz> exact_vector_ansatz(int num_sites, std::vector<cplx> amplitudes) {
  return std::make_shared<const ExactVectorAnsatz>(num_sites, std::move(amplitudes));
}

void ConjugateAnsatz::log_derivatives(SpinView config, std::span<cplx> out) const {
  inner_->log_derivatives(config, out);
  for (auto& x : out) x = std::conj(x);
}

std::unique_ptr<Walker> ConjugateAnsatz::walker(SpinView config) const {
  return std::make_unique<ConjugateWalker>(inner_->walker(config));
}

std::vector<cplx> ConjugateAnsatz::parameters() const {
  auto p = inner_->parameters();
  for (auto& x : p) x = std::conj(x);
  return p;
}

// ---------------------------------------------------------------------------
// Dual states

std::string to_string(DualMode mode) { return mode == DualMode::pt_conjugate ? "pt_conjugate" : "independent"; }

DualMode dual_mode_from_string(const std::string& name) {
  if (name == "pt_conjugate") return DualMode::pt_conjugate;
  if (name == "independent") return DualMode::independent;
  throw ValidationError("unknown dual mode '" + name + "' (expected pt_conjugate or independent)");
}

void check_dual_mode(DualMode mode, const HamiltonianParams& params) {
  if (mode == DualMode::pt_conjugate && !params.is_pt_symmetric()) {
    throw ValidationError("pt_conjugate dual mode requires a PT-symmetric Hamiltonian (h_z = 0)");
  }
}

StatePair StatePair::pt_conjugate(std::shared_ptr<const Ansatz> right) {
  auto left = std::make_shared<const ConjugateAnsatz>(right);
  return StatePair(DualMode::pt_conjugate, std::move(right), std::move(left));
}

StatePair StatePair::independent(std::shared_ptr<const Ansatz> right, std::shared_ptr<const Ansatz> left) {
  if (right->num_sites() != left->num_sites()) throw ValidationError("right and left states differ in size");
  return StatePair(DualMode::independent, std::move(right), std::move(left));
}

cplx dual_log_psi(const StatePair& pair, SpinView config) {
  if (pair.mode() == DualMode::pt_conjugate) return std::conj(pair.right().log_psi(config));
  return pair.left().log_psi(config);
}

// ---------------------------------------------------------------------------
// Snapshots

namespace {

void write_cplx_block(std::ostream& os, const std::vector<cplx>& v) {
  for (const cplx& x : v) os << x.real() << ' ' << x.imag() << '\n';
}

std::string expect_key(std::istream& is, const std::string& key) {
  std::string k;
  if (!(is >> k) || k != key) throw ValidationError("snapshot: expected '" + key + "', found '" + k + "'");
  return k;
}

}  // namespace

void write_snapshot(std::ostream& os, const Snapshot& snap) {
  const auto old_prec = os.precision(17);
  os << "nhvmc-snapshot 1\n";
  os << "num_visible " << snap.num_visible << '\n';
  os << "alpha " << snap.alpha << '\n';
  os << "dual_mode " << to_string(snap.mode) << '\n';
  os << "seed " << snap.seed << '\n';
  os << "step " << snap.step << '\n';
  if (snap.epsilon) {
    os << "epsilon " << snap.epsilon->real() << ' ' << snap.epsilon->imag() << '\n';
  } else {
    os << "epsilon none\n";
  }
  os << "param_sets " << snap.params.size() << '\n';
  for (const auto& p : snap.params) {
    const auto flat = p.flatten();
    os << "params " << flat.size() << '\n';
    write_cplx_block(os, flat);
  }
  os << "chains " << snap.chain_configs.size() << '\n';
  for (const auto& c : snap.chain_configs) {
    for (std::size_t i = 0; i < c.size(); ++i) os << (c[i] > 0 ? '+' : '-');
    os << '\n';
  }
  os << "optimizer_blocks " << snap.optimizer_state.size() << '\n';
  for (const auto& blk : snap.optimizer_state) {
    os << blk.size() << '\n';
    for (double x : blk) os << x << '\n';
  }
  os.precision(old_prec);
}

Snapshot read_snapshot(std::istream& is) {
  Snapshot s;
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "nhvmc-snapshot" || version != 1) {
    throw ValidationError("not an nhvmc snapshot (bad header)");
  }
  expect_key(is, "num_visible");
  is >> s.num_visible;
  expect_key(is, "alpha");
  is >> s.alpha;
  expect_key(is, "dual_mode");
  std::string mode;
  is >> mode;
  s.mode = dual_mode_from_string(mode);
  expect_key(is, "seed");
  is >> s.seed;
  expect_key(is, "step");
  is >> s.step;
  expect_key(is, "epsilon");
  std::string eps_re;
  is >> eps_re;
  if (eps_re != "none") {
    double im = 0.0;
    is >> im;
    s.epsilon = cplx(std::stod(eps_re), im);
  }
  expect_key(is, "param_sets");
  std::size_t nsets = 0;
  is >> nsets;
  for (std::size_t k = 0; k < nsets; ++k) {
    expect_key(is, "params");
    std::size_t count = 0;
    is >> count;
    std::vector<cplx> flat(count);
    for (auto& x : flat) {
      double re = 0.0, im = 0.0;
      is >> re >> im;
      x = {re, im};
    }
    s.params.push_back(AnsatzParams::unflatten(s.num_visible, s.alpha, flat));
  }
  expect_key(is, "chains");
  std::size_t nchains = 0;
  is >> nchains;
  for (std::size_t c = 0; c < nchains; ++c) {
    std::string row;
    is >> row;
    SpinConfig cfg;
    for (char ch : row) cfg.push_back(ch == '+' ? Spin{1} : Spin{-1});
    s.chain_configs.push_back(std::move(cfg));
  }
  expect_key(is, "optimizer_blocks");
  std::size_t nblocks = 0;
  is >> nblocks;
  for (std::size_t b = 0; b < nblocks; ++b) {
    std::size_t len = 0;
    is >> len;
    std::vector<double> blk(len);
    for (auto& x : blk) is >> x;
    s.optimizer_state.push_back(std::move(blk));
  }
  if (!is) throw ValidationError("snapshot is truncated or malformed");
  return s;
}

void save_snapshot(const std::string& path, const Snapshot& snap) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write snapshot '" + path + "'");
  write_snapshot(os, snap);
}

Snapshot load_snapshot(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot read snapshot '" + path + "'");
  return read_snapshot(is);
}

}  // namespace nhvmc

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nhvmc/hamiltonian.hpp"
#include "nhvmc/types.hpp"

namespace nhvmc {

/// Parameters of a complex RBM with N visible and alpha*N hidden units.
/// Flat ordering is (a, b, W row-major), W having shape (alpha*N) x N.
struct AnsatzParams {
  int num_visible = 0;
  int alpha = 1;
  std::vector<cplx> a;
  std::vector<cplx> b;
  std::vector<cplx> w;

  int num_hidden() const { return alpha * num_visible; }
  std::size_t num_params() const;
  cplx& weight(int hidden, int visible) { return w[static_cast<std::size_t>(hidden) * num_visible + visible]; }
  cplx weight(int hidden, int visible) const { return w[static_cast<std::size_t>(hidden) * num_visible + visible]; }

  std::vector<cplx> flatten() const;
  static AnsatzParams unflatten(int num_visible, int alpha, std::span<const cplx> flat);
  AnsatzParams conjugated() const;
  void validate() const;
};

AnsatzParams zero_params(int num_visible, int alpha = 1);

/// i.i.d. complex Gaussian entries, standard deviation `scale` per real component.
AnsatzParams init_params(int num_visible, int alpha, std::uint64_t seed, double scale = 0.01);

/// log(2 cosh z), evaluated as s z + log(1 + exp(-2 s z)) with s the sign of Re z.
cplx log_2cosh(cplx z);

/// log psi(s) = a.s + sum_j log 2cosh((W s + b)_j).
cplx log_psi(const AnsatzParams& params, SpinView config);

/// O_k = d log psi / d theta_k in flat order: s_i, tanh(theta_j), s_i tanh(theta_j).
void log_derivatives(const AnsatzParams& params, SpinView config, std::span<cplx> out);

/// Cached evaluation of an ansatz at one configuration, supporting cheap single-spin flips.
class Walker {
 public:
  virtual ~Walker() = default;

  virtual SpinView spins() const = 0;
  /// Imaginary part defined modulo 2 pi (walkers may track it incrementally).
  virtual cplx log_psi() const = 0;
  /// psi(s with spin i flipped) / psi(s).
  virtual cplx flip_ratio(int site) const = 0;
  virtual void flip_ratios(std::span<cplx> out) const;
  virtual void flip(int site) = 0;
  virtual void log_derivatives(std::span<cplx> out) const = 0;
  /// out_k = sum_i coeff_i (O_k(s^i) - O_k(s)), s^i being s with spin i flipped.
  virtual void flip_derivative_sum(std::span<const cplx> coeff, std::span<cplx> out) const = 0;
  virtual std::unique_ptr<Walker> clone() const = 0;
};

/// A wavefunction in the sz basis. Implementations are immutable.
class Ansatz {
 public:
  virtual ~Ansatz() = default;

  virtual int num_sites() const = 0;
  virtual std::size_t num_params() const = 0;
  virtual bool has_derivatives() const = 0;
  virtual cplx log_psi(SpinView config) const = 0;
  virtual void log_derivatives(SpinView config, std::span<cplx> out) const = 0;
  virtual std::unique_ptr<Walker> walker(SpinView config) const = 0;
  /// Flat parameter vector (empty when the ansatz has none).
  virtual std::vector<cplx> parameters() const = 0;
};

/// Complex restricted Boltzmann machine.
class Rbm final : public Ansatz {
 public:
  explicit Rbm(AnsatzParams params);

  const AnsatzParams& params() const { return params_; }
  int num_hidden() const { return params_.num_hidden(); }

  int num_sites() const override { return params_.num_visible; }
  std::size_t num_params() const override { return params_.num_params(); }
  bool has_derivatives() const override { return true; }
  cplx log_psi(SpinView config) const override;
  void log_derivatives(SpinView config, std::span<cplx> out) const override;
  std::unique_ptr<Walker> walker(SpinView config) const override;
  std::vector<cplx> parameters() const override { return params_.flatten(); }

  /// Whether flipping `site` uses the vectorized ratio kernel. Sites whose exp(+-2W) overflow
  /// fall back to log-cosh differences.
  bool uses_product_kernel(int site) const { return product_site_[site] != 0; }

 private:
  friend class RbmWalker;

  AnsatzParams params_;
  // Column-major (hidden index fastest) split copies of W, exp(2W) and exp(-2W).
  std::vector<double> w_re_, w_im_;
  std::vector<double> p_re_, p_im_;
  std::vector<double> q_re_, q_im_;
  std::vector<char> product_site_;
};

/// Stores all 2^N amplitudes explicitly. Used to feed exact eigenvectors through the estimators.
class ExactVectorAnsatz final : public Ansatz {
 public:
  ExactVectorAnsatz(int num_sites, std::vector<cplx> amplitudes);

  const std::vector<cplx>& amplitudes() const { return amps_; }
  /// Number of exactly-zero amplitudes (these configurations cannot be evaluated).
  std::size_t zero_count() const { return zeros_; }

  int num_sites() const override { return n_; }
  std::size_t num_params() const override { return 0; }
  bool has_derivatives() const override { return false; }
  cplx log_psi(SpinView config) const override;
  void log_derivatives(SpinView config, std::span<cplx> out) const override;
  std::unique_ptr<Walker> walker(SpinView config) const override;
  std::vector<cplx> parameters() const override { return {}; }

 private:
  int n_;
  std::vector<cplx> amps_;
  std::size_t zeros_ = 0;
};

std::shared_ptr<const ExactVectorAnsatz> exact_vector_ansatz(int num_sites, std::vector<cplx> amplitudes);

/// psi~(s) = psi(s)^*: the dual produced by the anti-linear metric (complex conjugation).
class ConjugateAnsatz final : public Ansatz {
 public:
  explicit ConjugateAnsatz(std::shared_ptr<const Ansatz> inner) : inner_(std::move(inner)) {}

  const Ansatz& inner() const { return *inner_; }
  int num_sites() const override { return inner_->num_sites(); }
  std::size_t num_params() const override { return inner_->num_params(); }
  bool has_derivatives() const override { return inner_->has_derivatives(); }
  cplx log_psi(SpinView config) const override { return std::conj(inner_->log_psi(config)); }
  void log_derivatives(SpinView config, std::span<cplx> out) const override;
  std::unique_ptr<Walker> walker(SpinView config) const override;
  std::vector<cplx> parameters() const override;

 private:
  std::shared_ptr<const Ansatz> inner_;
};

enum class DualMode { independent, pt_conjugate };

std::string to_string(DualMode mode);
DualMode dual_mode_from_string(const std::string& name);

/// Throws ValidationError when pt_conjugate is requested for a Hamiltonian that is not PT symmetric.
void check_dual_mode(DualMode mode, const HamiltonianParams& params);

/// A right state psi together with its dual psi~.
class StatePair {
 public:
  static StatePair pt_conjugate(std::shared_ptr<const Ansatz> right);
  static StatePair independent(std::shared_ptr<const Ansatz> right, std::shared_ptr<const Ansatz> left);

  DualMode mode() const { return mode_; }
  const Ansatz& right() const { return *right_; }
  const Ansatz& left() const { return *left_; }
  std::shared_ptr<const Ansatz> right_ptr() const { return right_; }
  std::shared_ptr<const Ansatz> left_ptr() const { return left_; }
  int num_sites() const { return right_->num_sites(); }

 private:
  StatePair(DualMode mode, std::shared_ptr<const Ansatz> r, std::shared_ptr<const Ansatz> l)
      : mode_(mode), right_(std::move(r)), left_(std::move(l)) {}

  DualMode mode_;
  std::shared_ptr<const Ansatz> right_;
  std::shared_ptr<const Ansatz> left_;
};

/// log psi~(s): conj(log psi(s)) in pt_conjugate mode, the second state's value otherwise.
cplx dual_log_psi(const StatePair& pair, SpinView config);

/// Text snapshot of the trainable state. Numbers are written with 17 significant digits.
struct Snapshot {
  int num_visible = 0;
  int alpha = 1;
  DualMode mode = DualMode::pt_conjugate;
  std::uint64_t seed = 0;
  long step = 0;
  std::optional<cplx> epsilon;
  std::vector<AnsatzParams> params;      // 1 entry (pt_conjugate) or 2 (independent: right, left)
  std::vector<SpinConfig> chain_configs;  // sampler chain positions, may be empty
  std::vector<std::vector<double>> optimizer_state;
};

void write_snapshot(std::ostream& os, const Snapshot& snap);
Snapshot read_snapshot(std::istream& is);
void save_snapshot(const std::string& path, const Snapshot& snap);
Snapshot load_snapshot(const std::string& path);

}  // namespace nhvmc

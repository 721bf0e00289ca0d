#include "nhvmc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace nhvmc {

std::string to_string(Distribution d) {
  switch (d) {
    case Distribution::born_right:
      return "born_right";
    case Distribution::born_left:
      return "born_left";
    case Distribution::product_abs:
      return "product_abs";
  }
  return "unknown";
}

Distribution distribution_from_string(const std::string& name) {
  if (name == "born_right") return Distribution::born_right;
  if (name == "born_left") return Distribution::born_left;
  if (name == "product_abs") return Distribution::product_abs;
  throw ValidationError("unknown sampling distribution '" + name + "'");
}

double log_density(Distribution d, cplx log_psi, cplx log_dual) {
  switch (d) {
    case Distribution::born_right:
      return 2.0 * log_psi.real();
    case Distribution::born_left:
      return 2.0 * log_dual.real();
    case Distribution::product_abs:
      return log_psi.real() + log_dual.real();
  }
  return 0.0;
}

void SamplerConfig::validate() const {
  if (n_chains < 1) throw ValidationError("sampler.n_chains must be positive");
  if (n_samples_per_chain < 1) throw ValidationError("sampler.n_samples_per_chain must be positive");
  if (n_burnin < 0) throw ValidationError("sampler.n_burnin must be nonnegative");
  if (thinning < 1) throw ValidationError("sampler.thinning must be positive");
}

namespace {

constexpr int kMaxStartRetries = 100;

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

std::mt19937_64 chain_rng(std::uint64_t seed, int chain_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain_id), 0x9e3779b9U};
  return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace

MetropolisChain::MetropolisChain(const StatePair& pair, Distribution distribution, std::uint64_t seed, int chain_id,
                                 const SpinConfig* start)
    : pair_(&pair),
      dist_(distribution),
      n_(pair.num_sites()),
      pt_(pair.mode() == DualMode::pt_conjugate),
      rng_(chain_rng(seed, chain_id)) {
  const bool need_left = !pt_ && distribution != Distribution::born_right;
  bool ok = false;
  for (int attempt = 0; attempt < kMaxStartRetries && !ok; ++attempt) {
    SpinConfig s(n_);
    if (start != nullptr && attempt == 0) {
      s = *start;
    } else {
      for (auto& x : s) x = uniform01(rng_) < 0.5 ? Spin{1} : Spin{-1};
    }
    try {
      right_ = pair.right().walker(s);
      left_ = need_left ? pair.left().walker(s) : nullptr;
      ok = std::isfinite(log_weight());
    } catch (const NumericalError&) {
      ok = false;
    }
  }
  if (!ok) throw NumericalError("sampler: target weight is zero at every attempted starting configuration");
}

cplx MetropolisChain::log_dual() const {
  if (pt_) return std::conj(right_->log_psi());
  if (left_) return left_->log_psi();
  return pair_->left().log_psi(right_->spins());
}

double MetropolisChain::log_weight() const {
  const cplx lp = right_->log_psi();
  cplx ld = lp;
  if (pt_) {
    ld = std::conj(lp);
  } else if (left_) {
    ld = left_->log_psi();
  }
  return log_density(dist_, lp, ld);
}

bool MetropolisChain::step() {
  const int site = std::uniform_int_distribution<int>(0, n_ - 1)(rng_);
  const cplx r = right_->flip_ratio(site);
  double ratio = 0.0;
  // In pt_conjugate mode |psi~| = |psi|, so all three densities coincide.
  switch (dist_) {
    case Distribution::born_right:
      ratio = std::norm(r);
      break;
    case Distribution::born_left:
      ratio = pt_ ? std::norm(r) : std::norm(left_->flip_ratio(site));
      break;
    case Distribution::product_abs:
      ratio = pt_ ? std::norm(r) : std::abs(r) * std::abs(left_->flip_ratio(site));
      break;
  }
  ++proposed_;
  const double u = uniform01(rng_);
  if (ratio >= 1.0 || u < ratio) {
    ++accepted_;
    right_->flip(site);
    if (left_) left_->flip(site);
    return true;
  }
  return false;
}

void MetropolisChain::sweep() {
  for (int p = 0; p < n_; ++p) step();
}

SampleBatch run_chains(const StatePair& pair, const SamplerConfig& cfg, std::span<const SpinConfig> start) {
  cfg.validate();
  if (!start.empty() && static_cast<int>(start.size()) != cfg.n_chains) {
    throw ValidationError("run_chains: need one start configuration per chain");
  }
  SampleBatch batch;
  batch.distribution = cfg.distribution;
  batch.n_chains = cfg.n_chains;
  batch.samples_per_chain = cfg.n_samples_per_chain;
  const std::size_t total = static_cast<std::size_t>(cfg.n_chains) * cfg.n_samples_per_chain;
  batch.configs.reserve(total);
  batch.log_psi_values.reserve(total);
  batch.log_dual_values.reserve(total);
  batch.chain_ids.reserve(total);

  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;
  for (int chain_id = 0; chain_id < cfg.n_chains; ++chain_id) {
    MetropolisChain ch(pair, cfg.distribution, cfg.seed, chain_id, start.empty() ? nullptr : &start[chain_id]);
    for (int b = 0; b < cfg.n_burnin; ++b) ch.sweep();
    for (int k = 0; k < cfg.n_samples_per_chain; ++k) {
      for (int t = 0; t < cfg.thinning; ++t) ch.sweep();
      const SpinView s = ch.spins();
      const cplx lp = ch.log_psi();
      if (!finite(lp)) throw NumericalError("sampler: non-finite log amplitude on the chain");
      batch.configs.emplace_back(s.begin(), s.end());
      batch.log_psi_values.push_back(lp);
      batch.log_dual_values.push_back(ch.log_dual());
      batch.chain_ids.push_back(chain_id);
    }
    const SpinView s = ch.spins();
    batch.final_configs.emplace_back(s.begin(), s.end());
    proposed += ch.proposed();
    accepted += ch.accepted();
  }
  batch.acceptance_rate = proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
  return batch;
}

SpinConfig ConfigRange::iterator::operator*() const { return index_to_config(idx_, n_); }

ConfigRange full_summation_enumerate(int num_sites, int cap) {
  if (num_sites < 1) throw ValidationError("enumeration needs at least one site");
  if (num_sites > cap) {
    throw ValidationError("full summation over " + std::to_string(num_sites) + " sites exceeds the cap of " +
                          std::to_string(cap));
  }
  return ConfigRange(num_sites, std::uint64_t{1} << num_sites);
}

Ensemble Ensemble::full(int num_sites, int cap) {
  Ensemble e;
  const auto range = full_summation_enumerate(num_sites, cap);
  e.configs.reserve(range.size());
  for (auto c : range) e.configs.push_back(std::move(c));
  e.log_q.assign(e.configs.size(), 0.0);
  e.block.assign(e.configs.size(), 0);
  e.num_blocks = 1;
  e.exact = true;
  return e;
}

Ensemble Ensemble::from_batch(const SampleBatch& batch, int blocks_per_chain) {
  if (batch.configs.empty()) throw ValidationError("empty sample batch");
  blocks_per_chain = std::max(1, std::min(blocks_per_chain, batch.samples_per_chain));
  Ensemble e;
  e.configs = batch.configs;
  e.log_q.resize(batch.configs.size());
  e.block.resize(batch.configs.size());
  for (std::size_t s = 0; s < batch.configs.size(); ++s) {
    e.log_q[s] = log_density(batch.distribution, batch.log_psi_values[s], batch.log_dual_values[s]);
    const int within = static_cast<int>(s % static_cast<std::size_t>(batch.samples_per_chain));
    e.block[s] = batch.chain_ids[s] * blocks_per_chain + within * blocks_per_chain / batch.samples_per_chain;
  }
  e.num_blocks = batch.n_chains * blocks_per_chain;
  e.exact = false;
  return e;
}

}  // namespace nhvmc

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nhvmc/ansatz.hpp"
#include "nhvmc/types.hpp"

namespace nhvmc {

/// Target density for Metropolis sampling.
///   born_right:  |psi(s)|^2
///   born_left:   |psi~(s)|^2
///   product_abs: |psi~(s)^* psi(s)|
enum class Distribution { born_right, born_left, product_abs };

std::string to_string(Distribution d);
Distribution distribution_from_string(const std::string& name);

/// Unnormalized log density of `d` given log psi and log psi~ at a configuration.
double log_density(Distribution d, cplx log_psi, cplx log_dual);

struct SamplerConfig {
  int n_chains = 16;
  int n_samples_per_chain = 64;
  int n_burnin = 100;  // sweeps
  int thinning = 1;    // sweeps between records; one sweep is N proposed flips
  std::uint64_t seed = 0;
  Distribution distribution = Distribution::born_right;

  void validate() const;
};

struct SampleBatch {
  Distribution distribution = Distribution::born_right;
  int n_chains = 0;
  int samples_per_chain = 0;
  std::vector<SpinConfig> configs;  // chain-major: all samples of chain 0, then chain 1, ...
  std::vector<cplx> log_psi_values;
  std::vector<cplx> log_dual_values;
  std::vector<int> chain_ids;
  double acceptance_rate = 0.0;
  std::vector<SpinConfig> final_configs;  // last position of each chain, for continuing
};

/// One Metropolis chain with uniformly chosen single-spin-flip proposals and acceptance
/// min(1, w(s')/w(s)) for the selected density w.
class MetropolisChain {
 public:
  /// Seeds its generator from (seed, chain_id). Starts at `start` when given, otherwise at a
  /// random configuration, retrying random starts while the weight is zero.
  MetropolisChain(const StatePair& pair, Distribution distribution, std::uint64_t seed, int chain_id,
                  const SpinConfig* start = nullptr);

  /// One proposal. Returns true when accepted.
  bool step();
  /// N proposals.
  void sweep();

  SpinView spins() const { return right_->spins(); }
  cplx log_psi() const { return right_->log_psi(); }
  cplx log_dual() const;
  std::uint64_t proposed() const { return proposed_; }
  std::uint64_t accepted() const { return accepted_; }

 private:
  double log_weight() const;

  const StatePair* pair_;
  Distribution dist_;
  int n_;
  bool pt_;
  std::mt19937_64 rng_;
  std::unique_ptr<Walker> right_;
  std::unique_ptr<Walker> left_;  // independent duals whose psi~ enters the density
  std::uint64_t proposed_ = 0;
  std::uint64_t accepted_ = 0;
};

/// Metropolis-Hastings with uniformly chosen single-spin-flip proposals. Each chain owns a
/// generator seeded from (seed, chain id), so batches are reproducible. `start` optionally
/// supplies one starting configuration per chain (burn-in still applies).
SampleBatch run_chains(const StatePair& pair, const SamplerConfig& config, std::span<const SpinConfig> start = {});

/// All 2^N configurations in index order (see config_to_index).
class ConfigRange {
 public:
  class iterator {
   public:
    using value_type = SpinConfig;
    using difference_type = std::ptrdiff_t;
    iterator(std::uint64_t idx, int n) : idx_(idx), n_(n) {}
    SpinConfig operator*() const;
    iterator& operator++() {
      ++idx_;
      return *this;
    }
    bool operator==(const iterator& o) const { return idx_ == o.idx_; }
    bool operator!=(const iterator& o) const { return idx_ != o.idx_; }

   private:
    std::uint64_t idx_;
    int n_;
  };

  ConfigRange(int num_sites, std::uint64_t count) : n_(num_sites), count_(count) {}
  iterator begin() const { return {0, n_}; }
  iterator end() const { return {count_, n_}; }
  std::uint64_t size() const { return count_; }

 private:
  int n_;
  std::uint64_t count_;
};

inline constexpr int kDefaultEnumerationCap = 14;

/// Throws ValidationError when num_sites exceeds `cap`.
ConfigRange full_summation_enumerate(int num_sites, int cap = kDefaultEnumerationCap);

/// Configurations over which estimators average: either every basis state once (exact) or a
/// Monte Carlo batch. `log_q` is the log of the unnormalized density each configuration was
/// drawn from; estimators reweight from it to whatever density they need. `block` groups
/// samples for jackknife error bars.
struct Ensemble {
  std::vector<SpinConfig> configs;
  std::vector<double> log_q;
  std::vector<int> block;
  int num_blocks = 1;
  bool exact = false;

  std::size_t size() const { return configs.size(); }

  static Ensemble full(int num_sites, int cap = kDefaultEnumerationCap);
  /// Splits each chain into `blocks_per_chain` contiguous blocks.
  static Ensemble from_batch(const SampleBatch& batch, int blocks_per_chain = 4);
};

}  // namespace nhvmc

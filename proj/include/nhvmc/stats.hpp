#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "nhvmc/types.hpp"

namespace nhvmc {

/// A complex estimate with independent standard errors on its real and imaginary parts.
struct Estimate {
  cplx value{};
  double stderr_re = 0.0;
  double stderr_im = 0.0;

  double stderr_abs() const { return std::hypot(stderr_re, stderr_im); }
};

/// Per-block sums of complex channels, finalized with a delete-one-block jackknife.
/// Functionals receive per-channel means; with a single block the error bars are zero.
class BlockAccumulator {
 public:
  BlockAccumulator(int num_blocks, std::size_t num_channels);

  int num_blocks() const { return blocks_; }
  std::size_t num_channels() const { return channels_; }

  void add(int block, std::size_t channel, cplx value) { sums_[index(block, channel)] += value; }
  void count(int block, double weight = 1.0) { counts_[block] += weight; }
  cplx* block_row(int block) { return sums_.data() + index(block, 0); }

  std::vector<cplx> means() const;

  using Functional = std::function<void(const std::vector<cplx>& means, std::vector<cplx>& out)>;

  /// Evaluates `f` on the full means and on every leave-one-block-out mean.
  std::vector<Estimate> jackknife(const Functional& f, std::size_t num_outputs) const;

 private:
  std::size_t index(int block, std::size_t channel) const {
    return static_cast<std::size_t>(block) * channels_ + channel;
  }

  int blocks_;
  std::size_t channels_;
  std::vector<cplx> sums_;
  std::vector<double> counts_;
};

}  // namespace nhvmc

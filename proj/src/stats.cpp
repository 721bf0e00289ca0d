#include "nhvmc/stats.hpp"

namespace nhvmc {

BlockAccumulator::BlockAccumulator(int num_blocks, std::size_t num_channels)
    : blocks_(num_blocks),
      channels_(num_channels),
      sums_(static_cast<std::size_t>(num_blocks) * num_channels),
      counts_(num_blocks, 0.0) {
  if (num_blocks < 1) throw ValidationError("BlockAccumulator needs at least one block");
}

std::vector<cplx> BlockAccumulator::means() const {
  std::vector<cplx> m(channels_, cplx{});
  double total = 0.0;
  for (int b = 0; b < blocks_; ++b) {
    total += counts_[b];
    for (std::size_t c = 0; c < channels_; ++c) m[c] += sums_[index(b, c)];
  }
  if (total > 0.0) {
    for (auto& x : m) x /= total;
  }
  return m;
}

std::vector<Estimate> BlockAccumulator::jackknife(const Functional& f, std::size_t num_outputs) const {
  std::vector<cplx> total(channels_, cplx{});
  double total_count = 0.0;
  std::vector<int> used;
  for (int b = 0; b < blocks_; ++b) {
    if (counts_[b] <= 0.0) continue;
    used.push_back(b);
    total_count += counts_[b];
    for (std::size_t c = 0; c < channels_; ++c) total[c] += sums_[index(b, c)];
  }
  std::vector<cplx> mean(channels_);
  for (std::size_t c = 0; c < channels_; ++c) mean[c] = total_count > 0.0 ? total[c] / total_count : cplx{};

  std::vector<cplx> full(num_outputs);
  f(mean, full);
  std::vector<Estimate> out(num_outputs);
  for (std::size_t o = 0; o < num_outputs; ++o) out[o].value = full[o];
  const std::size_t nb = used.size();
  if (nb < 2) return out;

  std::vector<std::vector<cplx>> loo(nb, std::vector<cplx>(num_outputs));
  std::vector<cplx> partial(channels_);
  for (std::size_t k = 0; k < nb; ++k) {
    const int b = used[k];
    const double cnt = total_count - counts_[b];
    for (std::size_t c = 0; c < channels_; ++c) partial[c] = (total[c] - sums_[index(b, c)]) / cnt;
    f(partial, loo[k]);
  }
  for (std::size_t o = 0; o < num_outputs; ++o) {
    cplx avg{};
    for (std::size_t k = 0; k < nb; ++k) avg += loo[k][o];
    avg /= static_cast<double>(nb);
    double vr = 0.0, vi = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      const cplx d = loo[k][o] - avg;
      vr += d.real() * d.real();
      vi += d.imag() * d.imag();
    }
    const double scale = static_cast<double>(nb - 1) / static_cast<double>(nb);
    out[o].stderr_re = std::sqrt(scale * vr);
    out[o].stderr_im = std::sqrt(scale * vi);
  }
  return out;
}

}  // namespace nhvmc

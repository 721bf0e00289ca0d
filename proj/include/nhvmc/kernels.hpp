#pragma once

// Data-parallel inner loops of the RBM hot path, with a scalar reference version and an
// AVX2/FMA version chosen at runtime. Complex vectors are passed in split (re[], im[]) form.

#include <cstddef>
#include <string>

#include "nhvmc/types.hpp"

namespace nhvmc::kernels {

enum class Isa { scalar, avx2 };

std::string to_string(Isa isa);

/// Split-complex per-hidden-unit state of an RBM walker (see KernelTable::flip_factor).
struct HiddenCache {
  const double* u_re;
  const double* u_im;
  const double* w_re;
  const double* w_im;
  const double* g;
};

struct KernelTable {
  Isa isa;

  /// y += alpha * x.
  void (*axpy)(double alpha, const double* x_re, const double* x_im, double* y_re, double* y_im, std::size_t n);

  /// Product of hidden-unit cosh ratios for flipping one visible spin.
  ///
  /// Per hidden unit the walker keeps g = sign Re(theta), u = exp(-2 g theta) (so |u| <= 1) and
  /// w = 1 / (1 + u). With p = exp(2 W), q = exp(-2 W) for the flipped column and spin value s,
  /// (A, B) = (q, p) when g s > 0 and (p, q) otherwise, and
  ///   cosh(theta - 2 s W) / cosh(theta) = (A + u B) w.
  /// Returns the product of these factors. When `out_re` is non-null also writes
  /// tanh(theta - 2 s W) = g (A - u B) / (A + u B).
  cplx (*flip_factor)(const HiddenCache& h, const double* p_re, const double* p_im, const double* q_re,
                      const double* q_im, double s, double* out_re, double* out_im, std::size_t n);
};

const KernelTable& scalar_table();

/// True when the AVX2 variant was compiled in and the CPU reports avx2 and fma.
bool avx2_available();

/// The AVX2 table; throws NumericalError when unavailable.
const KernelTable& avx2_table();

/// Table selected on first use: AVX2 when available, unless NHVMC_SIMD=scalar is set.
const KernelTable& active();

/// Overrides the process-wide selection (tests and benchmarks).
void select(Isa isa);

}  // namespace nhvmc::kernels

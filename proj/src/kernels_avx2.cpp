// Compiled with -mavx2 -mfma when the compiler supports it; see src/CMakeLists.txt.

#include "nhvmc/kernels.hpp"

#if defined(NHVMC_HAVE_AVX2)
#include <immintrin.h>
#endif

namespace nhvmc::kernels {

#if defined(NHVMC_HAVE_AVX2)

namespace {

void axpy_avx2(double alpha, const double* x_re, const double* x_im, double* y_re, double* y_im, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    _mm256_storeu_pd(y_re + j, _mm256_fmadd_pd(a, _mm256_loadu_pd(x_re + j), _mm256_loadu_pd(y_re + j)));
    _mm256_storeu_pd(y_im + j, _mm256_fmadd_pd(a, _mm256_loadu_pd(x_im + j), _mm256_loadu_pd(y_im + j)));
  }
  for (; j < n; ++j) {
    y_re[j] += alpha * x_re[j];
    y_im[j] += alpha * x_im[j];
  }
}

cplx flip_factor_avx2(const HiddenCache& h, const double* p_re, const double* p_im, const double* q_re,
                      const double* q_im, double s, double* out_re, double* out_im, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(s);
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc_re = _mm256_set1_pd(1.0);
  __m256d acc_im = zero;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d g = _mm256_loadu_pd(h.g + j);
    const __m256d swap = _mm256_cmp_pd(_mm256_mul_pd(g, vs), zero, _CMP_GT_OQ);
    const __m256d pr = _mm256_loadu_pd(p_re + j);
    const __m256d pi = _mm256_loadu_pd(p_im + j);
    const __m256d qr = _mm256_loadu_pd(q_re + j);
    const __m256d qi = _mm256_loadu_pd(q_im + j);
    const __m256d a_re = _mm256_blendv_pd(pr, qr, swap);
    const __m256d a_im = _mm256_blendv_pd(pi, qi, swap);
    const __m256d b_re = _mm256_blendv_pd(qr, pr, swap);
    const __m256d b_im = _mm256_blendv_pd(qi, pi, swap);
    const __m256d ur = _mm256_loadu_pd(h.u_re + j);
    const __m256d ui = _mm256_loadu_pd(h.u_im + j);
    const __m256d ub_re = _mm256_fmsub_pd(ur, b_re, _mm256_mul_pd(ui, b_im));
    const __m256d ub_im = _mm256_fmadd_pd(ur, b_im, _mm256_mul_pd(ui, b_re));
    const __m256d f_re = _mm256_add_pd(a_re, ub_re);
    const __m256d f_im = _mm256_add_pd(a_im, ub_im);
    const __m256d wr = _mm256_loadu_pd(h.w_re + j);
    const __m256d wi = _mm256_loadu_pd(h.w_im + j);
    const __m256d r_re = _mm256_fmsub_pd(f_re, wr, _mm256_mul_pd(f_im, wi));
    const __m256d r_im = _mm256_fmadd_pd(f_re, wi, _mm256_mul_pd(f_im, wr));
    const __m256d next_re = _mm256_fmsub_pd(acc_re, r_re, _mm256_mul_pd(acc_im, r_im));
    const __m256d next_im = _mm256_fmadd_pd(acc_re, r_im, _mm256_mul_pd(acc_im, r_re));
    acc_re = next_re;
    acc_im = next_im;
    if (out_re != nullptr) {
      const __m256d d_re = _mm256_sub_pd(a_re, ub_re);
      const __m256d d_im = _mm256_sub_pd(a_im, ub_im);
      const __m256d inv = _mm256_div_pd(g, _mm256_fmadd_pd(f_re, f_re, _mm256_mul_pd(f_im, f_im)));
      _mm256_storeu_pd(out_re + j, _mm256_mul_pd(_mm256_fmadd_pd(d_re, f_re, _mm256_mul_pd(d_im, f_im)), inv));
      _mm256_storeu_pd(out_im + j, _mm256_mul_pd(_mm256_fmsub_pd(d_im, f_re, _mm256_mul_pd(d_re, f_im)), inv));
    }
  }

  alignas(32) double lr[4];
  alignas(32) double li[4];
  _mm256_store_pd(lr, acc_re);
  _mm256_store_pd(li, acc_im);
  cplx prod(lr[0], li[0]);
  for (int l = 1; l < 4; ++l) prod *= cplx(lr[l], li[l]);

  for (; j < n; ++j) {
    const bool sw = h.g[j] * s > 0.0;
    const cplx a = sw ? cplx(q_re[j], q_im[j]) : cplx(p_re[j], p_im[j]);
    const cplx b = sw ? cplx(p_re[j], p_im[j]) : cplx(q_re[j], q_im[j]);
    const cplx ub = cplx(h.u_re[j], h.u_im[j]) * b;
    const cplx f = a + ub;
    prod *= f * cplx(h.w_re[j], h.w_im[j]);
    if (out_re != nullptr) {
      const cplx t = h.g[j] * (a - ub) / f;
      out_re[j] = t.real();
      out_im[j] = t.imag();
    }
  }
  return prod;
}

constexpr KernelTable kAvx2{Isa::avx2, &axpy_avx2, &flip_factor_avx2};

}  // namespace

namespace detail {
const KernelTable* avx2_table_or_null() {
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok ? &kAvx2 : nullptr;
}
}  // namespace detail

#else

namespace detail {
const KernelTable* avx2_table_or_null() { return nullptr; }
}  // namespace detail

#endif

}  // namespace nhvmc::kernels

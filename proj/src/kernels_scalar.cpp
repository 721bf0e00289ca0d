#include <atomic>
#include <cstdlib>
#include <cstring>

#include "nhvmc/kernels.hpp"

namespace nhvmc::kernels {

namespace detail {
const KernelTable* avx2_table_or_null();
}

namespace {

void axpy_scalar(double alpha, const double* x_re, const double* x_im, double* y_re, double* y_im, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    y_re[j] += alpha * x_re[j];
    y_im[j] += alpha * x_im[j];
  }
}

cplx flip_factor_scalar(const HiddenCache& h, const double* p_re, const double* p_im, const double* q_re,
                        const double* q_im, double s, double* out_re, double* out_im, std::size_t n) {
  double acc_re = 1.0;
  double acc_im = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const bool swap = h.g[j] * s > 0.0;
    const double a_re = swap ? q_re[j] : p_re[j];
    const double a_im = swap ? q_im[j] : p_im[j];
    const double b_re = swap ? p_re[j] : q_re[j];
    const double b_im = swap ? p_im[j] : q_im[j];
    const double ub_re = h.u_re[j] * b_re - h.u_im[j] * b_im;
    const double ub_im = h.u_re[j] * b_im + h.u_im[j] * b_re;
    const double f_re = a_re + ub_re;
    const double f_im = a_im + ub_im;
    const double r_re = f_re * h.w_re[j] - f_im * h.w_im[j];
    const double r_im = f_re * h.w_im[j] + f_im * h.w_re[j];
    const double next_re = acc_re * r_re - acc_im * r_im;
    const double next_im = acc_re * r_im + acc_im * r_re;
    acc_re = next_re;
    acc_im = next_im;
    if (out_re != nullptr) {
      const double d_re = a_re - ub_re;
      const double d_im = a_im - ub_im;
      const double inv = h.g[j] / (f_re * f_re + f_im * f_im);
      out_re[j] = (d_re * f_re + d_im * f_im) * inv;
      out_im[j] = (d_im * f_re - d_re * f_im) * inv;
    }
  }
  return {acc_re, acc_im};
}

constexpr KernelTable kScalar{Isa::scalar, &axpy_scalar, &flip_factor_scalar};

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable* pick_default() {
  const char* env = std::getenv("NHVMC_SIMD");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return &kScalar;
  if (const KernelTable* t = detail::avx2_table_or_null()) return t;
  return &kScalar;
}

}  // namespace

std::string to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

const KernelTable& scalar_table() { return kScalar; }

bool avx2_available() { return detail::avx2_table_or_null() != nullptr; }

const KernelTable& avx2_table() {
  const KernelTable* t = detail::avx2_table_or_null();
  if (t == nullptr) throw NumericalError("AVX2 kernels are not available on this build/CPU");
  return *t;
}

const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    t = pick_default();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

void select(Isa isa) { g_active.store(isa == Isa::avx2 ? &avx2_table() : &kScalar, std::memory_order_release); }

}  // namespace nhvmc::kernels

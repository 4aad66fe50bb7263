#include "copo/simd/kernels.hpp"

#if defined(__aarch64__) || defined(_M_ARM64)
#define COPO_LAB_HAVE_NEON 1
#include <arm_neon.h>

#include <cmath>
#endif

namespace copo::simd {

#if COPO_LAB_HAVE_NEON
namespace {

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t a = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t prod = vmulq_f64(a, vld1q_f64(x + i));
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double sum_squares_neon(const double* x, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float64x2_t a = vld1q_f64(x + i);
    const float64x2_t b = vld1q_f64(x + i + 2);
    acc0 = vaddq_f64(acc0, vmulq_f64(a, a));
    acc1 = vaddq_f64(acc1, vmulq_f64(b, b));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double max_value_neon(const double* x, std::size_t n) {
  double best = x[0];
  std::size_t i = 0;
  if (n >= 2) {
    float64x2_t vbest = vld1q_f64(x);
    for (i = 2; i + 2 <= n; i += 2) vbest = vmaxq_f64(vbest, vld1q_f64(x + i));
    best = vmaxvq_f64(vbest);
  }
  for (; i < n; ++i) best = x[i] > best ? x[i] : best;
  return best;
}

void standardize_neon(const double* x, double* out, std::size_t n, double mean,
                      double scale) {
  const float64x2_t vm = vdupq_n_f64(mean);
  const float64x2_t vs = vdupq_n_f64(scale);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(out + i, vdivq_f64(vsubq_f64(vld1q_f64(x + i), vm), vs));
  }
  for (; i < n; ++i) out[i] = (x[i] - mean) / scale;
}

void adam_ascent_neon(double* param, const double* grad, double* m, double* v,
                      std::size_t n, const AdamCoeffs& c) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  const double decay = c.lr * c.weight_decay;
  const float64x2_t b1 = vdupq_n_f64(c.beta1);
  const float64x2_t b2 = vdupq_n_f64(c.beta2);
  const float64x2_t omb1 = vdupq_n_f64(one_minus_b1);
  const float64x2_t omb2 = vdupq_n_f64(one_minus_b2);
  const float64x2_t bc1 = vdupq_n_f64(c.bias_correction1);
  const float64x2_t bc2 = vdupq_n_f64(c.bias_correction2);
  const float64x2_t lr = vdupq_n_f64(c.lr);
  const float64x2_t eps = vdupq_n_f64(c.eps);
  const float64x2_t vdecay = vdupq_n_f64(decay);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t g = vld1q_f64(grad + i);
    // vmulq/vaddq rather than vfmaq keeps rounding identical to scalar.
    const float64x2_t mi =
        vaddq_f64(vmulq_f64(b1, vld1q_f64(m + i)), vmulq_f64(omb1, g));
    const float64x2_t vi = vaddq_f64(vmulq_f64(b2, vld1q_f64(v + i)),
                                     vmulq_f64(omb2, vmulq_f64(g, g)));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t m_hat = vdivq_f64(mi, bc1);
    const float64x2_t v_hat = vdivq_f64(vi, bc2);
    const float64x2_t denom = vaddq_f64(vsqrtq_f64(v_hat), eps);
    const float64x2_t step = vmulq_f64(lr, vdivq_f64(m_hat, denom));
    const float64x2_t p = vld1q_f64(param + i);
    vst1q_f64(param + i,
              vsubq_f64(vaddq_f64(p, step), vmulq_f64(vdecay, p)));
  }
  for (; i < n; ++i) {
    const double gi = grad[i];
    m[i] = c.beta1 * m[i] + one_minus_b1 * gi;
    v[i] = c.beta2 * v[i] + one_minus_b2 * (gi * gi);
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    const double step = c.lr * (m_hat / (std::sqrt(v_hat) + c.eps));
    param[i] = (param[i] + step) - decay * param[i];
  }
}

const KernelTable kNeonKernels{
    Isa::neon,      axpy_neon,        sum_squares_neon,
    max_value_neon, standardize_neon, adam_ascent_neon,
};

}  // namespace
#endif

namespace detail {
const KernelTable* neon_kernels() {
#if COPO_LAB_HAVE_NEON
  return &kNeonKernels;
#else
  return nullptr;
#endif
}
}  // namespace detail

}  // namespace copo::simd

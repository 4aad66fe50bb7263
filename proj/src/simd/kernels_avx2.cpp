#include "copo/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define COPO_LAB_HAVE_AVX2 1
#include <immintrin.h>

#include <cmath>
#endif

namespace copo::simd {

#if COPO_LAB_HAVE_AVX2
namespace {

#define COPO_AVX2 __attribute__((target("avx2")))

COPO_AVX2 void axpy_avx2(double alpha, const double* x, double* y,
                         std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(a, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

COPO_AVX2 double sum_squares_avx2(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d a = _mm256_loadu_pd(x + i);
    const __m256d b = _mm256_loadu_pd(x + i + 4);
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(a, a));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(b, b));
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(x + i);
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(a, a));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double acc = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

COPO_AVX2 double max_value_avx2(const double* x, std::size_t n) {
  double best = x[0];
  std::size_t i = 0;
  if (n >= 4) {
    __m256d vbest = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) {
      vbest = _mm256_max_pd(vbest, _mm256_loadu_pd(x + i));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, vbest);
    best = lanes[0];
    for (int k = 1; k < 4; ++k) best = lanes[k] > best ? lanes[k] : best;
  }
  for (; i < n; ++i) best = x[i] > best ? x[i] : best;
  return best;
}

COPO_AVX2 void standardize_avx2(const double* x, double* out, std::size_t n,
                                double mean, double scale) {
  const __m256d vm = _mm256_set1_pd(mean);
  const __m256d vs = _mm256_set1_pd(scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d centered = _mm256_sub_pd(_mm256_loadu_pd(x + i), vm);
    _mm256_storeu_pd(out + i, _mm256_div_pd(centered, vs));
  }
  for (; i < n; ++i) out[i] = (x[i] - mean) / scale;
}

COPO_AVX2 void adam_ascent_avx2(double* param, const double* grad, double* m,
                                double* v, std::size_t n,
                                const AdamCoeffs& c) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  const double decay = c.lr * c.weight_decay;
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d omb1 = _mm256_set1_pd(one_minus_b1);
  const __m256d omb2 = _mm256_set1_pd(one_minus_b2);
  const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
  const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  const __m256d vdecay = _mm256_set1_pd(decay);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(omb1, g));
    const __m256d vi =
        _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                      _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, bc1);
    const __m256d v_hat = _mm256_div_pd(vi, bc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps);
    const __m256d step = _mm256_mul_pd(lr, _mm256_div_pd(m_hat, denom));
    const __m256d p = _mm256_loadu_pd(param + i);
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_add_pd(p, step),
                                              _mm256_mul_pd(vdecay, p)));
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

#undef COPO_AVX2

const KernelTable kAvx2Kernels{
    Isa::avx2,      axpy_avx2,        sum_squares_avx2,
    max_value_avx2, standardize_avx2, adam_ascent_avx2,
};

}  // namespace
#endif

namespace detail {
const KernelTable* avx2_kernels() {
#if COPO_LAB_HAVE_AVX2
  return &kAvx2Kernels;
#else
  return nullptr;
#endif
}
}  // namespace detail

}  // namespace copo::simd

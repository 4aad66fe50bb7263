#include <cmath>

#include "copo/simd/kernels.hpp"

namespace copo::simd {
namespace {

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sum_squares_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double max_value_scalar(const double* x, std::size_t n) {
  double best = x[0];
  for (std::size_t i = 1; i < n; ++i) best = x[i] > best ? x[i] : best;
  return best;
}

void standardize_scalar(const double* x, double* out, std::size_t n,
                        double mean, double scale) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] - mean) / scale;
}

void adam_ascent_scalar(double* param, const double* grad, double* m,
                        double* v, std::size_t n, const AdamCoeffs& c) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  const double decay = c.lr * c.weight_decay;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + one_minus_b1 * g;
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    const double step = c.lr * (m_hat / (std::sqrt(v_hat) + c.eps));
    param[i] = (param[i] + step) - decay * param[i];
  }
}

}  // namespace

namespace detail {
const KernelTable kScalarKernels{
    Isa::scalar,          axpy_scalar,        sum_squares_scalar,
    max_value_scalar,     standardize_scalar, adam_ascent_scalar,
};
}  // namespace detail

}  // namespace copo::simd

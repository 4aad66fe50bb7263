#pragma once

// Dense inner loops over logit rows and parameter tables.
//
// Every kernel has a scalar reference implementation. Vector variants
// (AVX2 on x86-64, NEON on AArch64) are selected once at startup from the
// CPU feature set. Elementwise kernels are bit-identical to the scalar
// reference; reductions (sum_squares) reassociate and agree to rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace copo::simd {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

struct AdamCoeffs {
  double lr = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double bias_correction1 = 1.0;  // 1 - beta1^t
  double bias_correction2 = 1.0;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  // n >= 1
  double (*max_value)(const double* x, std::size_t n);
  // out[i] = (x[i] - mean) / scale
  void (*standardize)(const double* x, double* out, std::size_t n, double mean,
                      double scale);
  // One decoupled-decay Adam step in the ascent direction.
  void (*adam_ascent)(double* param, const double* grad, double* m, double* v,
                      std::size_t n, const AdamCoeffs& c);
};

namespace detail {
extern const KernelTable kScalarKernels;
const KernelTable* avx2_kernels();  // nullptr when not compiled in
const KernelTable* neon_kernels();  // nullptr when not compiled in
}  // namespace detail

// Kernels for `isa`, or nullptr when the ISA is unavailable on this machine.
const KernelTable* kernels_for(Isa isa);

// Best available ISA. COPO_LAB_SIMD=scalar|avx2|neon in the environment
// forces a choice (falling back to scalar if unavailable).
const KernelTable& active();

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double sum_squares(std::span<const double> x) {
  return active().sum_squares(x.data(), x.size());
}

inline double max_value(std::span<const double> x) {
  return active().max_value(x.data(), x.size());
}

inline void standardize(std::span<const double> x, std::span<double> out,
                        double mean, double scale) {
  active().standardize(x.data(), out.data(), x.size(), mean, scale);
}

inline void adam_ascent(std::span<double> param, std::span<const double> grad,
                        std::span<double> m, std::span<double> v,
                        const AdamCoeffs& c) {
  active().adam_ascent(param.data(), grad.data(), m.data(), v.data(),
                       param.size(), c);
}

}  // namespace copo::simd

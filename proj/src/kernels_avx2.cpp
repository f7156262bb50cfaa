// AVX2/FMA kernel variants. Compiled with -mavx2 -mfma; only dispatched to
// when the running CPU reports both features.

#include "cpd/kernels.hpp"

#if defined(CPD_BUILD_AVX2) && (defined(__x86_64__) || defined(__i386__))

#include <immintrin.h>

#include <cmath>

namespace cpd::kernels {

namespace {

inline double hsum4(__m256d v) {
  double buf[4];
  _mm256_storeu_pd(buf, v);
  return (buf[0] + buf[1]) + (buf[2] + buf[3]);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum4(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void matvec_bias_avx2(const double* w, const double* x, const double* bias,
                      double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = dot_avx2(w + r * cols, x, cols) + bias[r];
  }
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scal_avx2(double alpha, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= alpha;
}

void relu_avx2(const double* z, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(z + i), zero));
  }
  for (; i < n; ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
}

double relu_dot_avx2(const double* z, const double* w, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d h = _mm256_max_pd(_mm256_loadu_pd(z + i), zero);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), h, acc);
  }
  double s = hsum4(acc);
  for (; i < n; ++i) s += w[i] * (z[i] > 0.0 ? z[i] : 0.0);
  return s;
}

void relu_backprop_avx2(const double* z, const double* w, double c, double* dz,
                        std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(z + i), zero, _CMP_GT_OQ);
    const __m256d val = _mm256_mul_pd(vc, _mm256_loadu_pd(w + i));
    _mm256_storeu_pd(dz + i, _mm256_and_pd(mask, val));
  }
  for (; i < n; ++i) dz[i] = z[i] > 0.0 ? c * w[i] : 0.0;
}

void ger_avx2(double* a, double alpha, const double* u, const double* v,
              std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    axpy_avx2(alpha * u[r], v, a + r * cols, cols);
  }
}

void adam_update_avx2(double* p, double* m, double* v, const double* g,
                      std::size_t n, double lr, double b1, double b2,
                      double eps, double bc1, double bc2) {
  const __m256d vb1 = _mm256_set1_pd(b1);
  const __m256d vb1c = _mm256_set1_pd(1.0 - b1);
  const __m256d vb2 = _mm256_set1_pd(b2);
  const __m256d vb2c = _mm256_set1_pd(1.0 - b2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vibc1 = _mm256_set1_pd(1.0 / bc1);
  const __m256d vibc2 = _mm256_set1_pd(1.0 / bc2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vm = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    vm = _mm256_fmadd_pd(vb1, vm, _mm256_mul_pd(vb1c, vg));
    vv = _mm256_fmadd_pd(vb2, vv, _mm256_mul_pd(vb2c, _mm256_mul_pd(vg, vg)));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(vm, vibc1);
    const __m256d vhat = _mm256_mul_pd(vv, vibc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  for (; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    p[i] -= lr * (m[i] * (1.0 / bc1)) / (std::sqrt(v[i] * (1.0 / bc2)) + eps);
  }
}

const KernelTable kAvx2 = {
    matvec_bias_avx2, dot_avx2,           axpy_avx2,
    scal_avx2,        relu_avx2,          relu_dot_avx2,
    relu_backprop_avx2, ger_avx2,         adam_update_avx2,
    "avx2",
};

bool cpu_has_avx2_fma() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable* table = cpu_has_avx2_fma() ? &kAvx2 : nullptr;
  return table;
}

}  // namespace cpd::kernels

#elif defined(CPD_BUILD_AVX2)

namespace cpd::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace cpd::kernels

#endif

#pragma once

// Double-precision kernels behind the detector and network inner loops.
// A scalar reference implementation always exists; an AVX2/FMA variant is
// compiled when the toolchain supports it and selected at runtime via cpuid.
// The environment variable CPD_KERNELS (scalar|avx2|auto) overrides selection.
//
// Every kernel uses a fixed reduction order per implementation, so repeated
// runs on the same machine are bitwise reproducible.

#include <cstddef>
#include <string>

namespace cpd::kernels {

struct KernelTable {
  // out = W x + bias, W row-major rows x cols
  void (*matvec_bias)(const double* w, const double* x, const double* bias,
                      double* out, std::size_t rows, std::size_t cols);
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x *= alpha
  void (*scal)(double alpha, double* x, std::size_t n);
  // out[i] = max(z[i], 0)
  void (*relu)(const double* z, double* out, std::size_t n);
  // sum_i w[i] * max(z[i], 0)
  double (*relu_dot)(const double* z, const double* w, std::size_t n);
  // dz[i] = (z[i] > 0) ? c * w[i] : 0
  void (*relu_backprop)(const double* z, const double* w, double c, double* dz,
                        std::size_t n);
  // A += alpha * u v^T, A row-major rows x cols
  void (*ger)(double* a, double alpha, const double* u, const double* v,
              std::size_t rows, std::size_t cols);
  // bias-corrected Adam update on flat parameter arrays:
  //   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2
  //   p -= lr * (m / bc1) / (sqrt(v / bc2) + eps)
  void (*adam_update)(double* p, double* m, double* v, const double* g,
                      std::size_t n, double lr, double b1, double b2,
                      double eps, double bc1, double bc2);
  const char* name;
};

const KernelTable& scalar_table();
// Null when this build or CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

const KernelTable& active();
std::string active_name();
// Test hook; also honors CPD_KERNELS on first use. Throws if unavailable.
void force(const std::string& name);

inline void matvec_bias(const double* w, const double* x, const double* bias,
                        double* out, std::size_t rows, std::size_t cols) {
  active().matvec_bias(w, x, bias, out, rows, cols);
}
inline double dot(const double* a, const double* b, std::size_t n) {
  return active().dot(a, b, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void scal(double alpha, double* x, std::size_t n) {
  active().scal(alpha, x, n);
}
inline void relu(const double* z, double* out, std::size_t n) {
  active().relu(z, out, n);
}
inline double relu_dot(const double* z, const double* w, std::size_t n) {
  return active().relu_dot(z, w, n);
}
inline void relu_backprop(const double* z, const double* w, double c,
                          double* dz, std::size_t n) {
  active().relu_backprop(z, w, c, dz, n);
}
inline void ger(double* a, double alpha, const double* u, const double* v,
                std::size_t rows, std::size_t cols) {
  active().ger(a, alpha, u, v, rows, cols);
}
inline void adam_update(double* p, double* m, double* v, const double* g,
                        std::size_t n, double lr, double b1, double b2,
                        double eps, double bc1, double bc2) {
  active().adam_update(p, m, v, g, n, lr, b1, b2, eps, bc1, bc2);
}
}  // namespace cpd::kernels

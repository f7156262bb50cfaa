#include "cpd/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <stdexcept>

namespace cpd::kernels {

namespace {

void matvec_bias_scalar(const double* w, const double* x, const double* bias,
                        double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += wr[j] * x[j];
    out[r] = acc + bias[r];
  }
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scal_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void relu_scalar(const double* z, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
}

double relu_dot_scalar(const double* z, const double* w, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += w[i] * (z[i] > 0.0 ? z[i] : 0.0);
  return acc;
}

void relu_backprop_scalar(const double* z, const double* w, double c,
                          double* dz, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dz[i] = z[i] > 0.0 ? c * w[i] : 0.0;
}

void ger_scalar(double* a, double alpha, const double* u, const double* v,
                std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* ar = a + r * cols;
    const double au = alpha * u[r];
    for (std::size_t j = 0; j < cols; ++j) ar[j] += au * v[j];
  }
}

void adam_update_scalar(double* p, double* m, double* v, const double* g,
                        std::size_t n, double lr, double b1, double b2,
                        double eps, double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

const KernelTable kScalar = {
    matvec_bias_scalar, dot_scalar,           axpy_scalar,
    scal_scalar,        relu_scalar,          relu_dot_scalar,
    relu_backprop_scalar, ger_scalar,         adam_update_scalar,
    "scalar",
};

std::atomic<const KernelTable*> g_active{nullptr};
std::once_flag g_init_once;

const KernelTable* pick_default() {
  const char* env = std::getenv("CPD_KERNELS");
  std::string want = env ? env : "auto";
  if (want == "scalar") return &kScalar;
  const KernelTable* avx = avx2_table();
  if (want == "avx2") {
    if (!avx) throw std::runtime_error("CPD_KERNELS=avx2 but AVX2 kernels are unavailable");
    return avx;
  }
  return avx ? avx : &kScalar;
}

void ensure_init() {
  std::call_once(g_init_once, [] { g_active.store(pick_default()); });
}

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

#if !defined(CPD_BUILD_AVX2)
const KernelTable* avx2_table() { return nullptr; }
#endif

const KernelTable& active() {
  ensure_init();
  return *g_active.load();
}

std::string active_name() { return active().name; }

void force(const std::string& name) {
  ensure_init();
  if (name == "scalar") {
    g_active.store(&kScalar);
  } else if (name == "avx2") {
    const KernelTable* avx = avx2_table();
    if (!avx) throw std::runtime_error("AVX2 kernels unavailable on this build/CPU");
    g_active.store(avx);
  } else if (name == "auto") {
    g_active.store(pick_default());
  } else {
    throw std::invalid_argument("unknown kernel set: " + name);
  }
}

}  // namespace cpd::kernels

#include "lsc/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lsc::numcore::kernels {

namespace {
Mode g_mode = Mode::parallel;
// Below this many multiply-adds the fork/join cost dominates.
constexpr int64_t kParThreshold = 1 << 14;
}  // namespace

Mode mode() { return g_mode; }
void set_mode(Mode m) { g_mode = m; }

namespace serial {

void matmul(const double* x, const double* w, double* y, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    double* yr = y + i * n;
    for (int64_t j = 0; j < n; ++j) yr[j] = 0.0;
    const double* xr = x + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double xv = xr[p];
      const double* wr = w + p * n;
      for (int64_t j = 0; j < n; ++j) yr[j] += xv * wr[j];
    }
  }
}

void matmul_at_b_acc(const double* x, const double* g, double* y, int64_t m, int64_t k, int64_t n) {
  // y[p][j] += sum_i x[i][p] * g[i][j]; rows of y are independent.
  for (int64_t p = 0; p < k; ++p) {
    double* yr = y + p * n;
    for (int64_t i = 0; i < m; ++i) {
      const double xv = x[i * k + p];
      const double* gr = g + i * n;
      for (int64_t j = 0; j < n; ++j) yr[j] += xv * gr[j];
    }
  }
}

void matmul_a_bt_acc(const double* g, const double* w, double* y, int64_t m, int64_t k, int64_t n) {
  // y[i][p] += sum_j g[i][j] * w[p][j]
  for (int64_t i = 0; i < m; ++i) {
    const double* gr = g + i * n;
    double* yr = y + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double* wr = w + p * n;
      double acc = 0.0;
      for (int64_t j = 0; j < n; ++j) acc += gr[j] * wr[j];
      yr[p] += acc;
    }
  }
}

void relu(const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_acc(const double* x, const double* g, double* gx, int64_t n) {
  for (int64_t i = 0; i < n; ++i)
    if (x[i] > 0.0) gx[i] += g[i];
}

void segment_sum(const double* x, const int32_t* segments, double* out, int64_t m, int64_t f,
                 int64_t groups) {
  for (int64_t i = 0; i < groups * f; ++i) out[i] = 0.0;
  for (int64_t r = 0; r < m; ++r) {
    double* o = out + static_cast<int64_t>(segments[r]) * f;
    const double* xr = x + r * f;
    for (int64_t j = 0; j < f; ++j) o[j] += xr[j];
  }
}

}  // namespace serial

namespace par {

// Each output element is owned by exactly one thread and accumulated in the
// same order as the serial kernel, so results match the reference bit for bit.

void matmul(const double* x, const double* w, double* y, int64_t m, int64_t k, int64_t n) {
  const bool big = m * k * n >= kParThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (int64_t i = 0; i < m; ++i) {
    double* yr = y + i * n;
    for (int64_t j = 0; j < n; ++j) yr[j] = 0.0;
    const double* xr = x + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double xv = xr[p];
      const double* wr = w + p * n;
      for (int64_t j = 0; j < n; ++j) yr[j] += xv * wr[j];
    }
  }
}

void matmul_at_b_acc(const double* x, const double* g, double* y, int64_t m, int64_t k, int64_t n) {
  const bool big = m * k * n >= kParThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (int64_t p = 0; p < k; ++p) {
    double* yr = y + p * n;
    for (int64_t i = 0; i < m; ++i) {
      const double xv = x[i * k + p];
      const double* gr = g + i * n;
      for (int64_t j = 0; j < n; ++j) yr[j] += xv * gr[j];
    }
  }
}

void matmul_a_bt_acc(const double* g, const double* w, double* y, int64_t m, int64_t k, int64_t n) {
  const bool big = m * k * n >= kParThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (int64_t i = 0; i < m; ++i) {
    const double* gr = g + i * n;
    double* yr = y + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double* wr = w + p * n;
      double acc = 0.0;
      for (int64_t j = 0; j < n; ++j) acc += gr[j] * wr[j];
      yr[p] += acc;
    }
  }
}

void relu(const double* x, double* y, int64_t n) {
  const bool big = n >= kParThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_acc(const double* x, const double* g, double* gx, int64_t n) {
  const bool big = n >= kParThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (int64_t i = 0; i < n; ++i)
    if (x[i] > 0.0) gx[i] += g[i];
}

void segment_sum(const double* x, const int32_t* segments, double* out, int64_t m, int64_t f,
                 int64_t groups) {
  const bool big = m * f >= kParThreshold && groups > 1;
  if (!big) {
    serial::segment_sum(x, segments, out, m, f, groups);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int64_t gidx = 0; gidx < groups; ++gidx) {
    double* o = out + gidx * f;
    for (int64_t j = 0; j < f; ++j) o[j] = 0.0;
    for (int64_t r = 0; r < m; ++r) {
      if (segments[r] != gidx) continue;
      const double* xr = x + r * f;
      for (int64_t j = 0; j < f; ++j) o[j] += xr[j];
    }
  }
}

}  // namespace par

void matmul(const double* x, const double* w, double* y, int64_t m, int64_t k, int64_t n) {
  g_mode == Mode::serial ? serial::matmul(x, w, y, m, k, n) : par::matmul(x, w, y, m, k, n);
}
void matmul_at_b_acc(const double* x, const double* g, double* y, int64_t m, int64_t k, int64_t n) {
  g_mode == Mode::serial ? serial::matmul_at_b_acc(x, g, y, m, k, n)
                         : par::matmul_at_b_acc(x, g, y, m, k, n);
}
void matmul_a_bt_acc(const double* g, const double* w, double* y, int64_t m, int64_t k, int64_t n) {
  g_mode == Mode::serial ? serial::matmul_a_bt_acc(g, w, y, m, k, n)
                         : par::matmul_a_bt_acc(g, w, y, m, k, n);
}
void relu(const double* x, double* y, int64_t n) {
  g_mode == Mode::serial ? serial::relu(x, y, n) : par::relu(x, y, n);
}
void relu_bwd_acc(const double* x, const double* g, double* gx, int64_t n) {
  g_mode == Mode::serial ? serial::relu_bwd_acc(x, g, gx, n) : par::relu_bwd_acc(x, g, gx, n);
}
void segment_sum(const double* x, const int32_t* segments, double* out, int64_t m, int64_t f,
                 int64_t groups) {
  g_mode == Mode::serial ? serial::segment_sum(x, segments, out, m, f, groups)
                         : par::segment_sum(x, segments, out, m, f, groups);
}

}  // namespace lsc::numcore::kernels

#pragma once

#include <cstdint>
#include <vector>

namespace lsc::numcore::kernels {

// The dense inner loops exist twice: a serial reference and an OpenMP version.
// Both accumulate every output element in the same fixed order, so they are
// bit-identical; the tests assert this and tools/bench_kernels compares speed.
enum class Mode { serial, parallel };

Mode mode();
void set_mode(Mode m);

namespace serial {
// y[m x n] = x[m x k] * w[k x n]
void matmul(const double* x, const double* w, double* y, int64_t m, int64_t k, int64_t n);
// y[k x n] += x[m x k]^T * g[m x n]
void matmul_at_b_acc(const double* x, const double* g, double* y, int64_t m, int64_t k, int64_t n);
// y[m x k] += g[m x n] * w[k x n]^T
void matmul_a_bt_acc(const double* g, const double* w, double* y, int64_t m, int64_t k, int64_t n);
void relu(const double* x, double* y, int64_t n);
// gx += g where x > 0
void relu_bwd_acc(const double* x, const double* g, double* gx, int64_t n);
// out[g x f] = sum of rows of x[m x f] grouped by segments[m]
void segment_sum(const double* x, const int32_t* segments, double* out, int64_t m, int64_t f,
                 int64_t groups);
}  // namespace serial

namespace par {
void matmul(const double* x, const double* w, double* y, int64_t m, int64_t k, int64_t n);
void matmul_at_b_acc(const double* x, const double* g, double* y, int64_t m, int64_t k, int64_t n);
void matmul_a_bt_acc(const double* g, const double* w, double* y, int64_t m, int64_t k, int64_t n);
void relu(const double* x, double* y, int64_t n);
void relu_bwd_acc(const double* x, const double* g, double* gx, int64_t n);
void segment_sum(const double* x, const int32_t* segments, double* out, int64_t m, int64_t f,
                 int64_t groups);
}  // namespace par

// Dispatch through the active mode.
void matmul(const double* x, const double* w, double* y, int64_t m, int64_t k, int64_t n);
void matmul_at_b_acc(const double* x, const double* g, double* y, int64_t m, int64_t k, int64_t n);
void matmul_a_bt_acc(const double* g, const double* w, double* y, int64_t m, int64_t k, int64_t n);
void relu(const double* x, double* y, int64_t n);
void relu_bwd_acc(const double* x, const double* g, double* gx, int64_t n);
void segment_sum(const double* x, const int32_t* segments, double* out, int64_t m, int64_t f,
                 int64_t groups);

}  // namespace lsc::numcore::kernels

#pragma once

#include <cstdint>

// Arithmetic inner loops used by the layers and the statistics engine.
// Every entry has a scalar reference implementation and may have an AVX2
// variant; the table is resolved once per process (see select_backend).
// Reductions accumulate block partials combined by a fixed pairwise tree,
// so results are bit-stable across runs for a given backend.

namespace turb::kern {

enum class Backend { Auto, Scalar, Avx2 };

/// True when the running CPU supports the AVX2+FMA code paths.
bool avx2_available();

/// Pick the backend. Auto resolves to Avx2 when available, Scalar otherwise.
/// Also honored from the TURB_KERNELS environment variable (auto|scalar|avx2)
/// on first use. Selecting Avx2 on a CPU without it throws.
void select_backend(Backend b);

/// Name of the backend currently in effect ("scalar" or "avx2").
const char* backend_name();

struct KernelTable {
    // out[x] += sum_ic sum_t in[ic*in_stride + x*stride + t] * w[ic*k + t]
    // for x in [0, l_out). `in` must stay valid over the widest access.
    void (*conv_row_f32)(const float* in, std::int64_t in_stride, int c_in,
                         std::int64_t l_out, int k, int stride,
                         const float* w, float* out);
    // acc[t] += sum_{x<n} a[x] * b[x+t] for t in [0, k)
    void (*corr_taps_f32)(const float* a, const float* b, std::int64_t n,
                          int k, float* acc);
    float (*dot_f32)(const float* a, const float* b, std::int64_t n);
    // y[i] += alpha * x[i]
    void (*axpy_f32)(float alpha, const float* x, float* y, std::int64_t n);
    // y = x > 0 ? x : slope*x  (slope 0 gives plain relu)
    void (*leaky_relu_fwd_f32)(const float* x, float* y, std::int64_t n,
                               float slope);
    void (*leaky_relu_bwd_f32)(const float* x, const float* gy, float* gx,
                               std::int64_t n, float slope);
    // y[i] = a * x[i] + b
    void (*scale_shift_f32)(const float* x, float* y, std::int64_t n,
                            float a, float b);
    // Adaptive-moment update with precomputed bias corrections c1 = 1/(1-b1^t),
    // c2 = 1/(1-b2^t).
    void (*adam_step_f32)(float* p, const float* g, float* m, float* v,
                          std::int64_t n, float lr, float beta1, float beta2,
                          float eps, float c1, float c2);
    // 64-bit accumulated sum and sum of squares of n floats.
    void (*sum_sumsq_f32)(const float* x, std::int64_t n, double* sum,
                          double* sumsq);
    // Raw increment power sums over x in [0, n-lag):
    //   d = v[x+lag] - v[x];  s2 += d^2, s3 += d^3, s4 += d^4.
    void (*increment_moments_f64)(const double* v, std::int64_t n,
                                  std::int64_t lag, double* s2, double* s3,
                                  double* s4);
    // Pairwise-tree sum of n doubles.
    double (*sum_f64)(const double* x, std::int64_t n);
};

/// Active kernel table.
const KernelTable& ops();

// Scalar reference implementations, callable directly (equivalence tests,
// f64 gradient-check paths).
namespace scalar {

template <class T>
void conv_row(const T* in, std::int64_t in_stride, int c_in, std::int64_t l_out,
              int k, int stride, const T* w, T* out);
template <class T>
void corr_taps(const T* a, const T* b, std::int64_t n, int k, T* acc);
template <class T>
T dot(const T* a, const T* b, std::int64_t n);
template <class T>
void axpy(T alpha, const T* x, T* y, std::int64_t n);
template <class T>
void leaky_relu_fwd(const T* x, T* y, std::int64_t n, T slope);
template <class T>
void leaky_relu_bwd(const T* x, const T* gy, T* gx, std::int64_t n, T slope);
template <class T>
void scale_shift(const T* x, T* y, std::int64_t n, T a, T b);
template <class T>
void adam_step(T* p, const T* g, T* m, T* v, std::int64_t n, T lr, T beta1,
               T beta2, T eps, T c1, T c2);
template <class T>
void sum_sumsq(const T* x, std::int64_t n, double* sum, double* sumsq);

void increment_moments_f64(const double* v, std::int64_t n, std::int64_t lag,
                           double* s2, double* s3, double* s4);
double sum_f64(const double* x, std::int64_t n);

} // namespace scalar

// Type-dispatched wrappers used by templated layer code: float goes through
// the active table, double through the scalar reference path.
inline void conv_row(const float* in, std::int64_t in_stride, int c_in,
                     std::int64_t l_out, int k, int stride, const float* w,
                     float* out) {
    ops().conv_row_f32(in, in_stride, c_in, l_out, k, stride, w, out);
}
inline void conv_row(const double* in, std::int64_t in_stride, int c_in,
                     std::int64_t l_out, int k, int stride, const double* w,
                     double* out) {
    scalar::conv_row(in, in_stride, c_in, l_out, k, stride, w, out);
}
inline void corr_taps(const float* a, const float* b, std::int64_t n, int k,
                      float* acc) {
    ops().corr_taps_f32(a, b, n, k, acc);
}
inline void corr_taps(const double* a, const double* b, std::int64_t n, int k,
                      double* acc) {
    scalar::corr_taps(a, b, n, k, acc);
}
inline float dot(const float* a, const float* b, std::int64_t n) {
    return ops().dot_f32(a, b, n);
}
inline double dot(const double* a, const double* b, std::int64_t n) {
    return scalar::dot(a, b, n);
}
inline void axpy(float alpha, const float* x, float* y, std::int64_t n) {
    ops().axpy_f32(alpha, x, y, n);
}
inline void axpy(double alpha, const double* x, double* y, std::int64_t n) {
    scalar::axpy(alpha, x, y, n);
}
inline void leaky_relu_fwd(const float* x, float* y, std::int64_t n,
                           float slope) {
    ops().leaky_relu_fwd_f32(x, y, n, slope);
}
inline void leaky_relu_fwd(const double* x, double* y, std::int64_t n,
                           double slope) {
    scalar::leaky_relu_fwd(x, y, n, slope);
}
inline void leaky_relu_bwd(const float* x, const float* gy, float* gx,
                           std::int64_t n, float slope) {
    ops().leaky_relu_bwd_f32(x, gy, gx, n, slope);
}
inline void leaky_relu_bwd(const double* x, const double* gy, double* gx,
                           std::int64_t n, double slope) {
    scalar::leaky_relu_bwd(x, gy, gx, n, slope);
}
inline void scale_shift(const float* x, float* y, std::int64_t n, float a,
                        float b) {
    ops().scale_shift_f32(x, y, n, a, b);
}
inline void scale_shift(const double* x, double* y, std::int64_t n, double a,
                        double b) {
    scalar::scale_shift(x, y, n, a, b);
}
inline void adam_step(float* p, const float* g, float* m, float* v,
                      std::int64_t n, float lr, float beta1, float beta2,
                      float eps, float c1, float c2) {
    ops().adam_step_f32(p, g, m, v, n, lr, beta1, beta2, eps, c1, c2);
}
inline void adam_step(double* p, const double* g, double* m, double* v,
                      std::int64_t n, double lr, double beta1, double beta2,
                      double eps, double c1, double c2) {
    scalar::adam_step(p, g, m, v, n, lr, beta1, beta2, eps, c1, c2);
}
inline void sum_sumsq(const float* x, std::int64_t n, double* sum,
                      double* sumsq) {
    ops().sum_sumsq_f32(x, n, sum, sumsq);
}
inline void sum_sumsq(const double* x, std::int64_t n, double* sum,
                      double* sumsq) {
    scalar::sum_sumsq(x, n, sum, sumsq);
}

} // namespace turb::kern

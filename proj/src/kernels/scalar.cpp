#include "turb/kernels.hpp"

#include <cmath>
#include <vector>

namespace turb::kern::scalar {

template <class T>
void conv_row(const T* in, std::int64_t in_stride, int c_in, std::int64_t l_out,
              int k, int stride, const T* w, T* out) {
    for (int ic = 0; ic < c_in; ++ic) {
        const T* row = in + std::int64_t(ic) * in_stride;
        const T* wr = w + std::int64_t(ic) * k;
        for (std::int64_t x = 0; x < l_out; ++x) {
            const T* p = row + x * stride;
            T acc = T(0);
            for (int t = 0; t < k; ++t) acc += p[t] * wr[t];
            out[x] += acc;
        }
    }
}

template <class T>
void corr_taps(const T* a, const T* b, std::int64_t n, int k, T* acc) {
    for (int t = 0; t < k; ++t) {
        T s = T(0);
        for (std::int64_t x = 0; x < n; ++x) s += a[x] * b[x + t];
        acc[t] += s;
    }
}

template <class T>
T dot(const T* a, const T* b, std::int64_t n) {
    T s = T(0);
    for (std::int64_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void leaky_relu_fwd(const T* x, T* y, std::int64_t n, T slope) {
    for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <class T>
void leaky_relu_bwd(const T* x, const T* gy, T* gx, std::int64_t n, T slope) {
    for (std::int64_t i = 0; i < n; ++i)
        gx[i] = x[i] > T(0) ? gy[i] : slope * gy[i];
}

template <class T>
void scale_shift(const T* x, T* y, std::int64_t n, T a, T b) {
    for (std::int64_t i = 0; i < n; ++i) y[i] = a * x[i] + b;
}

template <class T>
void adam_step(T* p, const T* g, T* m, T* v, std::int64_t n, T lr, T beta1,
               T beta2, T eps, T c1, T c2) {
    for (std::int64_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
        v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
        T mh = m[i] * c1;
        T vh = v[i] * c2;
        p[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
}

namespace {

// Pairwise combine of per-block partials; the tree shape depends only on the
// partial count, keeping reductions bit-stable for a given input length.
double combine(const double* part, std::int64_t n) {
    if (n == 1) return part[0];
    std::int64_t h = n / 2;
    std::vector<double> next(std::size_t((n + 1) / 2));
    for (std::int64_t i = 0; i < h; ++i) next[std::size_t(i)] = part[2 * i] + part[2 * i + 1];
    if (n & 1) next[std::size_t(h)] = part[n - 1];
    return combine(next.data(), (n + 1) / 2);
}

constexpr std::int64_t kBlock = 1024;

} // namespace

template <class T>
void sum_sumsq(const T* x, std::int64_t n, double* sum, double* sumsq) {
    if (n == 0) {
        *sum = 0.0;
        *sumsq = 0.0;
        return;
    }
    std::int64_t nb = (n + kBlock - 1) / kBlock;
    std::vector<double> ps(static_cast<std::size_t>(nb)), pq(static_cast<std::size_t>(nb));
    for (std::int64_t b = 0; b < nb; ++b) {
        std::int64_t lo = b * kBlock;
        std::int64_t hi = lo + kBlock < n ? lo + kBlock : n;
        double s = 0.0, q = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) {
            double xi = double(x[i]);
            s += xi;
            q += xi * xi;
        }
        ps[std::size_t(b)] = s;
        pq[std::size_t(b)] = q;
    }
    *sum = combine(ps.data(), nb);
    *sumsq = combine(pq.data(), nb);
}

void increment_moments_f64(const double* v, std::int64_t n, std::int64_t lag,
                           double* s2, double* s3, double* s4) {
    std::int64_t m = n - lag;
    if (m <= 0) {
        *s2 = *s3 = *s4 = 0.0;
        return;
    }
    std::int64_t nb = (m + kBlock - 1) / kBlock;
    std::vector<double> p2(static_cast<std::size_t>(nb)), p3(static_cast<std::size_t>(nb)), p4(static_cast<std::size_t>(nb));
    for (std::int64_t b = 0; b < nb; ++b) {
        std::int64_t lo = b * kBlock;
        std::int64_t hi = lo + kBlock < m ? lo + kBlock : m;
        double a2 = 0.0, a3 = 0.0, a4 = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) {
            double d = v[i + lag] - v[i];
            double d2 = d * d;
            a2 += d2;
            a3 += d2 * d;
            a4 += d2 * d2;
        }
        p2[std::size_t(b)] = a2;
        p3[std::size_t(b)] = a3;
        p4[std::size_t(b)] = a4;
    }
    *s2 = combine(p2.data(), nb);
    *s3 = combine(p3.data(), nb);
    *s4 = combine(p4.data(), nb);
}

double sum_f64(const double* x, std::int64_t n) {
    if (n == 0) return 0.0;
    std::int64_t nb = (n + kBlock - 1) / kBlock;
    std::vector<double> ps(static_cast<std::size_t>(nb));
    for (std::int64_t b = 0; b < nb; ++b) {
        std::int64_t lo = b * kBlock;
        std::int64_t hi = lo + kBlock < n ? lo + kBlock : n;
        double s = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) s += x[i];
        ps[std::size_t(b)] = s;
    }
    return combine(ps.data(), nb);
}

template void conv_row<float>(const float*, std::int64_t, int, std::int64_t,
                              int, int, const float*, float*);
template void conv_row<double>(const double*, std::int64_t, int, std::int64_t,
                               int, int, const double*, double*);
template void corr_taps<float>(const float*, const float*, std::int64_t, int,
                               float*);
template void corr_taps<double>(const double*, const double*, std::int64_t,
                                int, double*);
template float dot<float>(const float*, const float*, std::int64_t);
template double dot<double>(const double*, const double*, std::int64_t);
template void axpy<float>(float, const float*, float*, std::int64_t);
template void axpy<double>(double, const double*, double*, std::int64_t);
template void leaky_relu_fwd<float>(const float*, float*, std::int64_t, float);
template void leaky_relu_fwd<double>(const double*, double*, std::int64_t,
                                     double);
template void leaky_relu_bwd<float>(const float*, const float*, float*,
                                    std::int64_t, float);
template void leaky_relu_bwd<double>(const double*, const double*, double*,
                                     std::int64_t, double);
template void scale_shift<float>(const float*, float*, std::int64_t, float,
                                 float);
template void scale_shift<double>(const double*, double*, std::int64_t, double,
                                  double);
template void adam_step<float>(float*, const float*, float*, float*,
                               std::int64_t, float, float, float, float, float,
                               float);
template void adam_step<double>(double*, const double*, double*, double*,
                                std::int64_t, double, double, double, double,
                                double, double);
template void sum_sumsq<float>(const float*, std::int64_t, double*, double*);
template void sum_sumsq<double>(const double*, std::int64_t, double*, double*);

} // namespace turb::kern::scalar

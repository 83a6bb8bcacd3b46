#include "turb/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <vector>

// AVX2+FMA variants. Reductions keep a fixed lane layout and a fixed
// combine order, so each backend is deterministic run to run; cross-backend
// agreement is up to rounding and checked by the equivalence tests.

namespace turb::kern::avx2 {

namespace {

inline float hsum8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_add_ps(lo, hi);
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
    return _mm_cvtss_f32(s);
}

inline double hsum4d(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    __m128d s = _mm_add_pd(lo, hi);
    s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
    return _mm_cvtsd_f64(s);
}

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

void conv_row_f32(const float* in, std::int64_t in_stride, int c_in,
                  std::int64_t l_out, int k, int stride, const float* w,
                  float* out) {
    if (stride != 1) {
        scalar::conv_row(in, in_stride, c_in, l_out, k, stride, w, out);
        return;
    }
    for (int ic = 0; ic < c_in; ++ic) {
        const float* row = in + std::int64_t(ic) * in_stride;
        const float* wr = w + std::int64_t(ic) * k;
        std::int64_t x = 0;
        for (; x + 8 <= l_out; x += 8) {
            __m256 acc = _mm256_loadu_ps(out + x);
            for (int t = 0; t < k; ++t) {
                __m256 wv = _mm256_set1_ps(wr[t]);
                __m256 iv = _mm256_loadu_ps(row + x + t);
                acc = _mm256_fmadd_ps(iv, wv, acc);
            }
            _mm256_storeu_ps(out + x, acc);
        }
        for (; x < l_out; ++x) {
            float acc = 0.f;
            for (int t = 0; t < k; ++t) acc += row[x + t] * wr[t];
            out[x] += acc;
        }
    }
}

void corr_taps_f32(const float* a, const float* b, std::int64_t n, int k,
                   float* acc) {
    for (int t = 0; t < k; ++t) {
        const float* bt = b + t;
        __m256 vs = _mm256_setzero_ps();
        std::int64_t x = 0;
        for (; x + 8 <= n; x += 8)
            vs = _mm256_fmadd_ps(_mm256_loadu_ps(a + x), _mm256_loadu_ps(bt + x), vs);
        float s = hsum8(vs);
        for (; x < n; ++x) s += a[x] * bt[x];
        acc[t] += s;
    }
}

float dot_f32(const float* a, const float* b, std::int64_t n) {
    __m256 vs = _mm256_setzero_ps();
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        vs = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), vs);
    float s = hsum8(vs);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_f32(float alpha, const float* x, float* y, std::int64_t n) {
    __m256 va = _mm256_set1_ps(alpha);
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vy = _mm256_loadu_ps(y + i);
        vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
        _mm256_storeu_ps(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void leaky_relu_fwd_f32(const float* x, float* y, std::int64_t n, float slope) {
    __m256 vz = _mm256_setzero_ps();
    __m256 vs = _mm256_set1_ps(slope);
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vx = _mm256_loadu_ps(x + i);
        __m256 pos = _mm256_cmp_ps(vx, vz, _CMP_GT_OQ);
        __m256 neg = _mm256_mul_ps(vx, vs);
        _mm256_storeu_ps(y + i, _mm256_blendv_ps(neg, vx, pos));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : slope * x[i];
}

void leaky_relu_bwd_f32(const float* x, const float* gy, float* gx,
                        std::int64_t n, float slope) {
    __m256 vz = _mm256_setzero_ps();
    __m256 vs = _mm256_set1_ps(slope);
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vx = _mm256_loadu_ps(x + i);
        __m256 vg = _mm256_loadu_ps(gy + i);
        __m256 pos = _mm256_cmp_ps(vx, vz, _CMP_GT_OQ);
        __m256 neg = _mm256_mul_ps(vg, vs);
        _mm256_storeu_ps(gx + i, _mm256_blendv_ps(neg, vg, pos));
    }
    for (; i < n; ++i) gx[i] = x[i] > 0.f ? gy[i] : slope * gy[i];
}

void scale_shift_f32(const float* x, float* y, std::int64_t n, float a,
                     float b) {
    __m256 va = _mm256_set1_ps(a);
    __m256 vb = _mm256_set1_ps(b);
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vb));
    for (; i < n; ++i) y[i] = a * x[i] + b;
}

void adam_step_f32(float* p, const float* g, float* m, float* v,
                   std::int64_t n, float lr, float beta1, float beta2,
                   float eps, float c1, float c2) {
    __m256 vb1 = _mm256_set1_ps(beta1);
    __m256 vb2 = _mm256_set1_ps(beta2);
    __m256 vo1 = _mm256_set1_ps(1.f - beta1);
    __m256 vo2 = _mm256_set1_ps(1.f - beta2);
    __m256 vlr = _mm256_set1_ps(lr);
    __m256 veps = _mm256_set1_ps(eps);
    __m256 vc1 = _mm256_set1_ps(c1);
    __m256 vc2 = _mm256_set1_ps(c2);
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vg = _mm256_loadu_ps(g + i);
        __m256 vm = _mm256_loadu_ps(m + i);
        __m256 vv = _mm256_loadu_ps(v + i);
        vm = _mm256_fmadd_ps(vo1, vg, _mm256_mul_ps(vb1, vm));
        vv = _mm256_fmadd_ps(vo2, _mm256_mul_ps(vg, vg), _mm256_mul_ps(vb2, vv));
        _mm256_storeu_ps(m + i, vm);
        _mm256_storeu_ps(v + i, vv);
        __m256 mh = _mm256_mul_ps(vm, vc1);
        __m256 vh = _mm256_mul_ps(vv, vc2);
        __m256 den = _mm256_add_ps(_mm256_sqrt_ps(vh), veps);
        __m256 vp = _mm256_loadu_ps(p + i);
        vp = _mm256_sub_ps(vp, _mm256_div_ps(_mm256_mul_ps(vlr, mh), den));
        _mm256_storeu_ps(p + i, vp);
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.f - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.f - beta2) * g[i] * g[i];
        float mh = m[i] * c1;
        float vh = v[i] * c2;
        p[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
}

void sum_sumsq_f32(const float* x, std::int64_t n, double* sum,
                   double* sumsq) {
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
        __m256d as = _mm256_setzero_pd();
        __m256d aq = _mm256_setzero_pd();
        std::int64_t i = lo;
        for (; i + 8 <= hi; i += 8) {
            __m256 vx = _mm256_loadu_ps(x + i);
            __m256d xl = _mm256_cvtps_pd(_mm256_castps256_ps128(vx));
            __m256d xh = _mm256_cvtps_pd(_mm256_extractf128_ps(vx, 1));
            as = _mm256_add_pd(as, _mm256_add_pd(xl, xh));
            aq = _mm256_fmadd_pd(xl, xl, aq);
            aq = _mm256_fmadd_pd(xh, xh, aq);
        }
        double s = hsum4d(as), q = hsum4d(aq);
        for (; i < hi; ++i) {
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
        __m256d a2 = _mm256_setzero_pd();
        __m256d a3 = _mm256_setzero_pd();
        __m256d a4 = _mm256_setzero_pd();
        std::int64_t i = lo;
        for (; i + 4 <= hi; i += 4) {
            __m256d d = _mm256_sub_pd(_mm256_loadu_pd(v + i + lag),
                                      _mm256_loadu_pd(v + i));
            __m256d d2 = _mm256_mul_pd(d, d);
            a2 = _mm256_add_pd(a2, d2);
            a3 = _mm256_fmadd_pd(d2, d, a3);
            a4 = _mm256_fmadd_pd(d2, d2, a4);
        }
        double b2 = hsum4d(a2), b3 = hsum4d(a3), b4 = hsum4d(a4);
        for (; i < hi; ++i) {
            double d = v[i + lag] - v[i];
            double d2 = d * d;
            b2 += d2;
            b3 += d2 * d;
            b4 += d2 * d2;
        }
        p2[std::size_t(b)] = b2;
        p3[std::size_t(b)] = b3;
        p4[std::size_t(b)] = b4;
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
        __m256d acc = _mm256_setzero_pd();
        std::int64_t i = lo;
        for (; i + 4 <= hi; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
        double s = hsum4d(acc);
        for (; i < hi; ++i) s += x[i];
        ps[std::size_t(b)] = s;
    }
    return combine(ps.data(), nb);
}

} // namespace turb::kern::avx2

#endif

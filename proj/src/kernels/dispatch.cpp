#include "turb/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace turb::kern {

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void conv_row_f32(const float*, std::int64_t, int, std::int64_t, int, int,
                  const float*, float*);
void corr_taps_f32(const float*, const float*, std::int64_t, int, float*);
float dot_f32(const float*, const float*, std::int64_t);
void axpy_f32(float, const float*, float*, std::int64_t);
void leaky_relu_fwd_f32(const float*, float*, std::int64_t, float);
void leaky_relu_bwd_f32(const float*, const float*, float*, std::int64_t,
                        float);
void scale_shift_f32(const float*, float*, std::int64_t, float, float);
void adam_step_f32(float*, const float*, float*, float*, std::int64_t, float,
                   float, float, float, float, float);
void sum_sumsq_f32(const float*, std::int64_t, double*, double*);
void increment_moments_f64(const double*, std::int64_t, std::int64_t, double*,
                           double*, double*);
double sum_f64(const double*, std::int64_t);
} // namespace avx2
#endif

namespace {

const KernelTable kScalarTable = {
    &scalar::conv_row<float>,
    &scalar::corr_taps<float>,
    &scalar::dot<float>,
    &scalar::axpy<float>,
    &scalar::leaky_relu_fwd<float>,
    &scalar::leaky_relu_bwd<float>,
    &scalar::scale_shift<float>,
    &scalar::adam_step<float>,
    &scalar::sum_sumsq<float>,
    &scalar::increment_moments_f64,
    &scalar::sum_f64,
};

#if defined(__x86_64__) || defined(_M_X64)
const KernelTable kAvx2Table = {
    &avx2::conv_row_f32,
    &avx2::corr_taps_f32,
    &avx2::dot_f32,
    &avx2::axpy_f32,
    &avx2::leaky_relu_fwd_f32,
    &avx2::leaky_relu_bwd_f32,
    &avx2::scale_shift_f32,
    &avx2::adam_step_f32,
    &avx2::sum_sumsq_f32,
    &avx2::increment_moments_f64,
    &avx2::sum_f64,
};
#endif

struct State {
    const KernelTable* table;
    const char* name;
};

Backend env_backend() {
    const char* e = std::getenv("TURB_KERNELS");
    if (!e || !*e || std::strcmp(e, "auto") == 0) return Backend::Auto;
    if (std::strcmp(e, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(e, "avx2") == 0) return Backend::Avx2;
    throw std::runtime_error(std::string("TURB_KERNELS: unknown backend '") +
                             e + "' (expected auto|scalar|avx2)");
}

State resolve(Backend b) {
    if (b == Backend::Auto)
        b = avx2_available() ? Backend::Avx2 : Backend::Scalar;
    if (b == Backend::Avx2) {
#if defined(__x86_64__) || defined(_M_X64)
        if (!avx2_available())
            throw std::runtime_error("avx2 kernels requested but the CPU lacks avx2+fma");
        return {&kAvx2Table, "avx2"};
#else
        throw std::runtime_error("avx2 kernels are only built on x86_64");
#endif
    }
    return {&kScalarTable, "scalar"};
}

State& state() {
    static State s = resolve(env_backend());
    return s;
}

} // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

void select_backend(Backend b) { state() = resolve(b); }

const char* backend_name() { return state().name; }

const KernelTable& ops() { return *state().table; }

} // namespace turb::kern

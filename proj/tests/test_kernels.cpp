#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "turb/kernels.hpp"
#include "turb/rng.hpp"

using namespace turb;

namespace {

std::vector<float> randf(std::int64_t n, std::uint64_t idx) {
    rng::Stream s(99, rng::StreamTag::Noise, idx);
    std::vector<float> v(static_cast<std::size_t>(n));
    s.fill_gaussian(v.data(), n);
    return v;
}

std::vector<double> randd(std::int64_t n, std::uint64_t idx) {
    rng::Stream s(77, rng::StreamTag::Noise, idx);
    std::vector<double> v(static_cast<std::size_t>(n));
    s.fill_gaussian(v.data(), n);
    return v;
}

bool close_rel(double a, double b, double tol) {
    double scale = std::max({std::fabs(a), std::fabs(b), 1.0});
    return std::fabs(a - b) <= tol * scale;
}

} // namespace

TEST_CASE("scalar conv_row matches direct evaluation") {
    // 2 input channels, kernel 3, stride 1
    std::vector<float> in = {1, 2, 3, 4, 5, /**/ 10, 20, 30, 40, 50};
    std::vector<float> w = {1, 0, -1, /**/ 2, 0, 0};
    std::vector<float> out(3, 0.f);
    kern::scalar::conv_row(in.data(), 5, 2, 3, 3, 1, w.data(), out.data());
    // channel 0: in[x] - in[x+2]; channel 1: 2*in[x]
    CHECK(out[0] == doctest::Approx(1 - 3 + 20));
    CHECK(out[1] == doctest::Approx(2 - 4 + 40));
    CHECK(out[2] == doctest::Approx(3 - 5 + 60));
}

TEST_CASE("scalar conv_row accumulates into out") {
    std::vector<float> in = {1, 1, 1};
    std::vector<float> w = {1, 1};
    std::vector<float> out = {5, 5};
    kern::scalar::conv_row(in.data(), 3, 1, 2, 2, 1, w.data(), out.data());
    CHECK(out[0] == 7);
    CHECK(out[1] == 7);
}

TEST_CASE("strided conv_row picks every stride-th window") {
    std::vector<float> in = {0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<float> w = {1, 1};
    std::vector<float> out(3, 0.f);
    kern::scalar::conv_row(in.data(), 8, 1, 3, 2, 3, w.data(), out.data());
    CHECK(out[0] == 1);
    CHECK(out[1] == 7);
    CHECK(out[2] == 13);
}

TEST_CASE("increment moments match direct loops") {
    auto v = randd(777, 3);
    double s2, s3, s4;
    kern::scalar::increment_moments_f64(v.data(), 777, 5, &s2, &s3, &s4);
    double e2 = 0, e3 = 0, e4 = 0;
    for (int i = 0; i < 772; ++i) {
        double d = v[std::size_t(i + 5)] - v[std::size_t(i)];
        e2 += d * d;
        e3 += d * d * d;
        e4 += d * d * d * d;
    }
    CHECK(close_rel(s2, e2, 1e-12));
    CHECK(close_rel(s3, e3, 1e-12));
    CHECK(close_rel(s4, e4, 1e-12));
}

TEST_CASE("adam step reference behavior") {
    std::vector<float> p = {1.f}, g = {0.5f}, m = {0.f}, v = {0.f};
    float b1 = 0.5f, b2 = 0.999f;
    float c1 = 1.f / (1.f - b1), c2 = 1.f / (1.f - b2);
    kern::scalar::adam_step(p.data(), g.data(), m.data(), v.data(), 1, 0.1f,
                            b1, b2, 1e-8f, c1, c2);
    // first step: mhat = g, vhat = g^2, update = lr * g/(|g| + eps) ~ lr
    CHECK(p[0] == doctest::Approx(1.f - 0.1f).epsilon(1e-4));
    CHECK(m[0] == doctest::Approx(0.25f));
}

TEST_CASE("avx2 variants agree with scalar") {
    if (!kern::avx2_available()) return;
    kern::select_backend(kern::Backend::Avx2);
    REQUIRE(std::string(kern::backend_name()) == "avx2");
    // sizes straddle the vector width and the block size
    for (std::int64_t n : {1, 7, 8, 9, 63, 64, 1000, 1024, 1025, 5000}) {
        auto a = randf(n + 70, std::uint64_t(n));
        auto b = randf(n + 70, std::uint64_t(n) + 1000);

        float d_avx = kern::ops().dot_f32(a.data(), b.data(), n);
        float d_ref = kern::scalar::dot(a.data(), b.data(), n);
        CHECK(close_rel(d_avx, d_ref, 1e-4));

        std::vector<float> acc_avx(9, 0.f), acc_ref(9, 0.f);
        kern::ops().corr_taps_f32(a.data(), b.data(), n, 9, acc_avx.data());
        kern::scalar::corr_taps(a.data(), b.data(), n, 9, acc_ref.data());
        for (int t = 0; t < 9; ++t) CHECK(close_rel(acc_avx[std::size_t(t)], acc_ref[std::size_t(t)], 1e-4));

        std::vector<float> y_avx(std::size_t(n), 0.5f), y_ref(std::size_t(n), 0.5f);
        kern::ops().axpy_f32(0.3f, a.data(), y_avx.data(), n);
        kern::scalar::axpy(0.3f, a.data(), y_ref.data(), n);
        for (std::int64_t i = 0; i < n; ++i)
            CHECK(close_rel(y_avx[std::size_t(i)], y_ref[std::size_t(i)], 1e-5));

        kern::ops().leaky_relu_fwd_f32(a.data(), y_avx.data(), n, 0.2f);
        kern::scalar::leaky_relu_fwd(a.data(), y_ref.data(), n, 0.2f);
        for (std::int64_t i = 0; i < n; ++i) CHECK(y_avx[std::size_t(i)] == y_ref[std::size_t(i)]);

        kern::ops().leaky_relu_bwd_f32(a.data(), b.data(), y_avx.data(), n, 0.2f);
        kern::scalar::leaky_relu_bwd(a.data(), b.data(), y_ref.data(), n, 0.2f);
        for (std::int64_t i = 0; i < n; ++i) CHECK(y_avx[std::size_t(i)] == y_ref[std::size_t(i)]);

        double s_avx, q_avx, s_ref, q_ref;
        kern::ops().sum_sumsq_f32(a.data(), n, &s_avx, &q_avx);
        kern::scalar::sum_sumsq(a.data(), n, &s_ref, &q_ref);
        CHECK(close_rel(s_avx, s_ref, 1e-6));
        CHECK(close_rel(q_avx, q_ref, 1e-6));
    }
    kern::select_backend(kern::Backend::Auto);
}

TEST_CASE("avx2 conv and moments agree with scalar") {
    if (!kern::avx2_available()) return;
    kern::select_backend(kern::Backend::Avx2);
    for (int k : {1, 2, 5, 8, 33, 64}) {
        std::int64_t l_out = 230;
        std::int64_t in_len = l_out + k;
        int c_in = 3;
        auto in = randf(c_in * in_len, std::uint64_t(k));
        auto w = randf(c_in * k, std::uint64_t(k) + 50);
        std::vector<float> out_avx(std::size_t(l_out), 0.f), out_ref(std::size_t(l_out), 0.f);
        kern::ops().conv_row_f32(in.data(), in_len, c_in, l_out, k, 1, w.data(),
                                 out_avx.data());
        kern::scalar::conv_row(in.data(), in_len, c_in, l_out, k, 1, w.data(),
                               out_ref.data());
        for (std::int64_t i = 0; i < l_out; ++i)
            CHECK(close_rel(out_avx[std::size_t(i)], out_ref[std::size_t(i)], 2e-4));
    }

    auto v = randd(8000, 9);
    for (std::int64_t lag : {1, 7, 512}) {
        double a2, a3, a4, b2, b3, b4;
        kern::ops().increment_moments_f64(v.data(), 8000, lag, &a2, &a3, &a4);
        kern::scalar::increment_moments_f64(v.data(), 8000, lag, &b2, &b3, &b4);
        CHECK(close_rel(a2, b2, 1e-12));
        CHECK(close_rel(a3, b3, 1e-12));
        CHECK(close_rel(a4, b4, 1e-12));
    }

    auto x = randd(5000, 11);
    CHECK(close_rel(kern::ops().sum_f64(x.data(), 5000),
                    kern::scalar::sum_f64(x.data(), 5000), 1e-13));

    // adam: same trajectory over several steps
    std::int64_t n = 300;
    auto g1 = randf(n, 21);
    std::vector<float> p_avx = randf(n, 22), m_avx(std::size_t(n), 0.f), v_avx(std::size_t(n), 0.f);
    std::vector<float> p_ref = p_avx, m_ref = m_avx, v_ref = v_avx;
    float b1 = 0.5f, b2 = 0.999f;
    for (int t = 1; t <= 5; ++t) {
        float c1 = 1.f / (1.f - std::pow(b1, float(t)));
        float c2 = 1.f / (1.f - std::pow(b2, float(t)));
        kern::ops().adam_step_f32(p_avx.data(), g1.data(), m_avx.data(),
                                  v_avx.data(), n, 1e-3f, b1, b2, 1e-8f, c1, c2);
        kern::scalar::adam_step(p_ref.data(), g1.data(), m_ref.data(),
                                v_ref.data(), n, 1e-3f, b1, b2, 1e-8f, c1, c2);
    }
    for (std::int64_t i = 0; i < n; ++i)
        CHECK(close_rel(p_avx[std::size_t(i)], p_ref[std::size_t(i)], 1e-5));
    kern::select_backend(kern::Backend::Auto);
}

TEST_CASE("backend selection is sticky and reports its name") {
    kern::select_backend(kern::Backend::Scalar);
    CHECK(std::string(kern::backend_name()) == "scalar");
    kern::select_backend(kern::Backend::Auto);
    if (kern::avx2_available())
        CHECK(std::string(kern::backend_name()) == "avx2");
    else
        CHECK(std::string(kern::backend_name()) == "scalar");
}

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "turb/rng.hpp"

using namespace turb;

TEST_CASE("streams are deterministic per (seed, tag, index)") {
    rng::Stream a(42, rng::StreamTag::Noise, 7);
    rng::Stream b(42, rng::StreamTag::Noise, 7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u32() == b.next_u32());
}

TEST_CASE("different tags and indices decorrelate streams") {
    rng::Stream a(42, rng::StreamTag::Noise, 0);
    rng::Stream b(42, rng::StreamTag::FbmSpectral, 0);
    rng::Stream c(42, rng::StreamTag::Noise, 1);
    rng::Stream d(43, rng::StreamTag::Noise, 0);
    int same_ab = 0, same_ac = 0, same_ad = 0;
    for (int i = 0; i < 64; ++i) {
        std::uint32_t x = a.next_u32();
        same_ab += x == b.next_u32();
        same_ac += x == c.next_u32();
        same_ad += x == d.next_u32();
    }
    CHECK(same_ab == 0);
    CHECK(same_ac == 0);
    CHECK(same_ad == 0);
}

TEST_CASE("uniforms live strictly inside (0,1)") {
    rng::Stream s(1, rng::StreamTag::Noise, 0);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    int n = 100000;
    for (int i = 0; i < n; ++i) {
        double u = s.next_uniform();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(lo < 0.001);
    CHECK(hi > 0.999);
}

TEST_CASE("gaussian moments are standard normal") {
    rng::Stream s(5, rng::StreamTag::Noise, 0);
    int n = 1 << 20;
    double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
    for (int i = 0; i < n; ++i) {
        double g = s.next_gaussian();
        m1 += g;
        m2 += g * g;
        m3 += g * g * g;
        m4 += g * g * g * g;
    }
    m1 /= n;
    m2 /= n;
    m3 /= n;
    m4 /= n;
    CHECK(std::fabs(m1) < 4.0 / std::sqrt(double(n)));
    CHECK(m2 == doctest::Approx(1.0).epsilon(0.01));
    CHECK(std::fabs(m3) < 0.02);
    CHECK(m4 == doctest::Approx(3.0).epsilon(0.03));
}

TEST_CASE("next_below is unbiased over a small modulus") {
    rng::Stream s(9, rng::StreamTag::Shuffle, 0);
    std::vector<int> counts(5, 0);
    int n = 50000;
    for (int i = 0; i < n; ++i) ++counts[std::size_t(s.next_below(5))];
    for (int c : counts) CHECK(std::fabs(c - n / 5.0) < 5.0 * std::sqrt(n / 5.0));
}

TEST_CASE("shuffle is a deterministic permutation") {
    std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::vector<int> v2 = v1;
    rng::Stream s1(3, rng::StreamTag::Shuffle, 0);
    rng::Stream s2(3, rng::StreamTag::Shuffle, 0);
    rng::shuffle(v1.data(), 10, s1);
    rng::shuffle(v2.data(), 10, s2);
    CHECK(v1 == v2);
    std::vector<int> sorted = v1;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <vector>

#include "turb/checkpoint.hpp"
#include "turb/errors.hpp"
#include "turb/layers.hpp"
#include "turb/optim.hpp"
#include "turb/rng.hpp"
#include "turb/tensor.hpp"

using namespace turb;
using nn::Pad;
using nn::Tensor;

namespace {

constexpr double kStep = 1e-4;
constexpr double kTol = 1e-4;

double rel_gap(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / scale;
}

void fill_gauss(std::vector<double>& v, rng::Stream& s) {
    s.fill_gaussian(v.data(), static_cast<std::int64_t>(v.size()));
}

// loss(x) = sum(gy * layer(x)); compares analytic input and parameter
// gradients against central finite differences.
void gradcheck_layer(nn::Layer<double>& layer, Tensor<double>& in, bool train,
                     std::uint64_t seed) {
    rng::Stream gs(seed, rng::StreamTag::Noise, 999);
    layer.forward(in, train);
    std::vector<double> gy(layer.out().v.size());
    fill_gauss(gy, gs);

    auto loss = [&]() {
        layer.forward(in, train);
        double acc = 0;
        for (std::size_t i = 0; i < gy.size(); ++i)
            acc += gy[i] * layer.out().v[i];
        return acc;
    };

    std::vector<nn::ParamView<double>> params, state;
    layer.collect("p", params, state);
    for (auto& p : params) p.grad->assign(p.grad->size(), 0.0);
    in.zero_grad();
    layer.forward(in, train);
    std::copy(gy.begin(), gy.end(), layer.out().g.begin());
    layer.backward(in, in);

    std::vector<double> analytic_in = in.g;
    std::vector<std::vector<double>> analytic_p;
    for (auto& p : params) analytic_p.push_back(*p.grad);

    double worst = 0;
    for (std::size_t i = 0; i < in.v.size(); ++i) {
        const double keep = in.v[i];
        in.v[i] = keep + kStep;
        const double lp = loss();
        in.v[i] = keep - kStep;
        const double lm = loss();
        in.v[i] = keep;
        const double fd = (lp - lm) / (2 * kStep);
        if (std::abs(fd) < 1e-10 && std::abs(analytic_in[i]) < 1e-10) continue;
        worst = std::max(worst, rel_gap(fd, analytic_in[i]));
    }
    CHECK(worst < kTol);

    double worst_p = 0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& w = *params[pi].value;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double keep = w[i];
            w[i] = keep + kStep;
            const double lp = loss();
            w[i] = keep - kStep;
            const double lm = loss();
            w[i] = keep;
            const double fd = (lp - lm) / (2 * kStep);
            if (std::abs(fd) < 1e-10 && std::abs(analytic_p[pi][i]) < 1e-10)
                continue;
            worst_p = std::max(worst_p, rel_gap(fd, analytic_p[pi][i]));
        }
    }
    CHECK(worst_p < kTol);
}

Tensor<double> random3(std::size_t b, std::size_t c, std::size_t l,
                       std::uint64_t seed) {
    Tensor<double> t = Tensor<double>::zeros3(b, c, l);
    rng::Stream s(seed, rng::StreamTag::Noise, 0);
    fill_gauss(t.v, s);
    return t;
}

Tensor<double> random2(std::size_t b, std::size_t f, std::uint64_t seed) {
    Tensor<double> t = Tensor<double>::zeros2(b, f);
    rng::Stream s(seed, rng::StreamTag::Noise, 0);
    fill_gauss(t.v, s);
    return t;
}

void init_layer(nn::Layer<double>& layer, std::uint64_t seed) {
    rng::Stream s(seed, rng::StreamTag::WeightInit, 0);
    layer.init(s);
}

} // namespace

TEST_CASE("parameter counts for the documented examples") {
    std::vector<nn::ParamView<double>> params, state;
    nn::Dense<double> d(10, 5);
    d.collect("d", params, state);
    CHECK(nn::count_params(params) == 55);

    params.clear();
    nn::Conv1d<double> c(2, 4, 3);
    c.collect("c", params, state);
    CHECK(nn::count_params(params) == 28);

    params.clear();
    state.clear();
    nn::BatchNorm1d<double> bn(7);
    bn.collect("bn", params, state);
    CHECK(nn::count_params(params) == 14);
    CHECK(state.size() == 2);
}

TEST_CASE("leaky relu slope on the negative side") {
    Tensor<float> in = Tensor<float>::zeros3(1, 1, 3);
    in.v = {-1.0f, 0.0f, 2.0f};
    nn::LeakyRelu<float> lr(0.2);
    lr.forward(in, true);
    CHECK(lr.out().v[0] == doctest::Approx(-0.2).epsilon(1e-6));
    CHECK(lr.out().v[1] == 0.0f);
    CHECK(lr.out().v[2] == 2.0f);
}

TEST_CASE("same-padded conv with a centered identity kernel is the identity") {
    Tensor<float> in = Tensor<float>::zeros3(2, 1, 17);
    rng::Stream s(5, rng::StreamTag::Noise, 0);
    s.fill_gaussian(in.v.data(), static_cast<std::int64_t>(in.v.size()));
    nn::Conv1d<float> c(1, 1, 5);
    c.w = {0, 0, 1, 0, 0};
    c.forward(in, true);
    for (std::size_t i = 0; i < in.v.size(); ++i)
        CHECK(c.out().v[i] == in.v[i]);
}

TEST_CASE("conv taps read forward from the padded left edge") {
    // k=3, pad 1|1: out[x] = w0 in[x-1] + w1 in[x] + w2 in[x+1]
    Tensor<float> in = Tensor<float>::zeros3(1, 1, 4);
    in.v = {1, 2, 3, 4};
    nn::Conv1d<float> c(1, 1, 3);
    c.w = {10, 1, 0.5f};
    c.forward(in, true);
    CHECK(c.out().v[0] == doctest::Approx(1 + 1.0));      // 10*0 + 1*1 + 0.5*2
    CHECK(c.out().v[1] == doctest::Approx(10 + 2 + 1.5));
    CHECK(c.out().v[3] == doctest::Approx(30 + 4 + 0));
}

TEST_CASE("even kernels pad the extra sample on the right") {
    // k=2 pads 0|1, so w=[0,1] shifts the signal left
    Tensor<float> in = Tensor<float>::zeros3(1, 1, 5);
    in.v = {1, 2, 3, 4, 5};
    nn::Conv1d<float> c(1, 1, 2);
    c.w = {0, 1};
    c.forward(in, true);
    CHECK(c.out().v == std::vector<float>{2, 3, 4, 5, 0});
}

TEST_CASE("unpadded strided conv shrinks as (L-k)/s+1") {
    Tensor<float> in = Tensor<float>::zeros3(1, 1, 10);
    for (int i = 0; i < 10; ++i) in.v[std::size_t(i)] = float(i);
    nn::Conv1d<float> c(1, 1, 4, 2, Pad::None);
    c.w = {1, 1, 1, 1};
    c.forward(in, true);
    CHECK(c.out().len() == 4);
    CHECK(c.out().v[0] == doctest::Approx(0 + 1 + 2 + 3));
    CHECK(c.out().v[3] == doctest::Approx(6 + 7 + 8 + 9));
}

TEST_CASE("conv rejects mismatched channels naming the layer") {
    Tensor<float> in = Tensor<float>::zeros3(1, 3, 8);
    nn::Conv1d<float> c(2, 4, 3);
    CHECK_THROWS_WITH_AS(c.forward(in, true),
                         doctest::Contains("conv1d"), std::invalid_argument);
}

TEST_CASE("gradient check: same-padded conv, odd and even kernels") {
    Tensor<double> in = random3(2, 2, 12, 11);
    nn::Conv1d<double> c3(2, 3, 3);
    init_layer(c3, 21);
    gradcheck_layer(c3, in, true, 31);

    Tensor<double> in2 = random3(2, 2, 12, 12);
    nn::Conv1d<double> c4(2, 3, 4);
    init_layer(c4, 22);
    gradcheck_layer(c4, in2, true, 32);
}

TEST_CASE("gradient check: unpadded strided conv") {
    Tensor<double> in = random3(2, 2, 18, 13);
    nn::Conv1d<double> c(2, 3, 4, 2, Pad::None);
    init_layer(c, 23);
    gradcheck_layer(c, in, true, 33);
}

TEST_CASE("gradient check: transpose conv, odd and even kernels") {
    Tensor<double> in = random3(2, 2, 12, 14);
    nn::TransposeConv1d<double> t3(2, 3, 3);
    init_layer(t3, 24);
    gradcheck_layer(t3, in, true, 34);

    Tensor<double> in2 = random3(2, 3, 10, 15);
    nn::TransposeConv1d<double> t4(3, 2, 4);
    init_layer(t4, 25);
    gradcheck_layer(t4, in2, true, 35);
}

TEST_CASE("transpose conv is the adjoint of the matching conv") {
    // <C x, y> == <x, C^T y> for every x, y when weights agree
    nn::Conv1d<double> c(2, 3, 4);
    rng::Stream ws(77, rng::StreamTag::WeightInit, 0);
    c.init(ws);
    std::fill(c.b.begin(), c.b.end(), 0.0);
    nn::TransposeConv1d<double> t(3, 2, 4);
    // conv weights [oc][ic][k] -> transpose weights [ic'][oc'][k] with ic'=oc
    for (int oc = 0; oc < 3; ++oc)
        for (int ic = 0; ic < 2; ++ic)
            for (int k = 0; k < 4; ++k)
                t.w[std::size_t((oc * 2 + ic) * 4 + k)] =
                    c.w[std::size_t((oc * 2 + ic) * 4 + k)];
    Tensor<double> x = random3(1, 2, 16, 41);
    Tensor<double> y = random3(1, 3, 16, 42);
    c.forward(x, true);
    double cxy = 0;
    for (std::size_t i = 0; i < y.v.size(); ++i) cxy += c.out().v[i] * y.v[i];
    t.forward(y, true);
    double xty = 0;
    for (std::size_t i = 0; i < x.v.size(); ++i) xty += t.out().v[i] * x.v[i];
    CHECK(cxy == doctest::Approx(xty).epsilon(1e-10));
}

TEST_CASE("gradient check: dense") {
    Tensor<double> in = random2(3, 7, 16);
    nn::Dense<double> d(7, 4);
    init_layer(d, 26);
    gradcheck_layer(d, in, true, 36);
}

TEST_CASE("gradient check: batchnorm in train mode") {
    Tensor<double> in = random3(3, 2, 14, 17);
    nn::BatchNorm1d<double> bn(2);
    bn.gamma = {1.3, 0.7};
    bn.beta = {0.2, -0.4};
    gradcheck_layer(bn, in, true, 37);
}

TEST_CASE("gradient check: batchnorm in eval mode") {
    Tensor<double> in = random3(2, 2, 10, 18);
    nn::BatchNorm1d<double> bn(2);
    bn.running_mean = {0.3, -0.2};
    bn.running_var = {1.5, 0.8};
    bn.gamma = {1.1, 0.9};
    gradcheck_layer(bn, in, false, 38);
}

TEST_CASE("gradient check: pooling, upsampling, activations, flatten") {
    Tensor<double> a = random3(2, 2, 12, 19);
    nn::AvgPool2<double> pool;
    gradcheck_layer(pool, a, true, 39);

    Tensor<double> b = random3(2, 2, 9, 20);
    nn::Upsample2<double> up;
    gradcheck_layer(up, b, true, 40);

    Tensor<double> c = random3(2, 2, 11, 21);
    nn::LeakyRelu<double> lr(0.2);
    gradcheck_layer(lr, c, true, 41);

    Tensor<double> d = random3(2, 2, 11, 22);
    nn::LeakyRelu<double> relu(0.0);
    gradcheck_layer(relu, d, true, 42);

    Tensor<double> e = random3(2, 1, 9, 23);
    nn::Sigmoid<double> sig;
    gradcheck_layer(sig, e, true, 43);

    Tensor<double> f = random3(2, 3, 6, 24);
    nn::Flatten<double> fl;
    gradcheck_layer(fl, f, true, 44);
}

TEST_CASE("gradient check: composite block end to end") {
    nn::Sequential<double> net;
    net.add(std::make_unique<nn::Conv1d<double>>(1, 3, 4), "c0");
    net.add(std::make_unique<nn::BatchNorm1d<double>>(3), "bn0");
    net.add(std::make_unique<nn::LeakyRelu<double>>(0.2), "a0");
    net.add(std::make_unique<nn::AvgPool2<double>>(), "p0");
    net.add(std::make_unique<nn::Flatten<double>>(), "f");
    net.add(std::make_unique<nn::Dense<double>>(18, 1), "head");
    net.add(std::make_unique<nn::Sigmoid<double>>(), "out");
    rng::Stream ws(4242, rng::StreamTag::WeightInit, 0);
    net.init(ws);

    Tensor<double> in = random3(2, 1, 12, 25);
    rng::Stream gs(26, rng::StreamTag::Noise, 999);
    net.forward(in, true);
    std::vector<double> gy(net.out().v.size());
    fill_gauss(gy, gs);

    auto loss = [&]() {
        net.forward(in, true);
        double acc = 0;
        for (std::size_t i = 0; i < gy.size(); ++i)
            acc += gy[i] * net.out().v[i];
        return acc;
    };

    std::vector<nn::ParamView<double>> params, state;
    net.collect("net", params, state);
    for (auto& p : params) p.grad->assign(p.grad->size(), 0.0);
    in.zero_grad();
    net.forward(in, true);
    std::copy(gy.begin(), gy.end(), net.out().g.begin());
    net.backward(in, in);
    std::vector<double> analytic = in.g;
    std::vector<std::vector<double>> analytic_p;
    for (auto& p : params) analytic_p.push_back(*p.grad);

    double worst = 0;
    for (std::size_t i = 0; i < in.v.size(); ++i) {
        const double keep = in.v[i];
        in.v[i] = keep + kStep;
        const double lp = loss();
        in.v[i] = keep - kStep;
        const double lm = loss();
        in.v[i] = keep;
        worst = std::max(worst, rel_gap((lp - lm) / (2 * kStep), analytic[i]));
    }
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& w = *params[pi].value;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double keep = w[i];
            w[i] = keep + kStep;
            const double lp = loss();
            w[i] = keep - kStep;
            const double lm = loss();
            w[i] = keep;
            const double fd = (lp - lm) / (2 * kStep);
            if (std::abs(fd) < 1e-10 && std::abs(analytic_p[pi][i]) < 1e-10)
                continue;
            worst = std::max(worst, rel_gap(fd, analytic_p[pi][i]));
        }
    }
    CHECK(worst < kTol);
}

TEST_CASE("gradient check: channel concat") {
    Tensor<double> a = random3(2, 2, 8, 27);
    Tensor<double> b = random3(2, 3, 8, 28);
    Tensor<double> out;
    nn::concat_channels(a, b, out);
    CHECK(out.ch() == 5);
    CHECK(out.row(1, 1)[3] == a.row(1, 1)[3]);
    CHECK(out.row(0, 4)[5] == b.row(0, 2)[5]);

    rng::Stream gs(29, rng::StreamTag::Noise, 999);
    fill_gauss(out.g, gs);
    a.zero_grad();
    b.zero_grad();
    nn::concat_channels_backward(a, b, out);
    // concat is a copy, so the grad just routes back
    CHECK(a.grow(1, 1)[2] == out.grow(1, 1)[2]);
    CHECK(b.grow(0, 1)[7] == out.grow(0, 3)[7]);
}

TEST_CASE("batchnorm train output is standardized before scale and shift") {
    Tensor<float> in = Tensor<float>::zeros3(4, 3, 50);
    rng::Stream s(31, rng::StreamTag::Noise, 0);
    s.fill_gaussian(in.v.data(), static_cast<std::int64_t>(in.v.size()));
    for (auto& x : in.v) x = 2.5f * x + 0.7f;
    nn::BatchNorm1d<float> bn(3);
    bn.forward(in, true);
    const double m = 4 * 50;
    for (std::size_t c = 0; c < 3; ++c) {
        double s1 = 0, s2 = 0;
        for (std::size_t b = 0; b < 4; ++b)
            for (std::size_t x = 0; x < 50; ++x) {
                const double y = bn.out().row(b, c)[x];
                s1 += y;
                s2 += y * y;
            }
        const double mean = s1 / m;
        const double var = s2 / m - mean * mean;
        CHECK(std::abs(mean) < 1e-5);
        CHECK(std::abs(var - 1.0) < 1e-4);
    }
}

TEST_CASE("batchnorm running averages blend with momentum 0.1") {
    Tensor<float> in = Tensor<float>::zeros3(2, 1, 8);
    std::fill(in.v.begin(), in.v.end(), 3.0f);
    nn::BatchNorm1d<float> bn(1);
    bn.forward(in, true);
    CHECK(bn.running_mean[0] == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(bn.running_var[0] == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("batchnorm eval mode uses the running averages") {
    Tensor<float> in = Tensor<float>::zeros3(1, 1, 4);
    in.v = {1, 2, 3, 4};
    nn::BatchNorm1d<float> bn(1);
    bn.running_mean = {2.0f};
    bn.running_var = {4.0f};
    bn.gamma = {3.0f};
    bn.beta = {1.0f};
    bn.forward(in, false);
    // y = 3*(x-2)/sqrt(4+1e-5) + 1
    CHECK(bn.out().v[0] == doctest::Approx(3.0 * (-1.0) / std::sqrt(4.00001) + 1)
                               .epsilon(1e-6));
    CHECK(bn.out().v[3] == doctest::Approx(3.0 * 2.0 / std::sqrt(4.00001) + 1)
                               .epsilon(1e-6));
}

TEST_CASE("bce loss hits the documented anchor values") {
    Tensor<double> p = Tensor<double>::zeros2(2, 1);
    p.v = {0.5, 0.5};
    CHECK(nn::bce_loss(p, {1, 0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Tensor<double> exact = Tensor<double>::zeros2(2, 1);
    exact.v = {1.0, 0.0};
    CHECK(nn::bce_loss(exact, {1, 0}) < 1e-6);
}

TEST_CASE("gradient check: bce loss") {
    Tensor<double> p = Tensor<double>::zeros2(4, 1);
    p.v = {0.12, 0.45, 0.78, 0.91};
    const std::vector<double> labels{1, 0, 1, 0};
    nn::bce_loss(p, labels);
    std::vector<double> analytic = p.g;
    for (std::size_t i = 0; i < p.v.size(); ++i) {
        const double keep = p.v[i];
        p.v[i] = keep + kStep;
        Tensor<double> tmp = p;
        const double lp = nn::bce_loss(tmp, labels);
        p.v[i] = keep - kStep;
        tmp = p;
        const double lm = nn::bce_loss(tmp, labels);
        p.v[i] = keep;
        CHECK(rel_gap((lp - lm) / (2 * kStep), analytic[i]) < kTol);
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    std::vector<double> w{1.0, -2.0};
    std::vector<double> g{0.0, 0.0};
    nn::Adam<double> opt({{"w", &w, &g}}, 0.001);
    opt.step();
    CHECK(w[0] == 1.0);
    CHECK(w[1] == -2.0);
}

TEST_CASE("adam: bias-corrected first step moves by about lr") {
    std::vector<double> w{0.0};
    std::vector<double> g{1.0};
    nn::Adam<double> opt({{"w", &w, &g}}, 0.001);
    opt.step();
    CHECK(w[0] == doctest::Approx(-0.001).epsilon(1e-4));
}

TEST_CASE("adam: identical runs stay bit-identical over 10 steps") {
    auto run = []() {
        std::vector<double> w{0.3, -0.7, 1.1};
        std::vector<double> g(3, 0.0);
        nn::Adam<double> opt({{"w", &w, &g}}, 0.01);
        rng::Stream s(555, rng::StreamTag::TrainNoise, 0);
        for (int i = 0; i < 10; ++i) {
            s.fill_gaussian(g.data(), 3);
            opt.step();
        }
        return w;
    };
    CHECK(run() == run());
}

TEST_CASE("checkpoint container round-trips every dtype") {
    ckpt::Container c;
    const std::vector<float> wf{1.5f, -2.25f, 0.0f};
    const std::vector<double> wd{3.14159, -1e-9};
    const std::vector<std::int64_t> wi{42, -7};
    c.put_f32("net.w", wf.data(), wf.size());
    c.put_f64("net.b", wd.data(), wd.size());
    c.put_i64("steps", wi.data(), wi.size());
    c.put_scalar_i64("epoch", 17);
    c.put_text("config", "lr=0.001\n");
    const std::string path = "ckpt_roundtrip.bin";
    c.save(path);
    auto r = ckpt::Container::load(path);
    CHECK(r.get("net.w").as_f32() == wf);
    CHECK(r.get("net.b").as_f64() == wd);
    CHECK(r.get("steps").as_i64() == wi);
    CHECK(r.get_scalar_i64("epoch") == 17);
    CHECK(r.get("config").as_text() == "lr=0.001\n");
    CHECK(!r.has("missing"));
    CHECK_THROWS_AS(r.get("missing"), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("checkpoint save is byte-stable") {
    ckpt::Container c;
    const std::vector<float> w{1, 2, 3};
    c.put_f32("w", w.data(), w.size());
    c.put_scalar_i64("epoch", 3);
    c.save("ckpt_a.bin");
    c.save("ckpt_b.bin");
    auto slurp = [](const char* p) {
        std::FILE* f = std::fopen(p, "rb");
        REQUIRE(f);
        std::vector<unsigned char> bytes;
        int ch;
        while ((ch = std::fgetc(f)) != EOF)
            bytes.push_back(static_cast<unsigned char>(ch));
        std::fclose(f);
        return bytes;
    };
    CHECK(slurp("ckpt_a.bin") == slurp("ckpt_b.bin"));
    std::remove("ckpt_a.bin");
    std::remove("ckpt_b.bin");
}

TEST_CASE("checkpoint load rejects foreign and future files") {
    {
        std::FILE* f = std::fopen("ckpt_bad.bin", "wb");
        REQUIRE(f);
        std::fputs("NOTACKPT????", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(ckpt::Container::load("ckpt_bad.bin"), FormatError);
    CHECK_THROWS_AS(ckpt::Container::load("ckpt_absent.bin"), FormatError);

    ckpt::Container c;
    c.put_scalar_i64("epoch", 1);
    c.save("ckpt_future.bin");
    {
        // bump the version field in place
        std::FILE* f = std::fopen("ckpt_future.bin", "rb+");
        REQUIRE(f);
        std::fseek(f, 8, SEEK_SET);
        const std::uint32_t v = 99;
        std::fwrite(&v, sizeof v, 1, f);
        std::fclose(f);
    }
    CHECK_THROWS_WITH_AS(ckpt::Container::load("ckpt_future.bin"),
                         doctest::Contains("version"), FormatError);
    std::remove("ckpt_bad.bin");
    std::remove("ckpt_future.bin");
}

TEST_CASE("weight init draws centered normals with spread 0.02") {
    nn::Conv1d<float> c(8, 16, 8);
    rng::Stream s(99, rng::StreamTag::WeightInit, 0);
    c.init(s);
    double s1 = 0, s2 = 0;
    for (float w : c.w) {
        s1 += w;
        s2 += double(w) * w;
    }
    const double n = double(c.w.size());
    CHECK(std::abs(s1 / n) < 0.002);
    CHECK(std::sqrt(s2 / n) == doctest::Approx(0.02).epsilon(0.05));
    for (float b : c.b) CHECK(b == 0.0f);
}

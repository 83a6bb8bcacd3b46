#include "turb/generator.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace turb::nn {

int GeneratorConfig::channel_at(int level) const {
    const double scaled = channels[static_cast<std::size_t>(level)] * width_multiplier;
    const int c = static_cast<int>(std::lround(scaled));
    return c < 1 ? 1 : c;
}

void GeneratorConfig::validate() const {
    if (levels < 1) throw std::invalid_argument("generator: levels must be >= 1");
    if (kernels.size() != static_cast<std::size_t>(levels) ||
        channels.size() != static_cast<std::size_t>(levels))
        throw std::invalid_argument("generator: schedules must have one entry per level");
    for (int i = 0; i < levels; ++i) {
        if (kernels[static_cast<std::size_t>(i)] < 1)
            throw std::invalid_argument("generator: kernel sizes must be >= 1");
        if (i > 0 && kernels[static_cast<std::size_t>(i)] <
                         kernels[static_cast<std::size_t>(i - 1)])
            throw std::invalid_argument(
                "generator: kernel schedule must be non-decreasing with depth");
    }
    if (bridge_kernel < 1 || bridge_blocks < 1)
        throw std::invalid_argument("generator: bad bridge geometry");
    if (width_multiplier <= 0)
        throw std::invalid_argument("generator: width multiplier must be positive");
}

GeneratorConfig paper_generator() {
    GeneratorConfig cfg;
    cfg.levels = 6;
    cfg.kernels = {2, 4, 8, 16, 32, 64};
    cfg.channels = {12, 24, 48, 96, 176, 288};
    cfg.bridge_kernel = 32;
    cfg.bridge_blocks = 3;
    return cfg;
}

GeneratorConfig desk_generator() {
    GeneratorConfig cfg;
    cfg.levels = 4;
    cfg.kernels = {2, 4, 8, 16};
    cfg.channels = {8, 16, 24, 32};
    cfg.bridge_kernel = 8;
    cfg.bridge_blocks = 3;
    return cfg;
}

std::int64_t receptive_field(const GeneratorConfig& cfg) {
    std::int64_t rf = 1, jump = 1;
    for (int i = 0; i < cfg.levels; ++i) {
        rf += 2 * std::int64_t(cfg.kernels[static_cast<std::size_t>(i)] - 1) * jump;
        rf += jump;  // pooling window
        jump *= 2;
    }
    rf += std::int64_t(cfg.bridge_blocks) * (cfg.bridge_kernel - 1) * jump;
    for (int i = cfg.levels - 1; i >= 0; --i) {
        jump /= 2;
        rf += std::int64_t(cfg.kernels[static_cast<std::size_t>(i)] - 1) * jump;
    }
    return rf;
}

namespace {

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t next = s.find(',', pos);
        if (next == std::string::npos) next = s.size();
        out.push_back(std::stoi(s.substr(pos, next - pos)));
        pos = next + 1;
    }
    return out;
}

} // namespace

std::string generator_config_text(const GeneratorConfig& cfg) {
    std::string s;
    s += "levels=" + std::to_string(cfg.levels) + "\n";
    s += "kernels=" + join_ints(cfg.kernels) + "\n";
    s += "channels=" + join_ints(cfg.channels) + "\n";
    s += "bridge_kernel=" + std::to_string(cfg.bridge_kernel) + "\n";
    s += "bridge_blocks=" + std::to_string(cfg.bridge_blocks) + "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "width_multiplier=%.17g\n",
                  cfg.width_multiplier);
    s += buf;
    return s;
}

GeneratorConfig parse_generator_config_text(const std::string& text) {
    GeneratorConfig cfg;
    cfg.kernels.clear();
    cfg.channels.clear();
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("generator config: bad line '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "levels")
            cfg.levels = std::stoi(val);
        else if (key == "kernels")
            cfg.kernels = split_ints(val);
        else if (key == "channels")
            cfg.channels = split_ints(val);
        else if (key == "bridge_kernel")
            cfg.bridge_kernel = std::stoi(val);
        else if (key == "bridge_blocks")
            cfg.bridge_blocks = std::stoi(val);
        else if (key == "width_multiplier")
            cfg.width_multiplier = std::stod(val);
        else
            throw std::invalid_argument("generator config: unknown key '" + key +
                                        "'");
    }
    cfg.validate();
    return cfg;
}

namespace {

template <class T>
void add_conv_block(Sequential<T>& seq, int in_ch, int out_ch, int k, int idx) {
    const std::string tag = "c" + std::to_string(idx);
    seq.add(std::make_unique<Conv1d<T>>(in_ch, out_ch, k), tag);
    seq.add(std::make_unique<BatchNorm1d<T>>(out_ch), tag + ".bn");
    seq.add(std::make_unique<LeakyRelu<T>>(0.0), tag + ".relu");
}

} // namespace

template <class T>
UNet<T>::UNet(const GeneratorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    for (int i = 0; i < cfg_.levels; ++i) {
        auto lvl = std::make_unique<Level>();
        const int cin = i == 0 ? 1 : cfg_.channel_at(i - 1);
        const int ci = cfg_.channel_at(i);
        const int k = cfg_.kernels[static_cast<std::size_t>(i)];
        add_conv_block(lvl->enc, cin, ci, k, 0);
        add_conv_block(lvl->enc, ci, ci, k, 1);
        const int cout = cfg_.channel_at(i == 0 ? 0 : i - 1);
        lvl->dec.add(std::make_unique<TransposeConv1d<T>>(2 * ci, cout, k), "t0");
        lvl->dec.add(std::make_unique<BatchNorm1d<T>>(cout), "t0.bn");
        lvl->dec.add(std::make_unique<LeakyRelu<T>>(0.0), "t0.relu");
        levels_.push_back(std::move(lvl));
    }
    const int cb = cfg_.channel_at(cfg_.levels - 1);
    for (int j = 0; j < cfg_.bridge_blocks; ++j)
        add_conv_block(bridge_, cb, cb, cfg_.bridge_kernel, j);
    head_ = std::make_unique<Conv1d<T>>(cfg_.channel_at(0), 1, 1);
}

template <class T>
Tensor<T>& UNet<T>::forward(const Tensor<T>& in, bool train) {
    if (in.rank() != 3 || in.ch() != 1)
        throw std::invalid_argument("generator: (B, 1, N) input required");
    const std::size_t div = std::size_t(1) << cfg_.levels;
    if (in.len() % div != 0)
        throw std::invalid_argument("generator: input length " +
                                    std::to_string(in.len()) +
                                    " not divisible by " + std::to_string(div));
    const Tensor<T>* cur = &in;
    for (auto& lvl : levels_) {
        lvl->enc.forward(*cur, train);
        lvl->pool.forward(lvl->enc.out(), train);
        cur = &lvl->pool.out();
    }
    bridge_.forward(*cur, train);
    const Tensor<T>* below = &bridge_.out();
    for (int i = cfg_.levels - 1; i >= 0; --i) {
        auto& lvl = *levels_[static_cast<std::size_t>(i)];
        lvl.up.forward(*below, train);
        concat_channels(lvl.up.out(), lvl.enc.out(), lvl.cat);
        lvl.dec.forward(lvl.cat, train);
        below = &lvl.dec.out();
    }
    head_->forward(*below, train);
    return head_->out();
}

template <class T>
void UNet<T>::backward(const Tensor<T>& in, Tensor<T>& gin) {
    for (auto& lvl : levels_) {
        lvl->enc.out().zero_grad();
        lvl->pool.out().zero_grad();
        lvl->up.out().zero_grad();
        lvl->cat.zero_grad();
        lvl->dec.out().zero_grad();
    }
    bridge_.out().zero_grad();

    head_->backward(levels_[0]->dec.out(), levels_[0]->dec.out());
    for (int i = 0; i < cfg_.levels; ++i) {
        auto& lvl = *levels_[static_cast<std::size_t>(i)];
        lvl.dec.backward(lvl.cat, lvl.cat);
        concat_channels_backward(lvl.up.out(), lvl.enc.out(), lvl.cat);
        Tensor<T>& below = i + 1 < cfg_.levels
                               ? levels_[static_cast<std::size_t>(i + 1)]->dec.out()
                               : bridge_.out();
        lvl.up.backward(below, below);
    }
    Tensor<T>& deepest = levels_.back()->pool.out();
    bridge_.backward(deepest, deepest);
    for (int i = cfg_.levels - 1; i >= 0; --i) {
        auto& lvl = *levels_[static_cast<std::size_t>(i)];
        // the skip contribution is already on enc.out(); pooling adds its share
        lvl.pool.backward(lvl.enc.out(), lvl.enc.out());
        if (i > 0) {
            Tensor<T>& prev = levels_[static_cast<std::size_t>(i - 1)]->pool.out();
            lvl.enc.backward(prev, prev);
        } else {
            lvl.enc.backward(in, gin);
        }
    }
}

template <class T>
void UNet<T>::collect(std::vector<ParamView<T>>& params,
                      std::vector<ParamView<T>>& state) {
    for (int i = 0; i < cfg_.levels; ++i) {
        levels_[static_cast<std::size_t>(i)]->enc.collect(
            "enc" + std::to_string(i), params, state);
    }
    bridge_.collect("bridge", params, state);
    for (int i = 0; i < cfg_.levels; ++i) {
        levels_[static_cast<std::size_t>(i)]->dec.collect(
            "dec" + std::to_string(i), params, state);
    }
    head_->collect("head", params, state);
}

template <class T>
void UNet<T>::init(rng::Stream& stream) {
    for (auto& lvl : levels_) lvl->enc.init(stream);
    bridge_.init(stream);
    for (auto& lvl : levels_) lvl->dec.init(stream);
    head_->init(stream);
}

template <class T>
FieldEnsemble generate(UNet<T>& model, std::size_t R, std::size_t N,
                       std::size_t n_b, std::uint64_t seed) {
    if (R < 1 || N < 1) throw std::invalid_argument("generate: empty request");
    if (n_b % 2 != 0)
        throw std::invalid_argument("generate: border trim must be even");
    const std::size_t div = std::size_t(1) << model.config().levels;
    if ((N + n_b) % div != 0)
        throw std::invalid_argument("generate: N + n_b must be divisible by " +
                                    std::to_string(div));
    const std::size_t total = N + n_b;
    FieldEnsemble ens(R, total);
    Tensor<T> noise = Tensor<T>::zeros3(1, 1, total);
    for (std::size_t r = 0; r < R; ++r) {
        rng::Stream s(seed, rng::StreamTag::Noise, r);
        s.fill_gaussian(noise.v.data(), static_cast<std::int64_t>(total));
        Tensor<T>& y = model.forward(noise, false);
        double* dst = ens.row(r);
        const T* src = y.row(0, 0);
        for (std::size_t x = 0; x < total; ++x) dst[x] = double(src[x]);
    }
    if (n_b == 0) return ens;
    return trim_borders(ens, static_cast<std::int64_t>(n_b));
}

template class UNet<float>;
template class UNet<double>;
template FieldEnsemble generate(UNet<float>&, std::size_t, std::size_t,
                                std::size_t, std::uint64_t);
template FieldEnsemble generate(UNet<double>&, std::size_t, std::size_t,
                                std::size_t, std::uint64_t);

} // namespace turb::nn

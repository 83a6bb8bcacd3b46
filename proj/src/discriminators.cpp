#include "turb/discriminators.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace turb::nn {

// ------------------------------------------------------------- StatCritic

template <class T>
StatCritic<T>::StatCritic(const StatCriticConfig& cfg) : cfg_(cfg) {
    if (cfg_.input_len < 1 || cfg_.hidden.empty())
        throw std::invalid_argument("stat critic: bad geometry");
    int prev = cfg_.input_len;
    for (std::size_t i = 0; i < cfg_.hidden.size(); ++i) {
        const std::string tag = "d" + std::to_string(i);
        net_.add(std::make_unique<Dense<T>>(prev, cfg_.hidden[i]), tag);
        net_.add(std::make_unique<LeakyRelu<T>>(cfg_.slope), tag + ".act");
        prev = cfg_.hidden[i];
    }
    net_.add(std::make_unique<Dense<T>>(prev, 1), "head");
    net_.add(std::make_unique<Sigmoid<T>>(), "head.sig");
}

template <class T>
Tensor<T>& StatCritic<T>::forward(const Tensor<T>& curves, bool train) {
    return net_.forward(curves, train);
}

template <class T>
void StatCritic<T>::backward(const Tensor<T>& curves, Tensor<T>& gin) {
    net_.backward(curves, gin);
}

template <class T>
void StatCritic<T>::collect(const std::string& prefix,
                            std::vector<ParamView<T>>& params,
                            std::vector<ParamView<T>>& state) {
    net_.collect(prefix, params, state);
}

template <class T>
void StatCritic<T>::init(rng::Stream& stream) {
    net_.init(stream);
}

// --------------------------------------------------------------- ScaleNet

template <class T>
ScaleNet<T>::ScaleNet(const ScaleNetConfig& cfg) : cfg_(cfg) {
    if (cfg_.segment_len < 1) throw std::invalid_argument("scale net: bad length");
    int ch = 1;
    std::int64_t l = cfg_.segment_len;
    for (std::size_t i = 0; i < cfg_.conv_channels.size(); ++i) {
        if (l < cfg_.kernel)
            throw std::invalid_argument("scale net: segment too short for the conv stack");
        const std::string tag = "c" + std::to_string(i);
        net_.add(std::make_unique<Conv1d<T>>(ch, cfg_.conv_channels[i], cfg_.kernel,
                                             cfg_.stride, Pad::None),
                 tag);
        net_.add(std::make_unique<BatchNorm1d<T>>(cfg_.conv_channels[i]), tag + ".bn");
        net_.add(std::make_unique<LeakyRelu<T>>(cfg_.slope), tag + ".act");
        ch = cfg_.conv_channels[i];
        l = (l - cfg_.kernel) / cfg_.stride + 1;
    }
    net_.add(std::make_unique<Flatten<T>>(), "flat");
    const int flat = int(l) * ch;
    net_.add(std::make_unique<Dense<T>>(flat, cfg_.dense_hidden), "d0");
    net_.add(std::make_unique<LeakyRelu<T>>(cfg_.slope), "d0.act");
    net_.add(std::make_unique<Dense<T>>(cfg_.dense_hidden, 1), "head");
    if (cfg_.sigmoid) net_.add(std::make_unique<Sigmoid<T>>(), "head.sig");
}

template <class T>
Tensor<T>& ScaleNet<T>::forward(const Tensor<T>& segments, bool train) {
    return net_.forward(segments, train);
}

template <class T>
void ScaleNet<T>::backward(const Tensor<T>& segments, Tensor<T>& gin) {
    net_.backward(segments, gin);
}

template <class T>
void ScaleNet<T>::collect(const std::string& prefix, std::vector<ParamView<T>>& params,
                          std::vector<ParamView<T>>& state) {
    net_.collect(prefix, params, state);
}

template <class T>
void ScaleNet<T>::init(rng::Stream& stream) {
    net_.init(stream);
}

// --------------------------------------------------- SegmentDiscriminator

template <class T>
SegmentDiscriminator<T>::SegmentDiscriminator(std::size_t n) : n_(n) {
    if (n == 0 || n % 16 != 0)
        throw std::invalid_argument("segment discriminator: N must divide by 16");
    segs_.resize(kScales);
    for (int s = 0; s < kScales; ++s) {
        ScaleNetConfig cfg;
        cfg.segment_len = int(n_) / segment_count(s);
        nets_.push_back(std::make_unique<ScaleNet<T>>(cfg));
    }
}

template <class T>
Tensor<T>& SegmentDiscriminator<T>::forward(const Tensor<T>& signal, bool train) {
    if (signal.rank() != 3 || signal.ch() != 1 || signal.len() != n_)
        throw std::invalid_argument("segment discriminator: (B, 1, " +
                                    std::to_string(n_) + ") input required");
    const std::size_t B = signal.batch();
    scores_.resize2(B, kTotalSegments);
    int col = 0;
    for (int s = 0; s < kScales; ++s) {
        const std::size_t count = static_cast<std::size_t>(segment_count(s));
        const std::size_t len = n_ / count;
        segs_[static_cast<std::size_t>(s)].resize3(B * count, 1, len);
        Tensor<T>& seg = segs_[static_cast<std::size_t>(s)];
        for (std::size_t b = 0; b < B; ++b) {
            const T* src = signal.row(b, 0);
            for (std::size_t j = 0; j < count; ++j)
                std::copy(src + j * len, src + (j + 1) * len,
                          seg.row(b * count + j, 0));
        }
        Tensor<T>& y = nets_[static_cast<std::size_t>(s)]->forward(seg, train);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t j = 0; j < count; ++j)
                scores_.v[b * kTotalSegments + static_cast<std::size_t>(col) + j] =
                    y.v[b * count + j];
        col += int(count);
    }
    return scores_;
}

template <class T>
void SegmentDiscriminator<T>::backward(const Tensor<T>& signal, Tensor<T>& gin) {
    const std::size_t B = signal.batch();
    int col = 0;
    for (int s = 0; s < kScales; ++s) {
        const std::size_t count = static_cast<std::size_t>(segment_count(s));
        const std::size_t len = n_ / count;
        Tensor<T>& seg = segs_[static_cast<std::size_t>(s)];
        Tensor<T>& y = nets_[static_cast<std::size_t>(s)]->out();
        y.zero_grad();
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t j = 0; j < count; ++j)
                y.g[b * count + j] =
                    scores_.g[b * kTotalSegments + static_cast<std::size_t>(col) + j];
        seg.zero_grad();
        nets_[static_cast<std::size_t>(s)]->backward(seg, seg);
        for (std::size_t b = 0; b < B; ++b) {
            T* dst = gin.grow(b, 0);
            for (std::size_t j = 0; j < count; ++j) {
                const T* src = seg.grow(b * count + j, 0);
                for (std::size_t x = 0; x < len; ++x) dst[j * len + x] += src[x];
            }
        }
        col += int(count);
    }
}

template <class T>
void SegmentDiscriminator<T>::collect(const std::string& prefix,
                                      std::vector<ParamView<T>>& params,
                                      std::vector<ParamView<T>>& state) {
    for (int s = 0; s < kScales; ++s)
        nets_[static_cast<std::size_t>(s)]->collect(
            prefix + ".scale" + std::to_string(s), params, state);
}

template <class T>
void SegmentDiscriminator<T>::init(rng::Stream& stream) {
    for (auto& n : nets_) n->init(stream);
}

// ---------------------------------------------------------------- si_loss

double segment_loss_weight(int scale) {
    return 1.0 / double(1 << scale);
}

int si_slot_scale(std::size_t slot) {
    if (slot < 2) return 0;
    if (slot < 6) return 1;
    if (slot < 14) return 2;
    return 3;
}

double si_loss(const std::vector<double>& per_segment_losses) {
    constexpr std::size_t kSlots = SegmentDiscriminator<float>::kTotalSegments;
    if (per_segment_losses.size() != kSlots)
        throw std::invalid_argument("si_loss: expected 30 per-segment losses");
    double acc = 0;
    for (std::size_t i = 0; i < per_segment_losses.size(); ++i)
        acc += segment_loss_weight(si_slot_scale(i)) * per_segment_losses[i];
    return acc;
}

void si_loss_backward(const std::vector<double>& per_segment_grads,
                      std::vector<double>& weighted) {
    constexpr std::size_t kSlots = SegmentDiscriminator<float>::kTotalSegments;
    if (per_segment_grads.size() != kSlots)
        throw std::invalid_argument("si_loss: expected 30 per-segment gradients");
    weighted.resize(per_segment_grads.size());
    for (std::size_t i = 0; i < per_segment_grads.size(); ++i)
        weighted[i] = segment_loss_weight(si_slot_scale(i)) * per_segment_grads[i];
}

// -------------------------------------------------- BaselineDiscriminator

template <class T>
BaselineDiscriminator<T>::BaselineDiscriminator(std::size_t n, bool sigmoid) {
    ScaleNetConfig cfg;
    cfg.segment_len = int(n);
    cfg.sigmoid = sigmoid;
    net_ = std::make_unique<ScaleNet<T>>(cfg);
}

template <class T>
Tensor<T>& BaselineDiscriminator<T>::forward(const Tensor<T>& signal, bool train) {
    return net_->forward(signal, train);
}

template <class T>
void BaselineDiscriminator<T>::backward(const Tensor<T>& signal, Tensor<T>& gin) {
    net_->backward(signal, gin);
}

template <class T>
void BaselineDiscriminator<T>::collect(const std::string& prefix,
                                       std::vector<ParamView<T>>& params,
                                       std::vector<ParamView<T>>& state) {
    net_->collect(prefix, params, state);
}

template <class T>
void BaselineDiscriminator<T>::init(rng::Stream& stream) {
    net_->init(stream);
}

// ------------------------------------------------------- instantiations

template class StatCritic<float>;
template class StatCritic<double>;
template class ScaleNet<float>;
template class ScaleNet<double>;
template class SegmentDiscriminator<float>;
template class SegmentDiscriminator<double>;
template class BaselineDiscriminator<float>;
template class BaselineDiscriminator<double>;

} // namespace turb::nn

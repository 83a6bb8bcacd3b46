#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "turb/layers.hpp"
#include "turb/rng.hpp"
#include "turb/tensor.hpp"

namespace turb::nn {

// Dense critic scoring one statistic curve; sigmoid scalar head, no
// normalization layers. First hidden width scaled so the three identical
// critics together meet the combined budget on the default 24-lag grid.
struct StatCriticConfig {
    int input_len = 24;
    std::vector<int> hidden = {72, 48, 32, 24, 16};
    double slope = 0.2;
};

template <class T>
class StatCritic {
public:
    explicit StatCritic(const StatCriticConfig& cfg = {});

    // curves: (B, input_len) -> (B, 1) in (0,1)
    Tensor<T>& forward(const Tensor<T>& curves, bool train);
    void backward(const Tensor<T>& curves, Tensor<T>& gin);
    Tensor<T>& out() { return net_.out(); }

    void collect(const std::string& prefix, std::vector<ParamView<T>>& params,
                 std::vector<ParamView<T>>& state);
    void init(rng::Stream& stream);

private:
    StatCriticConfig cfg_;
    Sequential<T> net_;
};

// One scale network of the segment discriminator: strided conv blocks with
// batchnorm and leaky-relu, then a dense head. sigmoid=false yields the
// unbounded critic variant.
struct ScaleNetConfig {
    int segment_len = 0;
    std::vector<int> conv_channels = {6, 12, 8};
    int kernel = 8;
    int stride = 2;
    int dense_hidden = 6;
    double slope = 0.2;
    bool sigmoid = true;
};

template <class T>
class ScaleNet {
public:
    explicit ScaleNet(const ScaleNetConfig& cfg);

    // segments: (B, 1, segment_len) -> (B, 1)
    Tensor<T>& forward(const Tensor<T>& segments, bool train);
    void backward(const Tensor<T>& segments, Tensor<T>& gin);
    Tensor<T>& out() { return net_.out(); }

    void collect(const std::string& prefix, std::vector<ParamView<T>>& params,
                 std::vector<ParamView<T>>& state);
    void init(rng::Stream& stream);
    const ScaleNetConfig& config() const { return cfg_; }

private:
    ScaleNetConfig cfg_;
    Sequential<T> net_;
};

// Four weight-shared scale networks scoring the disjoint halves, quarters,
// eighths, and sixteenths of each signal: 30 scores per signal.
template <class T>
class SegmentDiscriminator {
public:
    // n: full signal length, divisible by 16.
    explicit SegmentDiscriminator(std::size_t n);

    // signal: (B, 1, N) -> scores (B, 30), halves first, sixteenths last.
    Tensor<T>& forward(const Tensor<T>& signal, bool train);
    void backward(const Tensor<T>& signal, Tensor<T>& gin);
    Tensor<T>& out() { return scores_; }

    void collect(const std::string& prefix, std::vector<ParamView<T>>& params,
                 std::vector<ParamView<T>>& state);
    void init(rng::Stream& stream);

    static constexpr int kScales = 4;
    static constexpr int kTotalSegments = 2 + 4 + 8 + 16;
    static int segment_count(int scale) { return 2 << scale; }

private:
    std::size_t n_;
    std::vector<std::unique_ptr<ScaleNet<T>>> nets_;
    std::vector<Tensor<T>> segs_;  // per scale: (B*count, 1, len)
    Tensor<T> scores_;
};

// Per-segment loss weighting: halves 1, quarters 0.5, eighths 0.25,
// sixteenths 0.125. Losses arrive in forward() score order.
double segment_loss_weight(int scale);
int si_slot_scale(std::size_t slot);
double si_loss(const std::vector<double>& per_segment_losses);

// Fills (B, 30) gradient slots with the same weighting applied to
// per-segment gradient values.
void si_loss_backward(const std::vector<double>& per_segment_grads,
                      std::vector<double>& weighted);

// Whole-signal discriminator used by the single-critic baselines; an
// SI-style scale network applied to the full length-N signal.
template <class T>
class BaselineDiscriminator {
public:
    BaselineDiscriminator(std::size_t n, bool sigmoid);

    Tensor<T>& forward(const Tensor<T>& signal, bool train);
    void backward(const Tensor<T>& signal, Tensor<T>& gin);
    Tensor<T>& out() { return net_->out(); }

    void collect(const std::string& prefix, std::vector<ParamView<T>>& params,
                 std::vector<ParamView<T>>& state);
    void init(rng::Stream& stream);

private:
    std::unique_ptr<ScaleNet<T>> net_;
};

} // namespace turb::nn

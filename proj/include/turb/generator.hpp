#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "turb/field.hpp"
#include "turb/layers.hpp"
#include "turb/rng.hpp"
#include "turb/tensor.hpp"

namespace turb::nn {

// Fully convolutional encoder/decoder with concatenated long skips. Kernel
// sizes grow with depth so each level's taps cover a constant physical span
// after pooling.
struct GeneratorConfig {
    int levels = 6;
    std::vector<int> kernels;   // per encoder level, mirrored by the decoder
    std::vector<int> channels;  // per level, before width_multiplier
    int bridge_kernel = 32;
    int bridge_blocks = 3;
    double width_multiplier = 1.0;

    int channel_at(int level) const;
    void validate() const;
};

// ~26M parameters, 6 levels, kernels doubling 2..64.
GeneratorConfig paper_generator();
// ~1e5 parameters, 4 levels; sized for smoke training.
GeneratorConfig desk_generator();

// Width, in input samples, of the window one output sample depends on.
std::int64_t receptive_field(const GeneratorConfig& cfg);

// key=value text round-trip, used to rebuild a model from a checkpoint.
std::string generator_config_text(const GeneratorConfig& cfg);
GeneratorConfig parse_generator_config_text(const std::string& text);

template <class T>
class UNet {
public:
    explicit UNet(const GeneratorConfig& cfg);

    // in: (B, 1, N) with N divisible by 2^levels.
    Tensor<T>& forward(const Tensor<T>& in, bool train);
    // Seeds: out().g set by the caller; accumulates into gin.g.
    void backward(const Tensor<T>& in, Tensor<T>& gin);
    Tensor<T>& out() { return head_->out(); }

    void collect(std::vector<ParamView<T>>& params, std::vector<ParamView<T>>& state);
    void init(rng::Stream& stream);
    const GeneratorConfig& config() const { return cfg_; }

private:
    struct Level {
        Sequential<T> enc;
        AvgPool2<T> pool;
        Upsample2<T> up;
        Tensor<T> cat;
        Sequential<T> dec;
    };

    GeneratorConfig cfg_;
    std::vector<std::unique_ptr<Level>> levels_;
    Sequential<T> bridge_;
    std::unique_ptr<Conv1d<T>> head_;
};

// Runs the model in eval mode on R unit-normal noises of length N + n_b and
// trims n_b border samples from each realization.
template <class T>
FieldEnsemble generate(UNet<T>& model, std::size_t R, std::size_t N,
                       std::size_t n_b, std::uint64_t seed);

} // namespace turb::nn

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "turb/rng.hpp"
#include "turb/tensor.hpp"

// Differentiable layers, manual reverse mode: forward() fills out(), the
// caller seeds out().g, backward() accumulates into the input's grad and the
// layer's parameter grads. backward() must follow the forward() whose cached
// buffers it consumes. float instantiations run on the active kernel backend,
// double instantiations stay on the scalar path for gradient checks.

namespace turb::nn {

enum class Pad { Same, None };

template <class T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual void forward(const Tensor<T>& in, bool train) = 0;
    virtual void backward(const Tensor<T>& in, Tensor<T>& gin) = 0;
    virtual void collect(const std::string& prefix, std::vector<ParamView<T>>& params,
                         std::vector<ParamView<T>>& state) {
        (void)prefix;
        (void)params;
        (void)state;
    }
    virtual void init(rng::Stream& stream) { (void)stream; }
    virtual const char* kind() const = 0;

    Tensor<T>& out() { return out_; }
    const Tensor<T>& out() const { return out_; }

protected:
    Tensor<T> out_;
};

// Cross-correlation layer; weights laid out [out_ch][in_ch][k]. Same padding
// keeps the length (stride must be 1, even kernels pad one extra sample on
// the right); Pad::None shrinks to (L - k)/stride + 1.
template <class T>
class Conv1d : public Layer<T> {
public:
    Conv1d(int in_ch, int out_ch, int k, int stride = 1, Pad pad = Pad::Same);

    void forward(const Tensor<T>& in, bool train) override;
    void backward(const Tensor<T>& in, Tensor<T>& gin) override;
    void collect(const std::string& prefix, std::vector<ParamView<T>>& params,
                 std::vector<ParamView<T>>& state) override;
    void init(rng::Stream& stream) override;
    const char* kind() const override { return "conv1d"; }

    std::vector<T> w, b, gw, gb;

private:
    int in_ch_, out_ch_, k_, stride_;
    Pad pad_;
    std::vector<T> padded_;  // (B, in_ch, L + k - 1), zero margins
    std::vector<T> gpad_;    // padded output grad for the data pass
    std::vector<T> wt_;      // flipped + transposed weights [in_ch][out_ch][k]
};

// Adjoint of a stride-1 same-padding Conv1d; weights [in_ch][out_ch][k].
// Output length equals input length.
template <class T>
class TransposeConv1d : public Layer<T> {
public:
    TransposeConv1d(int in_ch, int out_ch, int k);

    void forward(const Tensor<T>& in, bool train) override;
    void backward(const Tensor<T>& in, Tensor<T>& gin) override;
    void collect(const std::string& prefix, std::vector<ParamView<T>>& params,
                 std::vector<ParamView<T>>& state) override;
    void init(rng::Stream& stream) override;
    const char* kind() const override { return "transpose_conv1d"; }

    std::vector<T> w, b, gw, gb;

private:
    int in_ch_, out_ch_, k_;
    std::vector<T> padded_;
    std::vector<T> gpad_;
    std::vector<T> wt_;   // forward-ready [out_ch][in_ch][k], flipped
    std::vector<T> gwt_;  // grad in the flipped layout, folded back after
};

// Fully connected layer on rank-2 tensors; weights [out_f][in_f].
template <class T>
class Dense : public Layer<T> {
public:
    Dense(int in_f, int out_f);

    void forward(const Tensor<T>& in, bool train) override;
    void backward(const Tensor<T>& in, Tensor<T>& gin) override;
    void collect(const std::string& prefix, std::vector<ParamView<T>>& params,
                 std::vector<ParamView<T>>& state) override;
    void init(rng::Stream& stream) override;
    const char* kind() const override { return "dense"; }

    std::vector<T> w, b, gw, gb;

private:
    int in_f_, out_f_;
};

// Per-channel normalization. Train mode uses biased batch statistics and
// updates running averages with momentum 0.1; eval mode uses the running
// averages. Rank-2 input is treated as (B, C, 1).
template <class T>
class BatchNorm1d : public Layer<T> {
public:
    explicit BatchNorm1d(int channels);

    void forward(const Tensor<T>& in, bool train) override;
    void backward(const Tensor<T>& in, Tensor<T>& gin) override;
    void collect(const std::string& prefix, std::vector<ParamView<T>>& params,
                 std::vector<ParamView<T>>& state) override;
    const char* kind() const override { return "batchnorm"; }

    std::vector<T> gamma, beta, ggamma, gbeta;
    std::vector<T> running_mean, running_var;

    static constexpr double kEps = 1e-5;
    static constexpr double kMomentum = 0.1;

private:
    int c_;
    bool last_train_ = true;
    std::vector<T> xhat_;
    std::vector<double> inv_std_;
};

template <class T>
class AvgPool2 : public Layer<T> {
public:
    void forward(const Tensor<T>& in, bool train) override;
    void backward(const Tensor<T>& in, Tensor<T>& gin) override;
    const char* kind() const override { return "avgpool2"; }

private:
    using Layer<T>::out_;
};

// Nearest-neighbor doubling: out[2x] = out[2x+1] = in[x].
template <class T>
class Upsample2 : public Layer<T> {
public:
    void forward(const Tensor<T>& in, bool train) override;
    void backward(const Tensor<T>& in, Tensor<T>& gin) override;
    const char* kind() const override { return "upsample2"; }

private:
    using Layer<T>::out_;
};

// slope 0 gives plain relu.
template <class T>
class LeakyRelu : public Layer<T> {
public:
    explicit LeakyRelu(double slope) : slope_(slope) {}

    void forward(const Tensor<T>& in, bool train) override;
    void backward(const Tensor<T>& in, Tensor<T>& gin) override;
    const char* kind() const override { return slope_ == 0.0 ? "relu" : "leaky_relu"; }

private:
    double slope_;
    std::vector<T> scratch_;
};

template <class T>
class Sigmoid : public Layer<T> {
public:
    void forward(const Tensor<T>& in, bool train) override;
    void backward(const Tensor<T>& in, Tensor<T>& gin) override;
    const char* kind() const override { return "sigmoid"; }
};

// (B, C, L) -> (B, C*L); layout is already contiguous so this is a reshape.
template <class T>
class Flatten : public Layer<T> {
public:
    void forward(const Tensor<T>& in, bool train) override;
    void backward(const Tensor<T>& in, Tensor<T>& gin) override;
    const char* kind() const override { return "flatten"; }
};

template <class T>
class Sequential {
public:
    Layer<T>* add(std::unique_ptr<Layer<T>> layer, const std::string& name);

    Tensor<T>& forward(const Tensor<T>& in, bool train);
    // Seeds: out().g set by the caller. Accumulates into gin.g.
    void backward(const Tensor<T>& in, Tensor<T>& gin);

    Tensor<T>& out();
    void collect(const std::string& prefix, std::vector<ParamView<T>>& params,
                 std::vector<ParamView<T>>& state);
    void init(rng::Stream& stream);
    std::size_t layer_count() const { return layers_.size(); }
    Layer<T>& layer(std::size_t i) { return *layers_[i]; }

private:
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    std::vector<std::string> names_;
};

// Channel concatenation of two rank-3 tensors with equal batch and length.
template <class T>
void concat_channels(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out);
// Splits out.g back into a.g / b.g (accumulating).
template <class T>
void concat_channels_backward(Tensor<T>& a, Tensor<T>& b, const Tensor<T>& out);

// -mean(y log p + (1-y) log(1-p)) with p clamped to [1e-7, 1-1e-7]; the
// clamp zeroes the subgradient outside the band. Accumulates into pred.g,
// one label per batch row. Arithmetic in double regardless of T.
template <class T>
double bce_loss(Tensor<T>& pred, const std::vector<double>& labels);

inline constexpr double kBceClamp = 1e-7;

} // namespace turb::nn

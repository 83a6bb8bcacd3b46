#pragma once

#include <cstdint>
#include <vector>

#include "turb/tensor.hpp"

namespace turb::nn {

// Differentiable per-realization statistics: maps a batch of signals to the
// three curves log S_2, skewness, log(F/3) over a fixed lag set, and routes
// curve gradients back to the input samples. Moments accumulate in 64-bit
// regardless of T. Lags producing moments below kStatFloor are clamped at
// the floor; the gradient keeps flowing through the clamped value and the
// event counter is incremented.
template <class T>
class StatHead {
public:
    explicit StatHead(std::vector<std::int64_t> lags);

    // sig: (B, 1, L) or (B, L). Outputs are resized to (B, n_lags).
    void forward(const Tensor<T>& sig, Tensor<T>& log_s2, Tensor<T>& skew,
                 Tensor<T>& logf3);
    // Reads the .g planes of the three outputs, accumulates into gsig.g.
    // Must follow the matching forward.
    void backward(const Tensor<T>& sig, Tensor<T>& gsig, const Tensor<T>& log_s2,
                  const Tensor<T>& skew, const Tensor<T>& logf3);

    const std::vector<std::int64_t>& lags() const { return lags_; }
    std::int64_t clamp_events() const { return clamp_events_; }

    static constexpr double kStatFloor = 1e-12;

private:
    std::vector<std::int64_t> lags_;
    std::vector<double> m2_, m3_, m4_;  // cached raw moments per (b, lag)
    std::vector<double> row_;           // 64-bit copy of the current row
    std::int64_t clamp_events_ = 0;
};

} // namespace turb::nn

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "turb/kernels.hpp"
#include "turb/tensor.hpp"

namespace turb::nn {

// Adaptive-moment optimizer, bias-corrected, decay rates (0.5, 0.999).
// Holds first/second moment buffers per parameter view; step() consumes the
// accumulated grads, zero_grad() clears them.
template <class T>
class Adam {
public:
    explicit Adam(std::vector<ParamView<T>> params, double lr = 1e-3,
                  double beta1 = 0.5, double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
          eps_(eps) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i].value->size(), T(0));
            v_[i].assign(params_[i].value->size(), T(0));
        }
    }

    void step() {
        ++t_;
        const double c1 = 1.0 / (1.0 - std::pow(beta1_, double(t_)));
        const double c2 = 1.0 / (1.0 - std::pow(beta2_, double(t_)));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            kern::adam_step(p.value->data(), p.grad->data(), m_[i].data(),
                            v_[i].data(),
                            static_cast<std::int64_t>(p.value->size()), T(lr_),
                            T(beta1_), T(beta2_), T(eps_), T(c1), T(c2));
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.grad->assign(p.grad->size(), T(0));
    }

    std::int64_t t() const { return t_; }
    void set_t(std::int64_t t) { t_ = t; }
    double lr() const { return lr_; }
    std::size_t size() const { return params_.size(); }
    const ParamView<T>& param(std::size_t i) const { return params_[i]; }
    std::vector<T>& moment1(std::size_t i) { return m_[i]; }
    std::vector<T>& moment2(std::size_t i) { return v_[i]; }

private:
    std::vector<ParamView<T>> params_;
    std::vector<std::vector<T>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
};

} // namespace turb::nn

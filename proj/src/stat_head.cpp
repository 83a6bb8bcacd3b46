#include "turb/stat_head.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "turb/kernels.hpp"

namespace turb::nn {

namespace {

constexpr double kLn3 = 1.0986122886681098;

template <class T>
const T* signal_row(const Tensor<T>& sig, std::size_t b, std::size_t* len) {
    if (sig.rank() == 3) {
        if (sig.ch() != 1)
            throw std::invalid_argument("stat head: single-channel input required");
        *len = sig.len();
        return sig.row(b, 0);
    }
    if (sig.rank() == 2) {
        *len = sig.ch();
        return sig.v.data() + b * sig.ch();
    }
    throw std::invalid_argument("stat head: rank-2 or rank-3 input required");
}

} // namespace

template <class T>
StatHead<T>::StatHead(std::vector<std::int64_t> lags) : lags_(std::move(lags)) {
    if (lags_.empty()) throw std::invalid_argument("stat head: empty lag set");
    for (auto l : lags_)
        if (l < 1) throw std::invalid_argument("stat head: lags must be >= 1");
}

template <class T>
void StatHead<T>::forward(const Tensor<T>& sig, Tensor<T>& log_s2, Tensor<T>& skew,
                          Tensor<T>& logf3) {
    const std::size_t B = sig.batch();
    const std::size_t nl = lags_.size();
    std::size_t L = 0;
    signal_row(sig, 0, &L);
    for (auto l : lags_)
        if (static_cast<std::size_t>(l) >= L)
            throw std::invalid_argument("stat head: lag exceeds signal length");
    log_s2.resize2(B, nl);
    skew.resize2(B, nl);
    logf3.resize2(B, nl);
    m2_.assign(B * nl, 0.0);
    m3_.assign(B * nl, 0.0);
    m4_.assign(B * nl, 0.0);
    row_.resize(L);
    for (std::size_t b = 0; b < B; ++b) {
        const T* src = signal_row(sig, b, &L);
        for (std::size_t x = 0; x < L; ++x) row_[x] = double(src[x]);
        for (std::size_t li = 0; li < nl; ++li) {
            const std::int64_t lag = lags_[li];
            double s2 = 0, s3 = 0, s4 = 0;
            kern::ops().increment_moments_f64(row_.data(),
                                              static_cast<std::int64_t>(L), lag,
                                              &s2, &s3, &s4);
            const double m = double(static_cast<std::int64_t>(L) - lag);
            const std::size_t idx = b * nl + li;
            m2_[idx] = s2 / m;
            m3_[idx] = s3 / m;
            m4_[idx] = s4 / m;
            if (m2_[idx] < kStatFloor || m4_[idx] < kStatFloor) ++clamp_events_;
            const double m2c = std::max(m2_[idx], kStatFloor);
            const double m4c = std::max(m4_[idx], kStatFloor);
            log_s2.v[idx] = T(std::log(m2c));
            skew.v[idx] = T(m3_[idx] / (m2c * std::sqrt(m2c)));
            logf3.v[idx] = T(std::log(m4c) - 2.0 * std::log(m2c) - kLn3);
        }
    }
}

template <class T>
void StatHead<T>::backward(const Tensor<T>& sig, Tensor<T>& gsig,
                           const Tensor<T>& log_s2, const Tensor<T>& skew,
                           const Tensor<T>& logf3) {
    const std::size_t B = sig.batch();
    const std::size_t nl = lags_.size();
    std::size_t L = 0;
    signal_row(sig, 0, &L);
    std::vector<double> grow(L);
    for (std::size_t b = 0; b < B; ++b) {
        const T* src = signal_row(sig, b, &L);
        for (std::size_t x = 0; x < L; ++x) row_[x] = double(src[x]);
        std::fill(grow.begin(), grow.end(), 0.0);
        for (std::size_t li = 0; li < nl; ++li) {
            const std::size_t idx = b * nl + li;
            const std::int64_t lag = lags_[li];
            const double m = double(static_cast<std::int64_t>(L) - lag);
            const double m2c = std::max(m2_[idx], kStatFloor);
            const double m4c = std::max(m4_[idx], kStatFloor);
            const double g1 = double(log_s2.g[idx]);
            const double g2 = double(skew.g[idx]);
            const double g3 = double(logf3.g[idx]);
            // moment-space chain rule; the clamped value stands in for the
            // moment so degenerate rows still return finite gradients
            const double a2 = g1 / m2c - g2 * 1.5 * m3_[idx] / (m2c * m2c * std::sqrt(m2c)) -
                              g3 * 2.0 / m2c;
            const double a3 = g2 / (m2c * std::sqrt(m2c));
            const double a4 = g3 / m4c;
            if (a2 == 0.0 && a3 == 0.0 && a4 == 0.0) continue;
            const std::size_t nlag = static_cast<std::size_t>(lag);
            for (std::size_t x = 0; x + nlag < L; ++x) {
                const double d = row_[x + nlag] - row_[x];
                const double wgt =
                    (2.0 * a2 * d + 3.0 * a3 * d * d + 4.0 * a4 * d * d * d) / m;
                grow[x + nlag] += wgt;
                grow[x] -= wgt;
            }
        }
        T* dst = gsig.rank() == 3 ? gsig.grow(b, 0) : gsig.g.data() + b * L;
        for (std::size_t x = 0; x < L; ++x) dst[x] += T(grow[x]);
    }
}

template class StatHead<float>;
template class StatHead<double>;

} // namespace turb::nn

#include "turb/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "turb/kernels.hpp"

namespace turb::nn {

namespace {

template <class T>
void require3(const Tensor<T>& t, const char* layer) {
    if (t.rank() != 3)
        throw std::invalid_argument(std::string(layer) + ": rank-3 input required");
}

template <class T>
void require_channels(const Tensor<T>& t, int c, const char* layer) {
    require3(t, layer);
    if (t.ch() != static_cast<std::size_t>(c))
        throw std::invalid_argument(std::string(layer) + ": input channels " +
                                    std::to_string(t.ch()) + ", expected " +
                                    std::to_string(c));
}

// Copies (B, C, L) rows into a (B, C, L + k - 1) buffer with pad_l zeros on
// the left of every row.
template <class T>
void pad_rows(const Tensor<T>& in, std::vector<T>& dst, int k, int pad_l) {
    const std::size_t lp = in.len() + static_cast<std::size_t>(k) - 1;
    dst.assign(in.batch() * in.ch() * lp, T(0));
    for (std::size_t b = 0; b < in.batch(); ++b)
        for (std::size_t c = 0; c < in.ch(); ++c) {
            const T* src = in.row(b, c);
            T* d = dst.data() + (b * in.ch() + c) * lp + static_cast<std::size_t>(pad_l);
            std::copy(src, src + in.len(), d);
        }
}

// Same, reading the gradient planes of `t`.
template <class T>
void pad_grad_rows(const Tensor<T>& t, std::vector<T>& dst, int k, int pad_l) {
    const std::size_t lp = t.len() + static_cast<std::size_t>(k) - 1;
    dst.assign(t.batch() * t.ch() * lp, T(0));
    for (std::size_t b = 0; b < t.batch(); ++b)
        for (std::size_t c = 0; c < t.ch(); ++c) {
            const T* src = t.grow(b, c);
            T* d = dst.data() + (b * t.ch() + c) * lp + static_cast<std::size_t>(pad_l);
            std::copy(src, src + t.len(), d);
        }
}

template <class T>
double row_sum(const T* x, std::int64_t n) {
    double s = 0, sq = 0;
    kern::sum_sumsq(x, n, &s, &sq);
    return s;
}

} // namespace

// ---------------------------------------------------------------- Conv1d

template <class T>
Conv1d<T>::Conv1d(int in_ch, int out_ch, int k, int stride, Pad pad)
    : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad) {
    if (in_ch < 1 || out_ch < 1 || k < 1 || stride < 1)
        throw std::invalid_argument("conv1d: bad geometry");
    if (pad_ == Pad::Same && stride_ != 1)
        throw std::invalid_argument("conv1d: same padding requires stride 1");
    const std::size_t nw =
        static_cast<std::size_t>(out_ch) * static_cast<std::size_t>(in_ch) *
        static_cast<std::size_t>(k);
    w.assign(nw, T(0));
    gw.assign(nw, T(0));
    b.assign(static_cast<std::size_t>(out_ch), T(0));
    gb.assign(static_cast<std::size_t>(out_ch), T(0));
}

template <class T>
void Conv1d<T>::forward(const Tensor<T>& in, bool) {
    require_channels(in, in_ch_, "conv1d");
    const std::size_t L = in.len();
    const std::size_t B = in.batch();
    const std::size_t ck = static_cast<std::size_t>(in_ch_) * static_cast<std::size_t>(k_);
    if (pad_ == Pad::Same) {
        const int pad_l = (k_ - 1) / 2;
        pad_rows(in, padded_, k_, pad_l);
        const std::size_t lp = L + static_cast<std::size_t>(k_) - 1;
        this->out_.resize3(B, static_cast<std::size_t>(out_ch_), L);
        for (std::size_t bi = 0; bi < B; ++bi) {
            const T* src = padded_.data() + bi * static_cast<std::size_t>(in_ch_) * lp;
            for (int oc = 0; oc < out_ch_; ++oc) {
                T* dst = this->out_.row(bi, static_cast<std::size_t>(oc));
                std::fill(dst, dst + L, b[static_cast<std::size_t>(oc)]);
                kern::conv_row(src, static_cast<std::int64_t>(lp), in_ch_,
                               static_cast<std::int64_t>(L), k_, 1,
                               w.data() + static_cast<std::size_t>(oc) * ck, dst);
            }
        }
    } else {
        if (L < static_cast<std::size_t>(k_))
            throw std::invalid_argument("conv1d: input shorter than kernel");
        const std::size_t lo = (L - static_cast<std::size_t>(k_)) /
                                   static_cast<std::size_t>(stride_) +
                               1;
        this->out_.resize3(B, static_cast<std::size_t>(out_ch_), lo);
        for (std::size_t bi = 0; bi < B; ++bi) {
            const T* src = in.row(bi, 0);
            for (int oc = 0; oc < out_ch_; ++oc) {
                T* dst = this->out_.row(bi, static_cast<std::size_t>(oc));
                std::fill(dst, dst + lo, b[static_cast<std::size_t>(oc)]);
                kern::conv_row(src, static_cast<std::int64_t>(L), in_ch_,
                               static_cast<std::int64_t>(lo), k_, stride_,
                               w.data() + static_cast<std::size_t>(oc) * ck, dst);
            }
        }
    }
}

template <class T>
void Conv1d<T>::backward(const Tensor<T>& in, Tensor<T>& gin) {
    const std::size_t B = in.batch();
    const std::size_t L = in.len();
    const std::size_t Lo = this->out_.len();
    const std::size_t ck = static_cast<std::size_t>(in_ch_) * static_cast<std::size_t>(k_);
    if (pad_ == Pad::Same) {
        const int pad_l = (k_ - 1) / 2;
        const std::size_t lp = L + static_cast<std::size_t>(k_) - 1;
        // data: conv of the padded output grad with flipped, transposed taps
        pad_grad_rows(this->out_, gpad_, k_, k_ - 1 - pad_l);
        wt_.resize(w.size());
        for (int oc = 0; oc < out_ch_; ++oc)
            for (int ic = 0; ic < in_ch_; ++ic)
                for (int t = 0; t < k_; ++t)
                    wt_[(static_cast<std::size_t>(ic) * static_cast<std::size_t>(out_ch_) +
                         static_cast<std::size_t>(oc)) *
                            static_cast<std::size_t>(k_) +
                        static_cast<std::size_t>(t)] =
                        w[(static_cast<std::size_t>(oc) * static_cast<std::size_t>(in_ch_) +
                           static_cast<std::size_t>(ic)) *
                              static_cast<std::size_t>(k_) +
                          static_cast<std::size_t>(k_ - 1 - t)];
        const std::size_t ok = static_cast<std::size_t>(out_ch_) * static_cast<std::size_t>(k_);
        for (std::size_t bi = 0; bi < B; ++bi) {
            const T* gsrc = gpad_.data() + bi * static_cast<std::size_t>(out_ch_) * lp;
            for (int ic = 0; ic < in_ch_; ++ic)
                kern::conv_row(gsrc, static_cast<std::int64_t>(lp), out_ch_,
                               static_cast<std::int64_t>(L), k_, 1,
                               wt_.data() + static_cast<std::size_t>(ic) * ok,
                               gin.grow(bi, static_cast<std::size_t>(ic)));
        }
        // weights: correlation of the output grad with the cached padded input
        for (std::size_t bi = 0; bi < B; ++bi)
            for (int oc = 0; oc < out_ch_; ++oc) {
                const T* gout = this->out_.grow(bi, static_cast<std::size_t>(oc));
                for (int ic = 0; ic < in_ch_; ++ic)
                    kern::corr_taps(gout,
                                    padded_.data() +
                                        (bi * static_cast<std::size_t>(in_ch_) +
                                         static_cast<std::size_t>(ic)) *
                                            lp,
                                    static_cast<std::int64_t>(Lo), k_,
                                    gw.data() +
                                        (static_cast<std::size_t>(oc) *
                                             static_cast<std::size_t>(in_ch_) +
                                         static_cast<std::size_t>(ic)) *
                                            static_cast<std::size_t>(k_));
                gb[static_cast<std::size_t>(oc)] +=
                    T(row_sum(gout, static_cast<std::int64_t>(Lo)));
            }
    } else {
        for (std::size_t bi = 0; bi < B; ++bi)
            for (int oc = 0; oc < out_ch_; ++oc) {
                const T* gout = this->out_.grow(bi, static_cast<std::size_t>(oc));
                double gbsum = 0;
                for (std::size_t x = 0; x < Lo; ++x) {
                    const T gv = gout[x];
                    gbsum += double(gv);
                    const std::size_t base = x * static_cast<std::size_t>(stride_);
                    for (int ic = 0; ic < in_ch_; ++ic) {
                        const T* irow = in.row(bi, static_cast<std::size_t>(ic));
                        T* grow = gin.grow(bi, static_cast<std::size_t>(ic));
                        T* gwrow = gw.data() +
                                   (static_cast<std::size_t>(oc) *
                                        static_cast<std::size_t>(in_ch_) +
                                    static_cast<std::size_t>(ic)) *
                                       static_cast<std::size_t>(k_);
                        const T* wrow = w.data() +
                                        (static_cast<std::size_t>(oc) *
                                             static_cast<std::size_t>(in_ch_) +
                                         static_cast<std::size_t>(ic)) *
                                            static_cast<std::size_t>(k_);
                        for (int t = 0; t < k_; ++t) {
                            grow[base + static_cast<std::size_t>(t)] +=
                                gv * wrow[t];
                            gwrow[t] += gv * irow[base + static_cast<std::size_t>(t)];
                        }
                    }
                }
                gb[static_cast<std::size_t>(oc)] += T(gbsum);
            }
    }
}

template <class T>
void Conv1d<T>::collect(const std::string& prefix, std::vector<ParamView<T>>& params,
                        std::vector<ParamView<T>>& state) {
    (void)state;
    params.push_back({prefix + ".w", &w, &gw});
    params.push_back({prefix + ".b", &b, &gb});
}

template <class T>
void Conv1d<T>::init(rng::Stream& stream) {
    stream.fill_gaussian(w.data(), static_cast<std::int64_t>(w.size()));
    for (auto& x : w) x *= T(0.02);
    std::fill(b.begin(), b.end(), T(0));
}

// ------------------------------------------------------- TransposeConv1d

template <class T>
TransposeConv1d<T>::TransposeConv1d(int in_ch, int out_ch, int k)
    : in_ch_(in_ch), out_ch_(out_ch), k_(k) {
    if (in_ch < 1 || out_ch < 1 || k < 1)
        throw std::invalid_argument("transpose_conv1d: bad geometry");
    const std::size_t nw =
        static_cast<std::size_t>(in_ch) * static_cast<std::size_t>(out_ch) *
        static_cast<std::size_t>(k);
    w.assign(nw, T(0));
    gw.assign(nw, T(0));
    b.assign(static_cast<std::size_t>(out_ch), T(0));
    gb.assign(static_cast<std::size_t>(out_ch), T(0));
}

template <class T>
void TransposeConv1d<T>::forward(const Tensor<T>& in, bool) {
    require_channels(in, in_ch_, "transpose_conv1d");
    const std::size_t L = in.len();
    const std::size_t B = in.batch();
    const int c_l = (k_ - 1) / 2;
    pad_rows(in, padded_, k_, k_ - 1 - c_l);
    const std::size_t lp = L + static_cast<std::size_t>(k_) - 1;
    wt_.resize(w.size());
    for (int ic = 0; ic < in_ch_; ++ic)
        for (int oc = 0; oc < out_ch_; ++oc)
            for (int t = 0; t < k_; ++t)
                wt_[(static_cast<std::size_t>(oc) * static_cast<std::size_t>(in_ch_) +
                     static_cast<std::size_t>(ic)) *
                        static_cast<std::size_t>(k_) +
                    static_cast<std::size_t>(t)] =
                    w[(static_cast<std::size_t>(ic) * static_cast<std::size_t>(out_ch_) +
                       static_cast<std::size_t>(oc)) *
                          static_cast<std::size_t>(k_) +
                      static_cast<std::size_t>(k_ - 1 - t)];
    const std::size_t ck = static_cast<std::size_t>(in_ch_) * static_cast<std::size_t>(k_);
    this->out_.resize3(B, static_cast<std::size_t>(out_ch_), L);
    for (std::size_t bi = 0; bi < B; ++bi) {
        const T* src = padded_.data() + bi * static_cast<std::size_t>(in_ch_) * lp;
        for (int oc = 0; oc < out_ch_; ++oc) {
            T* dst = this->out_.row(bi, static_cast<std::size_t>(oc));
            std::fill(dst, dst + L, b[static_cast<std::size_t>(oc)]);
            kern::conv_row(src, static_cast<std::int64_t>(lp), in_ch_,
                           static_cast<std::int64_t>(L), k_, 1,
                           wt_.data() + static_cast<std::size_t>(oc) * ck, dst);
        }
    }
}

template <class T>
void TransposeConv1d<T>::backward(const Tensor<T>& in, Tensor<T>& gin) {
    const std::size_t B = in.batch();
    const std::size_t L = in.len();
    const int c_l = (k_ - 1) / 2;
    const std::size_t lp = L + static_cast<std::size_t>(k_) - 1;
    // data: conv of the padded output grad with the stored (unflipped) taps
    pad_grad_rows(this->out_, gpad_, k_, c_l);
    const std::size_t ok = static_cast<std::size_t>(out_ch_) * static_cast<std::size_t>(k_);
    for (std::size_t bi = 0; bi < B; ++bi) {
        const T* gsrc = gpad_.data() + bi * static_cast<std::size_t>(out_ch_) * lp;
        for (int ic = 0; ic < in_ch_; ++ic)
            kern::conv_row(gsrc, static_cast<std::int64_t>(lp), out_ch_,
                           static_cast<std::int64_t>(L), k_, 1,
                           w.data() + static_cast<std::size_t>(ic) * ok,
                           gin.grow(bi, static_cast<std::size_t>(ic)));
    }
    // weights: correlate in the flipped layout, fold back with the flip
    gwt_.assign(w.size(), T(0));
    for (std::size_t bi = 0; bi < B; ++bi)
        for (int oc = 0; oc < out_ch_; ++oc) {
            const T* gout = this->out_.grow(bi, static_cast<std::size_t>(oc));
            for (int ic = 0; ic < in_ch_; ++ic)
                kern::corr_taps(gout,
                                padded_.data() +
                                    (bi * static_cast<std::size_t>(in_ch_) +
                                     static_cast<std::size_t>(ic)) *
                                        lp,
                                static_cast<std::int64_t>(L), k_,
                                gwt_.data() +
                                    (static_cast<std::size_t>(oc) *
                                         static_cast<std::size_t>(in_ch_) +
                                     static_cast<std::size_t>(ic)) *
                                        static_cast<std::size_t>(k_));
            gb[static_cast<std::size_t>(oc)] +=
                T(row_sum(gout, static_cast<std::int64_t>(L)));
        }
    for (int ic = 0; ic < in_ch_; ++ic)
        for (int oc = 0; oc < out_ch_; ++oc)
            for (int t = 0; t < k_; ++t)
                gw[(static_cast<std::size_t>(ic) * static_cast<std::size_t>(out_ch_) +
                    static_cast<std::size_t>(oc)) *
                       static_cast<std::size_t>(k_) +
                   static_cast<std::size_t>(t)] +=
                    gwt_[(static_cast<std::size_t>(oc) * static_cast<std::size_t>(in_ch_) +
                          static_cast<std::size_t>(ic)) *
                             static_cast<std::size_t>(k_) +
                         static_cast<std::size_t>(k_ - 1 - t)];
}

template <class T>
void TransposeConv1d<T>::collect(const std::string& prefix,
                                 std::vector<ParamView<T>>& params,
                                 std::vector<ParamView<T>>& state) {
    (void)state;
    params.push_back({prefix + ".w", &w, &gw});
    params.push_back({prefix + ".b", &b, &gb});
}

template <class T>
void TransposeConv1d<T>::init(rng::Stream& stream) {
    stream.fill_gaussian(w.data(), static_cast<std::int64_t>(w.size()));
    for (auto& x : w) x *= T(0.02);
    std::fill(b.begin(), b.end(), T(0));
}

// ----------------------------------------------------------------- Dense

template <class T>
Dense<T>::Dense(int in_f, int out_f) : in_f_(in_f), out_f_(out_f) {
    if (in_f < 1 || out_f < 1) throw std::invalid_argument("dense: bad geometry");
    w.assign(static_cast<std::size_t>(out_f) * static_cast<std::size_t>(in_f), T(0));
    gw.assign(w.size(), T(0));
    b.assign(static_cast<std::size_t>(out_f), T(0));
    gb.assign(b.size(), T(0));
}

template <class T>
void Dense<T>::forward(const Tensor<T>& in, bool) {
    if (in.rank() != 2)
        throw std::invalid_argument("dense: rank-2 input required");
    if (in.ch() != static_cast<std::size_t>(in_f_))
        throw std::invalid_argument("dense: input features " + std::to_string(in.ch()) +
                                    ", expected " + std::to_string(in_f_));
    const std::size_t B = in.batch();
    this->out_.resize2(B, static_cast<std::size_t>(out_f_));
    for (std::size_t bi = 0; bi < B; ++bi) {
        const T* x = in.v.data() + bi * static_cast<std::size_t>(in_f_);
        T* y = this->out_.v.data() + bi * static_cast<std::size_t>(out_f_);
        for (int o = 0; o < out_f_; ++o)
            y[o] = b[static_cast<std::size_t>(o)] +
                   kern::dot(w.data() + static_cast<std::size_t>(o) *
                                            static_cast<std::size_t>(in_f_),
                             x, in_f_);
    }
}

template <class T>
void Dense<T>::backward(const Tensor<T>& in, Tensor<T>& gin) {
    const std::size_t B = in.batch();
    for (std::size_t bi = 0; bi < B; ++bi) {
        const T* x = in.v.data() + bi * static_cast<std::size_t>(in_f_);
        const T* gy = this->out_.g.data() + bi * static_cast<std::size_t>(out_f_);
        T* gx = gin.g.data() + bi * static_cast<std::size_t>(in_f_);
        for (int o = 0; o < out_f_; ++o) {
            const T go = gy[o];
            kern::axpy(go,
                       w.data() + static_cast<std::size_t>(o) *
                                      static_cast<std::size_t>(in_f_),
                       gx, in_f_);
            kern::axpy(go, x,
                       gw.data() + static_cast<std::size_t>(o) *
                                       static_cast<std::size_t>(in_f_),
                       in_f_);
            gb[static_cast<std::size_t>(o)] += go;
        }
    }
}

template <class T>
void Dense<T>::collect(const std::string& prefix, std::vector<ParamView<T>>& params,
                       std::vector<ParamView<T>>& state) {
    (void)state;
    params.push_back({prefix + ".w", &w, &gw});
    params.push_back({prefix + ".b", &b, &gb});
}

template <class T>
void Dense<T>::init(rng::Stream& stream) {
    stream.fill_gaussian(w.data(), static_cast<std::int64_t>(w.size()));
    for (auto& x : w) x *= T(0.02);
    std::fill(b.begin(), b.end(), T(0));
}

// ------------------------------------------------------------ BatchNorm1d

template <class T>
BatchNorm1d<T>::BatchNorm1d(int channels) : c_(channels) {
    if (channels < 1) throw std::invalid_argument("batchnorm: bad channel count");
    gamma.assign(static_cast<std::size_t>(channels), T(1));
    beta.assign(static_cast<std::size_t>(channels), T(0));
    ggamma.assign(gamma.size(), T(0));
    gbeta.assign(beta.size(), T(0));
    running_mean.assign(gamma.size(), T(0));
    running_var.assign(gamma.size(), T(1));
    inv_std_.assign(gamma.size(), 0.0);
}

template <class T>
void BatchNorm1d<T>::forward(const Tensor<T>& in, bool train) {
    if (in.rank() != 2 && in.rank() != 3)
        throw std::invalid_argument("batchnorm: rank-2 or rank-3 input required");
    if (in.ch() != static_cast<std::size_t>(c_))
        throw std::invalid_argument("batchnorm: input channels " +
                                    std::to_string(in.ch()) + ", expected " +
                                    std::to_string(c_));
    const std::size_t B = in.batch();
    const std::size_t L = in.len();
    this->out_.shape = in.shape;
    this->out_.v.assign(in.v.size(), T(0));
    this->out_.g.assign(in.v.size(), T(0));
    last_train_ = train;
    if (train) {
        xhat_.resize(in.v.size());
        const double m = double(B) * double(L);
        for (int c = 0; c < c_; ++c) {
            double s = 0, sq = 0;
            for (std::size_t bi = 0; bi < B; ++bi) {
                double rs = 0, rsq = 0;
                kern::sum_sumsq(in.row(bi, static_cast<std::size_t>(c)),
                                static_cast<std::int64_t>(L), &rs, &rsq);
                s += rs;
                sq += rsq;
            }
            const double mean = s / m;
            double var = sq / m - mean * mean;
            if (var < 0) var = 0;
            const double istd = 1.0 / std::sqrt(var + kEps);
            inv_std_[static_cast<std::size_t>(c)] = istd;
            for (std::size_t bi = 0; bi < B; ++bi) {
                const std::size_t off =
                    (bi * static_cast<std::size_t>(c_) + static_cast<std::size_t>(c)) * L;
                kern::scale_shift(in.v.data() + off, xhat_.data() + off,
                                  static_cast<std::int64_t>(L), T(istd),
                                  T(-mean * istd));
                kern::scale_shift(xhat_.data() + off, this->out_.v.data() + off,
                                  static_cast<std::int64_t>(L),
                                  gamma[static_cast<std::size_t>(c)],
                                  beta[static_cast<std::size_t>(c)]);
            }
            running_mean[static_cast<std::size_t>(c)] =
                T((1.0 - kMomentum) * double(running_mean[static_cast<std::size_t>(c)]) +
                  kMomentum * mean);
            running_var[static_cast<std::size_t>(c)] =
                T((1.0 - kMomentum) * double(running_var[static_cast<std::size_t>(c)]) +
                  kMomentum * var);
        }
    } else {
        for (int c = 0; c < c_; ++c) {
            const double istd =
                1.0 / std::sqrt(double(running_var[static_cast<std::size_t>(c)]) + kEps);
            inv_std_[static_cast<std::size_t>(c)] = istd;
            const double a = double(gamma[static_cast<std::size_t>(c)]) * istd;
            const double bb = double(beta[static_cast<std::size_t>(c)]) -
                              double(running_mean[static_cast<std::size_t>(c)]) * a;
            for (std::size_t bi = 0; bi < B; ++bi) {
                const std::size_t off =
                    (bi * static_cast<std::size_t>(c_) + static_cast<std::size_t>(c)) * L;
                kern::scale_shift(in.v.data() + off, this->out_.v.data() + off,
                                  static_cast<std::int64_t>(L), T(a), T(bb));
            }
        }
    }
}

template <class T>
void BatchNorm1d<T>::backward(const Tensor<T>& in, Tensor<T>& gin) {
    const std::size_t B = in.batch();
    const std::size_t L = in.len();
    if (last_train_) {
        const double m = double(B) * double(L);
        for (int c = 0; c < c_; ++c) {
            double sg = 0, sgx = 0;
            for (std::size_t bi = 0; bi < B; ++bi) {
                const std::size_t off =
                    (bi * static_cast<std::size_t>(c_) + static_cast<std::size_t>(c)) * L;
                sg += row_sum(this->out_.g.data() + off, static_cast<std::int64_t>(L));
                sgx += double(kern::dot(this->out_.g.data() + off, xhat_.data() + off,
                                        static_cast<std::int64_t>(L)));
            }
            gbeta[static_cast<std::size_t>(c)] += T(sg);
            ggamma[static_cast<std::size_t>(c)] += T(sgx);
            const double istd = inv_std_[static_cast<std::size_t>(c)];
            const T scale = T(double(gamma[static_cast<std::size_t>(c)]) * istd);
            const T ca = T(sg / m);
            const T cb = T(sgx / m);
            for (std::size_t bi = 0; bi < B; ++bi) {
                const std::size_t off =
                    (bi * static_cast<std::size_t>(c_) + static_cast<std::size_t>(c)) * L;
                const T* gy = this->out_.g.data() + off;
                const T* xh = xhat_.data() + off;
                T* gx = gin.g.data() + off;
                for (std::size_t x = 0; x < L; ++x)
                    gx[x] += scale * (gy[x] - ca - xh[x] * cb);
            }
        }
    } else {
        for (int c = 0; c < c_; ++c) {
            const double istd = inv_std_[static_cast<std::size_t>(c)];
            const double rm = double(running_mean[static_cast<std::size_t>(c)]);
            const T scale = T(double(gamma[static_cast<std::size_t>(c)]) * istd);
            double sg = 0, sgx = 0;
            for (std::size_t bi = 0; bi < B; ++bi) {
                const std::size_t off =
                    (bi * static_cast<std::size_t>(c_) + static_cast<std::size_t>(c)) * L;
                const T* gy = this->out_.g.data() + off;
                const T* x = in.v.data() + off;
                T* gx = gin.g.data() + off;
                for (std::size_t i = 0; i < L; ++i) {
                    gx[i] += scale * gy[i];
                    sg += double(gy[i]);
                    sgx += double(gy[i]) * (double(x[i]) - rm) * istd;
                }
            }
            gbeta[static_cast<std::size_t>(c)] += T(sg);
            ggamma[static_cast<std::size_t>(c)] += T(sgx);
        }
    }
}

template <class T>
void BatchNorm1d<T>::collect(const std::string& prefix,
                             std::vector<ParamView<T>>& params,
                             std::vector<ParamView<T>>& state) {
    params.push_back({prefix + ".gamma", &gamma, &ggamma});
    params.push_back({prefix + ".beta", &beta, &gbeta});
    state.push_back({prefix + ".running_mean", &running_mean, nullptr});
    state.push_back({prefix + ".running_var", &running_var, nullptr});
}

// ---------------------------------------------------- pooling / resampling

template <class T>
void AvgPool2<T>::forward(const Tensor<T>& in, bool) {
    require3(in, "avgpool2");
    if (in.len() % 2 != 0)
        throw std::invalid_argument("avgpool2: odd input length");
    const std::size_t lo = in.len() / 2;
    out_.resize3(in.batch(), in.ch(), lo);
    for (std::size_t bi = 0; bi < in.batch(); ++bi)
        for (std::size_t c = 0; c < in.ch(); ++c) {
            const T* src = in.row(bi, c);
            T* dst = out_.row(bi, c);
            for (std::size_t x = 0; x < lo; ++x)
                dst[x] = (src[2 * x] + src[2 * x + 1]) * T(0.5);
        }
}

template <class T>
void AvgPool2<T>::backward(const Tensor<T>& in, Tensor<T>& gin) {
    const std::size_t lo = out_.len();
    for (std::size_t bi = 0; bi < in.batch(); ++bi)
        for (std::size_t c = 0; c < in.ch(); ++c) {
            const T* gy = out_.grow(bi, c);
            T* gx = gin.grow(bi, c);
            for (std::size_t x = 0; x < lo; ++x) {
                const T h = gy[x] * T(0.5);
                gx[2 * x] += h;
                gx[2 * x + 1] += h;
            }
        }
}

template <class T>
void Upsample2<T>::forward(const Tensor<T>& in, bool) {
    require3(in, "upsample2");
    const std::size_t lo = in.len() * 2;
    out_.resize3(in.batch(), in.ch(), lo);
    for (std::size_t bi = 0; bi < in.batch(); ++bi)
        for (std::size_t c = 0; c < in.ch(); ++c) {
            const T* src = in.row(bi, c);
            T* dst = out_.row(bi, c);
            for (std::size_t x = 0; x < in.len(); ++x) {
                dst[2 * x] = src[x];
                dst[2 * x + 1] = src[x];
            }
        }
}

template <class T>
void Upsample2<T>::backward(const Tensor<T>& in, Tensor<T>& gin) {
    for (std::size_t bi = 0; bi < in.batch(); ++bi)
        for (std::size_t c = 0; c < in.ch(); ++c) {
            const T* gy = out_.grow(bi, c);
            T* gx = gin.grow(bi, c);
            for (std::size_t x = 0; x < in.len(); ++x)
                gx[x] += gy[2 * x] + gy[2 * x + 1];
        }
}

// ------------------------------------------------------------ activations

template <class T>
void LeakyRelu<T>::forward(const Tensor<T>& in, bool) {
    this->out_.shape = in.shape;
    this->out_.v.assign(in.v.size(), T(0));
    this->out_.g.assign(in.v.size(), T(0));
    kern::leaky_relu_fwd(in.v.data(), this->out_.v.data(),
                         static_cast<std::int64_t>(in.v.size()), T(slope_));
}

template <class T>
void LeakyRelu<T>::backward(const Tensor<T>& in, Tensor<T>& gin) {
    scratch_.resize(in.v.size());
    kern::leaky_relu_bwd(in.v.data(), this->out_.g.data(), scratch_.data(),
                         static_cast<std::int64_t>(in.v.size()), T(slope_));
    kern::axpy(T(1), scratch_.data(), gin.g.data(),
               static_cast<std::int64_t>(in.v.size()));
}

template <class T>
void Sigmoid<T>::forward(const Tensor<T>& in, bool) {
    this->out_.shape = in.shape;
    this->out_.v.assign(in.v.size(), T(0));
    this->out_.g.assign(in.v.size(), T(0));
    for (std::size_t i = 0; i < in.v.size(); ++i)
        this->out_.v[i] = T(1) / (T(1) + std::exp(-in.v[i]));
}

template <class T>
void Sigmoid<T>::backward(const Tensor<T>& in, Tensor<T>& gin) {
    for (std::size_t i = 0; i < in.v.size(); ++i) {
        const T y = this->out_.v[i];
        gin.g[i] += this->out_.g[i] * y * (T(1) - y);
    }
}

template <class T>
void Flatten<T>::forward(const Tensor<T>& in, bool) {
    require3(in, "flatten");
    this->out_.resize2(in.batch(), in.ch() * in.len());
    std::copy(in.v.begin(), in.v.end(), this->out_.v.begin());
}

template <class T>
void Flatten<T>::backward(const Tensor<T>& in, Tensor<T>& gin) {
    (void)in;
    for (std::size_t i = 0; i < gin.g.size(); ++i) gin.g[i] += this->out_.g[i];
}

// ------------------------------------------------------------- Sequential

template <class T>
Layer<T>* Sequential<T>::add(std::unique_ptr<Layer<T>> layer, const std::string& name) {
    layers_.push_back(std::move(layer));
    names_.push_back(name);
    return layers_.back().get();
}

template <class T>
Tensor<T>& Sequential<T>::forward(const Tensor<T>& in, bool train) {
    const Tensor<T>* cur = &in;
    for (auto& l : layers_) {
        l->forward(*cur, train);
        cur = &l->out();
    }
    return layers_.back()->out();
}

template <class T>
void Sequential<T>::backward(const Tensor<T>& in, Tensor<T>& gin) {
    for (std::size_t i = layers_.size(); i-- > 0;) {
        if (i == 0) {
            layers_[0]->backward(in, gin);
        } else {
            Tensor<T>& prev = layers_[i - 1]->out();
            prev.zero_grad();
            layers_[i]->backward(prev, prev);
        }
    }
}

template <class T>
Tensor<T>& Sequential<T>::out() {
    return layers_.back()->out();
}

template <class T>
void Sequential<T>::collect(const std::string& prefix, std::vector<ParamView<T>>& params,
                            std::vector<ParamView<T>>& state) {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->collect(prefix.empty() ? names_[i] : prefix + "." + names_[i],
                            params, state);
}

template <class T>
void Sequential<T>::init(rng::Stream& stream) {
    for (auto& l : layers_) l->init(stream);
}

// ----------------------------------------------------------------- concat

template <class T>
void concat_channels(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out) {
    if (a.rank() != 3 || b.rank() != 3 || a.batch() != b.batch() || a.len() != b.len())
        throw std::invalid_argument("concat: incompatible shapes");
    out.resize3(a.batch(), a.ch() + b.ch(), a.len());
    for (std::size_t bi = 0; bi < a.batch(); ++bi) {
        for (std::size_t c = 0; c < a.ch(); ++c)
            std::copy(a.row(bi, c), a.row(bi, c) + a.len(), out.row(bi, c));
        for (std::size_t c = 0; c < b.ch(); ++c)
            std::copy(b.row(bi, c), b.row(bi, c) + b.len(),
                      out.row(bi, a.ch() + c));
    }
}

template <class T>
void concat_channels_backward(Tensor<T>& a, Tensor<T>& b, const Tensor<T>& out) {
    for (std::size_t bi = 0; bi < a.batch(); ++bi) {
        for (std::size_t c = 0; c < a.ch(); ++c) {
            const T* src = out.grow(bi, c);
            T* dst = a.grow(bi, c);
            for (std::size_t x = 0; x < a.len(); ++x) dst[x] += src[x];
        }
        for (std::size_t c = 0; c < b.ch(); ++c) {
            const T* src = out.grow(bi, a.ch() + c);
            T* dst = b.grow(bi, c);
            for (std::size_t x = 0; x < b.len(); ++x) dst[x] += src[x];
        }
    }
}

// --------------------------------------------------------------- bce_loss

template <class T>
double bce_loss(Tensor<T>& pred, const std::vector<double>& labels) {
    const std::size_t n = pred.v.size();
    if (n == 0 || n != labels.size())
        throw std::invalid_argument("bce_loss: prediction/label size mismatch");
    double acc = 0;
    const double inv_n = 1.0 / double(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p0 = double(pred.v[i]);
        const double y = labels[i];
        const bool clamped = p0 < kBceClamp || p0 > 1.0 - kBceClamp;
        const double p = std::min(std::max(p0, kBceClamp), 1.0 - kBceClamp);
        acc += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        if (!clamped)
            pred.g[i] += T((-y / p + (1.0 - y) / (1.0 - p)) * inv_n);
    }
    return -acc * inv_n;
}

// ------------------------------------------------------- instantiations

template class Conv1d<float>;
template class Conv1d<double>;
template class TransposeConv1d<float>;
template class TransposeConv1d<double>;
template class Dense<float>;
template class Dense<double>;
template class BatchNorm1d<float>;
template class BatchNorm1d<double>;
template class AvgPool2<float>;
template class AvgPool2<double>;
template class Upsample2<float>;
template class Upsample2<double>;
template class LeakyRelu<float>;
template class LeakyRelu<double>;
template class Sigmoid<float>;
template class Sigmoid<double>;
template class Flatten<float>;
template class Flatten<double>;
template class Sequential<float>;
template class Sequential<double>;
template void concat_channels(const Tensor<float>&, const Tensor<float>&, Tensor<float>&);
template void concat_channels(const Tensor<double>&, const Tensor<double>&, Tensor<double>&);
template void concat_channels_backward(Tensor<float>&, Tensor<float>&, const Tensor<float>&);
template void concat_channels_backward(Tensor<double>&, Tensor<double>&, const Tensor<double>&);
template double bce_loss(Tensor<float>&, const std::vector<double>&);
template double bce_loss(Tensor<double>&, const std::vector<double>&);

} // namespace turb::nn

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace turb::nn {

// Dense array with a gradient of the same shape. Rank 3 (batch, channels,
// length) for signal paths, rank 2 (batch, features) for dense paths.
// Both are row-major over the trailing dimensions.
template <class T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> v;
    std::vector<T> g;

    Tensor() = default;

    static Tensor zeros3(std::size_t b, std::size_t c, std::size_t l) {
        Tensor t;
        t.resize3(b, c, l);
        return t;
    }
    static Tensor zeros2(std::size_t b, std::size_t f) {
        Tensor t;
        t.resize2(b, f);
        return t;
    }

    void resize3(std::size_t b, std::size_t c, std::size_t l) {
        shape = {b, c, l};
        v.assign(b * c * l, T(0));
        g.assign(b * c * l, T(0));
    }
    void resize2(std::size_t b, std::size_t f) {
        shape = {b, f};
        v.assign(b * f, T(0));
        g.assign(b * f, T(0));
    }

    std::size_t size() const { return v.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t batch() const { return shape.empty() ? 0 : shape[0]; }
    // channels for rank 3, features for rank 2
    std::size_t ch() const { return shape.size() < 2 ? 0 : shape[1]; }
    std::size_t len() const { return shape.size() < 3 ? 1 : shape[2]; }

    T* row(std::size_t b, std::size_t c) { return v.data() + (b * ch() + c) * len(); }
    const T* row(std::size_t b, std::size_t c) const {
        return v.data() + (b * ch() + c) * len();
    }
    T* grow(std::size_t b, std::size_t c) { return g.data() + (b * ch() + c) * len(); }
    const T* grow(std::size_t b, std::size_t c) const {
        return g.data() + (b * ch() + c) * len();
    }

    void zero_grad() { g.assign(g.size(), T(0)); }
};

// Named view into one parameter (or state buffer) of a model. State buffers
// such as batchnorm running averages carry grad == nullptr.
template <class T>
struct ParamView {
    std::string name;
    std::vector<T>* value = nullptr;
    std::vector<T>* grad = nullptr;

    bool trainable() const { return grad != nullptr; }
};

template <class T>
inline std::size_t count_params(const std::vector<ParamView<T>>& views) {
    std::size_t n = 0;
    for (const auto& p : views)
        if (p.trainable()) n += p.value->size();
    return n;
}

} // namespace turb::nn

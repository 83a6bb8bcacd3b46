#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "turb/errors.hpp"
#include "turb/tensor.hpp"

// Binary container of named arrays, little-endian:
//   magic "TURBCKPT" | u32 format version | u32 entry count | entries...
// entry: u32 name length | name bytes | u8 dtype | u8 ndim | i64 dims | payload
// dtype 0 = f32, 1 = f64, 2 = i64, 3 = raw bytes (text).
// Entries are kept name-sorted so equal contents produce equal files.

namespace turb::ckpt {

inline constexpr std::uint32_t kFormatVersion = 1;

struct Entry {
    std::uint8_t dtype = 0;
    std::vector<std::int64_t> dims;
    std::vector<unsigned char> raw;

    std::size_t count() const;
    std::vector<float> as_f32() const;
    std::vector<double> as_f64() const;
    std::vector<std::int64_t> as_i64() const;
    std::string as_text() const;
};

class Container {
public:
    void put_f32(const std::string& name, const float* data, std::size_t n);
    void put_f64(const std::string& name, const double* data, std::size_t n);
    void put_i64(const std::string& name, const std::int64_t* data, std::size_t n);
    void put_scalar_i64(const std::string& name, std::int64_t v);
    void put_text(const std::string& name, const std::string& text);

    bool has(const std::string& name) const;
    /// Throws FormatError when the entry is absent.
    const Entry& get(const std::string& name) const;
    std::int64_t get_scalar_i64(const std::string& name) const;

    void save(const std::string& path) const;
    /// Throws FormatError on bad magic, unknown version, or truncation.
    static Container load(const std::string& path);

    const std::map<std::string, Entry>& entries() const { return entries_; }

private:
    std::map<std::string, Entry> entries_;
};

// Stores every view (params and state alike) under prefix + "/" + view name.
template <class T>
void store_views(Container& c, const std::string& prefix,
                 const std::vector<nn::ParamView<T>>& views) {
    for (const auto& v : views) {
        if constexpr (std::is_same_v<T, float>)
            c.put_f32(prefix + "/" + v.name, v.value->data(), v.value->size());
        else
            c.put_f64(prefix + "/" + v.name, v.value->data(), v.value->size());
    }
}

/// Throws FormatError on a missing entry or a size mismatch.
template <class T>
void load_views(const Container& c, const std::string& prefix,
                const std::vector<nn::ParamView<T>>& views) {
    for (const auto& v : views) {
        const Entry& e = c.get(prefix + "/" + v.name);
        std::vector<T> data;
        if constexpr (std::is_same_v<T, float>)
            data = e.as_f32();
        else
            data = e.as_f64();
        if (data.size() != v.value->size())
            throw FormatError("checkpoint: size mismatch for '" + prefix + "/" +
                              v.name + "'");
        *v.value = std::move(data);
    }
}

} // namespace turb::ckpt

#include "turb/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

#include "turb/errors.hpp"

namespace turb::ckpt {

namespace {

constexpr char kMagic[8] = {'T', 'U', 'R', 'B', 'C', 'K', 'P', 'T'};

std::size_t dtype_size(std::uint8_t dtype) {
    switch (dtype) {
        case 0: return 4;
        case 1: return 8;
        case 2: return 8;
        case 3: return 1;
    }
    throw FormatError("checkpoint: unknown dtype " + std::to_string(dtype));
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_all(std::FILE* f, const void* p, std::size_t n) {
    if (n && std::fwrite(p, 1, n, f) != n)
        throw FormatError("checkpoint: short write");
}

void read_all(std::FILE* f, void* p, std::size_t n) {
    if (n && std::fread(p, 1, n, f) != n)
        throw FormatError("checkpoint: truncated file");
}

template <class T>
void write_pod(std::FILE* f, T v) {
    write_all(f, &v, sizeof v);
}

template <class T>
T read_pod(std::FILE* f) {
    T v;
    read_all(f, &v, sizeof v);
    return v;
}

} // namespace

std::size_t Entry::count() const { return raw.size() / dtype_size(dtype); }

std::vector<float> Entry::as_f32() const {
    if (dtype != 0) throw FormatError("checkpoint: entry is not f32");
    std::vector<float> out(count());
    std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

std::vector<double> Entry::as_f64() const {
    if (dtype != 1) throw FormatError("checkpoint: entry is not f64");
    std::vector<double> out(count());
    std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

std::vector<std::int64_t> Entry::as_i64() const {
    if (dtype != 2) throw FormatError("checkpoint: entry is not i64");
    std::vector<std::int64_t> out(count());
    std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

std::string Entry::as_text() const {
    if (dtype != 3) throw FormatError("checkpoint: entry is not text");
    return std::string(raw.begin(), raw.end());
}

namespace {

Entry make_entry(std::uint8_t dtype, const void* data, std::size_t n) {
    Entry e;
    e.dtype = dtype;
    e.dims = {static_cast<std::int64_t>(n)};
    e.raw.resize(n * dtype_size(dtype));
    if (!e.raw.empty()) std::memcpy(e.raw.data(), data, e.raw.size());
    return e;
}

} // namespace

void Container::put_f32(const std::string& name, const float* data, std::size_t n) {
    entries_[name] = make_entry(0, data, n);
}

void Container::put_f64(const std::string& name, const double* data, std::size_t n) {
    entries_[name] = make_entry(1, data, n);
}

void Container::put_i64(const std::string& name, const std::int64_t* data,
                        std::size_t n) {
    entries_[name] = make_entry(2, data, n);
}

void Container::put_scalar_i64(const std::string& name, std::int64_t v) {
    put_i64(name, &v, 1);
}

void Container::put_text(const std::string& name, const std::string& text) {
    entries_[name] = make_entry(3, text.data(), text.size());
}

bool Container::has(const std::string& name) const {
    return entries_.count(name) != 0;
}

const Entry& Container::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
        throw FormatError("checkpoint: missing entry '" + name + "'");
    return it->second;
}

std::int64_t Container::get_scalar_i64(const std::string& name) const {
    const auto v = get(name).as_i64();
    if (v.size() != 1)
        throw FormatError("checkpoint: '" + name + "' is not a scalar");
    return v[0];
}

void Container::save(const std::string& path) const {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw FormatError("checkpoint: cannot open " + path + " for writing");
    write_all(f.get(), kMagic, sizeof kMagic);
    write_pod<std::uint32_t>(f.get(), kFormatVersion);
    write_pod<std::uint32_t>(f.get(), static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [name, e] : entries_) {
        write_pod<std::uint32_t>(f.get(), static_cast<std::uint32_t>(name.size()));
        write_all(f.get(), name.data(), name.size());
        write_pod<std::uint8_t>(f.get(), e.dtype);
        write_pod<std::uint8_t>(f.get(), static_cast<std::uint8_t>(e.dims.size()));
        for (auto d : e.dims) write_pod<std::int64_t>(f.get(), d);
        write_all(f.get(), e.raw.data(), e.raw.size());
    }
    if (std::fflush(f.get()) != 0)
        throw FormatError("checkpoint: flush failed for " + path);
}

Container Container::load(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw FormatError("checkpoint: cannot open " + path);
    char magic[8];
    read_all(f.get(), magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw FormatError("checkpoint: bad magic in " + path);
    const auto version = read_pod<std::uint32_t>(f.get());
    if (version != kFormatVersion)
        throw FormatError("checkpoint: unsupported format version " +
                          std::to_string(version) + " (expected " +
                          std::to_string(kFormatVersion) + ")");
    const auto n_entries = read_pod<std::uint32_t>(f.get());
    Container c;
    for (std::uint32_t i = 0; i < n_entries; ++i) {
        const auto name_len = read_pod<std::uint32_t>(f.get());
        if (name_len > 4096) throw FormatError("checkpoint: entry name too long");
        std::string name(name_len, '\0');
        read_all(f.get(), name.data(), name_len);
        Entry e;
        e.dtype = read_pod<std::uint8_t>(f.get());
        const auto ndim = read_pod<std::uint8_t>(f.get());
        std::size_t total = 1;
        for (std::uint8_t d = 0; d < ndim; ++d) {
            const auto dim = read_pod<std::int64_t>(f.get());
            if (dim < 0) throw FormatError("checkpoint: negative dimension");
            e.dims.push_back(dim);
            total *= static_cast<std::size_t>(dim);
        }
        if (ndim == 0) total = 0;
        e.raw.resize(total * dtype_size(e.dtype));
        read_all(f.get(), e.raw.data(), e.raw.size());
        c.entries_[name] = std::move(e);
    }
    return c;
}

} // namespace turb::ckpt

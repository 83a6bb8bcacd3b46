#include "turb/field.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "turb/errors.hpp"
#include "turb/kernels.hpp"

namespace turb {

FieldEnsemble::FieldEnsemble(std::int64_t realizations, std::int64_t samples,
                             double ls)
    : l_s(ls), r_(realizations), n_(samples) {
    if (r_ < 1 || n_ < 2)
        throw std::invalid_argument("FieldEnsemble: need R >= 1 and N >= 2");
    data_.assign(std::size_t(r_ * n_), 0.0);
}

std::vector<double> increments(const double* v, std::int64_t n,
                               std::int64_t lag) {
    if (lag <= 0 || lag >= n)
        throw std::invalid_argument("increments: lag must be in [1, N)");
    std::vector<double> out(std::size_t(n - lag));
    for (std::int64_t x = 0; x < n - lag; ++x) out[std::size_t(x)] = v[x + lag] - v[x];
    return out;
}

std::vector<double> increments(const std::vector<double>& v, std::int64_t lag) {
    return increments(v.data(), std::int64_t(v.size()), lag);
}

FieldEnsemble segment(const double* series, std::int64_t m, std::int64_t n,
                      std::int64_t stride, double l_s) {
    if (n > m) throw std::invalid_argument("segment: n exceeds series length");
    if (stride < 1) throw std::invalid_argument("segment: stride must be >= 1");
    std::int64_t r = (m - n) / stride + 1;
    FieldEnsemble out(r, n, l_s);
    for (std::int64_t i = 0; i < r; ++i) {
        const double* src = series + i * stride;
        double* dst = out.row(i);
        for (std::int64_t x = 0; x < n; ++x) dst[x] = src[x];
    }
    return out;
}

void ensemble_moments(const FieldEnsemble& ens, double* mean, double* var) {
    std::int64_t total = ens.realizations() * ens.samples();
    double sum, sumsq;
    kern::scalar::sum_sumsq(ens.data().data(), total, &sum, &sumsq);
    double mu = sum / double(total);
    *mean = mu;
    *var = sumsq / double(total) - mu * mu;
}

FieldEnsemble standardize(const FieldEnsemble& ens) {
    double mu, var;
    ensemble_moments(ens, &mu, &var);
    if (!(var > 0.0))
        throw DegenerateInput("standardize: ensemble has zero variance");
    double inv = 1.0 / std::sqrt(var);
    FieldEnsemble out = ens;
    for (double& x : out.data()) x = (x - mu) * inv;
    return out;
}

FieldEnsemble trim_borders(const FieldEnsemble& ens, std::int64_t n_b) {
    if (n_b < 0 || n_b % 2 != 0)
        throw std::invalid_argument("trim_borders: n_b must be even and >= 0");
    if (n_b >= ens.samples())
        throw std::invalid_argument("trim_borders: n_b >= realization length");
    if (n_b == 0) return ens;
    std::int64_t half = n_b / 2;
    std::int64_t n_out = ens.samples() - n_b;
    FieldEnsemble out(ens.realizations(), n_out, ens.l_s);
    out.meta = ens.meta;
    for (std::int64_t i = 0; i < ens.realizations(); ++i) {
        const double* src = ens.row(i) + half;
        double* dst = out.row(i);
        for (std::int64_t x = 0; x < n_out; ++x) dst[x] = src[x];
    }
    return out;
}

void write_ensemble(const std::string& stem, const FieldEnsemble& ens) {
    {
        std::ofstream f(stem + ".f32", std::ios::binary);
        if (!f) throw FormatError("cannot open " + stem + ".f32 for writing");
        std::vector<float> buf(std::size_t(ens.samples()));
        for (std::int64_t i = 0; i < ens.realizations(); ++i) {
            const double* src = ens.row(i);
            for (std::int64_t x = 0; x < ens.samples(); ++x)
                buf[std::size_t(x)] = float(src[x]);
            f.write(reinterpret_cast<const char*>(buf.data()),
                    std::streamsize(buf.size() * sizeof(float)));
        }
        if (!f) throw FormatError("short write to " + stem + ".f32");
    }
    std::ofstream m(stem + ".meta");
    if (!m) throw FormatError("cannot open " + stem + ".meta for writing");
    m << "realizations=" << ens.realizations() << "\n";
    m << "samples=" << ens.samples() << "\n";
    char ls[32];
    std::snprintf(ls, sizeof ls, "%.17g", ens.l_s);
    m << "ls=" << ls << "\n";
    auto opt = [&](const char* key, const std::optional<double>& v) {
        if (!v) return;
        char b[32];
        std::snprintf(b, sizeof b, "%.17g", *v);
        m << key << "=" << b << "\n";
    };
    opt("mean_velocity", ens.meta.mean_velocity);
    opt("sampling_frequency", ens.meta.sampling_frequency);
    opt("taylor_reynolds", ens.meta.taylor_reynolds);
    if (!m) throw FormatError("short write to " + stem + ".meta");
}

FieldEnsemble read_ensemble(const std::string& stem) {
    std::ifstream m(stem + ".meta");
    if (!m) throw FormatError("cannot open " + stem + ".meta");
    std::int64_t r = -1, n = -1;
    double ls = 1.0;
    FieldMeta meta;
    std::string line;
    int lineno = 0;
    while (std::getline(m, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(stem + ".meta:" + std::to_string(lineno) +
                              ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        try {
            if (key == "realizations") r = std::stoll(val);
            else if (key == "samples") n = std::stoll(val);
            else if (key == "ls") ls = std::stod(val);
            else if (key == "mean_velocity") meta.mean_velocity = std::stod(val);
            else if (key == "sampling_frequency") meta.sampling_frequency = std::stod(val);
            else if (key == "taylor_reynolds") meta.taylor_reynolds = std::stod(val);
            else
                throw FormatError(stem + ".meta:" + std::to_string(lineno) +
                                  ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw FormatError(stem + ".meta:" + std::to_string(lineno) +
                              ": bad value for '" + key + "'");
        }
    }
    if (r < 1 || n < 2)
        throw FormatError(stem + ".meta: missing or invalid realizations/samples");

    std::ifstream f(stem + ".f32", std::ios::binary);
    if (!f) throw FormatError("cannot open " + stem + ".f32");
    f.seekg(0, std::ios::end);
    std::int64_t bytes = f.tellg();
    if (bytes != r * n * std::int64_t(sizeof(float)))
        throw FormatError(stem + ".f32: size " + std::to_string(bytes) +
                          " does not match realizations*samples*4 = " +
                          std::to_string(r * n * 4));
    f.seekg(0);
    FieldEnsemble ens(r, n, ls);
    ens.meta = meta;
    std::vector<float> buf(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < r; ++i) {
        f.read(reinterpret_cast<char*>(buf.data()),
               std::streamsize(buf.size() * sizeof(float)));
        if (!f) throw FormatError("short read from " + stem + ".f32");
        double* dst = ens.row(i);
        for (std::int64_t x = 0; x < n; ++x) dst[x] = double(buf[std::size_t(x)]);
    }
    return ens;
}

} // namespace turb

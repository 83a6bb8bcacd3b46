#include "turb/oracles.hpp"

#include <fftw3.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "turb/errors.hpp"
#include "turb/rng.hpp"

namespace turb {

namespace {

// Fractional-Gaussian-noise covariance at lag k, unit variance at lag 1.
double fgn_cov(std::int64_t k, double h) {
    double a = std::pow(double(k + 1), 2.0 * h);
    double b = k > 0 ? 2.0 * std::pow(double(k), 2.0 * h) : 0.0;
    double c = std::pow(std::abs(double(k - 1)), 2.0 * h);
    return 0.5 * (a - b + c);
}

std::int64_t next_pow2(std::int64_t n) {
    std::int64_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Stationary Gaussian sampler by circulant embedding of cov[0..m] into a
// symmetric row of length 2m. One sample consumes 4m normal draws.
class CirculantSampler {
public:
    explicit CirculantSampler(const std::vector<double>& cov) {
        std::int64_t m = std::int64_t(cov.size()) - 1;
        n_ = 2 * m;
        std::vector<double> row(static_cast<std::size_t>(n_));
        for (std::int64_t j = 0; j <= m; ++j) row[std::size_t(j)] = cov[std::size_t(j)];
        for (std::int64_t j = m + 1; j < n_; ++j)
            row[std::size_t(j)] = cov[std::size_t(n_ - j)];

        auto* in = fftw_alloc_complex(static_cast<std::size_t>(n_));
        auto* out = fftw_alloc_complex(static_cast<std::size_t>(n_));
        fftw_plan plan = fftw_plan_dft_1d(int(n_), in, out, FFTW_FORWARD,
                                          FFTW_ESTIMATE);
        for (std::int64_t j = 0; j < n_; ++j) {
            in[j][0] = row[std::size_t(j)];
            in[j][1] = 0.0;
        }
        fftw_execute(plan);
        double lmax = 0.0, lmin = 0.0;
        std::vector<double> lambda(static_cast<std::size_t>(n_));
        for (std::int64_t j = 0; j < n_; ++j) {
            lambda[std::size_t(j)] = out[j][0];
            lmax = std::max(lmax, out[j][0]);
            lmin = std::min(lmin, out[j][0]);
        }
        fftw_destroy_plan(plan);
        fftw_free(in);
        fftw_free(out);

        ok_ = lmin >= -1e-10 * lmax;
        if (!ok_) return;
        sqrt_lambda_.resize(static_cast<std::size_t>(n_));
        for (std::int64_t j = 0; j < n_; ++j)
            sqrt_lambda_[std::size_t(j)] =
                std::sqrt(std::max(lambda[std::size_t(j)], 0.0));
    }

    bool ok() const { return ok_; }

    // First n_out coordinates of a stationary Gaussian vector with the
    // embedded covariance.
    void sample(rng::Stream& s, double* dst, std::int64_t n_out) const {
        auto* z = fftw_alloc_complex(static_cast<std::size_t>(n_));
        auto* w = fftw_alloc_complex(static_cast<std::size_t>(n_));
        fftw_plan plan = fftw_plan_dft_1d(int(n_), z, w, FFTW_FORWARD,
                                          FFTW_ESTIMATE);
        for (std::int64_t j = 0; j < n_; ++j) {
            double sl = sqrt_lambda_[std::size_t(j)];
            z[j][0] = sl * s.next_gaussian();
            z[j][1] = sl * s.next_gaussian();
        }
        fftw_execute(plan);
        double inv = 1.0 / std::sqrt(double(n_));
        for (std::int64_t x = 0; x < n_out; ++x) dst[x] = w[x][0] * inv;
        fftw_destroy_plan(plan);
        fftw_free(z);
        fftw_free(w);
    }

private:
    std::int64_t n_ = 0;
    bool ok_ = false;
    std::vector<double> sqrt_lambda_;
};

void check_hurst(double h) {
    if (!(h > 0.0 && h < 1.0))
        throw std::invalid_argument("hurst must be in (0,1)");
}

std::vector<double> fgn_cov_row(std::int64_t n, double h) {
    std::int64_t m = next_pow2(n);
    std::vector<double> cov(std::size_t(m) + 1);
    for (std::int64_t k = 0; k <= m; ++k) cov[std::size_t(k)] = fgn_cov(k, h);
    return cov;
}

// Lower-triangular Cholesky factor of the Toeplitz fGn covariance.
std::vector<double> fgn_cholesky(std::int64_t n, double h) {
    std::vector<double> a(std::size_t(n * n), 0.0);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j <= i; ++j)
            a[std::size_t(i * n + j)] = fgn_cov(i - j, h);
    for (std::int64_t j = 0; j < n; ++j) {
        double d = a[std::size_t(j * n + j)];
        for (std::int64_t k = 0; k < j; ++k) {
            double l = a[std::size_t(j * n + k)];
            d -= l * l;
        }
        if (d <= 0.0)
            throw EmbeddingFailure("fgn covariance is not positive definite");
        d = std::sqrt(d);
        a[std::size_t(j * n + j)] = d;
        for (std::int64_t i = j + 1; i < n; ++i) {
            double s = a[std::size_t(i * n + j)];
            for (std::int64_t k = 0; k < j; ++k)
                s -= a[std::size_t(i * n + k)] * a[std::size_t(j * n + k)];
            a[std::size_t(i * n + j)] = s / d;
        }
    }
    return a;
}

void cumsum_inplace(double* v, std::int64_t n) {
    for (std::int64_t x = 1; x < n; ++x) v[x] += v[x - 1];
}

} // namespace

FieldEnsemble gaussian_noise(std::int64_t r, std::int64_t n,
                             std::uint64_t seed) {
    FieldEnsemble ens(r, n);
    for (std::int64_t i = 0; i < r; ++i) {
        rng::Stream s(seed, rng::StreamTag::Noise, std::uint64_t(i));
        s.fill_gaussian(ens.row(i), n);
    }
    return ens;
}

FieldEnsemble fbm(std::int64_t r, std::int64_t n, double hurst,
                  std::uint64_t seed) {
    check_hurst(hurst);
    CirculantSampler cs(fgn_cov_row(n, hurst));
    if (!cs.ok()) {
        if (n <= 4096) return detail::fbm_dense(r, n, hurst, seed);
        throw EmbeddingFailure(
            "circulant embedding of the fgn covariance has negative "
            "eigenvalues and the series is too long for dense factorization");
    }
    FieldEnsemble ens(r, n);
    for (std::int64_t i = 0; i < r; ++i) {
        rng::Stream s(seed, rng::StreamTag::FbmSpectral, std::uint64_t(i));
        cs.sample(s, ens.row(i), n);
        cumsum_inplace(ens.row(i), n);
    }
    return ens;
}

FieldEnsemble detail::fbm_dense(std::int64_t r, std::int64_t n, double hurst,
                                std::uint64_t seed) {
    check_hurst(hurst);
    auto chol = fgn_cholesky(n, hurst);
    FieldEnsemble ens(r, n);
    std::vector<double> g(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < r; ++i) {
        rng::Stream s(seed, rng::StreamTag::FbmSpectral, std::uint64_t(i));
        s.fill_gaussian(g.data(), n);
        double* row = ens.row(i);
        for (std::int64_t x = 0; x < n; ++x) {
            double acc = 0.0;
            for (std::int64_t k = 0; k <= x; ++k)
                acc += chol[std::size_t(x * n + k)] * g[std::size_t(k)];
            row[x] = acc;
        }
        cumsum_inplace(row, n);
    }
    return ens;
}

FieldEnsemble mrw(std::int64_t r, std::int64_t n, double hurst, double lambda2,
                  std::int64_t l_c, std::uint64_t seed) {
    check_hurst(hurst);
    if (lambda2 < 0.0 || lambda2 > 0.2)
        throw std::invalid_argument("mrw: lambda2 must be in [0, 0.2]");
    if (l_c < 2 || l_c > n)
        throw std::invalid_argument("mrw: l_c must be in [2, n]");

    CirculantSampler base(fgn_cov_row(n, hurst));
    if (!base.ok())
        throw EmbeddingFailure("mrw: fgn covariance embedding failed");

    std::int64_t m = next_pow2(n);
    std::vector<double> logcov(std::size_t(m) + 1, 0.0);
    for (std::int64_t d = 0; d < l_c && d <= m; ++d)
        logcov[std::size_t(d)] = lambda2 * std::log(double(l_c) / double(d + 1));
    CirculantSampler logs(logcov);
    if (!logs.ok())
        throw EmbeddingFailure("mrw: log-correlated covariance embedding failed");

    double var_omega = lambda2 * std::log(double(l_c));
    FieldEnsemble ens(r, n);
    std::vector<double> omega(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < r; ++i) {
        rng::Stream se(seed, rng::StreamTag::MrwBase, std::uint64_t(i));
        rng::Stream sw(seed, rng::StreamTag::MrwLog, std::uint64_t(i));
        double* row = ens.row(i);
        base.sample(se, row, n);
        if (lambda2 > 0.0) {
            logs.sample(sw, omega.data(), n);
            for (std::int64_t x = 0; x < n; ++x)
                row[x] *= std::exp(omega[std::size_t(x)] - var_omega);
        }
        cumsum_inplace(row, n);
    }
    return ens;
}

} // namespace turb

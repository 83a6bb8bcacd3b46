#pragma once

#include <cstdint>

#include "turb/field.hpp"

// Stochastic reference generators with known scaling laws. Each realization
// is drawn from its own counter-based stream, so ensembles are reproducible
// per seed and independent of generation order.

namespace turb {

/// iid standard normal samples.
FieldEnsemble gaussian_noise(std::int64_t r, std::int64_t n,
                             std::uint64_t seed);

/// Fractional Brownian motion path; increments are fractional Gaussian noise
/// with unit variance at lag 1, synthesized by circulant embedding. Falls
/// back to dense covariance factorization for n <= 4096 when the embedding
/// has negative eigenvalues; beyond that, throws EmbeddingFailure.
FieldEnsemble fbm(std::int64_t r, std::int64_t n, double hurst,
                  std::uint64_t seed);

/// Multifractal random walk: increments eps_i * exp(omega_i - Var(omega))
/// with eps fractional Gaussian noise (hurst) and omega a zero-mean Gaussian
/// sequence with covariance lambda2 * ln(l_c / (d+1)) for d < l_c, 0 beyond.
/// The normalization keeps E[delta^2] = E[eps^2]. Path is the cumulative sum.
FieldEnsemble mrw(std::int64_t r, std::int64_t n, double hurst, double lambda2,
                  std::int64_t l_c, std::uint64_t seed);

namespace detail {

/// Dense-factorization fBm used as the embedding fallback; exposed for
/// cross-checking the two paths.
FieldEnsemble fbm_dense(std::int64_t r, std::int64_t n, double hurst,
                        std::uint64_t seed);

} // namespace detail

} // namespace turb

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace turb {

/// Instrument metadata carried through untouched.
struct FieldMeta {
    std::optional<double> mean_velocity;
    std::optional<double> sampling_frequency;
    std::optional<double> taylor_reynolds;
};

/// R realizations of a 1D field, N samples each, row-major, plus the
/// sampling distance l_s. Samples are held in double; file interchange is
/// float32 (see write_ensemble).
class FieldEnsemble {
public:
    FieldEnsemble(std::int64_t realizations, std::int64_t samples,
                  double l_s = 1.0);

    std::int64_t realizations() const { return r_; }
    std::int64_t samples() const { return n_; }

    double* row(std::int64_t i) { return data_.data() + i * n_; }
    const double* row(std::int64_t i) const { return data_.data() + i * n_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    double l_s = 1.0;
    FieldMeta meta;

private:
    std::int64_t r_;
    std::int64_t n_;
    std::vector<double> data_;
};

/// out[x] = v[x+lag] - v[x] for x in [0, n-lag); no wraparound.
std::vector<double> increments(const double* v, std::int64_t n,
                               std::int64_t lag);
std::vector<double> increments(const std::vector<double>& v, std::int64_t lag);

/// Cut a long series into floor((m-n)/stride)+1 realizations of length n,
/// realization i starting at i*stride.
FieldEnsemble segment(const double* series, std::int64_t m, std::int64_t n,
                      std::int64_t stride, double l_s = 1.0);

/// One affine transform over all R*N samples bringing the global mean to 0
/// and the global (population) variance to 1. Throws DegenerateInput on a
/// constant ensemble.
FieldEnsemble standardize(const FieldEnsemble& ens);

/// Global mean and population variance over all samples.
void ensemble_moments(const FieldEnsemble& ens, double* mean, double* var);

/// Drop n_b/2 samples from each end of every realization; n_b even.
FieldEnsemble trim_borders(const FieldEnsemble& ens, std::int64_t n_b);

/// Write <stem>.f32 (row-major little-endian float32) and <stem>.meta.
void write_ensemble(const std::string& stem, const FieldEnsemble& ens);

/// Read an ensemble written by write_ensemble. Throws FormatError on a
/// malformed sidecar or a size mismatch against the payload.
FieldEnsemble read_ensemble(const std::string& stem);

} // namespace turb

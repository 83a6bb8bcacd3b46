#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turb/field.hpp"

namespace turb {

/// Analysis lags in samples plus the flow's integral and dissipative scale
/// markers (same unit). Defaults follow the hot-wire record the tooling was
/// calibrated against: L = 2350 l_s, eta = 5 l_s.
struct ScaleGrid {
    std::vector<std::int64_t> lags;
    double integral_scale = 2350.0;
    double kolmogorov_scale = 5.0;

    /// 24 approximately log-spaced integer lags from 1 to n/4, deduplicated.
    static ScaleGrid default_grid(std::int64_t n);
};

/// Per-scale log S_2, skewness and log(F/3): per-realization rows plus
/// ensemble mean and population standard deviation per lag. Logs are natural.
struct StatCurves {
    std::vector<std::int64_t> lags;
    std::int64_t rows = 0;
    std::vector<double> log_s2_rows, skew_rows, logf3_rows;
    std::vector<double> log_s2_mean, log_s2_std;
    std::vector<double> skew_mean, skew_std;
    std::vector<double> logf3_mean, logf3_std;
};

struct ZetaResult {
    std::vector<double> orders;
    std::vector<double> zeta;
    std::vector<double> std_err;
    std::int64_t fit_min = 0, fit_max = 0;
};

/// Histogram of centered, standardized increments at one lag. Empty bins
/// carry NaN log-density in memory and the NA sentinel on disk.
struct IncrementPdf {
    std::int64_t lag = 0;
    int n_bins = 0;
    std::vector<double> bin_centers;
    std::vector<double> log_density;
};

enum class MomentMode { Signed, Absolute };

/// S_p(l): moment of order p of the increments, pooled over all realizations
/// and positions. Signed mode averages (d)^p, absolute |d|^p.
std::vector<double> structure_function(const FieldEnsemble& ens, double p,
                                       const ScaleGrid& grid, MomentMode mode);

/// S(l) = S_3(l) / S_2(l)^{3/2} with signed S_3, pooled moments.
std::vector<double> skewness_curve(const FieldEnsemble& ens,
                                   const ScaleGrid& grid);

/// F(l) = S_4(l) / S_2(l)^2, pooled moments.
std::vector<double> flatness_curve(const FieldEnsemble& ens,
                                   const ScaleGrid& grid);

struct LogLogFit {
    double slope = 0.0, intercept = 0.0, std_err = 0.0;
};

/// OLS of ln(values) against ln(lags); needs >= 3 points, all positive.
LogLogFit fit_loglog(const std::vector<std::int64_t>& lags,
                     const std::vector<double>& values);

/// OLS slope of ln S_p vs ln l over the grid lags inside [l_min, l_max],
/// one fit per order, absolute moments. Requires >= 3 lags in range.
ZetaResult zeta_fit(const FieldEnsemble& ens, const std::vector<double>& orders,
                    std::int64_t l_min, std::int64_t l_max,
                    const ScaleGrid& grid);

/// Orders {1, 1.5, ..., 5} used for scaling-exponent plots.
std::vector<double> default_zeta_orders();

IncrementPdf increment_pdf(const FieldEnsemble& ens, std::int64_t lag,
                           int n_bins);

/// Per-realization curves with ensemble mean/std; the three curves the
/// statistical critics consume.
StatCurves stat_curves(const FieldEnsemble& ens, const ScaleGrid& grid);

void write_stat_csv(const std::string& path, const StatCurves& c,
                    const ScaleGrid& grid);
void write_zeta_csv(const std::string& path, const ZetaResult& z);
void write_pdf_csv(const std::string& path,
                   const std::vector<IncrementPdf>& pdfs);

/// Parsers for the CSVs above. Columns come back verbatim; writing a parsed
/// result again reproduces the file byte for byte. All throw FormatError.
StatCurves read_stat_csv(const std::string& path, ScaleGrid& grid);
ZetaResult read_zeta_csv(const std::string& path);
std::vector<IncrementPdf> read_pdf_csv(const std::string& path);

/// Per-lag absolute differences of the ensemble-mean curves of two
/// ensembles on a shared grid, plus the largest scaling-exponent gap over
/// the fitted orders.
struct CompareReport {
    std::vector<std::int64_t> lags;
    std::vector<double> d_log_s2, d_skew, d_logf3;
    double max_d_log_s2 = 0, max_d_skew = 0, max_d_logf3 = 0;
    double max_d_zeta = 0;
    std::vector<double> orders, zeta_a, zeta_b;
};

CompareReport compare_report(const FieldEnsemble& a, const FieldEnsemble& b,
                             const ScaleGrid& grid,
                             const std::vector<double>& orders,
                             std::int64_t fit_min, std::int64_t fit_max);

void write_compare_csv(const std::string& path, const CompareReport& rep);
CompareReport read_compare_csv(const std::string& path);

} // namespace turb

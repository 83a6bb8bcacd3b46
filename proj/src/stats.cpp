#include "turb/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "turb/errors.hpp"
#include "turb/kernels.hpp"

namespace turb {

namespace {

constexpr double kLn3 = 1.0986122886681098;

void check_grid(const ScaleGrid& grid, const FieldEnsemble& ens) {
    if (grid.lags.empty()) throw std::invalid_argument("ScaleGrid: no lags");
    for (std::size_t i = 1; i < grid.lags.size(); ++i)
        if (grid.lags[i] <= grid.lags[i - 1])
            throw std::invalid_argument("ScaleGrid: lags must be strictly increasing");
    if (grid.lags.front() < 1)
        throw std::invalid_argument("ScaleGrid: lags start at 1");
    if (grid.lags.back() > ens.samples() / 2)
        throw std::invalid_argument("ScaleGrid: largest lag exceeds N/2");
}

// Pooled raw moment sums of order 2,3,4 at one lag, plus the sample count.
void pooled_moments(const FieldEnsemble& ens, std::int64_t lag, double* s2,
                    double* s3, double* s4, std::int64_t* count) {
    double t2 = 0.0, t3 = 0.0, t4 = 0.0;
    for (std::int64_t r = 0; r < ens.realizations(); ++r) {
        double a2, a3, a4;
        kern::ops().increment_moments_f64(ens.row(r), ens.samples(), lag, &a2,
                                          &a3, &a4);
        t2 += a2;
        t3 += a3;
        t4 += a4;
    }
    *s2 = t2;
    *s3 = t3;
    *s4 = t4;
    *count = ens.realizations() * (ens.samples() - lag);
}

struct MeanStd {
    double mean, sd;
};

// Ensemble mean and population standard deviation of one column.
MeanStd column_stats(const double* rows, std::int64_t r, std::int64_t ncol,
                     std::int64_t col) {
    double s = 0.0;
    for (std::int64_t i = 0; i < r; ++i) s += rows[i * ncol + col];
    double mu = s / double(r);
    double q = 0.0;
    for (std::int64_t i = 0; i < r; ++i) {
        double d = rows[i * ncol + col] - mu;
        q += d * d;
    }
    return {mu, std::sqrt(q / double(r))};
}

void fmt(std::ofstream& f, double x) {
    char b[40];
    std::snprintf(b, sizeof b, "%.10g", x);
    f << b;
}

} // namespace

ScaleGrid ScaleGrid::default_grid(std::int64_t n) {
    if (n < 8) throw std::invalid_argument("default_grid: series too short");
    ScaleGrid g;
    double lmax = double(n) / 4.0;
    for (int i = 0; i < 24; ++i) {
        double t = double(i) / 23.0;
        auto lag = std::int64_t(std::llround(std::pow(lmax, t)));
        lag = std::clamp<std::int64_t>(lag, 1, n / 4);
        if (g.lags.empty() || lag > g.lags.back()) g.lags.push_back(lag);
    }
    return g;
}

std::vector<double> structure_function(const FieldEnsemble& ens, double p,
                                       const ScaleGrid& grid,
                                       MomentMode mode) {
    if (ens.realizations() < 1) throw std::invalid_argument("empty ensemble");
    if (!(p > 0)) throw std::invalid_argument("structure_function: p must be > 0");
    check_grid(grid, ens);
    bool integer_p = std::fmod(p, 1.0) == 0.0;
    if (mode == MomentMode::Signed && !integer_p)
        throw std::invalid_argument("structure_function: signed mode needs integer p");
    std::vector<double> out(grid.lags.size());
    bool p2 = p == 2.0, p3 = p == 3.0, p4 = p == 4.0;
    for (std::size_t li = 0; li < grid.lags.size(); ++li) {
        std::int64_t lag = grid.lags[li];
        if (p2 || p4 || (p3 && mode == MomentMode::Signed)) {
            double s2, s3, s4;
            std::int64_t cnt;
            pooled_moments(ens, lag, &s2, &s3, &s4, &cnt);
            out[li] = (p2 ? s2 : p3 ? s3 : s4) / double(cnt);
            continue;
        }
        double sum = 0.0;
        std::int64_t cnt = 0;
        for (std::int64_t r = 0; r < ens.realizations(); ++r) {
            const double* v = ens.row(r);
            std::int64_t m = ens.samples() - lag;
            double acc = 0.0;
            for (std::int64_t x = 0; x < m; ++x) {
                double d = v[x + lag] - v[x];
                acc += mode == MomentMode::Signed ? std::pow(d, p)
                                                  : std::pow(std::fabs(d), p);
            }
            sum += acc;
            cnt += m;
        }
        out[li] = sum / double(cnt);
    }
    return out;
}

std::vector<double> skewness_curve(const FieldEnsemble& ens,
                                   const ScaleGrid& grid) {
    check_grid(grid, ens);
    std::vector<double> out(grid.lags.size());
    for (std::size_t li = 0; li < grid.lags.size(); ++li) {
        std::int64_t lag = grid.lags[li];
        double s2, s3, s4;
        std::int64_t cnt;
        pooled_moments(ens, lag, &s2, &s3, &s4, &cnt);
        double m2 = s2 / double(cnt);
        if (!(m2 > 0.0)) throw DegenerateScale("skewness_curve: S_2 is zero", lag);
        out[li] = (s3 / double(cnt)) / std::pow(m2, 1.5);
    }
    return out;
}

std::vector<double> flatness_curve(const FieldEnsemble& ens,
                                   const ScaleGrid& grid) {
    check_grid(grid, ens);
    std::vector<double> out(grid.lags.size());
    for (std::size_t li = 0; li < grid.lags.size(); ++li) {
        std::int64_t lag = grid.lags[li];
        double s2, s3, s4;
        std::int64_t cnt;
        pooled_moments(ens, lag, &s2, &s3, &s4, &cnt);
        double m2 = s2 / double(cnt);
        if (!(m2 > 0.0)) throw DegenerateScale("flatness_curve: S_2 is zero", lag);
        out[li] = (s4 / double(cnt)) / (m2 * m2);
    }
    return out;
}

std::vector<double> default_zeta_orders() {
    return {1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0};
}

LogLogFit fit_loglog(const std::vector<std::int64_t>& lags,
                     const std::vector<double>& values) {
    if (lags.size() != values.size() || lags.size() < 3)
        throw std::invalid_argument("fit_loglog: need >= 3 matched points");
    std::size_t n = lags.size();
    std::vector<double> lx(n), ly(n);
    double xbar = 0.0, ybar = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(values[i] > 0.0))
            throw DegenerateScale("fit_loglog: non-positive value", lags[i]);
        lx[i] = std::log(double(lags[i]));
        ly[i] = std::log(values[i]);
        xbar += lx[i];
        ybar += ly[i];
    }
    xbar /= double(n);
    ybar /= double(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - xbar) * (lx[i] - xbar);
        sxy += (lx[i] - xbar) * (ly[i] - ybar);
    }
    LogLogFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = ybar - fit.slope * xbar;
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double res = ly[i] - (fit.intercept + fit.slope * lx[i]);
        ssr += res * res;
    }
    fit.std_err =
        n > 2 ? std::sqrt(ssr / double(n - 2) / sxx) : 0.0;
    return fit;
}

ZetaResult zeta_fit(const FieldEnsemble& ens, const std::vector<double>& orders,
                    std::int64_t l_min, std::int64_t l_max,
                    const ScaleGrid& grid) {
    check_grid(grid, ens);
    std::vector<std::int64_t> lags;
    for (std::int64_t l : grid.lags)
        if (l >= l_min && l <= l_max) lags.push_back(l);
    if (lags.size() < 3)
        throw std::invalid_argument("zeta_fit: need >= 3 grid lags inside fit range");

    ZetaResult z;
    z.orders = orders;
    z.fit_min = l_min;
    z.fit_max = l_max;
    ScaleGrid sub = grid;
    sub.lags = lags;
    for (double p : orders) {
        auto sp = structure_function(ens, p, sub, MomentMode::Absolute);
        auto fit = fit_loglog(lags, sp);
        z.zeta.push_back(fit.slope);
        z.std_err.push_back(fit.std_err);
    }
    return z;
}

IncrementPdf increment_pdf(const FieldEnsemble& ens, std::int64_t lag,
                           int n_bins) {
    if (lag < 1 || lag >= ens.samples())
        throw std::invalid_argument("increment_pdf: lag must be in [1, N)");
    if (n_bins < 16) throw std::invalid_argument("increment_pdf: n_bins >= 16");

    std::int64_t per = ens.samples() - lag;
    std::int64_t total = ens.realizations() * per;
    std::vector<double> d(static_cast<std::size_t>(total));
    for (std::int64_t r = 0; r < ens.realizations(); ++r) {
        const double* v = ens.row(r);
        double* dst = d.data() + r * per;
        for (std::int64_t x = 0; x < per; ++x) dst[x] = v[x + lag] - v[x];
    }
    double sum, sumsq;
    kern::scalar::sum_sumsq(d.data(), total, &sum, &sumsq);
    double mu = sum / double(total);
    double var = sumsq / double(total) - mu * mu;
    if (!(var > 0.0))
        throw DegenerateScale("increment_pdf: zero-variance increments", lag);
    double inv = 1.0 / std::sqrt(var);

    double amax = 0.0;
    for (double& x : d) {
        x = (x - mu) * inv;
        amax = std::max(amax, std::fabs(x));
    }
    double half = amax * (1.0 + 1e-9);
    if (half == 0.0) half = 1.0;
    double width = 2.0 * half / double(n_bins);

    std::vector<std::int64_t> counts(std::size_t(n_bins), 0);
    for (double x : d) {
        auto b = std::int64_t((x + half) / width);
        b = std::clamp<std::int64_t>(b, 0, n_bins - 1);
        ++counts[std::size_t(b)];
    }

    IncrementPdf pdf;
    pdf.lag = lag;
    pdf.n_bins = n_bins;
    pdf.bin_centers.resize(static_cast<std::size_t>(n_bins));
    pdf.log_density.resize(static_cast<std::size_t>(n_bins));
    for (int b = 0; b < n_bins; ++b) {
        pdf.bin_centers[std::size_t(b)] = -half + (double(b) + 0.5) * width;
        if (counts[std::size_t(b)] == 0) {
            pdf.log_density[std::size_t(b)] =
                std::numeric_limits<double>::quiet_NaN();
        } else {
            double dens = double(counts[std::size_t(b)]) / (double(total) * width);
            pdf.log_density[std::size_t(b)] = std::log(dens);
        }
    }
    return pdf;
}

StatCurves stat_curves(const FieldEnsemble& ens, const ScaleGrid& grid) {
    check_grid(grid, ens);
    std::int64_t r = ens.realizations();
    auto nl = std::int64_t(grid.lags.size());
    StatCurves c;
    c.lags = grid.lags;
    c.rows = r;
    c.log_s2_rows.resize(std::size_t(r * nl));
    c.skew_rows.resize(std::size_t(r * nl));
    c.logf3_rows.resize(std::size_t(r * nl));

    for (std::int64_t i = 0; i < r; ++i) {
        for (std::int64_t li = 0; li < nl; ++li) {
            std::int64_t lag = grid.lags[std::size_t(li)];
            double s2, s3, s4;
            kern::ops().increment_moments_f64(ens.row(i), ens.samples(), lag,
                                              &s2, &s3, &s4);
            double cnt = double(ens.samples() - lag);
            double m2 = s2 / cnt, m3 = s3 / cnt, m4 = s4 / cnt;
            if (!(m2 > 0.0))
                throw DegenerateScale("stat_curves: S_2 is zero", lag);
            c.log_s2_rows[std::size_t(i * nl + li)] = std::log(m2);
            c.skew_rows[std::size_t(i * nl + li)] = m3 / std::pow(m2, 1.5);
            c.logf3_rows[std::size_t(i * nl + li)] =
                std::log(m4) - 2.0 * std::log(m2) - kLn3;
        }
    }

    c.log_s2_mean.resize(static_cast<std::size_t>(nl));
    c.log_s2_std.resize(static_cast<std::size_t>(nl));
    c.skew_mean.resize(static_cast<std::size_t>(nl));
    c.skew_std.resize(static_cast<std::size_t>(nl));
    c.logf3_mean.resize(static_cast<std::size_t>(nl));
    c.logf3_std.resize(static_cast<std::size_t>(nl));
    for (std::int64_t li = 0; li < nl; ++li) {
        auto a = column_stats(c.log_s2_rows.data(), r, nl, li);
        auto b = column_stats(c.skew_rows.data(), r, nl, li);
        auto f = column_stats(c.logf3_rows.data(), r, nl, li);
        c.log_s2_mean[std::size_t(li)] = a.mean;
        c.log_s2_std[std::size_t(li)] = a.sd;
        c.skew_mean[std::size_t(li)] = b.mean;
        c.skew_std[std::size_t(li)] = b.sd;
        c.logf3_mean[std::size_t(li)] = f.mean;
        c.logf3_std[std::size_t(li)] = f.sd;
    }
    return c;
}

void write_stat_csv(const std::string& path, const StatCurves& c,
                    const ScaleGrid& grid) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    char head[96];
    std::snprintf(head, sizeof head,
                  "# integral_scale=%.17g kolmogorov_scale=%.17g\n",
                  grid.integral_scale, grid.kolmogorov_scale);
    f << head;
    f << "lag,log_l_over_L,log_s2_mean,log_s2_std,skew_mean,skew_std,"
         "logF3_mean,logF3_std\n";
    for (std::size_t i = 0; i < c.lags.size(); ++i) {
        f << c.lags[i] << ",";
        fmt(f, std::log(double(c.lags[i]) / grid.integral_scale));
        f << ",";
        fmt(f, c.log_s2_mean[i]);
        f << ",";
        fmt(f, c.log_s2_std[i]);
        f << ",";
        fmt(f, c.skew_mean[i]);
        f << ",";
        fmt(f, c.skew_std[i]);
        f << ",";
        fmt(f, c.logf3_mean[i]);
        f << ",";
        fmt(f, c.logf3_std[i]);
        f << "\n";
    }
    if (!f) throw FormatError("short write to " + path);
}

void write_zeta_csv(const std::string& path, const ZetaResult& z) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << "# fit_min=" << z.fit_min << " fit_max=" << z.fit_max << "\n";
    f << "p,zeta,stderr\n";
    for (std::size_t i = 0; i < z.orders.size(); ++i) {
        fmt(f, z.orders[i]);
        f << ",";
        fmt(f, z.zeta[i]);
        f << ",";
        fmt(f, z.std_err[i]);
        f << "\n";
    }
    if (!f) throw FormatError("short write to " + path);
}

void write_pdf_csv(const std::string& path,
                   const std::vector<IncrementPdf>& pdfs) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << "lag,bin_center,log_density\n";
    for (const auto& pdf : pdfs) {
        for (int b = 0; b < pdf.n_bins; ++b) {
            f << pdf.lag << ",";
            fmt(f, pdf.bin_centers[std::size_t(b)]);
            f << ",";
            double ld = pdf.log_density[std::size_t(b)];
            if (std::isnan(ld)) f << "NA";
            else fmt(f, ld);
            f << "\n";
        }
    }
    if (!f) throw FormatError("short write to " + path);
}

namespace {

// "key=value" pairs on a "# ..." comment line
double comment_value(const std::string& line, const std::string& key,
                     const std::string& path) {
    const std::string needle = key + "=";
    std::size_t at = line.find(needle);
    if (at == std::string::npos)
        throw FormatError(path + ": missing " + key + " in header comment");
    at += needle.size();
    std::size_t end = line.find(' ', at);
    if (end == std::string::npos) end = line.size();
    try {
        return std::stod(line.substr(at, end - at));
    } catch (const std::exception&) {
        throw FormatError(path + ": bad " + key + " in header comment");
    }
}

std::vector<std::string> split_row(const std::string& line, std::size_t ncol,
                                   const std::string& path) {
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
        std::size_t next = line.find(',', pos);
        if (next == std::string::npos) {
            cells.push_back(line.substr(pos));
            break;
        }
        cells.push_back(line.substr(pos, next - pos));
        pos = next + 1;
    }
    if (cells.size() != ncol)
        throw FormatError(path + ": expected " + std::to_string(ncol) +
                          " columns, got " + std::to_string(cells.size()));
    return cells;
}

double cell_num(const std::string& cell, const std::string& path) {
    try {
        return std::stod(cell);
    } catch (const std::exception&) {
        throw FormatError(path + ": bad cell '" + cell + "'");
    }
}

} // namespace

StatCurves read_stat_csv(const std::string& path, ScaleGrid& grid) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("# ", 0) != 0)
        throw FormatError(path + ": missing scale comment line");
    grid.integral_scale = comment_value(line, "integral_scale", path);
    grid.kolmogorov_scale = comment_value(line, "kolmogorov_scale", path);
    if (!std::getline(f, line) ||
        line != "lag,log_l_over_L,log_s2_mean,log_s2_std,skew_mean,skew_std,"
                "logF3_mean,logF3_std")
        throw FormatError(path + ": not a statistics table");
    StatCurves c;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto cells = split_row(line, 8, path);
        c.lags.push_back(std::int64_t(cell_num(cells[0], path)));
        c.log_s2_mean.push_back(cell_num(cells[2], path));
        c.log_s2_std.push_back(cell_num(cells[3], path));
        c.skew_mean.push_back(cell_num(cells[4], path));
        c.skew_std.push_back(cell_num(cells[5], path));
        c.logf3_mean.push_back(cell_num(cells[6], path));
        c.logf3_std.push_back(cell_num(cells[7], path));
    }
    if (c.lags.empty()) throw FormatError(path + ": no rows");
    grid.lags = c.lags;
    return c;
}

ZetaResult read_zeta_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("# ", 0) != 0)
        throw FormatError(path + ": missing fit range comment line");
    ZetaResult z;
    z.fit_min = std::int64_t(comment_value(line, "fit_min", path));
    z.fit_max = std::int64_t(comment_value(line, "fit_max", path));
    if (!std::getline(f, line) || line != "p,zeta,stderr")
        throw FormatError(path + ": not a scaling exponent table");
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto cells = split_row(line, 3, path);
        z.orders.push_back(cell_num(cells[0], path));
        z.zeta.push_back(cell_num(cells[1], path));
        z.std_err.push_back(cell_num(cells[2], path));
    }
    if (z.orders.empty()) throw FormatError(path + ": no rows");
    return z;
}

std::vector<IncrementPdf> read_pdf_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "lag,bin_center,log_density")
        throw FormatError(path + ": not a histogram table");
    std::vector<IncrementPdf> pdfs;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto cells = split_row(line, 3, path);
        const std::int64_t lag = std::int64_t(cell_num(cells[0], path));
        if (pdfs.empty() || pdfs.back().lag != lag) {
            pdfs.push_back(IncrementPdf{});
            pdfs.back().lag = lag;
        }
        auto& pdf = pdfs.back();
        pdf.bin_centers.push_back(cell_num(cells[1], path));
        pdf.log_density.push_back(
            cells[2] == "NA" ? std::numeric_limits<double>::quiet_NaN()
                             : cell_num(cells[2], path));
        pdf.n_bins = int(pdf.bin_centers.size());
    }
    if (pdfs.empty()) throw FormatError(path + ": no rows");
    return pdfs;
}

CompareReport compare_report(const FieldEnsemble& a, const FieldEnsemble& b,
                             const ScaleGrid& grid,
                             const std::vector<double>& orders,
                             std::int64_t fit_min, std::int64_t fit_max) {
    StatCurves ca = stat_curves(a, grid);
    StatCurves cb = stat_curves(b, grid);
    CompareReport rep;
    rep.lags = grid.lags;
    for (std::size_t i = 0; i < grid.lags.size(); ++i) {
        rep.d_log_s2.push_back(
            std::fabs(ca.log_s2_mean[i] - cb.log_s2_mean[i]));
        rep.d_skew.push_back(std::fabs(ca.skew_mean[i] - cb.skew_mean[i]));
        rep.d_logf3.push_back(std::fabs(ca.logf3_mean[i] - cb.logf3_mean[i]));
        rep.max_d_log_s2 = std::max(rep.max_d_log_s2, rep.d_log_s2.back());
        rep.max_d_skew = std::max(rep.max_d_skew, rep.d_skew.back());
        rep.max_d_logf3 = std::max(rep.max_d_logf3, rep.d_logf3.back());
    }
    ZetaResult za = zeta_fit(a, orders, fit_min, fit_max, grid);
    ZetaResult zb = zeta_fit(b, orders, fit_min, fit_max, grid);
    rep.orders = orders;
    rep.zeta_a = za.zeta;
    rep.zeta_b = zb.zeta;
    for (std::size_t i = 0; i < orders.size(); ++i)
        rep.max_d_zeta =
            std::max(rep.max_d_zeta, std::fabs(za.zeta[i] - zb.zeta[i]));
    return rep;
}

void write_compare_csv(const std::string& path, const CompareReport& rep) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    char head[48];
    std::snprintf(head, sizeof head, "# max_d_zeta=%.17g\n", rep.max_d_zeta);
    f << head;
    f << "lag,d_log_s2,d_skew,d_logF3\n";
    for (std::size_t i = 0; i < rep.lags.size(); ++i) {
        f << rep.lags[i] << ",";
        fmt(f, rep.d_log_s2[i]);
        f << ",";
        fmt(f, rep.d_skew[i]);
        f << ",";
        fmt(f, rep.d_logf3[i]);
        f << "\n";
    }
    if (!f) throw FormatError("short write to " + path);
}

CompareReport read_compare_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("# ", 0) != 0)
        throw FormatError(path + ": missing summary comment line");
    CompareReport rep;
    rep.max_d_zeta = comment_value(line, "max_d_zeta", path);
    if (!std::getline(f, line) || line != "lag,d_log_s2,d_skew,d_logF3")
        throw FormatError(path + ": not a comparison table");
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto cells = split_row(line, 4, path);
        rep.lags.push_back(std::int64_t(cell_num(cells[0], path)));
        rep.d_log_s2.push_back(cell_num(cells[1], path));
        rep.d_skew.push_back(cell_num(cells[2], path));
        rep.d_logf3.push_back(cell_num(cells[3], path));
        rep.max_d_log_s2 = std::max(rep.max_d_log_s2, rep.d_log_s2.back());
        rep.max_d_skew = std::max(rep.max_d_skew, rep.d_skew.back());
        rep.max_d_logf3 = std::max(rep.max_d_logf3, rep.d_logf3.back());
    }
    if (rep.lags.empty()) throw FormatError(path + ": no rows");
    return rep;
}

} // namespace turb

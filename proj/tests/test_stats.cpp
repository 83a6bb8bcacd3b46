#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "turb/errors.hpp"
#include "turb/oracles.hpp"
#include "turb/stats.hpp"

using namespace turb;

namespace {

FieldEnsemble from_row(const std::vector<double>& v) {
    FieldEnsemble ens(1, std::int64_t(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) ens.row(0)[i] = v[i];
    return ens;
}

ScaleGrid lag_grid(std::vector<std::int64_t> lags) {
    ScaleGrid g;
    g.lags = std::move(lags);
    return g;
}

} // namespace

TEST_CASE("default grid is log-spaced, deduplicated, within range") {
    auto g = ScaleGrid::default_grid(1 << 15);
    CHECK(g.lags.front() == 1);
    CHECK(g.lags.back() == (1 << 15) / 4);
    CHECK(g.lags.size() <= 24);
    CHECK(g.lags.size() >= 16);
    for (std::size_t i = 1; i < g.lags.size(); ++i)
        CHECK(g.lags[i] > g.lags[i - 1]);
    CHECK(g.integral_scale == 2350.0);
    CHECK(g.kolmogorov_scale == 5.0);
}

TEST_CASE("structure function matches hand evaluation") {
    auto ens = from_row({0, 1, 3});
    auto s2 = structure_function(ens, 2.0, lag_grid({1}), MomentMode::Signed);
    CHECK(s2[0] == doctest::Approx(2.5));
}

TEST_CASE("structure function of iid noise is flat at 2 sigma^2") {
    auto ens = gaussian_noise(64, 1 << 14, 1234);
    auto g = ScaleGrid::default_grid(1 << 14);
    auto s2 = structure_function(ens, 2.0, g, MomentMode::Signed);
    for (double v : s2) CHECK(v == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("structure function of a constant field is zero") {
    auto ens = from_row(std::vector<double>(64, 3.0));
    auto s2 = structure_function(ens, 2.0, lag_grid({1, 4, 8}),
                                 MomentMode::Signed);
    for (double v : s2) CHECK(v == 0.0);
}

TEST_CASE("signed odd moments need integer order") {
    auto ens = from_row({0, 1, 3, 2, 5});
    CHECK_THROWS_AS(
        structure_function(ens, 1.5, lag_grid({1}), MomentMode::Signed),
        std::invalid_argument);
}

TEST_CASE("skewness and flatness match hand evaluation") {
    // increments at lag 1 are {-2, 1, 1}
    auto ens = from_row({0, -2, -1, 0});
    auto g = lag_grid({1});
    CHECK(skewness_curve(ens, g)[0] == doctest::Approx(-0.70710678).epsilon(1e-6));
    CHECK(flatness_curve(ens, g)[0] == doctest::Approx(1.5));
}

TEST_CASE("balanced two-point increments have zero skewness, flatness 1") {
    auto ens = from_row({0, 1, 0, 1, 0});
    auto g = lag_grid({1});
    CHECK(skewness_curve(ens, g)[0] == 0.0);
    CHECK(flatness_curve(ens, g)[0] == doctest::Approx(1.0));
}

TEST_CASE("gaussian noise has neutral skewness and flatness") {
    auto ens = gaussian_noise(64, 1 << 14, 555);
    auto g = ScaleGrid::default_grid(1 << 14);
    for (double s : skewness_curve(ens, g)) CHECK(std::fabs(s) < 0.05);
    for (double f : flatness_curve(ens, g))
        CHECK(std::fabs(std::log(f / 3.0)) < 0.05);
}

TEST_CASE("skewness and flatness are invariant under positive affine maps") {
    auto ens = gaussian_noise(2, 4096, 77);
    FieldEnsemble mapped = ens;
    for (double& x : mapped.data()) x = 3.7 * x - 11.0;
    auto g = ScaleGrid::default_grid(4096);
    auto s0 = skewness_curve(ens, g), s1 = skewness_curve(mapped, g);
    auto f0 = flatness_curve(ens, g), f1 = flatness_curve(mapped, g);
    for (std::size_t i = 0; i < s0.size(); ++i) {
        CHECK(std::fabs(s0[i] - s1[i]) < 1e-10);
        CHECK(std::fabs(f0[i] - f1[i]) < 1e-10 * f0[i]);
    }
}

TEST_CASE("flatness is recomputable from S2 and S4") {
    auto ens = gaussian_noise(4, 2048, 31);
    auto g = ScaleGrid::default_grid(2048);
    auto s2 = structure_function(ens, 2.0, g, MomentMode::Signed);
    auto s4 = structure_function(ens, 4.0, g, MomentMode::Signed);
    auto f = flatness_curve(ens, g);
    for (std::size_t i = 0; i < f.size(); ++i) {
        CHECK(s2[i] >= 0.0);
        CHECK(f[i] >= 1.0);
        CHECK(f[i] == doctest::Approx(s4[i] / (s2[i] * s2[i])).epsilon(1e-12));
    }
}

TEST_CASE("degenerate scales raise errors that name the lag") {
    auto ens = from_row(std::vector<double>(32, 1.0));
    try {
        skewness_curve(ens, lag_grid({3}));
        FAIL("expected DegenerateScale");
    } catch (const DegenerateScale& e) {
        CHECK(e.lag() == 3);
    }
}

TEST_CASE("log-log fit recovers exact power laws") {
    std::vector<std::int64_t> lags{2, 3, 5, 9, 17, 33, 64};
    for (double c : {0.01, 1.0, 250.0}) {
        std::vector<double> vals;
        for (auto l : lags) vals.push_back(c * std::pow(double(l), 0.7));
        auto fit = fit_loglog(lags, vals);
        CHECK(std::fabs(fit.slope - 0.7) < 1e-10);
    }
    CHECK_THROWS_AS(fit_loglog({1, 2}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(fit_loglog({1, 2, 4}, {1.0, -2.0, 4.0}), DegenerateScale);
}

TEST_CASE("zeta_fit needs three grid lags inside the range") {
    auto ens = gaussian_noise(1, 512, 8);
    auto g = lag_grid({2, 64, 128});
    CHECK_THROWS_AS(zeta_fit(ens, {2.0}, 50, 200, g), std::invalid_argument);
}

TEST_CASE("default zeta orders render the concavity axis") {
    auto p = default_zeta_orders();
    REQUIRE(p.size() == 9);
    CHECK(p.front() == 1.0);
    CHECK(p.back() == 5.0);
}

TEST_CASE("increment pdf of gaussian noise matches the normal curve") {
    auto ens = gaussian_noise(64, 1 << 14, 2024);
    auto pdf = increment_pdf(ens, 4, 64);
    CHECK(pdf.n_bins == 64);
    double integral = 0.0;
    double width = pdf.bin_centers[1] - pdf.bin_centers[0];
    int checked = 0;
    for (int b = 0; b < pdf.n_bins; ++b) {
        double x = pdf.bin_centers[std::size_t(b)];
        double ld = pdf.log_density[std::size_t(b)];
        if (!std::isnan(ld)) integral += std::exp(ld) * width;
        if (std::fabs(x) <= 3.0) {
            REQUIRE(!std::isnan(ld));
            double ref = -0.5 * x * x - 0.5 * std::log(2.0 * 3.14159265358979);
            CHECK(std::fabs(ld - ref) < 0.1);
            ++checked;
        }
    }
    CHECK(checked >= 16);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("increment pdf rejects degenerate input and bad arguments") {
    auto flat = from_row(std::vector<double>(64, 2.0));
    CHECK_THROWS_AS(increment_pdf(flat, 2, 32), DegenerateScale);
    auto ens = gaussian_noise(1, 64, 3);
    CHECK_THROWS_AS(increment_pdf(ens, 0, 32), std::invalid_argument);
    CHECK_THROWS_AS(increment_pdf(ens, 64, 32), std::invalid_argument);
    CHECK_THROWS_AS(increment_pdf(ens, 2, 8), std::invalid_argument);
}

TEST_CASE("increment pdf allows lags beyond N/2") {
    auto ens = gaussian_noise(8, 1 << 12, 99);
    auto pdf = increment_pdf(ens, 3000, 32);
    CHECK(pdf.lag == 3000);
}

TEST_CASE("stat curves: single realization has zero std") {
    auto ens = gaussian_noise(1, 4096, 17);
    auto c = stat_curves(ens, ScaleGrid::default_grid(4096));
    for (double s : c.log_s2_std) CHECK(s == 0.0);
    for (double s : c.skew_std) CHECK(s == 0.0);
    for (double s : c.logf3_std) CHECK(s == 0.0);
}

TEST_CASE("stat curves: duplicated rows collapse to the row curve") {
    auto one = gaussian_noise(1, 4096, 18);
    FieldEnsemble two(2, 4096);
    for (int r = 0; r < 2; ++r)
        for (int x = 0; x < 4096; ++x) two.row(r)[x] = one.row(0)[x];
    auto g = ScaleGrid::default_grid(4096);
    auto c1 = stat_curves(one, g);
    auto c2 = stat_curves(two, g);
    for (std::size_t i = 0; i < c1.lags.size(); ++i) {
        CHECK(c2.log_s2_mean[i] == doctest::Approx(c1.log_s2_mean[i]).epsilon(1e-12));
        CHECK(c2.skew_mean[i] == doctest::Approx(c1.skew_mean[i]).epsilon(1e-12));
        CHECK(c2.logf3_std[i] == 0.0);
    }
}

TEST_CASE("stat curves of gaussian noise sit at the gaussian anchors") {
    auto ens = gaussian_noise(64, 1 << 14, 64);
    auto c = stat_curves(ens, ScaleGrid::default_grid(1 << 14));
    for (std::size_t i = 0; i < c.lags.size(); ++i) {
        CHECK(std::fabs(c.skew_mean[i]) < 0.05);
        CHECK(std::fabs(c.logf3_mean[i]) < 0.05);
    }
}

TEST_CASE("stat csv carries the agreed header and columns") {
    auto ens = gaussian_noise(4, 1024, 5);
    auto g = ScaleGrid::default_grid(1024);
    auto c = stat_curves(ens, g);
    write_stat_csv("curves_test.csv", c, g);
    std::ifstream f("curves_test.csv");
    std::string comment, header;
    std::getline(f, comment);
    CHECK(comment.rfind("# integral_scale=", 0) == 0);
    std::getline(f, header);
    CHECK(header ==
          "lag,log_l_over_L,log_s2_mean,log_s2_std,skew_mean,skew_std,"
          "logF3_mean,logF3_std");
    int rows = 0;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        int commas = 0;
        for (char ch : line) commas += ch == ',';
        CHECK(commas == 7);
        ++rows;
    }
    CHECK(rows == int(c.lags.size()));
    std::remove("curves_test.csv");
}

TEST_CASE("zeta and pdf csv formats") {
    ZetaResult z;
    z.orders = {1.0, 2.0};
    z.zeta = {0.37, 0.70};
    z.std_err = {0.01, 0.02};
    write_zeta_csv("zeta_test.csv", z);
    std::ifstream f("zeta_test.csv");
    std::string header;
    std::getline(f, header);
    CHECK(header.rfind("# fit_min=", 0) == 0);
    std::getline(f, header);
    CHECK(header == "p,zeta,stderr");
    std::string row;
    std::getline(f, row);
    CHECK(row.substr(0, 2) == "1,");
    std::remove("zeta_test.csv");

    IncrementPdf pdf;
    pdf.lag = 16;
    pdf.n_bins = 16;
    for (int b = 0; b < 16; ++b) {
        pdf.bin_centers.push_back(-4.0 + 0.5 * b);
        pdf.log_density.push_back(b == 0 ? std::nan("") : -1.0 * b);
    }
    write_pdf_csv("pdf_test.csv", {pdf});
    std::ifstream pf("pdf_test.csv");
    std::getline(pf, header);
    CHECK(header == "lag,bin_center,log_density");
    bool saw_na = false;
    while (std::getline(pf, row))
        if (row.size() >= 2 && row.substr(row.size() - 2) == "NA") saw_na = true;
    CHECK(saw_na);
    std::remove("pdf_test.csv");
}

namespace {

std::string file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("csv emitters and parsers are a fixed point after one cycle") {
    auto ens = gaussian_noise(4, 2048, 9);
    auto g = ScaleGrid::default_grid(2048);
    g.integral_scale = 400.0;
    auto c = stat_curves(ens, g);
    write_stat_csv("rt_stats.csv", c, g);
    ScaleGrid g2;
    StatCurves c2 = read_stat_csv("rt_stats.csv", g2);
    CHECK(g2.integral_scale == g.integral_scale);
    CHECK(g2.lags == g.lags);
    REQUIRE(c2.lags == c.lags);
    write_stat_csv("rt_stats2.csv", c2, g2);
    CHECK(file_bytes("rt_stats.csv") == file_bytes("rt_stats2.csv"));
    std::remove("rt_stats.csv");
    std::remove("rt_stats2.csv");

    auto z = zeta_fit(ens, default_zeta_orders(), 4, 256, g);
    write_zeta_csv("rt_zeta.csv", z);
    ZetaResult z2 = read_zeta_csv("rt_zeta.csv");
    CHECK(z2.fit_min == z.fit_min);
    CHECK(z2.fit_max == z.fit_max);
    REQUIRE(z2.orders.size() == z.orders.size());
    write_zeta_csv("rt_zeta2.csv", z2);
    CHECK(file_bytes("rt_zeta.csv") == file_bytes("rt_zeta2.csv"));
    std::remove("rt_zeta.csv");
    std::remove("rt_zeta2.csv");

    std::vector<IncrementPdf> pdfs = {increment_pdf(ens, 4, 41),
                                      increment_pdf(ens, 64, 41)};
    write_pdf_csv("rt_pdf.csv", pdfs);
    std::vector<IncrementPdf> pdfs2 = read_pdf_csv("rt_pdf.csv");
    REQUIRE(pdfs2.size() == 2);
    CHECK(pdfs2[0].lag == 4);
    CHECK(pdfs2[1].n_bins == 41);
    write_pdf_csv("rt_pdf2.csv", pdfs2);
    CHECK(file_bytes("rt_pdf.csv") == file_bytes("rt_pdf2.csv"));
    std::remove("rt_pdf.csv");
    std::remove("rt_pdf2.csv");

    CHECK_THROWS_AS(read_stat_csv("rt_absent.csv", g2), FormatError);
    CHECK_THROWS_AS(read_zeta_csv("rt_absent.csv"), FormatError);
    CHECK_THROWS_AS(read_pdf_csv("rt_absent.csv"), FormatError);
}

TEST_CASE("an ensemble compared with itself differs nowhere") {
    auto ens = mrw(8, 4096, 1.0 / 3.0, 0.03, 512, 21);
    auto g = ScaleGrid::default_grid(4096);
    CompareReport rep =
        compare_report(ens, ens, g, default_zeta_orders(), 4, 256);
    for (double d : rep.d_log_s2) CHECK(d == 0.0);
    for (double d : rep.d_skew) CHECK(d == 0.0);
    for (double d : rep.d_logf3) CHECK(d == 0.0);
    CHECK(rep.max_d_logf3 == 0.0);
    CHECK(rep.max_d_zeta == 0.0);
}

TEST_CASE("a comparison against a rougher field shows up in the report") {
    auto smooth = fbm(8, 4096, 1.0 / 3.0, 5);
    auto rough = mrw(8, 4096, 1.0 / 3.0, 0.08, 1024, 6);
    auto g = ScaleGrid::default_grid(4096);
    CompareReport rep =
        compare_report(smooth, rough, g, default_zeta_orders(), 4, 256);
    CHECK(rep.max_d_logf3 > 0.0);
    CHECK(rep.max_d_zeta > 0.0);

    write_compare_csv("rt_cmp.csv", rep);
    CompareReport rep2 = read_compare_csv("rt_cmp.csv");
    CHECK(rep2.max_d_zeta == doctest::Approx(rep.max_d_zeta).epsilon(1e-15));
    REQUIRE(rep2.lags == rep.lags);
    write_compare_csv("rt_cmp2.csv", rep2);
    CHECK(file_bytes("rt_cmp.csv") == file_bytes("rt_cmp2.csv"));
    std::remove("rt_cmp.csv");
    std::remove("rt_cmp2.csv");
}

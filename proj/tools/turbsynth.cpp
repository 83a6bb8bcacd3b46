#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "turb/checkpoint.hpp"
#include "turb/errors.hpp"
#include "turb/field.hpp"
#include "turb/generator.hpp"
#include "turb/kernels.hpp"
#include "turb/oracles.hpp"
#include "turb/plot.hpp"
#include "turb/stats.hpp"
#include "turb/train.hpp"

namespace {

using namespace turb;

constexpr int kOk = 0, kUsage = 2, kData = 3, kDiverged = 4;
constexpr double kLog10 = 2.302585092994046;

struct SynthArgs {
    std::string kind, out;
    double hurst = 0, lambda2 = 0;
    std::int64_t l_c = 0, r = 64, n = 32768;
    std::uint64_t seed = 1;
    bool has_h = false, has_l2 = false, has_lc = false;
};

struct GenerateArgs {
    std::string checkpoint, out;
    std::int64_t r = 256, n = 32768, n_b = 8192;
    std::uint64_t seed = 1;
};

struct AnalyzeArgs {
    std::string in, out_dir, lags_csv, pdf_lags_csv;
    std::int64_t fit_min = 17, fit_max = 274;
    double integral_scale = 2350.0;
};

struct CompareArgs {
    std::string a, b, out_dir;
    std::int64_t fit_min = 17, fit_max = 274;
    double integral_scale = 2350.0;
};

std::vector<std::int64_t> parse_lag_list(const std::string& csv) {
    std::vector<std::int64_t> out;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        std::size_t next = csv.find(',', pos);
        if (next == std::string::npos) next = csv.size();
        const std::string cell = csv.substr(pos, next - pos);
        pos = next + 1;
        if (cell.empty()) continue;
        try {
            std::size_t used = 0;
            long v = std::stol(cell, &used);
            if (used != cell.size() || v < 1) throw std::invalid_argument(cell);
            out.push_back(v);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad lag '" + cell + "'");
        }
    }
    if (out.empty()) throw std::invalid_argument("empty lag list");
    return out;
}

int run_synth(const SynthArgs& a) {
    if (a.kind == "gaussian") {
        if (a.has_h || a.has_l2 || a.has_lc)
            throw std::invalid_argument(
                "synth: --H/--lambda2/--Lc do not apply to gaussian");
    } else if (a.kind == "fbm") {
        if (!a.has_h) throw std::invalid_argument("synth: fbm needs --H");
        if (a.has_l2 || a.has_lc)
            throw std::invalid_argument(
                "synth: --lambda2/--Lc do not apply to fbm");
    } else {
        if (!a.has_h || !a.has_l2 || !a.has_lc)
            throw std::invalid_argument(
                "synth: mrw needs --H, --lambda2 and --Lc");
    }

    FieldEnsemble ens =
        a.kind == "gaussian" ? gaussian_noise(a.r, a.n, a.seed)
        : a.kind == "fbm"    ? fbm(a.r, a.n, a.hurst, a.seed)
                             : mrw(a.r, a.n, a.hurst, a.lambda2, a.l_c, a.seed);
    write_ensemble(a.out, ens);
    std::printf("wrote %s.f32 + %s.meta (%lld x %lld, kind=%s)\n",
                a.out.c_str(), a.out.c_str(), (long long)ens.realizations(),
                (long long)ens.samples(), a.kind.c_str());
    return kOk;
}

int run_train(const std::string& data, const std::string& config,
              const std::string& out_dir) {
    TrainConfig cfg = parse_train_config(config);
    FieldEnsemble ens = read_ensemble(data);
    TrainResult res =
        train(ens, cfg, out_dir, [](const EpochLog& e) {
            std::printf("epoch %4d  g_total %.6g  g_adv %.6g  d_adv %.6g\n",
                        e.epoch, e.g_total, e.g_adv, e.d_adv);
            std::fflush(stdout);
        });
    std::printf("trained %d epochs (%s)\ncheckpoint: %s\nlosses: %s\n",
                cfg.epochs, variant_name(cfg.variant).c_str(),
                res.checkpoint_path.c_str(), res.losses_path.c_str());
    return kOk;
}

int run_generate(const GenerateArgs& a) {
    ckpt::Container c = ckpt::Container::load(a.checkpoint);
    nn::GeneratorConfig gc;
    try {
        gc = nn::parse_generator_config_text(c.get("g_config").as_text());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("checkpoint: bad generator config: ") +
                          e.what());
    }
    nn::UNet<float> model(gc);
    std::vector<nn::ParamView<float>> params, state;
    model.collect(params, state);
    ckpt::load_views(c, "g", params);
    ckpt::load_views(c, "g_state", state);

    FieldEnsemble ens =
        nn::generate(model, std::size_t(a.r), std::size_t(a.n),
                     std::size_t(a.n_b), a.seed);
    write_ensemble(a.out, ens);
    std::printf("wrote %s.f32 + %s.meta (%lld x %lld, trimmed %lld)\n",
                a.out.c_str(), a.out.c_str(), (long long)ens.realizations(),
                (long long)ens.samples(), (long long)a.n_b);
    return kOk;
}

plot::Series curve_series(const std::string& label,
                          const std::vector<std::int64_t>& lags,
                          const std::vector<double>& mean,
                          const std::vector<double>& sd, double l_big) {
    plot::Series s;
    s.label = label;
    for (std::size_t i = 0; i < lags.size(); ++i)
        s.x.push_back(std::log(double(lags[i]) / l_big) / kLog10);
    s.y = mean;
    s.yerr = sd;
    return s;
}

void emit_curve_plots(const std::string& dir, const std::string& label,
                      const StatCurves& c, double l_big) {
    struct Item {
        const char* file;
        const char* ylab;
        const std::vector<double>*m, *s;
    } items[] = {
        {"s2.svg", "log S2(l)", &c.log_s2_mean, &c.log_s2_std},
        {"skewness.svg", "skewness S(l)", &c.skew_mean, &c.skew_std},
        {"flatness.svg", "log(F(l)/3)", &c.logf3_mean, &c.logf3_std},
    };
    for (const auto& it : items) {
        plot::Figure fig;
        fig.title = std::string(it.ylab) + " across scales";
        fig.xlabel = "log10(l/L)";
        fig.ylabel = it.ylab;
        fig.series.push_back(curve_series(label, c.lags, *it.m, *it.s, l_big));
        plot::write_svg(dir + "/" + it.file, fig);
    }
}

void emit_zeta_plot(const std::string& path, const ZetaResult& z) {
    plot::Figure fig;
    fig.title = "scaling exponents";
    fig.xlabel = "p";
    fig.ylabel = "zeta_p";
    plot::Series meas;
    meas.label = "measured";
    meas.x = z.orders;
    meas.y = z.zeta;
    meas.yerr = z.std_err;
    fig.series.push_back(meas);
    plot::Series k41;
    k41.label = "K41: p/3";
    k41.dashed = true;
    k41.markers = false;
    for (double p : z.orders) {
        k41.x.push_back(p);
        k41.y.push_back(p / 3.0);
    }
    fig.series.push_back(k41);
    plot::write_svg(path, fig);
}

void emit_pdf_plot(const std::string& path,
                   const std::vector<IncrementPdf>& pdfs) {
    plot::Figure fig;
    fig.title = "increment distributions across scales";
    fig.xlabel = "standardized increment";
    fig.ylabel = "log density (stacked)";
    const double shift = 2.5;
    for (std::size_t i = 0; i < pdfs.size(); ++i) {
        const auto& pdf = pdfs[i];
        plot::Series s;
        s.label = "lag " + std::to_string(pdf.lag);
        s.x = pdf.bin_centers;
        for (double ld : pdf.log_density) s.y.push_back(ld - shift * double(i));
        s.markers = false;
        fig.series.push_back(s);

        plot::Series ref;
        ref.color = "#999999";
        ref.dashed = true;
        ref.markers = false;
        for (double x : pdf.bin_centers) {
            ref.x.push_back(x);
            ref.y.push_back(-0.5 * x * x - 0.5 * std::log(2.0 * M_PI) -
                            shift * double(i));
        }
        fig.series.push_back(ref);
    }
    plot::write_svg(path, fig);
}

ScaleGrid build_grid(std::int64_t n, const std::string& lags_csv,
                     double integral_scale) {
    ScaleGrid grid = lags_csv.empty()
                         ? ScaleGrid::default_grid(n)
                         : ScaleGrid{parse_lag_list(lags_csv), 0, 0};
    if (!lags_csv.empty()) {
        grid.kolmogorov_scale = ScaleGrid::default_grid(n).kolmogorov_scale;
        for (std::size_t i = 1; i < grid.lags.size(); ++i)
            if (grid.lags[i] <= grid.lags[i - 1])
                throw std::invalid_argument("--lags must increase strictly");
        if (grid.lags.back() > n / 2)
            throw std::invalid_argument("--lags exceed N/2");
    }
    grid.integral_scale = integral_scale;
    return grid;
}

int run_analyze(const AnalyzeArgs& a) {
    FieldEnsemble ens = read_ensemble(a.in);
    ScaleGrid grid =
        build_grid(ens.samples(), a.lags_csv, a.integral_scale);
    if (a.fit_min >= a.fit_max)
        throw std::invalid_argument("--fit-min must stay below --fit-max");

    StatCurves curves = stat_curves(ens, grid);
    ZetaResult zeta =
        zeta_fit(ens, default_zeta_orders(), a.fit_min, a.fit_max, grid);

    std::vector<std::int64_t> pdf_lags;
    if (a.pdf_lags_csv.empty()) {
        const std::size_t nl = grid.lags.size();
        for (std::size_t i : {std::size_t(0), nl / 3, 2 * nl / 3, nl - 1})
            if (pdf_lags.empty() || grid.lags[i] != pdf_lags.back())
                pdf_lags.push_back(grid.lags[i]);
    } else {
        pdf_lags = parse_lag_list(a.pdf_lags_csv);
        for (std::int64_t l : pdf_lags)
            if (l >= ens.samples())
                throw std::invalid_argument("--pdf-lags exceed N");
    }
    std::vector<IncrementPdf> pdfs;
    for (std::int64_t l : pdf_lags) pdfs.push_back(increment_pdf(ens, l, 81));

    std::filesystem::create_directories(a.out_dir);
    write_stat_csv(a.out_dir + "/stats.csv", curves, grid);
    write_zeta_csv(a.out_dir + "/zeta.csv", zeta);
    write_pdf_csv(a.out_dir + "/pdfs.csv", pdfs);
    const std::string label =
        std::filesystem::path(a.in).filename().string();
    emit_curve_plots(a.out_dir, label, curves, grid.integral_scale);
    emit_zeta_plot(a.out_dir + "/zeta.svg", zeta);
    emit_pdf_plot(a.out_dir + "/pdfs.svg", pdfs);

    std::printf("analyzed %lld x %lld samples over %zu lags\n",
                (long long)ens.realizations(), (long long)ens.samples(),
                grid.lags.size());
    std::printf("wrote stats.csv zeta.csv pdfs.csv s2.svg skewness.svg "
                "flatness.svg zeta.svg pdfs.svg under %s\n",
                a.out_dir.c_str());
    return kOk;
}

int run_compare(const CompareArgs& a) {
    FieldEnsemble ea = read_ensemble(a.a);
    FieldEnsemble eb = read_ensemble(a.b);
    const std::int64_t n = std::min(ea.samples(), eb.samples());
    ScaleGrid grid = build_grid(n, "", a.integral_scale);
    if (a.fit_min >= a.fit_max)
        throw std::invalid_argument("--fit-min must stay below --fit-max");

    CompareReport rep = compare_report(ea, eb, grid, default_zeta_orders(),
                                       a.fit_min, a.fit_max);
    StatCurves ca = stat_curves(ea, grid);
    StatCurves cb = stat_curves(eb, grid);

    std::filesystem::create_directories(a.out_dir);
    write_compare_csv(a.out_dir + "/compare.csv", rep);
    const std::string la =
        "A: " + std::filesystem::path(a.a).filename().string();
    const std::string lb =
        "B: " + std::filesystem::path(a.b).filename().string();
    struct Item {
        const char* file;
        const char* ylab;
        const std::vector<double>*ma, *sa, *mb, *sb;
    } items[] = {
        {"compare_s2.svg", "log S2(l)", &ca.log_s2_mean, &ca.log_s2_std,
         &cb.log_s2_mean, &cb.log_s2_std},
        {"compare_skewness.svg", "skewness S(l)", &ca.skew_mean, &ca.skew_std,
         &cb.skew_mean, &cb.skew_std},
        {"compare_flatness.svg", "log(F(l)/3)", &ca.logf3_mean, &ca.logf3_std,
         &cb.logf3_mean, &cb.logf3_std},
    };
    for (const auto& it : items) {
        plot::Figure fig;
        fig.title = std::string(it.ylab) + ": A vs B";
        fig.xlabel = "log10(l/L)";
        fig.ylabel = it.ylab;
        fig.series.push_back(
            curve_series(la, grid.lags, *it.ma, *it.sa, grid.integral_scale));
        fig.series.push_back(
            curve_series(lb, grid.lags, *it.mb, *it.sb, grid.integral_scale));
        plot::write_svg(a.out_dir + "/" + it.file, fig);
    }
    {
        plot::Figure fig;
        fig.title = "scaling exponents: A vs B";
        fig.xlabel = "p";
        fig.ylabel = "zeta_p";
        plot::Series sa, sb;
        sa.label = la;
        sa.x = rep.orders;
        sa.y = rep.zeta_a;
        sb.label = lb;
        sb.x = rep.orders;
        sb.y = rep.zeta_b;
        fig.series.push_back(sa);
        fig.series.push_back(sb);
        plot::write_svg(a.out_dir + "/compare_zeta.svg", fig);
    }

    std::printf("max |d log S2|   = %.10g\n", rep.max_d_log_s2);
    std::printf("max |d skewness| = %.10g\n", rep.max_d_skew);
    std::printf("max |d log(F/3)| = %.10g\n", rep.max_d_logf3);
    std::printf("max |d zeta_p|   = %.10g\n", rep.max_d_zeta);
    std::printf("report: %s/compare.csv\n", a.out_dir.c_str());
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"1D turbulent field synthesis and scale statistics"};
    app.require_subcommand(1);
    std::string kernels = "auto";
    app.add_option("--kernels", kernels, "arithmetic backend")
        ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

    SynthArgs sy;
    CLI::App* synth = app.add_subcommand("synth", "write an oracle ensemble");
    synth->add_option("--kind", sy.kind, "gaussian | fbm | mrw")
        ->required()
        ->check(CLI::IsMember({"gaussian", "fbm", "mrw"}));
    auto* opt_h = synth->add_option("--H", sy.hurst, "Hurst exponent");
    auto* opt_l2 =
        synth->add_option("--lambda2", sy.lambda2, "intermittency lambda^2");
    auto* opt_lc = synth->add_option("--Lc", sy.l_c, "decorrelation scale");
    synth->add_option("--R", sy.r, "realizations")->check(CLI::PositiveNumber);
    synth->add_option("--N", sy.n, "samples per realization")
        ->check(CLI::PositiveNumber);
    synth->add_option("--seed", sy.seed, "rng seed");
    synth->add_option("--out", sy.out, "output stem")->required();

    std::string tr_data, tr_config, tr_out;
    CLI::App* tr = app.add_subcommand("train", "fit the generator");
    tr->add_option("--data", tr_data, "training ensemble stem")->required();
    tr->add_option("--config", tr_config, "key=value config file")
        ->required();
    tr->add_option("--out-dir", tr_out, "checkpoint/loss directory")
        ->required();

    GenerateArgs ge;
    CLI::App* gen = app.add_subcommand("generate", "sample a trained model");
    gen->add_option("--checkpoint", ge.checkpoint, "training checkpoint")
        ->required();
    gen->add_option("--R", ge.r, "realizations")->check(CLI::PositiveNumber);
    gen->add_option("--N", ge.n, "kept samples per realization")
        ->check(CLI::PositiveNumber);
    gen->add_option("--nb", ge.n_b, "border samples dropped per realization")
        ->check(CLI::NonNegativeNumber);
    gen->add_option("--seed", ge.seed, "rng seed");
    gen->add_option("--out", ge.out, "output stem")->required();

    AnalyzeArgs an;
    CLI::App* ana = app.add_subcommand("analyze", "scale statistics report");
    ana->add_option("--in", an.in, "ensemble stem")->required();
    ana->add_option("--out-dir", an.out_dir, "report directory")->required();
    ana->add_flag("--grid-default",
                  "use the default log-spaced lag grid (also the fallback)");
    ana->add_option("--lags", an.lags_csv, "comma-separated lag override");
    ana->add_option("--fit-min", an.fit_min, "smallest fitted lag");
    ana->add_option("--fit-max", an.fit_max, "largest fitted lag");
    ana->add_option("--integral-scale", an.integral_scale,
                    "L in samples for the l/L axis (Modane hot-wire: 2350)");
    ana->add_option("--pdf-lags", an.pdf_lags_csv,
                    "comma-separated lags for the distribution stack");

    CompareArgs co;
    CLI::App* cmp = app.add_subcommand("compare", "overlay two ensembles");
    cmp->add_option("--a", co.a, "first ensemble stem")->required();
    cmp->add_option("--b", co.b, "second ensemble stem")->required();
    cmp->add_option("--out-dir", co.out_dir, "report directory")->required();
    cmp->add_option("--fit-min", co.fit_min, "smallest fitted lag");
    cmp->add_option("--fit-max", co.fit_max, "largest fitted lag");
    cmp->add_option("--integral-scale", co.integral_scale,
                    "L in samples for the l/L axis");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    sy.has_h = opt_h->count() > 0;
    sy.has_l2 = opt_l2->count() > 0;
    sy.has_lc = opt_lc->count() > 0;

    try {
        try {
            if (kernels == "scalar")
                kern::select_backend(kern::Backend::Scalar);
            else if (kernels == "avx2")
                kern::select_backend(kern::Backend::Avx2);
        } catch (const std::runtime_error& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return kUsage;
        }
        if (synth->parsed()) return run_synth(sy);
        if (tr->parsed()) return run_train(tr_data, tr_config, tr_out);
        if (gen->parsed()) return run_generate(ge);
        if (ana->parsed()) return run_analyze(an);
        return run_compare(co);
    } catch (const TrainingDiverged& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kDiverged;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kData;
    } catch (const DegenerateInput& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kData;
    } catch (const DegenerateScale& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kData;
    } catch (const EmbeddingFailure& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kData;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    }
}

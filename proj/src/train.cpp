#include "turb/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "turb/checkpoint.hpp"
#include "turb/discriminators.hpp"
#include "turb/errors.hpp"
#include "turb/generator.hpp"
#include "turb/optim.hpp"
#include "turb/stat_head.hpp"
#include "turb/stats.hpp"

namespace turb {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_num(const std::string& key, const std::string& val) {
    try {
        std::size_t used = 0;
        double x = std::stod(val, &used);
        if (used != val.size()) throw std::invalid_argument(val);
        return x;
    } catch (const std::exception&) {
        throw FormatError("config: bad value '" + val + "' for '" + key + "'");
    }
}

int parse_int(const std::string& key, const std::string& val) {
    const double x = parse_num(key, val);
    if (x != std::floor(x))
        throw FormatError("config: '" + key + "' must be an integer");
    return int(x);
}

bool parse_bool(const std::string& key, const std::string& val) {
    if (val == "1" || val == "true") return true;
    if (val == "0" || val == "false") return false;
    throw FormatError("config: bad value '" + val + "' for '" + key + "'");
}

const char* stat_input_name(StatInput s) {
    return s == StatInput::Mean ? "mean" : "per_realization";
}

StatInput parse_stat_input(const std::string& val) {
    if (val == "per_realization") return StatInput::PerRealization;
    if (val == "mean") return StatInput::Mean;
    throw FormatError("config: bad value '" + val + "' for 'stat_input'");
}

// mean over the batch of -[y ln p + (1-y) ln(1-p)] per slot, the slot
// weighted by its segment scale; gradients scaled by gscale on top.
double si_bce(nn::Tensor<float>& scores, double label, double gscale) {
    const std::size_t B = scores.batch();
    const std::size_t slots = scores.v.size() / B;
    const double inv_b = 1.0 / double(B);
    double total = 0;
    for (std::size_t s = 0; s < slots; ++s) {
        const double w = nn::segment_loss_weight(nn::si_slot_scale(s));
        double acc = 0;
        for (std::size_t b = 0; b < B; ++b) {
            const std::size_t i = b * slots + s;
            const double p0 = double(scores.v[i]);
            const bool clamped = p0 < nn::kBceClamp || p0 > 1.0 - nn::kBceClamp;
            const double p =
                std::min(std::max(p0, nn::kBceClamp), 1.0 - nn::kBceClamp);
            acc -= label * std::log(p) + (1.0 - label) * std::log(1.0 - p);
            if (!clamped)
                scores.g[i] += float(gscale * w * inv_b *
                                     (-label / p + (1.0 - label) / (1.0 - p)));
        }
        total += w * acc * inv_b;
    }
    return total;
}

// plain mean BCE with gradient scale, same clamp rule as bce_loss.
double bce_mean(nn::Tensor<float>& pred, double label, double gscale) {
    const std::size_t n = pred.v.size();
    const double inv_n = 1.0 / double(n);
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p0 = double(pred.v[i]);
        const bool clamped = p0 < nn::kBceClamp || p0 > 1.0 - nn::kBceClamp;
        const double p =
            std::min(std::max(p0, nn::kBceClamp), 1.0 - nn::kBceClamp);
        acc -= label * std::log(p) + (1.0 - label) * std::log(1.0 - p);
        if (!clamped)
            pred.g[i] += float(gscale * inv_n *
                               (-label / p + (1.0 - label) / (1.0 - p)));
    }
    return acc * inv_n;
}

// mean of the raw scores; d(mean)/d(score) = gscale / n into the grads.
double mean_seed(nn::Tensor<float>& out, double gscale) {
    const std::size_t n = out.v.size();
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += double(out.v[i]);
        out.g[i] += float(gscale / double(n));
    }
    return acc / double(n);
}

void store_adam(ckpt::Container& c, const std::string& prefix,
                nn::Adam<float>& opt) {
    for (std::size_t i = 0; i < opt.size(); ++i) {
        const std::string& name = opt.param(i).name;
        c.put_f32(prefix + "/m:" + name, opt.moment1(i).data(),
                  opt.moment1(i).size());
        c.put_f32(prefix + "/v:" + name, opt.moment2(i).data(),
                  opt.moment2(i).size());
    }
    c.put_scalar_i64(prefix + "/t", opt.t());
}

void load_adam(const ckpt::Container& c, const std::string& prefix,
               nn::Adam<float>& opt) {
    for (std::size_t i = 0; i < opt.size(); ++i) {
        const std::string& name = opt.param(i).name;
        for (int mv = 0; mv < 2; ++mv) {
            const std::string key =
                prefix + (mv == 0 ? "/m:" : "/v:") + name;
            std::vector<float> vals = c.get(key).as_f32();
            auto& dst = mv == 0 ? opt.moment1(i) : opt.moment2(i);
            if (vals.size() != dst.size())
                throw FormatError("checkpoint: size mismatch for " + key);
            std::copy(vals.begin(), vals.end(), dst.begin());
        }
    }
    opt.set_t(c.get_scalar_i64(prefix + "/t"));
}

void fmt(std::ofstream& f, double x) {
    char b[40];
    std::snprintf(b, sizeof b, "%.10g", x);
    f << b;
}

nn::GeneratorConfig generator_for(const TrainConfig& cfg) {
    nn::GeneratorConfig g =
        cfg.preset == "paper" ? nn::paper_generator() : nn::desk_generator();
    g.width_multiplier = cfg.width_multiplier;
    return g;
}

struct Trainer {
    const TrainConfig& cfg;
    std::string out_dir;
    FieldEnsemble ds;
    std::size_t N, R, B;

    nn::UNet<float> gen;
    std::vector<nn::ParamView<float>> gp, gs;
    std::unique_ptr<nn::Adam<float>> opt_g;

    // multicriteria branch
    ScaleGrid grid;
    std::unique_ptr<nn::SegmentDiscriminator<float>> dsi;
    std::vector<nn::ParamView<float>> dsip, dsis;
    std::unique_ptr<nn::Adam<float>> opt_dsi;
    std::unique_ptr<nn::StatCritic<float>> crit[3];
    std::vector<nn::ParamView<float>> critp[3], crits[3];
    std::unique_ptr<nn::Adam<float>> opt_crit[3];
    std::unique_ptr<nn::StatHead<float>> head;
    StatCurves real_curves;

    // single-critic baselines
    std::unique_ptr<nn::BaselineDiscriminator<float>> dbase;
    std::vector<nn::ParamView<float>> dbp, dbs;
    std::unique_ptr<nn::Adam<float>> opt_db;

    nn::Tensor<float> noise, real;
    nn::Tensor<float> rc[3];          // real curve batches
    nn::Tensor<float> fc[3];          // generated curve batches
    nn::Tensor<float> fm[3];          // batch-mean generated curves
    std::uint64_t noise_seq = 0;
    int epoch_start = 0;
    long global_step = 0;

    Trainer(const FieldEnsemble& data, const TrainConfig& c,
            const std::string& dir)
        : cfg(c), out_dir(dir), ds(standardize(data)),
          N(std::size_t(data.samples())), R(std::size_t(data.realizations())),
          B(std::size_t(cfg.batch)), gen(generator_for(cfg)) {
        if (cfg.batch > data.realizations())
            throw std::invalid_argument("train: batch exceeds the ensemble");
        const std::size_t div = std::size_t(1) << gen.config().levels;
        if (N % div != 0)
            throw std::invalid_argument(
                "train: N must divide by 2^levels = " + std::to_string(div));

        {
            rng::Stream s(cfg.seed, rng::StreamTag::WeightInit, 0);
            gen.init(s);
        }
        gen.collect(gp, gs);
        opt_g = std::make_unique<nn::Adam<float>>(gp, cfg.lr);

        if (cfg.variant == TrainVariant::Multicriteria) {
            dsi = std::make_unique<nn::SegmentDiscriminator<float>>(N);
            {
                rng::Stream s(cfg.seed, rng::StreamTag::WeightInit, 1);
                dsi->init(s);
            }
            dsi->collect("si", dsip, dsis);
            opt_dsi = std::make_unique<nn::Adam<float>>(dsip, cfg.lr);

            grid = ScaleGrid::default_grid(std::int64_t(N));
            const std::size_t rows = mean_input() ? 1 : B;
            for (int k = 0; k < 3; ++k) rc[k].resize2(rows, grid.lags.size());
            nn::StatCriticConfig sc;
            sc.input_len = int(grid.lags.size());
            const char* names[3] = {"s2", "skew", "flat"};
            for (int k = 0; k < 3; ++k) {
                crit[k] = std::make_unique<nn::StatCritic<float>>(sc);
                rng::Stream s(cfg.seed, rng::StreamTag::WeightInit,
                              std::uint64_t(2 + k));
                crit[k]->init(s);
                crit[k]->collect(names[k], critp[k], crits[k]);
                opt_crit[k] = std::make_unique<nn::Adam<float>>(critp[k], cfg.lr);
            }
            head = std::make_unique<nn::StatHead<float>>(grid.lags);
            real_curves = stat_curves(ds, grid);
        } else {
            dbase = std::make_unique<nn::BaselineDiscriminator<float>>(
                N, cfg.variant == TrainVariant::Gan);
            rng::Stream s(cfg.seed, rng::StreamTag::WeightInit, 1);
            dbase->init(s);
            dbase->collect("base", dbp, dbs);
            opt_db = std::make_unique<nn::Adam<float>>(dbp, cfg.lr);
        }

        noise.resize3(B, 1, N);
        real.resize3(B, 1, N);

        if (!cfg.resume.empty()) load(cfg.resume);
    }

    bool mean_input() const {
        return cfg.stat_input == StatInput::Mean &&
               cfg.variant == TrainVariant::Multicriteria;
    }

    void fill_noise() {
        rng::Stream s(cfg.seed, rng::StreamTag::TrainNoise, noise_seq++);
        s.fill_gaussian(noise.v.data(), std::int64_t(noise.v.size()));
    }

    void fill_real(rng::Stream& sel) {
        const std::size_t nl = grid.lags.size();
        real.zero_grad();
        for (int k = 0; k < 3 && rc[k].v.size(); ++k) rc[k].zero_grad();
        std::vector<double> acc[3];
        if (mean_input())
            for (auto& a : acc) a.assign(nl, 0.0);
        for (std::size_t b = 0; b < B; ++b) {
            std::size_t idx = std::size_t(sel.next_uniform() * double(R));
            if (idx >= R) idx = R - 1;
            const double* src = ds.row(std::int64_t(idx));
            float* dst = real.row(b, 0);
            for (std::size_t x = 0; x < N; ++x) dst[x] = float(src[x]);
            if (cfg.variant == TrainVariant::Multicriteria) {
                const double* rows[3] = {real_curves.log_s2_rows.data(),
                                         real_curves.skew_rows.data(),
                                         real_curves.logf3_rows.data()};
                for (int k = 0; k < 3; ++k)
                    for (std::size_t j = 0; j < nl; ++j) {
                        const double v = rows[k][idx * nl + j];
                        if (mean_input())
                            acc[k][j] += v;
                        else
                            rc[k].v[b * nl + j] = float(v);
                    }
            }
        }
        if (mean_input())
            for (int k = 0; k < 3; ++k)
                for (std::size_t j = 0; j < nl; ++j)
                    rc[k].v[j] = float(acc[k][j] / double(B));
    }

    // fm[k] <- column means of fc[k]; grads flow back uniformly.
    void mean_curves() {
        const std::size_t nl = grid.lags.size();
        for (int k = 0; k < 3; ++k) {
            fm[k].resize2(1, nl);
            for (std::size_t j = 0; j < nl; ++j) {
                double acc = 0;
                for (std::size_t b = 0; b < B; ++b)
                    acc += double(fc[k].v[b * nl + j]);
                fm[k].v[j] = float(acc / double(B));
            }
        }
    }

    void spread_mean_grads() {
        const std::size_t nl = grid.lags.size();
        for (int k = 0; k < 3; ++k)
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t j = 0; j < nl; ++j)
                    fc[k].g[b * nl + j] += fm[k].g[j] / float(B);
    }

    double critic_pair(int k, nn::Tensor<float>& real_in,
                       nn::Tensor<float>& fake_in) {
        opt_crit[k]->zero_grad();
        auto& yr = crit[k]->forward(real_in, true);
        double l = bce_mean(yr, 1.0, 1.0);
        crit[k]->backward(real_in, real_in);
        auto& yf = crit[k]->forward(fake_in, true);
        l += bce_mean(yf, 0.0, 1.0);
        crit[k]->backward(fake_in, fake_in);
        opt_crit[k]->step();
        return l;
    }

    // one discriminator pass: fresh real and generated batches
    void d_pass_multi(rng::Stream& sel, EpochLog& log) {
        fill_real(sel);
        fill_noise();
        auto& fake = gen.forward(noise, true);

        opt_dsi->zero_grad();
        auto& sr = dsi->forward(real, true);
        double l_adv = si_bce(sr, 1.0, 1.0);
        dsi->backward(real, real);
        auto& sf = dsi->forward(fake, true);
        l_adv += si_bce(sf, 0.0, 1.0);
        dsi->backward(fake, fake);
        opt_dsi->step();
        log.d_adv += l_adv;

        head->forward(fake, fc[0], fc[1], fc[2]);
        if (mean_input()) mean_curves();
        auto& f0 = mean_input() ? fm[0] : fc[0];
        auto& f1 = mean_input() ? fm[1] : fc[1];
        auto& f2 = mean_input() ? fm[2] : fc[2];
        log.d_s2 += critic_pair(0, rc[0], f0);
        log.d_skew += critic_pair(1, rc[1], f1);
        log.d_flat += critic_pair(2, rc[2], f2);
    }

    void g_step_multi(EpochLog& log) {
        fill_noise();
        auto& fake = gen.forward(noise, true);
        fake.zero_grad();

        auto& sf = dsi->forward(fake, true);
        const double l_si = si_bce(sf, 1.0, cfg.alpha);
        dsi->backward(fake, fake);

        head->forward(fake, fc[0], fc[1], fc[2]);
        if (mean_input()) mean_curves();
        const double wts[3] = {cfg.beta, cfg.gamma, cfg.lambda};
        double l_stat[3];
        for (int k = 0; k < 3; ++k) {
            auto& in = mean_input() ? fm[k] : fc[k];
            auto& y = crit[k]->forward(in, true);
            l_stat[k] = bce_mean(y, 1.0, wts[k]);
            crit[k]->backward(in, in);
        }
        if (mean_input()) spread_mean_grads();
        head->backward(fake, fake, fc[0], fc[1], fc[2]);

        opt_g->zero_grad();
        gen.backward(noise, noise);
        opt_g->step();

        const double total =
            generator_loss(l_si, l_stat[0], l_stat[1], l_stat[2], cfg);
        if (!std::isfinite(total))
            throw TrainingDiverged("generator loss became non-finite",
                                   global_step);
        log.g_adv += l_si;
        log.g_s2 += l_stat[0];
        log.g_skew += l_stat[1];
        log.g_flat += l_stat[2];
        log.g_total += total;
    }

    void d_pass_gan(rng::Stream& sel, EpochLog& log) {
        fill_real(sel);
        fill_noise();
        auto& fake = gen.forward(noise, true);
        opt_db->zero_grad();
        auto& yr = dbase->forward(real, true);
        double l = bce_mean(yr, 1.0, 1.0);
        dbase->backward(real, real);
        auto& yf = dbase->forward(fake, true);
        l += bce_mean(yf, 0.0, 1.0);
        dbase->backward(fake, fake);
        opt_db->step();
        log.d_adv += l;
    }

    void g_step_gan(EpochLog& log) {
        fill_noise();
        auto& fake = gen.forward(noise, true);
        fake.zero_grad();
        auto& yf = dbase->forward(fake, true);
        const double l = bce_mean(yf, 1.0, 1.0);
        dbase->backward(fake, fake);
        opt_g->zero_grad();
        gen.backward(noise, noise);
        opt_g->step();
        if (!std::isfinite(l))
            throw TrainingDiverged("generator loss became non-finite",
                                   global_step);
        log.g_adv += l;
        log.g_total += l;
    }

    void clip_critic() {
        const float c = float(cfg.wgan_clip);
        for (auto& p : dbp)
            for (auto& w : *p.value) w = std::min(std::max(w, -c), c);
    }

    void d_pass_wgan(rng::Stream& sel, EpochLog& log) {
        fill_real(sel);
        fill_noise();
        auto& fake = gen.forward(noise, true);
        opt_db->zero_grad();
        auto& yf = dbase->forward(fake, true);
        double l = mean_seed(yf, 1.0);
        dbase->backward(fake, fake);
        auto& yr = dbase->forward(real, true);
        l -= mean_seed(yr, -1.0);
        dbase->backward(real, real);
        opt_db->step();
        clip_critic();
        log.d_adv += l;
    }

    void g_step_wgan(EpochLog& log) {
        fill_noise();
        auto& fake = gen.forward(noise, true);
        fake.zero_grad();
        auto& yf = dbase->forward(fake, true);
        const double l = -mean_seed(yf, -1.0);
        dbase->backward(fake, fake);
        opt_g->zero_grad();
        gen.backward(noise, noise);
        opt_g->step();
        if (!std::isfinite(l))
            throw TrainingDiverged("generator loss became non-finite",
                                   global_step);
        log.g_adv += l;
        log.g_total += l;
    }

    int d_passes_per_step() const {
        return cfg.variant == TrainVariant::Wgan ? cfg.wgan_critic_steps
                                                 : cfg.d_steps;
    }

    void d_phase(rng::Stream& sel, EpochLog& log) {
        for (int k = 0; k < d_passes_per_step(); ++k) {
            switch (cfg.variant) {
            case TrainVariant::Multicriteria: d_pass_multi(sel, log); break;
            case TrainVariant::Gan: d_pass_gan(sel, log); break;
            case TrainVariant::Wgan: d_pass_wgan(sel, log); break;
            }
        }
    }

    void g_step(EpochLog& log) {
        switch (cfg.variant) {
        case TrainVariant::Multicriteria: g_step_multi(log); break;
        case TrainVariant::Gan: g_step_gan(log); break;
        case TrainVariant::Wgan: g_step_wgan(log); break;
        }
        ++global_step;
    }

    EpochLog run_epoch(int epoch) {
        EpochLog log;
        log.epoch = epoch;
        rng::Stream sel(cfg.seed, rng::StreamTag::Shuffle,
                        std::uint64_t(epoch));
        const int steps = std::max(1, int(R / B));
        if (cfg.d_per_epoch) d_phase(sel, log);
        for (int s = 0; s < steps; ++s) {
            if (!cfg.d_per_epoch) d_phase(sel, log);
            g_step(log);
        }
        const double inv_g = 1.0 / double(steps);
        const double inv_d =
            1.0 / double((cfg.d_per_epoch ? 1 : steps) * d_passes_per_step());
        log.g_adv *= inv_g;
        log.g_s2 *= inv_g;
        log.g_skew *= inv_g;
        log.g_flat *= inv_g;
        log.g_total *= inv_g;
        log.d_adv *= inv_d;
        log.d_s2 *= inv_d;
        log.d_skew *= inv_d;
        log.d_flat *= inv_d;
        for (double x : {log.g_adv, log.g_s2, log.g_skew, log.g_flat,
                         log.g_total, log.d_adv, log.d_s2, log.d_skew,
                         log.d_flat})
            if (!std::isfinite(x))
                throw TrainingDiverged("epoch loss became non-finite",
                                       global_step);
        return log;
    }

    void save(const std::string& path, int epoch) const {
        ckpt::Container c;
        c.put_text("config", train_config_text(cfg));
        c.put_text("g_config", nn::generator_config_text(gen.config()));
        c.put_text("variant", variant_name(cfg.variant));
        c.put_scalar_i64("epoch", epoch);
        c.put_scalar_i64("noise_seq", std::int64_t(noise_seq));
        c.put_scalar_i64("data_n", std::int64_t(N));
        ckpt::store_views(c, "g", gp);
        ckpt::store_views(c, "g_state", gs);
        store_adam(c, "opt_g", *opt_g);
        if (cfg.variant == TrainVariant::Multicriteria) {
            ckpt::store_views(c, "d_si", dsip);
            ckpt::store_views(c, "d_si_state", dsis);
            store_adam(c, "opt_d_si", *opt_dsi);
            const char* names[3] = {"c_s2", "c_skew", "c_flat"};
            for (int k = 0; k < 3; ++k) {
                ckpt::store_views(c, names[k], critp[k]);
                store_adam(c, std::string("opt_") + names[k], *opt_crit[k]);
            }
        } else {
            ckpt::store_views(c, "d_base", dbp);
            ckpt::store_views(c, "d_base_state", dbs);
            store_adam(c, "opt_d_base", *opt_db);
        }
        c.save(path);
    }

    void load(const std::string& path) {
        ckpt::Container c = ckpt::Container::load(path);
        if (c.get("variant").as_text() != variant_name(cfg.variant))
            throw FormatError("checkpoint: trained as '" +
                              c.get("variant").as_text() +
                              "', cannot resume as '" +
                              variant_name(cfg.variant) + "'");
        if (c.get("g_config").as_text() !=
            nn::generator_config_text(gen.config()))
            throw FormatError("checkpoint: generator geometry differs");
        if (c.get_scalar_i64("data_n") != std::int64_t(N))
            throw FormatError("checkpoint: trained on N=" +
                              std::to_string(c.get_scalar_i64("data_n")) +
                              ", data has N=" + std::to_string(N));
        ckpt::load_views(c, "g", gp);
        ckpt::load_views(c, "g_state", gs);
        load_adam(c, "opt_g", *opt_g);
        if (cfg.variant == TrainVariant::Multicriteria) {
            ckpt::load_views(c, "d_si", dsip);
            ckpt::load_views(c, "d_si_state", dsis);
            load_adam(c, "opt_d_si", *opt_dsi);
            const char* names[3] = {"c_s2", "c_skew", "c_flat"};
            for (int k = 0; k < 3; ++k) {
                ckpt::load_views(c, names[k], critp[k]);
                load_adam(c, std::string("opt_") + names[k], *opt_crit[k]);
            }
        } else {
            ckpt::load_views(c, "d_base", dbp);
            ckpt::load_views(c, "d_base_state", dbs);
            load_adam(c, "opt_d_base", *opt_db);
        }
        epoch_start = int(c.get_scalar_i64("epoch"));
        noise_seq = std::uint64_t(c.get_scalar_i64("noise_seq"));
        global_step = epoch_start * std::max(1, int(R / B));
    }
};

} // namespace

TrainVariant parse_variant(const std::string& s) {
    if (s == "multicriteria") return TrainVariant::Multicriteria;
    if (s == "gan") return TrainVariant::Gan;
    if (s == "wgan") return TrainVariant::Wgan;
    throw FormatError("unknown variant '" + s + "'");
}

std::string variant_name(TrainVariant v) {
    switch (v) {
    case TrainVariant::Multicriteria: return "multicriteria";
    case TrainVariant::Gan: return "gan";
    case TrainVariant::Wgan: return "wgan";
    }
    return "multicriteria";
}

void TrainConfig::validate() const {
    if (preset != "paper" && preset != "desk")
        throw std::invalid_argument("config: preset must be paper or desk");
    if (width_multiplier <= 0)
        throw std::invalid_argument("config: width_multiplier must be > 0");
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (batch < 1) throw std::invalid_argument("config: batch must be >= 1");
    if (lr <= 0) throw std::invalid_argument("config: lr must be > 0");
    if (d_steps < 1)
        throw std::invalid_argument("config: d_steps must be >= 1");
    if (alpha < 0 || beta < 0 || gamma < 0 || lambda < 0)
        throw std::invalid_argument("config: loss weights must be >= 0");
    if (wgan_clip <= 0)
        throw std::invalid_argument("config: wgan_clip must be > 0");
    if (wgan_critic_steps < 1)
        throw std::invalid_argument("config: wgan_critic_steps must be >= 1");
    if (checkpoint_every < 0)
        throw std::invalid_argument("config: checkpoint_every must be >= 0");
}

TrainConfig parse_train_config_text(const std::string& text) {
    TrainConfig cfg;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("config: expected key=value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "variant")
            cfg.variant = parse_variant(val);
        else if (key == "preset")
            cfg.preset = val;
        else if (key == "width_multiplier")
            cfg.width_multiplier = parse_num(key, val);
        else if (key == "epochs")
            cfg.epochs = parse_int(key, val);
        else if (key == "batch")
            cfg.batch = parse_int(key, val);
        else if (key == "lr")
            cfg.lr = parse_num(key, val);
        else if (key == "d_steps")
            cfg.d_steps = parse_int(key, val);
        else if (key == "d_per_epoch")
            cfg.d_per_epoch = parse_bool(key, val);
        else if (key == "alpha")
            cfg.alpha = parse_num(key, val);
        else if (key == "beta")
            cfg.beta = parse_num(key, val);
        else if (key == "gamma")
            cfg.gamma = parse_num(key, val);
        else if (key == "lambda")
            cfg.lambda = parse_num(key, val);
        else if (key == "stat_input")
            cfg.stat_input = parse_stat_input(val);
        else if (key == "seed")
            cfg.seed = std::uint64_t(parse_num(key, val));
        else if (key == "wgan_clip")
            cfg.wgan_clip = parse_num(key, val);
        else if (key == "wgan_critic_steps")
            cfg.wgan_critic_steps = parse_int(key, val);
        else if (key == "checkpoint_every")
            cfg.checkpoint_every = parse_int(key, val);
        else if (key == "resume")
            cfg.resume = val;
        else
            throw FormatError("config: unknown key '" + key + "'");
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    return cfg;
}

TrainConfig parse_train_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    return parse_train_config_text(text);
}

std::string train_config_text(const TrainConfig& cfg) {
    char buf[512];
    std::string s;
    s += "variant=" + variant_name(cfg.variant) + "\n";
    s += "preset=" + cfg.preset + "\n";
    std::snprintf(buf, sizeof buf, "width_multiplier=%.17g\n",
                  cfg.width_multiplier);
    s += buf;
    s += "epochs=" + std::to_string(cfg.epochs) + "\n";
    s += "batch=" + std::to_string(cfg.batch) + "\n";
    std::snprintf(buf, sizeof buf, "lr=%.17g\n", cfg.lr);
    s += buf;
    s += "d_steps=" + std::to_string(cfg.d_steps) + "\n";
    s += std::string("d_per_epoch=") + (cfg.d_per_epoch ? "1" : "0") + "\n";
    std::snprintf(buf, sizeof buf, "alpha=%.17g\nbeta=%.17g\ngamma=%.17g\nlambda=%.17g\n",
                  cfg.alpha, cfg.beta, cfg.gamma, cfg.lambda);
    s += buf;
    s += std::string("stat_input=") + stat_input_name(cfg.stat_input) + "\n";
    s += "seed=" + std::to_string(cfg.seed) + "\n";
    std::snprintf(buf, sizeof buf, "wgan_clip=%.17g\n", cfg.wgan_clip);
    s += buf;
    s += "wgan_critic_steps=" + std::to_string(cfg.wgan_critic_steps) + "\n";
    s += "checkpoint_every=" + std::to_string(cfg.checkpoint_every) + "\n";
    return s;
}

double generator_loss(double l_si, double l_s2, double l_skew, double l_flat,
                      const TrainConfig& cfg) {
    return cfg.alpha * l_si + cfg.beta * l_s2 + cfg.gamma * l_skew +
           cfg.lambda * l_flat;
}

void write_loss_csv(const std::string& path,
                    const std::vector<EpochLog>& history) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << "epoch,g_adv,g_s2,g_skew,g_flat,g_total,d_adv,d_s2,d_skew,d_flat\n";
    for (const auto& e : history) {
        f << e.epoch;
        for (double x : {e.g_adv, e.g_s2, e.g_skew, e.g_flat, e.g_total,
                         e.d_adv, e.d_s2, e.d_skew, e.d_flat}) {
            f << ",";
            fmt(f, x);
        }
        f << "\n";
    }
    if (!f) throw FormatError("short write to " + path);
}

std::vector<EpochLog> read_loss_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) ||
        line != "epoch,g_adv,g_s2,g_skew,g_flat,g_total,d_adv,d_s2,d_skew,d_flat")
        throw FormatError(path + ": not a loss history");
    std::vector<EpochLog> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        EpochLog e;
        double* cols[9] = {&e.g_adv, &e.g_s2, &e.g_skew, &e.g_flat,
                           &e.g_total, &e.d_adv, &e.d_s2, &e.d_skew,
                           &e.d_flat};
        std::size_t pos = 0;
        for (int c = 0; c < 10; ++c) {
            std::size_t next = line.find(',', pos);
            if (next == std::string::npos) next = line.size();
            if (pos >= line.size())
                throw FormatError(path + ": short row");
            const std::string cell = line.substr(pos, next - pos);
            try {
                if (c == 0)
                    e.epoch = std::stoi(cell);
                else
                    *cols[c - 1] = std::stod(cell);
            } catch (const std::exception&) {
                throw FormatError(path + ": bad cell '" + cell + "'");
            }
            pos = next + 1;
        }
        out.push_back(e);
    }
    return out;
}

TrainResult train(const FieldEnsemble& data, const TrainConfig& cfg,
                  const std::string& out_dir,
                  const std::function<void(const EpochLog&)>& on_epoch) {
    cfg.validate();
    Trainer t(data, cfg, out_dir);

    std::filesystem::create_directories(out_dir);
    const std::string ckpt_path =
        (std::filesystem::path(out_dir) / "checkpoint.bin").string();
    const std::string losses_path =
        (std::filesystem::path(out_dir) / "losses.csv").string();

    TrainResult res;
    res.checkpoint_path = ckpt_path;
    res.losses_path = losses_path;
    for (int e = t.epoch_start + 1; e <= cfg.epochs; ++e) {
        res.history.push_back(t.run_epoch(e));
        if (on_epoch) on_epoch(res.history.back());
        if (cfg.checkpoint_every > 0 && e % cfg.checkpoint_every == 0 &&
            e < cfg.epochs) {
            const std::string snap =
                (std::filesystem::path(out_dir) /
                 ("checkpoint_epoch_" + std::to_string(e) + ".bin"))
                    .string();
            t.save(snap, e);
        }
    }
    t.save(ckpt_path, cfg.epochs);
    write_loss_csv(losses_path, res.history);
    return res;
}

} // namespace turb

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "turb/field.hpp"

namespace turb {

enum class TrainVariant { Multicriteria, Gan, Wgan };

TrainVariant parse_variant(const std::string& s);
std::string variant_name(TrainVariant v);

// What the statistic critics score: one curve per batch realization, or the
// batch-mean curve.
enum class StatInput { PerRealization, Mean };

struct TrainConfig {
    TrainVariant variant = TrainVariant::Multicriteria;
    std::string preset = "desk"; // generator preset: paper | desk
    double width_multiplier = 1.0;
    int epochs = 500;
    int batch = 32;
    double lr = 1e-3;
    // discriminator passes per generator step; d_per_epoch moves them into
    // one phase at the top of each epoch instead
    int d_steps = 2;
    bool d_per_epoch = false;
    // multicriteria mixing: adversarial, log S_2, skewness, log flatness
    double alpha = 0.5, beta = 0.2, gamma = 0.15, lambda = 0.15;
    StatInput stat_input = StatInput::PerRealization;
    std::uint64_t seed = 1;
    double wgan_clip = 0.01;
    int wgan_critic_steps = 5;
    int checkpoint_every = 0; // extra snapshots every k epochs; 0 = final only
    std::string resume;       // checkpoint to continue from

    void validate() const;
};

/// key=value lines, '#' comments, unknown keys rejected.
TrainConfig parse_train_config(const std::string& path);
TrainConfig parse_train_config_text(const std::string& text);
std::string train_config_text(const TrainConfig& cfg);

/// alpha*l_si + beta*l_s2 + gamma*l_skew + lambda*l_flat.
double generator_loss(double l_si, double l_s2, double l_skew, double l_flat,
                      const TrainConfig& cfg);

struct EpochLog {
    int epoch = 0;
    double g_adv = 0, g_s2 = 0, g_skew = 0, g_flat = 0, g_total = 0;
    double d_adv = 0, d_s2 = 0, d_skew = 0, d_flat = 0;
};

struct TrainResult {
    std::vector<EpochLog> history;
    std::string checkpoint_path;
    std::string losses_path;
};

/// Adversarial fit of the generator against `data`; writes losses.csv and
/// checkpoint.bin under out_dir. Throws TrainingDiverged when any loss
/// stops being finite. on_epoch, when set, sees each epoch as it ends.
TrainResult train(const FieldEnsemble& data, const TrainConfig& cfg,
                  const std::string& out_dir,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

void write_loss_csv(const std::string& path,
                    const std::vector<EpochLog>& history);
std::vector<EpochLog> read_loss_csv(const std::string& path);

} // namespace turb

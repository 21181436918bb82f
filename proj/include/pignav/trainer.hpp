// Supervised training: Adam on the weighted loss over shuffled samples drawn
// from episodes, plus fine-tuning from a checkpoint on an episode-level
// fraction of the data, and deterministic validation.
#pragma once

#include <filesystem>
#include <optional>

#include "pignav/losses.hpp"

namespace pignav {

struct TrainConfig {
    double learning_rate = 5e-5;
    int batch_size = 32;            // paper value: 128
    int epochs = 10;                // paper value: 200
    int samples_per_episode = 2;    // (obs, goal) draws per episode per epoch
    int t_min = 5;
    int t_max = 64;
    int nav_dist_exponent = 1;
    uint64_t seed = 0;
    LossWeights weights;
    int val_samples_per_episode = 2;

    /// Batch 128 / 200 epochs / lr 5e-5, kept as a named preset.
    static TrainConfig paper_preset() {
        TrainConfig c;
        c.batch_size = 128;
        c.epochs = 200;
        return c;
    }
};

struct CurveRow {
    long step = 0;
    double total = 0, waypoint = 0, relative = 0, distance = 0, global_path = 0;
};

struct TrainResult {
    NavModel model;
    std::vector<CurveRow> curve;
};

/// One Adam update on a batch; returns the raw loss breakdown.
LossBreakdown train_step(NavModel& model, nn::Adam<float>& opt,
                         std::span<const TrainingSample> batch, const LossWeights& weights);

TrainResult train(const ModelConfig& cfg, const std::vector<Episode>& train_episodes,
                  const TrainConfig& tc);
TrainResult train_from(NavModel init, const std::vector<Episode>& train_episodes,
                       const TrainConfig& tc);

/// Full passes over a fixed sample set (overfit harness).
TrainResult train_on_samples(NavModel init, const std::vector<TrainingSample>& samples,
                             const TrainConfig& tc);

/// Deterministic episode-level subset of size max(1, round(fraction * n)).
std::vector<size_t> fraction_indices(size_t n, double fraction, uint64_t seed);

/// Subsamples episodes to the requested fraction, then trains from `base`.
TrainResult finetune(const NavModel& base, const std::vector<Episode>& episodes,
                     double fraction, const TrainConfig& tc);

/// Inference-mode mean loss over deterministic samples from the val episodes.
LossBreakdown validate_model(const NavModel& model, const std::vector<Episode>& val_episodes,
                             const TrainConfig& tc);

void write_curve_csv(const std::filesystem::path& file, std::span<const CurveRow> curve);

}  // namespace pignav

// Closed-loop rollouts in the simulator, SR/SPL aggregation, and the ablation
// and data-efficiency experiment runners.
#pragma once

#include <functional>
#include <memory>

#include "pignav/checkpoint.hpp"
#include "pignav/trainer.hpp"
#include "pignav/world.hpp"

namespace pignav {

class Policy {
public:
    virtual ~Policy() = default;
    virtual WaypointAction act(const Image& obs, const Image& goal) = 0;
    virtual void reset() {}
};

/// Receding-horizon execution: every step re-plans and applies only the first
/// predicted waypoint.
class ModelPolicy final : public Policy {
public:
    explicit ModelPolicy(const NavModel& model, double action_scale = 1.0)
        : model_(&model), action_scale_(action_scale) {}
    WaypointAction act(const Image& obs, const Image& goal) override;

private:
    const NavModel* model_;
    double action_scale_;
};

/// Replays the expert pose chain for one task; ignores observations.
class ExpertReplayPolicy final : public Policy {
public:
    ExpertReplayPolicy(const World& w, const EvalTask& task);
    WaypointAction act(const Image&, const Image&) override;
    void reset() override { next_ = 0; }

private:
    std::vector<WaypointAction> actions_;
    size_t next_ = 0;
};

class RandomPolicy final : public Policy {
public:
    explicit RandomPolicy(uint64_t seed, double max_disp = 1.0)
        : rng_(seed), max_disp_(max_disp) {}
    WaypointAction act(const Image&, const Image&) override;

private:
    Rng rng_;
    double max_disp_;
};

struct EpisodeResult {
    bool success = false;
    double path_len = 0.0;     // planar distance actually moved
    double oracle_dist = 0.0;  // shortest-path length for the task
    int steps = 0;
    Difficulty difficulty = Difficulty::easy;
};

struct RolloutConfig {
    int budget = 100;
    double goal_radius = 1.0;
    double max_step = 1.5;
    int image_size = 64;
    double fov = kPi / 2.0;
    /// Multiplier on predicted planar displacements before execution. Models
    /// trained on normalized data predict in normalized units; pass the
    /// dataset's 1/scale to convert back to world meters.
    double action_scale = 1.0;
};

EpisodeResult run_episode(Policy& policy, const World& w, const EvalTask& task,
                          const RolloutConfig& rc = {});

struct EvalBin {
    double sr = 0.0;
    double spl = 0.0;
    int n = 0;
};

struct EvalReport {
    EvalBin easy, medium, hard, overall;
};

/// SR = mean success; SPL = mean success * min(1, d/p), with a zero-length
/// successful path scored as 1.
EvalReport compute_metrics(std::span<const EpisodeResult> results);

using PolicyFactory = std::function<std::unique_ptr<Policy>(const EvalTask&)>;

std::vector<EpisodeResult> run_tasks(const PolicyFactory& make_policy, const World& w,
                                     std::span<const EvalTask> tasks, const RolloutConfig& rc,
                                     bool parallel = true);

EvalReport evaluate(const NavModel& model, const World& w, std::span<const EvalTask> tasks,
                    const RolloutConfig& rc = {});

nlohmann::json report_to_json(const EvalReport& r);

struct AblationCell {
    std::string name;
    ModelConfig::Variant variant = ModelConfig::Variant::early_fusion;
    AblationMode losses = AblationMode::all;
    std::optional<std::filesystem::path> encoder_init;  // checkpoint for the encoder
};

struct AblationRow {
    std::string name;
    LossBreakdown val_loss;
    EvalReport report;
};

/// Trains one model per cell with identical seeds and data, evaluates each on
/// the same tasks; outcomes are reported, not asserted.
std::vector<AblationRow> run_ablations(const ModelConfig& base_cfg,
                                       const std::vector<Episode>& train_eps,
                                       const std::vector<Episode>& val_eps, const World& w,
                                       std::span<const EvalTask> tasks,
                                       const TrainConfig& base_tc,
                                       std::span<const AblationCell> cells,
                                       const RolloutConfig& rc = {});

std::string ablation_table_csv(std::span<const AblationRow> rows);

struct CurveRecord {
    std::string init;  // "pretrained" or "scratch"
    double fraction = 1.0;
    double val_loss = 0.0;
    double avg_sr = 0.0;
};

/// Fine-tunes (or trains from scratch when no checkpoint is given) on each
/// episode fraction and records validation loss and average SR.
std::vector<CurveRecord> data_efficiency_curve(const std::optional<NavModel>& pretrained,
                                               const ModelConfig& cfg,
                                               const std::vector<Episode>& train_eps,
                                               const std::vector<Episode>& val_eps,
                                               const std::vector<double>& fractions,
                                               const World& w, std::span<const EvalTask> tasks,
                                               const TrainConfig& tc,
                                               const RolloutConfig& rc = {});

void write_curve_records_csv(const std::filesystem::path& file,
                             std::span<const CurveRecord> records);

}  // namespace pignav

#include "pignav/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pignav {

WaypointAction ModelPolicy::act(const Image& obs, const Image& goal) {
    const Image* o = &obs;
    const Image* g = &goal;
    const ModelOutputs out = model_->infer_images(std::span<const Image* const>(&o, 1),
                                                  std::span<const Image* const>(&g, 1));
    return WaypointAction{static_cast<double>(out.waypoints(0, 0)) * action_scale_,
                          static_cast<double>(out.waypoints(0, 1)) * action_scale_,
                          static_cast<double>(out.waypoints(0, 2)),
                          static_cast<double>(out.waypoints(0, 3))};
}

ExpertReplayPolicy::ExpertReplayPolicy(const World& w, const EvalTask& task) {
    const std::vector<Pose> chain =
        expert_pose_chain(w, task.start, w.cell_at(task.goal.x, task.goal.y));
    actions_.reserve(chain.size() - 1);
    for (size_t i = 0; i + 1 < chain.size(); ++i)
        actions_.push_back(encode_action(relative_pose(chain[i], chain[i + 1])));
}

WaypointAction ExpertReplayPolicy::act(const Image&, const Image&) {
    if (next_ >= actions_.size()) return WaypointAction{};  // hold position at the end
    return actions_[next_++];
}

WaypointAction RandomPolicy::act(const Image&, const Image&) {
    const double ang = rng_.uniform(-kPi, kPi);
    return WaypointAction{rng_.uniform(-max_disp_, max_disp_),
                          rng_.uniform(-max_disp_, max_disp_), std::cos(ang), std::sin(ang)};
}

EpisodeResult run_episode(Policy& policy, const World& w, const EvalTask& task,
                          const RolloutConfig& rc) {
    EpisodeResult r;
    r.oracle_dist = task.oracle_dist;
    r.difficulty = task.difficulty;

    const Image goal_img = render(w, task.goal, rc.image_size, rc.image_size, rc.fov);
    Pose pose = task.start;
    policy.reset();
    while (true) {
        if (std::hypot(pose.x - task.goal.x, pose.y - task.goal.y) <= rc.goal_radius) {
            r.success = true;
            return r;
        }
        if (r.steps >= rc.budget) return r;
        const Image obs = render(w, pose, rc.image_size, rc.image_size, rc.fov);
        const WaypointAction a = policy.act(obs, goal_img);
        const Pose next = step(w, pose, a, rc.max_step);
        r.path_len += std::hypot(next.x - pose.x, next.y - pose.y);
        pose = next;
        ++r.steps;
    }
}

EvalReport compute_metrics(std::span<const EpisodeResult> results) {
    if (results.empty()) throw std::invalid_argument("compute_metrics: no results");
    EvalReport rep;
    auto add = [](EvalBin& bin, const EpisodeResult& r) {
        bin.sr += r.success ? 1.0 : 0.0;
        if (r.success)
            bin.spl += r.path_len <= 0.0 ? 1.0 : std::min(1.0, r.oracle_dist / r.path_len);
        ++bin.n;
    };
    for (const EpisodeResult& r : results) {
        add(rep.overall, r);
        switch (r.difficulty) {
            case Difficulty::easy: add(rep.easy, r); break;
            case Difficulty::medium: add(rep.medium, r); break;
            case Difficulty::hard: add(rep.hard, r); break;
        }
    }
    for (EvalBin* bin : {&rep.easy, &rep.medium, &rep.hard, &rep.overall})
        if (bin->n > 0) {
            bin->sr /= bin->n;
            bin->spl /= bin->n;
        }
    return rep;
}

std::vector<EpisodeResult> run_tasks(const PolicyFactory& make_policy, const World& w,
                                     std::span<const EvalTask> tasks, const RolloutConfig& rc,
                                     bool parallel) {
    std::vector<EpisodeResult> results(tasks.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (size_t i = 0; i < tasks.size(); ++i) {
        try {
            std::unique_ptr<Policy> policy = make_policy(tasks[i]);
            results[i] = run_episode(*policy, w, tasks[i], rc);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

EvalReport evaluate(const NavModel& model, const World& w, std::span<const EvalTask> tasks,
                    const RolloutConfig& rc) {
    if (tasks.empty()) throw std::invalid_argument("evaluate: no tasks");
    RolloutConfig cfg = rc;
    cfg.image_size = model.cfg.image_size;
    const auto results = run_tasks(
        [&](const EvalTask&) { return std::make_unique<ModelPolicy>(model, cfg.action_scale); },
        w, tasks, cfg);
    return compute_metrics(results);
}

nlohmann::json report_to_json(const EvalReport& r) {
    auto bin = [](const EvalBin& b) {
        return nlohmann::json{{"sr", b.sr}, {"spl", b.spl}, {"n", b.n}};
    };
    return nlohmann::json{{"easy", bin(r.easy)},
                          {"medium", bin(r.medium)},
                          {"hard", bin(r.hard)},
                          {"overall", bin(r.overall)}};
}

std::vector<AblationRow> run_ablations(const ModelConfig& base_cfg,
                                       const std::vector<Episode>& train_eps,
                                       const std::vector<Episode>& val_eps, const World& w,
                                       std::span<const EvalTask> tasks,
                                       const TrainConfig& base_tc,
                                       std::span<const AblationCell> cells,
                                       const RolloutConfig& rc) {
    std::vector<AblationRow> rows;
    for (const AblationCell& cell : cells) {
        ModelConfig cfg = base_cfg;
        cfg.variant = cell.variant;
        TrainConfig tc = base_tc;
        tc.weights = LossWeights::for_mode(cell.losses);

        NavModel init = NavModel::build(cfg, tc.seed);
        if (cell.encoder_init) load_encoder_weights(init, *cell.encoder_init, false);
        TrainResult tr = train_from(std::move(init), train_eps, tc);

        AblationRow row;
        row.name = cell.name;
        row.val_loss = validate_model(tr.model, val_eps, tc);
        row.report = evaluate(tr.model, w, tasks, rc);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_table_csv(std::span<const AblationRow> rows) {
    std::ostringstream out;
    out << "name,val_total,sr_easy,spl_easy,sr_medium,spl_medium,sr_hard,spl_hard,sr_overall,"
           "spl_overall\n";
    for (const AblationRow& r : rows)
        out << r.name << ',' << r.val_loss.total << ',' << r.report.easy.sr << ','
            << r.report.easy.spl << ',' << r.report.medium.sr << ',' << r.report.medium.spl
            << ',' << r.report.hard.sr << ',' << r.report.hard.spl << ','
            << r.report.overall.sr << ',' << r.report.overall.spl << '\n';
    return out.str();
}

std::vector<CurveRecord> data_efficiency_curve(const std::optional<NavModel>& pretrained,
                                               const ModelConfig& cfg,
                                               const std::vector<Episode>& train_eps,
                                               const std::vector<Episode>& val_eps,
                                               const std::vector<double>& fractions,
                                               const World& w, std::span<const EvalTask> tasks,
                                               const TrainConfig& tc, const RolloutConfig& rc) {
    std::vector<CurveRecord> records;
    for (const double fraction : fractions) {
        if (!(fraction > 0.0 && fraction <= 1.0))
            throw std::invalid_argument("data_efficiency_curve: fraction out of (0, 1]");
        NavModel init =
            pretrained ? *pretrained : NavModel::build(cfg, tc.seed);
        TrainResult tr = finetune(init, train_eps, fraction, tc);
        CurveRecord rec;
        rec.init = pretrained ? "pretrained" : "scratch";
        rec.fraction = fraction;
        rec.val_loss = validate_model(tr.model, val_eps, tc).total;
        rec.avg_sr = tasks.empty() ? 0.0 : evaluate(tr.model, w, tasks, rc).overall.sr;
        records.push_back(rec);
    }
    return records;
}

void write_curve_records_csv(const std::filesystem::path& file,
                             std::span<const CurveRecord> records) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("write_curve_records_csv: cannot open " + file.string());
    out << "init,fraction,val_loss,avg_sr\n";
    for (const CurveRecord& r : records)
        out << r.init << ',' << r.fraction << ',' << r.val_loss << ',' << r.avg_sr << '\n';
}

}  // namespace pignav

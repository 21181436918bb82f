// Command-line entry point: world/data generation, pretraining, fine-tuning,
// video labeling, evaluation, ablations and data-efficiency curves.
#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>

#include "pignav/config.hpp"
#include "pignav/dataset.hpp"
#include "pignav/eval.hpp"
#include "pignav/idm.hpp"
#include "pignav/plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pignav;

namespace {

void require_file(const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw UserError(std::string(what) + " not found: " + p.string());
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

TrainConfig train_config_from(const RunConfig& rc, uint64_t seed) {
    TrainConfig tc;
    tc.learning_rate = rc.get<double>("train.learning_rate");
    tc.batch_size = rc.get<int>("train.batch_size");
    tc.epochs = rc.get<int>("train.epochs");
    tc.samples_per_episode = rc.get<int>("train.samples_per_episode");
    tc.t_min = rc.get<int>("train.t_min");
    tc.t_max = rc.get<int>("train.t_max");
    tc.nav_dist_exponent = rc.get<int>("train.nav_dist_exponent");
    tc.weights = LossWeights::for_mode(ablation_from_string(rc.get<std::string>("train.ablation")));
    tc.seed = seed;
    return tc;
}

RolloutConfig rollout_config_from(const RunConfig& rc) {
    RolloutConfig r;
    r.budget = rc.get<int>("budget");
    r.goal_radius = rc.get<double>("goal_radius");
    r.max_step = rc.get<double>("max_step");
    r.action_scale = rc.get<double>("action_scale");
    return r;
}

struct SplitData {
    std::vector<Episode> train, val;
    double scale = 1.0;
};

SplitData load_split(const fs::path& root) {
    require_file(root / "manifest.json", "dataset manifest");
    Dataset d = load_dataset(root);
    SplitData s;
    s.scale = d.manifest.scale;
    for (size_t i = 0; i < d.episodes.size(); ++i) {
        if (d.manifest.episodes[i].split == "val")
            s.val.push_back(std::move(d.episodes[i]));
        else
            s.train.push_back(std::move(d.episodes[i]));
    }
    if (s.train.empty()) throw UserError("dataset has no training episodes: " + root.string());
    return s;
}

std::vector<EvalTask> sample_tasks_from(const RunConfig& rc, const World& w, int n_per_level,
                                        uint64_t seed) {
    return sample_tasks(w, n_per_level,
                        {rc.get<double>("easy_threshold"), rc.get<double>("medium_threshold")},
                        seed);
}

int cmd_gen_world(const RunConfig& rc, const fs::path& out) {
    const World w = generate_world(rc.get<uint64_t>("seed"), rc.get<int>("size"),
                                   rc.get<double>("density"));
    const fs::path tmp = out.string() + ".tmp";
    save_world(w, tmp);
    fs::rename(tmp, out);
    std::cout << "world " << w.width << "x" << w.height << " seed " << w.seed << " -> " << out
              << "\n";
    return 0;
}

int cmd_gen_data(const RunConfig& rc, const fs::path& world_file, const fs::path& out) {
    require_file(world_file, "world file");
    const World w = load_world(world_file);
    const int n_episodes = rc.get<int>("episodes");
    if (n_episodes < 2) throw UserError("gen-data needs at least 2 episodes");
    const double min_dist = rc.get<double>("min_goal_dist");
    const double jitter = rc.get<double>("start_jitter");
    const int img = rc.get<int>("image_size");
    const double factor = rc.get<double>("filter_factor");
    Rng rng(Rng::derive(rc.get<uint64_t>("seed"), 0x44415441ULL));

    const std::vector<Cell> free = w.free_cells();
    ScopedOutputDir dir(out);

    std::vector<Episode> episodes;
    for (int i = 0; i < n_episodes; ++i) {
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 200)
                throw std::runtime_error("gen-data: cannot sample a goal for episode " +
                                         std::to_string(i));
            const Cell s = free[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(free.size()) - 1))];
            const Cell g = free[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(free.size()) - 1))];
            double jx = 0.0, jy = 0.0;
            if (jitter > 0.0) {
                do {
                    jx = rng.uniform(-jitter, jitter);
                    jy = rng.uniform(-jitter, jitter);
                } while (jx * jx + jy * jy > jitter * jitter);
            }
            const double yaw = rng.uniform(-kPi, kPi);
            if (s == g) continue;
            const PathResult path = shortest_path_cells(w, s, g);
            if (!path.reachable || path.length < min_dist) continue;
            const Pose start(w.cell_center(s).x + jx, w.cell_center(s).y + jy, yaw);
            for (Episode& frag : filter_outliers(gen_expert_episode(w, start, g, img, img), factor))
                episodes.push_back(std::move(frag));
            break;
        }
    }

    auto [normalized, scale] = normalize_dataset(std::move(episodes));
    DatasetManifest manifest;
    manifest.scale = scale;
    manifest.config_snapshot = rc.tree().dump();
    char name[32];
    for (size_t i = 0; i < normalized.size(); ++i) {
        std::snprintf(name, sizeof(name), "episode_%06zu", i);
        manifest.episodes.push_back(
            ManifestEntry{name, normalized[i].length(), ""});
    }
    split_dataset(manifest, rc.get<double>("train_fraction"), rc.get<uint64_t>("seed"));
    save_dataset(dir.path(), normalized, manifest);
    rc.snapshot(dir.path());
    dir.commit();
    std::cout << "dataset: " << normalized.size() << " episodes, scale " << scale << " -> "
              << out << "\n";
    return 0;
}

int run_training_command(const RunConfig& rc, const fs::path& data,
                         const std::optional<fs::path>& from, double fraction,
                         const fs::path& out) {
    const SplitData split = load_split(data);
    const ModelConfig cfg = ModelConfig::from_json(rc.tree().at("model"));
    const TrainConfig tc = train_config_from(rc, rc.get<uint64_t>("seed"));

    ScopedOutputDir dir(out);
    TrainResult result = [&] {
        if (from) {
            require_file(*from, "checkpoint");
            return finetune(load_checkpoint(*from), split.train, fraction, tc);
        }
        if (fraction < 1.0) {
            NavModel init = NavModel::build(cfg, tc.seed);
            return finetune(init, split.train, fraction, tc);
        }
        return train(cfg, split.train, tc);
    }();

    save_checkpoint(result.model, dir.path() / "checkpoint.bin");
    write_curve_csv(dir.path() / "loss_curve.csv", result.curve);
    if (!split.val.empty()) {
        const LossBreakdown val = validate_model(result.model, split.val, tc);
        write_text(dir.path() / "validation.json",
                   json{{"total", val.total},
                        {"waypoint", val.waypoint},
                        {"relative", val.relative},
                        {"distance", val.distance},
                        {"global", val.global_path}}
                           .dump(2) +
                       "\n");
    }
    rc.snapshot(dir.path());
    dir.commit();
    std::cout << "trained " << result.curve.size() << " steps -> " << out << "\n";
    return 0;
}

std::vector<VideoSegment> load_clips(const RunConfig& rc, const fs::path& clips_dir) {
    require_file(clips_dir, "clips directory");
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(clips_dir))
        if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw UserError("no clip directories under " + clips_dir.string());

    std::vector<VideoSegment> segments;
    for (const fs::path& d : dirs) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(d))
            if (entry.path().extension() == ".png") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) continue;
        std::vector<Image> frames;
        frames.reserve(files.size());
        for (const fs::path& f : files) frames.push_back(read_png(f));
        for (VideoSegment& seg :
             segment_video(frames, rc.get<double>("fps_in"), rc.get<double>("clip_seconds"),
                           rc.get<double>("fps_out"), d.filename().string()))
            segments.push_back(std::move(seg));
    }
    if (segments.empty()) throw UserError("no usable clips under " + clips_dir.string());
    return segments;
}

int cmd_label(const RunConfig& rc, const fs::path& clips_dir, const fs::path& idm_ckpt,
              const std::optional<fs::path>& gold_file,
              const std::optional<fs::path>& sweep_file, const fs::path& out) {
    if (rc.get<std::string>("classifier") != "mock")
        throw UserError("only the 'mock' classifier backend is available");
    require_file(idm_ckpt, "idm checkpoint");

    std::vector<VideoSegment> segments = load_clips(rc, clips_dir);
    if (gold_file) {
        require_file(*gold_file, "gold label file");
        std::ifstream in(*gold_file);
        json gold;
        in >> gold;
        for (VideoSegment& seg : segments)
            if (gold.contains(seg.source_id)) seg.gold = gold[seg.source_id].get<bool>();
    }

    const MockMotionClassifier clf(rc.get<double>("mock_threshold"));
    const FilterOutcome outcome = two_stage_filter(segments, clf, rc.get<std::string>("prompt1"),
                                                   rc.get<std::string>("prompt2"));

    const NavModel idm = load_checkpoint(idm_ckpt);
    const auto records = annotate(outcome.survivors, idm, rc.get<int>("pairs_per_clip"));

    ScopedOutputDir dir(out);
    write_decision_log_csv(dir.path() / "decisions.csv", outcome.decisions);
    write_annotations_jsonl(dir.path() / "annotations.jsonl", records);
    json kept = json::array();
    for (const VideoSegment& seg : outcome.survivors) kept.push_back(seg.source_id);
    write_text(dir.path() / "filtered.json", kept.dump(2) + "\n");

    if (gold_file) {
        json metrics;
        for (int stage : {1, 2}) {
            try {
                const FilterMetrics m = filter_metrics(outcome.decisions, stage);
                metrics["stage" + std::to_string(stage)] =
                    json{{"precision", m.precision}, {"recall", m.recall},     {"f1", m.f1},
                         {"tp", m.tp},               {"fp", m.fp},             {"fn", m.fn},
                         {"tn", m.tn},               {"precision_flagged", m.precision_flagged},
                         {"recall_flagged", m.recall_flagged}};
            } catch (const std::invalid_argument&) {
                // stage had no gold-labeled decisions
            }
        }
        write_text(dir.path() / "metrics.json", metrics.dump(2) + "\n");
    }
    if (sweep_file) {
        require_file(*sweep_file, "prompt sweep file");
        std::ifstream in(*sweep_file);
        json prompts_json;
        in >> prompts_json;
        std::vector<std::string> prompts = prompts_json.get<std::vector<std::string>>();
        json ranking = json::array();
        for (const PromptScore& s : rank_prompts(segments, clf, prompts))
            ranking.push_back(json{{"prompt", s.prompt},
                                   {"precision", s.precision},
                                   {"recall", s.recall},
                                   {"score", s.score}});
        write_text(dir.path() / "prompt_sweep.json", ranking.dump(2) + "\n");
    }
    rc.snapshot(dir.path());
    dir.commit();
    std::cout << "label: " << outcome.survivors.size() << "/" << segments.size()
              << " segments kept, " << records.size() << " annotations -> " << out << "\n";
    return 0;
}

int cmd_eval(const RunConfig& rc, const fs::path& model_file, const fs::path& world_file,
             const fs::path& out) {
    require_file(model_file, "model checkpoint");
    require_file(world_file, "world file");
    const int total = rc.get<int>("tasks");
    if (total < 3 || total % 3 != 0)
        throw UserError("--tasks must be a positive multiple of 3 (tasks per level)");

    const NavModel model = load_checkpoint(model_file);
    const World w = load_world(world_file);
    const auto tasks = sample_tasks_from(rc, w, total / 3, rc.get<uint64_t>("seed"));

    ScopedOutputDir dir(out);
    const EvalReport report = evaluate(model, w, tasks, rollout_config_from(rc));
    write_text(dir.path() / "metrics.json", report_to_json(report).dump(2) + "\n");
    write_text(dir.path() / "tasks.json", tasks_to_json(tasks).dump(2) + "\n");
    rc.snapshot(dir.path());
    dir.commit();
    std::cout << "eval: overall SR " << report.overall.sr << " SPL " << report.overall.spl
              << " -> " << out << "\n";
    return 0;
}

int cmd_ablate(const RunConfig& rc, const fs::path& grid_file, const fs::path& data,
               const fs::path& world_file, const fs::path& out) {
    require_file(grid_file, "ablation grid");
    require_file(world_file, "world file");
    std::ifstream in(grid_file);
    json grid;
    in >> grid;

    std::vector<AblationCell> cells;
    for (const auto& j : grid) {
        AblationCell c;
        c.name = j.at("name").get<std::string>();
        c.variant = variant_from_string(j.value("variant", "early_fusion"));
        c.losses = ablation_from_string(j.value("losses", "all"));
        if (j.contains("encoder_init"))
            c.encoder_init = fs::path(j["encoder_init"].get<std::string>());
        cells.push_back(std::move(c));
    }
    if (cells.empty()) throw UserError("ablation grid is empty");

    const SplitData split = load_split(data);
    const World w = load_world(world_file);
    const auto tasks =
        sample_tasks_from(rc, w, rc.get<int>("tasks_per_level"), rc.get<uint64_t>("seed"));
    const ModelConfig cfg = ModelConfig::from_json(rc.tree().at("model"));
    const TrainConfig tc = train_config_from(rc, rc.get<uint64_t>("seed"));

    ScopedOutputDir dir(out);
    const auto rows = run_ablations(cfg, split.train, split.val.empty() ? split.train : split.val,
                                    w, tasks, tc, cells, rollout_config_from(rc));
    write_text(dir.path() / "ablation_table.csv", ablation_table_csv(rows));
    json jr = json::array();
    for (const AblationRow& r : rows)
        jr.push_back(json{{"name", r.name},
                          {"val_total", r.val_loss.total},
                          {"report", report_to_json(r.report)}});
    write_text(dir.path() / "ablation_table.json", jr.dump(2) + "\n");
    rc.snapshot(dir.path());
    dir.commit();
    std::cout << "ablate: " << rows.size() << " cells -> " << out << "\n";
    return 0;
}

int cmd_curve(const RunConfig& rc, const fs::path& data, const fs::path& world_file,
              const std::optional<fs::path>& from, const fs::path& out) {
    require_file(world_file, "world file");
    const SplitData split = load_split(data);
    const World w = load_world(world_file);
    const auto tasks =
        sample_tasks_from(rc, w, rc.get<int>("tasks_per_level"), rc.get<uint64_t>("seed"));
    const ModelConfig cfg = ModelConfig::from_json(rc.tree().at("model"));
    const TrainConfig tc = train_config_from(rc, rc.get<uint64_t>("seed"));
    const std::vector<double> fractions = rc.get<std::vector<double>>("fractions");
    const RolloutConfig rollout = rollout_config_from(rc);
    const auto& val = split.val.empty() ? split.train : split.val;

    ScopedOutputDir dir(out);
    std::vector<CurveRecord> records = data_efficiency_curve(
        std::nullopt, cfg, split.train, val, fractions, w, tasks, tc, rollout);
    if (from) {
        require_file(*from, "checkpoint");
        const NavModel pre = load_checkpoint(*from);
        for (CurveRecord& r : data_efficiency_curve(pre, cfg, split.train, val, fractions, w,
                                                    tasks, tc, rollout))
            records.push_back(std::move(r));
    }
    write_curve_records_csv(dir.path() / "curve.csv", records);

    std::vector<PlotSeries> series;
    for (const std::string init : {"scratch", "pretrained"}) {
        PlotSeries s;
        s.name = init;
        s.color = init == "scratch" ? std::array<uint8_t, 3>{200, 60, 40}
                                    : std::array<uint8_t, 3>{40, 90, 200};
        for (const CurveRecord& r : records)
            if (r.init == init) {
                s.x.push_back(r.fraction);
                s.y.push_back(r.val_loss);
            }
        if (!s.x.empty()) series.push_back(std::move(s));
    }
    save_line_chart(dir.path() / "curve.png", series);
    rc.snapshot(dir.path());
    dir.commit();
    std::cout << "curve: " << records.size() << " records -> " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pignav: image-goal navigation at desk scale"};
    app.require_subcommand(1);

    std::string config_file, out;
    std::vector<std::string> overrides;
    auto add_common = [&](CLI::App* sub, bool with_out = true) {
        sub->add_option("--config", config_file, "JSON config file");
        sub->add_option("--set", overrides, "dotted-key overrides, key=value")
            ->take_all();
        if (with_out) sub->add_option("--out", out, "output directory")->required();
    };

    // gen-world
    auto* gen_world = app.add_subcommand("gen-world", "generate a world JSON");
    std::string gw_seed, gw_size, gw_density;
    add_common(gen_world);
    gen_world->add_option("--seed", gw_seed, "world seed");
    gen_world->add_option("--size", gw_size, "grid size");
    gen_world->add_option("--density", gw_density, "obstacle density");

    // gen-data
    auto* gen_data = app.add_subcommand("gen-data", "generate an expert episode dataset");
    std::string gd_world, gd_episodes, gd_seed;
    add_common(gen_data);
    gen_data->add_option("--world", gd_world, "world JSON")->required();
    gen_data->add_option("--episodes", gd_episodes, "episode count");
    gen_data->add_option("--seed", gd_seed, "data seed");

    // pretrain
    auto* pretrain = app.add_subcommand("pretrain", "train from scratch");
    std::string pt_data, pt_seed;
    add_common(pretrain);
    pretrain->add_option("--data", pt_data, "dataset root")->required();
    pretrain->add_option("--seed", pt_seed, "training seed");

    // finetune
    auto* ft = app.add_subcommand("finetune", "fine-tune from a checkpoint");
    std::string ft_data, ft_from, ft_fraction, ft_seed;
    add_common(ft);
    ft->add_option("--data", ft_data, "dataset root")->required();
    ft->add_option("--from", ft_from, "initial checkpoint")->required();
    ft->add_option("--fraction", ft_fraction, "episode fraction in (0, 1]");
    ft->add_option("--seed", ft_seed, "training seed");

    // label
    auto* label = app.add_subcommand("label", "filter and annotate video clips");
    std::string lb_clips, lb_idm, lb_classifier, lb_gold, lb_sweep;
    add_common(label);
    label->add_option("--clips", lb_clips, "directory of clip frame directories")->required();
    label->add_option("--idm", lb_idm, "IDM checkpoint")->required();
    label->add_option("--classifier", lb_classifier, "classifier backend (mock)");
    label->add_option("--gold", lb_gold, "gold labels JSON");
    label->add_option("--sweep-prompts", lb_sweep, "JSON array of prompts to rank");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "closed-loop SR/SPL evaluation");
    std::string ev_model, ev_world, ev_tasks, ev_budget, ev_seed;
    add_common(eval_cmd);
    eval_cmd->add_option("--model", ev_model, "model checkpoint")->required();
    eval_cmd->add_option("--world", ev_world, "world JSON")->required();
    eval_cmd->add_option("--tasks", ev_tasks, "total tasks (multiple of 3)");
    eval_cmd->add_option("--budget", ev_budget, "step budget");
    eval_cmd->add_option("--seed", ev_seed, "task sampling seed");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "train/evaluate an ablation grid");
    std::string ab_grid, ab_data, ab_world;
    add_common(ablate);
    ablate->add_option("--grid", ab_grid, "grid JSON")->required();
    ablate->add_option("--data", ab_data, "dataset root")->required();
    ablate->add_option("--world", ab_world, "world JSON")->required();

    // curve
    auto* curve = app.add_subcommand("curve", "data-efficiency curve");
    std::string cv_data, cv_world, cv_from, cv_fractions;
    add_common(curve);
    curve->add_option("--data", cv_data, "dataset root")->required();
    curve->add_option("--world", cv_world, "world JSON")->required();
    curve->add_option("--from", cv_from, "pretrained checkpoint (adds the pretrained series)");
    curve->add_option("--fractions", cv_fractions, "comma-separated fractions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const std::optional<fs::path> cfg_file =
            config_file.empty() ? std::nullopt : std::optional<fs::path>(config_file);
        auto push_flag = [&](const std::string& key, const std::string& value) {
            if (!value.empty()) overrides.push_back(key + "=" + value);
        };

        if (gen_world->parsed()) {
            push_flag("seed", gw_seed);
            push_flag("size", gw_size);
            push_flag("density", gw_density);
            return cmd_gen_world(RunConfig::resolve("gen-world", cfg_file, overrides), out);
        }
        if (gen_data->parsed()) {
            push_flag("episodes", gd_episodes);
            push_flag("seed", gd_seed);
            return cmd_gen_data(RunConfig::resolve("gen-data", cfg_file, overrides), gd_world,
                                out);
        }
        if (pretrain->parsed()) {
            push_flag("seed", pt_seed);
            return run_training_command(RunConfig::resolve("pretrain", cfg_file, overrides),
                                        pt_data, std::nullopt, 1.0, out);
        }
        if (ft->parsed()) {
            push_flag("seed", ft_seed);
            push_flag("fraction", ft_fraction);
            const RunConfig rc = RunConfig::resolve("finetune", cfg_file, overrides);
            return run_training_command(rc, ft_data, fs::path(ft_from),
                                        rc.get<double>("fraction"), out);
        }
        if (label->parsed()) {
            push_flag("classifier", lb_classifier);
            return cmd_label(RunConfig::resolve("label", cfg_file, overrides), lb_clips, lb_idm,
                             lb_gold.empty() ? std::nullopt : std::optional<fs::path>(lb_gold),
                             lb_sweep.empty() ? std::nullopt : std::optional<fs::path>(lb_sweep),
                             out);
        }
        if (eval_cmd->parsed()) {
            push_flag("tasks", ev_tasks);
            push_flag("budget", ev_budget);
            push_flag("seed", ev_seed);
            return cmd_eval(RunConfig::resolve("eval", cfg_file, overrides), ev_model, ev_world,
                            out);
        }
        if (ablate->parsed())
            return cmd_ablate(RunConfig::resolve("ablate", cfg_file, overrides), ab_grid,
                              ab_data, ab_world, out);
        if (curve->parsed()) {
            if (!cv_fractions.empty()) overrides.push_back("fractions=[" + cv_fractions + "]");
            return cmd_curve(RunConfig::resolve("curve", cfg_file, overrides), cv_data, cv_world,
                             cv_from.empty() ? std::nullopt : std::optional<fs::path>(cv_from),
                             out);
        }
        throw UserError("no subcommand selected");
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}

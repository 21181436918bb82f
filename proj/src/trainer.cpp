#include "pignav/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pignav {

namespace {

void batch_patches(std::span<const TrainingSample> batch, const ModelConfig& cfg,
                   nn::Mat<float>& obs, nn::Mat<float>& goal) {
    std::vector<const Image*> obs_ptr, goal_ptr;
    obs_ptr.reserve(batch.size());
    goal_ptr.reserve(batch.size());
    for (const TrainingSample& s : batch) {
        obs_ptr.push_back(&s.obs);
        goal_ptr.push_back(&s.goal);
    }
    obs = images_to_patches<float>(obs_ptr, cfg);
    goal = images_to_patches<float>(goal_ptr, cfg);
}

std::vector<const Episode*> eligible_episodes(const std::vector<Episode>& eps, int t_min) {
    std::vector<const Episode*> out;
    for (const Episode& e : eps)
        if (e.length() >= t_min + 1) out.push_back(&e);
    return out;
}

TrainResult run_training(NavModel model, const std::vector<Episode>& episodes,
                         const TrainConfig& tc) {
    if (!tc.weights.any_enabled())
        throw std::invalid_argument("train: all loss weights are zero");
    if (tc.batch_size < 1 || tc.epochs < 1 || tc.learning_rate <= 0)
        throw std::invalid_argument("train: bad training configuration");
    const auto eligible = eligible_episodes(episodes, tc.t_min);
    if (eligible.empty())
        throw std::invalid_argument("train: no episode long enough for the horizon range");

    Rng rng(Rng::derive(tc.seed, 0x545241494eULL));
    nn::Adam<float> opt(static_cast<float>(tc.learning_rate));
    TrainResult result;
    long step = 0;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        std::vector<TrainingSample> samples;
        samples.reserve(eligible.size() * static_cast<size_t>(tc.samples_per_episode));
        for (const Episode* e : eligible)
            for (int s = 0; s < tc.samples_per_episode; ++s)
                samples.push_back(sample_training_pair(*e, rng, tc.t_min, tc.t_max,
                                                       model.cfg.n_waypoint, model.cfg.n_global,
                                                       tc.nav_dist_exponent));
        for (size_t i = samples.size() - 1; i > 0; --i)
            std::swap(samples[i], samples[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i)))]);

        for (size_t off = 0; off < samples.size(); off += static_cast<size_t>(tc.batch_size)) {
            const size_t count = std::min<size_t>(static_cast<size_t>(tc.batch_size),
                                                  samples.size() - off);
            const LossBreakdown b = train_step(
                model, opt, std::span<const TrainingSample>(samples.data() + off, count),
                tc.weights);
            ++step;
            result.curve.push_back(
                CurveRow{step, b.total, b.waypoint, b.relative, b.distance, b.global_path});
        }
    }
    model.train_step += step;
    result.model = std::move(model);
    return result;
}

}  // namespace

LossBreakdown train_step(NavModel& model, nn::Adam<float>& opt,
                         std::span<const TrainingSample> batch, const LossWeights& weights) {
    nn::Mat<float> obs, goal;
    batch_patches(batch, model.cfg, obs, goal);
    const LabelBatch<float> lab = make_label_batch<float>(batch);

    nn::Tape<float> tape;
    const NavModel::Fwd f = model.forward(tape, obs, goal);
    const GraphLoss<float> loss = build_graph_loss(tape, f, lab, weights);
    tape.backward(loss.total);

    std::vector<nn::Mat<float>*> values(model.params.size());
    std::vector<const nn::Mat<float>*> grads(model.params.size());
    for (size_t i = 0; i < model.params.size(); ++i) {
        values[i] = &model.params[i].value;
        grads[i] = &tape.grad(f.param_ids[i]);
    }
    opt.step(std::move(values), grads);
    return loss.breakdown;
}

TrainResult train(const ModelConfig& cfg, const std::vector<Episode>& train_episodes,
                  const TrainConfig& tc) {
    return run_training(NavModel::build(cfg, tc.seed), train_episodes, tc);
}

TrainResult train_from(NavModel init, const std::vector<Episode>& train_episodes,
                       const TrainConfig& tc) {
    return run_training(std::move(init), train_episodes, tc);
}

TrainResult train_on_samples(NavModel init, const std::vector<TrainingSample>& samples,
                             const TrainConfig& tc) {
    if (samples.empty()) throw std::invalid_argument("train_on_samples: empty sample set");
    Rng rng(Rng::derive(tc.seed, 0x4f564552ULL));
    nn::Adam<float> opt(static_cast<float>(tc.learning_rate));
    TrainResult result;
    result.model = std::move(init);
    std::vector<size_t> order(samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    long step = 0;
    std::vector<TrainingSample> batch;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        for (size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i)))]);
        for (size_t off = 0; off < order.size(); off += static_cast<size_t>(tc.batch_size)) {
            const size_t count =
                std::min<size_t>(static_cast<size_t>(tc.batch_size), order.size() - off);
            batch.clear();
            for (size_t i = 0; i < count; ++i) batch.push_back(samples[order[off + i]]);
            const LossBreakdown b = train_step(result.model, opt, batch, tc.weights);
            ++step;
            result.curve.push_back(
                CurveRow{step, b.total, b.waypoint, b.relative, b.distance, b.global_path});
        }
    }
    result.model.train_step += step;
    return result;
}

std::vector<size_t> fraction_indices(size_t n, double fraction, uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("fraction_indices: fraction must be in (0, 1]");
    if (n == 0) throw std::invalid_argument("fraction_indices: no episodes");
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(Rng::derive(seed, 0x46524143ULL));
    for (size_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i)))]);
    size_t keep = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
    keep = std::clamp<size_t>(keep, 1, n);
    order.resize(keep);
    std::sort(order.begin(), order.end());
    return order;
}

TrainResult finetune(const NavModel& base, const std::vector<Episode>& episodes,
                     double fraction, const TrainConfig& tc) {
    const std::vector<size_t> keep = fraction_indices(episodes.size(), fraction, tc.seed);
    std::vector<Episode> subset;
    subset.reserve(keep.size());
    for (size_t i : keep) subset.push_back(episodes[i]);
    return run_training(base, subset, tc);
}

LossBreakdown validate_model(const NavModel& model, const std::vector<Episode>& val_episodes,
                             const TrainConfig& tc) {
    const auto eligible = eligible_episodes(val_episodes, tc.t_min);
    if (eligible.empty()) throw std::invalid_argument("validate: empty validation split");

    std::vector<TrainingSample> samples;
    for (size_t i = 0; i < eligible.size(); ++i) {
        Rng rng(Rng::derive(tc.seed, 0x56414cULL + i));
        for (int s = 0; s < tc.val_samples_per_episode; ++s)
            samples.push_back(sample_training_pair(*eligible[i], rng, tc.t_min, tc.t_max,
                                                   model.cfg.n_waypoint, model.cfg.n_global,
                                                   tc.nav_dist_exponent));
    }

    LossBreakdown mean;
    size_t done = 0;
    for (size_t off = 0; off < samples.size(); off += static_cast<size_t>(tc.batch_size)) {
        const size_t count =
            std::min<size_t>(static_cast<size_t>(tc.batch_size), samples.size() - off);
        const std::span<const TrainingSample> batch(samples.data() + off, count);
        nn::Mat<float> obs, goal;
        batch_patches(batch, model.cfg, obs, goal);
        const ModelOutputs out = model.infer_patches(obs, goal);
        const auto [total, b] = total_loss<float>(out, make_label_batch<float>(batch), tc.weights);
        const double w = static_cast<double>(count);
        mean.total += w * b.total;
        mean.waypoint += w * b.waypoint;
        mean.relative += w * b.relative;
        mean.distance += w * b.distance;
        mean.global_path += w * b.global_path;
        done += count;
    }
    const double inv = 1.0 / static_cast<double>(done);
    mean.total *= inv;
    mean.waypoint *= inv;
    mean.relative *= inv;
    mean.distance *= inv;
    mean.global_path *= inv;
    return mean;
}

void write_curve_csv(const std::filesystem::path& file, std::span<const CurveRow> curve) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("write_curve_csv: cannot open " + file.string());
    out << "step,total,waypoint,relative,distance,global\n";
    for (const CurveRow& r : curve)
        out << r.step << ',' << r.total << ',' << r.waypoint << ',' << r.relative << ','
            << r.distance << ',' << r.global_path << '\n';
}

}  // namespace pignav

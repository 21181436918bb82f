#include "pignav/dataset.hpp"

#include <algorithm>
#include <cmath>

namespace pignav {

namespace {

double step_displacement(const Pose& a, const Pose& b) {
    return std::hypot(b.x - a.x, b.y - a.y);
}

Episode slice_episode(const Episode& e, int first, int last_inclusive) {
    Episode out;
    out.meta = e.meta;
    out.frames.assign(e.frames.begin() + first, e.frames.begin() + last_inclusive + 1);
    out.poses.assign(e.poses.begin() + first, e.poses.begin() + last_inclusive + 1);
    return out;
}

}  // namespace

std::vector<Episode> filter_outliers(const Episode& e, double factor) {
    if (e.length() < 2) throw std::invalid_argument("filter_outliers: episode shorter than 2");
    const int n_steps = e.length() - 1;
    std::vector<double> disp(static_cast<size_t>(n_steps));
    double mean = 0.0;
    for (int i = 0; i < n_steps; ++i) {
        disp[static_cast<size_t>(i)] = step_displacement(e.poses[i], e.poses[i + 1]);
        mean += disp[static_cast<size_t>(i)];
    }
    mean /= n_steps;

    std::vector<Episode> out;
    int start = 0;
    for (int i = 0; i < n_steps; ++i) {
        if (disp[static_cast<size_t>(i)] > factor * mean) {
            if (i - start + 1 >= 2) out.push_back(slice_episode(e, start, i));
            start = i + 1;
        }
    }
    if (e.length() - start >= 2) out.push_back(slice_episode(e, start, e.length() - 1));
    return out;
}

double pooled_mean_step(const std::vector<Episode>& episodes) {
    double sum = 0.0;
    long long count = 0;
    for (const Episode& e : episodes) {
        for (int i = 0; i + 1 < e.length(); ++i) {
            sum += step_displacement(e.poses[i], e.poses[i + 1]);
            ++count;
        }
    }
    if (count == 0)
        throw std::invalid_argument("pooled_mean_step: no transitions in dataset");
    return sum / static_cast<double>(count);
}

std::pair<std::vector<Episode>, double> normalize_dataset(std::vector<Episode> episodes) {
    const double mean = pooled_mean_step(episodes);
    if (mean <= 0.0)
        throw std::invalid_argument("normalize_dataset: zero mean step displacement");
    const double scale = 1.0 / mean;
    for (Episode& e : episodes)
        for (Pose& p : e.poses) {
            p.x *= scale;
            p.y *= scale;
        }
    return {std::move(episodes), scale};
}

TrainingSample make_sample(const Episode& e, int t, int t_sub, int n_way, int n_global,
                           int nav_dist_exponent) {
    if (t < 0 || t_sub < 0 || t + t_sub >= e.length())
        throw std::out_of_range("make_sample: sub-trajectory out of range");
    if (n_way < 1 || n_global < 1)
        throw std::invalid_argument("make_sample: head sizes must be >= 1");

    TrainingSample s;
    s.obs = e.frames[static_cast<size_t>(t)];
    s.goal = e.frames[static_cast<size_t>(t + t_sub)];
    s.horizon = t_sub;

    const Pose& ref = e.poses[static_cast<size_t>(t)];
    s.waypoints.reserve(static_cast<size_t>(n_way));
    for (int k = 1; k <= n_way; ++k) {
        const int idx = t + std::min(k, t_sub);
        s.waypoints.push_back(encode_action(relative_pose(ref, e.poses[static_cast<size_t>(idx)])));
    }
    s.rel_goal = encode_action(relative_pose(ref, e.poses[static_cast<size_t>(t + t_sub)]));
    s.nav_dist = path_length(
        std::span<const Pose>(e.poses.data() + t, static_cast<size_t>(t_sub) + 1),
        nav_dist_exponent);

    s.global_path.reserve(static_cast<size_t>(n_global));
    if (t_sub == 0) {
        for (int k = 0; k < n_global; ++k)
            s.global_path.push_back(encode_action(RelPose{}));
    } else {
        for (int idx : global_indices(t_sub, n_global))
            s.global_path.push_back(
                encode_action(relative_pose(ref, e.poses[static_cast<size_t>(t + idx)])));
    }
    return s;
}

TrainingSample sample_training_pair(const Episode& e, Rng& rng, int t_min, int t_max, int n_way,
                                    int n_global, int nav_dist_exponent) {
    const int hi = std::min(t_max, e.length() - 1);
    if (t_min < 1 || hi < t_min)
        throw std::invalid_argument("sample_training_pair: episode too short for horizon range");
    const int t_sub = static_cast<int>(rng.uniform_int(t_min, hi));
    const int t = static_cast<int>(rng.uniform_int(0, e.length() - 1 - t_sub));
    return make_sample(e, t, t_sub, n_way, n_global, nav_dist_exponent);
}

void split_dataset(DatasetManifest& manifest, double train_fraction, uint64_t seed) {
    const size_t n = manifest.episodes.size();
    if (n < 2) throw std::invalid_argument("split_dataset: needs at least 2 episodes");
    if (!(train_fraction > 0.0 && train_fraction < 1.0 + 1e-12))
        throw std::invalid_argument("split_dataset: train_fraction must be in (0, 1]");

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    for (size_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i)))]);

    size_t n_train = static_cast<size_t>(std::llround(train_fraction * static_cast<double>(n)));
    n_train = std::clamp<size_t>(n_train, 1, n - 1);
    for (size_t i = 0; i < n; ++i)
        manifest.episodes[order[i]].split = i < n_train ? "train" : "val";
}

}  // namespace pignav

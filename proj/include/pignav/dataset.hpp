// Data cleaning, normalization to a unified action scale, and extraction of
// the four-label training samples from episodes.
#pragma once

#include <utility>

#include "pignav/episode.hpp"
#include "pignav/rng.hpp"

namespace pignav {

/// One supervised example: an (obs, goal) image pair with the waypoint chunk,
/// relative goal pose, navigation distance and global path labels.
struct TrainingSample {
    Image obs;
    Image goal;
    std::vector<WaypointAction> waypoints;    // k = 1..n_waypoint, clamped past the goal
    WaypointAction rel_goal;
    double nav_dist = 0.0;                    // normalized units
    std::vector<WaypointAction> global_path;  // k = 1..n_global
    int horizon = 0;                          // T_sub
};

/// Splits an episode at transitions whose step displacement exceeds
/// factor * (mean step displacement of the whole input). Fragments shorter
/// than 2 frames are dropped.
std::vector<Episode> filter_outliers(const Episode& e, double factor = 5.0);

/// Mean step displacement over all transitions of all episodes.
double pooled_mean_step(const std::vector<Episode>& episodes);

/// Scales all positions so the pooled mean step displacement becomes 1.
/// Returns the scaled episodes and the applied scale. Yaw is untouched.
std::pair<std::vector<Episode>, double> normalize_dataset(std::vector<Episode> episodes);

/// Labels for the sub-trajectory poses[t .. t+t_sub]. Waypoint indices past
/// the goal clamp to the goal; t_sub = 0 yields identity labels throughout.
TrainingSample make_sample(const Episode& e, int t, int t_sub, int n_way = 10,
                           int n_global = 10, int nav_dist_exponent = 1);

/// Draws t_sub uniform in [t_min, min(t_max, len-1)], then t uniform over the
/// valid range. Throws if the episode is shorter than t_min + 1 poses.
TrainingSample sample_training_pair(const Episode& e, Rng& rng, int t_min = 5, int t_max = 64,
                                    int n_way = 10, int n_global = 10,
                                    int nav_dist_exponent = 1);

/// Tags episodes "train"/"val" at episode level; deterministic per seed.
void split_dataset(DatasetManifest& manifest, double train_fraction, uint64_t seed);

}  // namespace pignav

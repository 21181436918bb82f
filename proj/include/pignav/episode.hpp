// Episode storage: aligned egocentric frames and world poses, saved as a
// frame directory plus a pose table. Round trips are bit-exact.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pignav/geometry.hpp"
#include "pignav/image.hpp"

namespace pignav {

struct EpisodeMeta {
    std::string source_id;
    double fps = 30.0;
    std::optional<uint64_t> world_seed;

    bool operator==(const EpisodeMeta&) const = default;
};

struct Episode {
    std::vector<Image> frames;
    std::vector<Pose> poses;
    EpisodeMeta meta;

    int length() const { return static_cast<int>(poses.size()); }
};

struct EpisodeIoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Checks the episode invariants (aligned lengths >= 2, uniform frame size).
void validate_episode(const Episode& e);

/// Layout: <dir>/poses.json (rows [t, x, y, yaw]), <dir>/frames/%06d.png,
/// <dir>/meta.json.
void save_episode(const Episode& e, const std::filesystem::path& dir);
Episode load_episode(const std::filesystem::path& dir);

struct ManifestEntry {
    std::string path;  // relative to the dataset root
    int length = 0;
    std::string split;  // "train", "val" or ""
};

struct DatasetManifest {
    std::vector<ManifestEntry> episodes;
    double scale = 1.0;  // position multiplier applied during normalization
    std::string config_snapshot;  // creation config, serialized JSON
};

void save_manifest(const DatasetManifest& m, const std::filesystem::path& root);
DatasetManifest load_manifest(const std::filesystem::path& root);

/// Saves episodes as episode_<i> directories plus manifest.json.
void save_dataset(const std::filesystem::path& root, const std::vector<Episode>& episodes,
                  const DatasetManifest& manifest);

struct Dataset {
    std::vector<Episode> episodes;
    DatasetManifest manifest;
};

Dataset load_dataset(const std::filesystem::path& root);

}  // namespace pignav

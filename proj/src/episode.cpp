#include "pignav/episode.hpp"

#include <nlohmann/json.hpp>

#include <cinttypes>
#include <cstdio>
#include <fstream>

namespace pignav {

using nlohmann::json;

namespace {

std::string frame_name(int t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06d.png", t);
    return buf;
}

json read_json_file(const std::filesystem::path& p, const char* what) {
    std::ifstream in(p);
    if (!in) throw EpisodeIoError(std::string(what) + ": missing file " + p.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw EpisodeIoError(std::string(what) + ": corrupt JSON in " + p.string() + ": " +
                             e.what());
    }
    return j;
}

void write_json_file(const std::filesystem::path& p, const json& j) {
    std::ofstream out(p);
    if (!out) throw EpisodeIoError("cannot open " + p.string() + " for writing");
    out << j.dump(2) << '\n';
}

}  // namespace

void validate_episode(const Episode& e) {
    if (e.poses.size() != e.frames.size())
        throw std::invalid_argument("episode: frame/pose count mismatch");
    if (e.poses.size() < 2) throw std::invalid_argument("episode: needs at least 2 frames");
    const int w = e.frames.front().width, h = e.frames.front().height;
    for (const Image& f : e.frames)
        if (f.width != w || f.height != h)
            throw std::invalid_argument("episode: frames do not share one resolution");
}

void save_episode(const Episode& e, const std::filesystem::path& dir) {
    validate_episode(e);
    std::filesystem::create_directories(dir / "frames");

    json poses = json::array();
    for (size_t t = 0; t < e.poses.size(); ++t)
        poses.push_back({t, e.poses[t].x, e.poses[t].y, e.poses[t].yaw});
    write_json_file(dir / "poses.json", poses);

    json meta{{"source_id", e.meta.source_id}, {"fps", e.meta.fps}};
    if (e.meta.world_seed) meta["world_seed"] = *e.meta.world_seed;
    write_json_file(dir / "meta.json", meta);

    for (size_t t = 0; t < e.frames.size(); ++t)
        write_png(dir / "frames" / frame_name(static_cast<int>(t)), e.frames[t]);
}

Episode load_episode(const std::filesystem::path& dir) {
    Episode e;
    const json poses = read_json_file(dir / "poses.json", "load_episode");
    if (!poses.is_array() || poses.size() < 2)
        throw EpisodeIoError("load_episode: pose table too short in " + dir.string());
    for (const auto& row : poses) {
        if (!row.is_array() || row.size() != 4)
            throw EpisodeIoError("load_episode: malformed pose row in " + dir.string());
        e.poses.emplace_back(row[1].get<double>(), row[2].get<double>(), row[3].get<double>());
    }

    const json meta = read_json_file(dir / "meta.json", "load_episode");
    e.meta.source_id = meta.value("source_id", std::string{});
    e.meta.fps = meta.value("fps", 30.0);
    if (meta.contains("world_seed")) e.meta.world_seed = meta["world_seed"].get<uint64_t>();

    e.frames.reserve(e.poses.size());
    for (size_t t = 0; t < e.poses.size(); ++t) {
        const auto file = dir / "frames" / frame_name(static_cast<int>(t));
        try {
            e.frames.push_back(read_png(file));
        } catch (const ImageIoError& err) {
            throw EpisodeIoError("load_episode: frame " + file.string() + ": " + err.what());
        }
    }
    validate_episode(e);
    return e;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& root) {
    json eps = json::array();
    for (const auto& e : m.episodes)
        eps.push_back({{"path", e.path}, {"length", e.length}, {"split", e.split}});
    json j{{"episodes", eps}, {"scale", m.scale}};
    if (!m.config_snapshot.empty()) j["config"] = json::parse(m.config_snapshot);
    write_json_file(root / "manifest.json", j);
}

DatasetManifest load_manifest(const std::filesystem::path& root) {
    const json j = read_json_file(root / "manifest.json", "load_manifest");
    DatasetManifest m;
    m.scale = j.at("scale").get<double>();
    if (j.contains("config")) m.config_snapshot = j["config"].dump();
    for (const auto& e : j.at("episodes")) {
        m.episodes.push_back(ManifestEntry{e.at("path").get<std::string>(),
                                           e.at("length").get<int>(),
                                           e.value("split", std::string{})});
    }
    return m;
}

void save_dataset(const std::filesystem::path& root, const std::vector<Episode>& episodes,
                  const DatasetManifest& manifest) {
    if (episodes.size() != manifest.episodes.size())
        throw std::invalid_argument("save_dataset: manifest/episode count mismatch");
    std::filesystem::create_directories(root);
    for (size_t i = 0; i < episodes.size(); ++i)
        save_episode(episodes[i], root / manifest.episodes[i].path);
    save_manifest(manifest, root);
}

Dataset load_dataset(const std::filesystem::path& root) {
    Dataset d;
    d.manifest = load_manifest(root);
    d.episodes.reserve(d.manifest.episodes.size());
    for (const auto& entry : d.manifest.episodes) {
        Episode e = load_episode(root / entry.path);
        if (e.length() != entry.length)
            throw EpisodeIoError("load_dataset: length mismatch for " + entry.path);
        d.episodes.push_back(std::move(e));
    }
    return d;
}

}  // namespace pignav

#include "pignav/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>

namespace pignav {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'P', 'I', 'G', 'N', 'A', 'V', 'C', '1'};

}  // namespace

void save_checkpoint(const NavModel& m, const std::filesystem::path& file) {
    json tensors = json::array();
    uint64_t offset = 0;
    for (const auto& p : m.params) {
        const uint64_t bytes = static_cast<uint64_t>(p.value.size()) * sizeof(float);
        tensors.push_back({{"name", p.name},
                           {"rows", p.value.rows()},
                           {"cols", p.value.cols()},
                           {"dtype", "f32"},
                           {"offset", offset}});
        offset += bytes;
    }
    const json header{{"format", 1},
                      {"config", m.cfg.to_json()},
                      {"seed", m.seed},
                      {"step", m.train_step},
                      {"tensors", tensors}};
    const std::string hs = header.dump();

    std::ofstream out(file, std::ios::binary);
    if (!out) throw CheckpointError("save_checkpoint: cannot open " + file.string());
    out.write(kMagic, sizeof(kMagic));
    const uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& p : m.params)
        out.write(reinterpret_cast<const char*>(p.value.data()),
                  static_cast<std::streamsize>(p.value.size() * sizeof(float)));
    if (!out) throw CheckpointError("save_checkpoint: write failed for " + file.string());
}

NavModel load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw CheckpointError("load_checkpoint: cannot open " + file.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError("load_checkpoint: bad magic in " + file.string());
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!in || hlen == 0 || hlen > (1u << 24))
        throw CheckpointError("load_checkpoint: corrupt header in " + file.string());
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw CheckpointError("load_checkpoint: truncated header in " + file.string());

    json header;
    try {
        header = json::parse(hs);
    } catch (const json::exception& e) {
        throw CheckpointError("load_checkpoint: header parse error: " + std::string(e.what()));
    }

    NavModel m;
    m.cfg = ModelConfig::from_json(header.at("config"));
    m.seed = header.value("seed", 0ULL);
    m.train_step = header.value("step", 0L);
    for (const auto& t : header.at("tensors")) {
        if (t.value("dtype", "f32") != std::string("f32"))
            throw CheckpointError("load_checkpoint: unsupported dtype");
        NamedTensor<float> nt;
        nt.name = t.at("name").get<std::string>();
        nt.value.resize(t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>());
        in.read(reinterpret_cast<char*>(nt.value.data()),
                static_cast<std::streamsize>(nt.value.size() * sizeof(float)));
        if (!in)
            throw CheckpointError("load_checkpoint: truncated tensor " + nt.name + " in " +
                                  file.string());
        m.params.push_back(std::move(nt));
    }
    return m;
}

bool is_encoder_tensor(const std::string& name) {
    return name.starts_with("patch_embed.") || name.starts_with("blocks.") ||
           name.starts_with("final_ln.") || name == "pos_embed";
}

std::string LoadReport::summary() const {
    return std::to_string(loaded.size()) + " tensors loaded, " + std::to_string(skipped.size()) +
           " skipped";
}

LoadReport load_encoder_weights(NavModel& m, const NavModel& source, bool strict) {
    LoadReport report;
    std::vector<std::string> problems;
    for (auto& p : m.params) {
        if (!is_encoder_tensor(p.name)) continue;
        const NamedTensor<float>* src = nullptr;
        for (const auto& s : source.params)
            if (s.name == p.name) {
                src = &s;
                break;
            }
        if (!src) {
            report.skipped.push_back(p.name + ": missing from checkpoint");
            problems.push_back(p.name + " (missing)");
            continue;
        }
        if (src->value.rows() != p.value.rows() || src->value.cols() != p.value.cols()) {
            report.skipped.push_back(p.name + ": shape mismatch");
            problems.push_back(p.name + " (shape)");
            continue;
        }
        p.value = src->value;
        report.loaded.push_back(p.name);
    }
    if (strict && !problems.empty()) {
        std::string msg = "load_encoder_weights: strict mode failures:";
        for (const auto& s : problems) msg += " " + s;
        throw CheckpointError(msg);
    }
    return report;
}

LoadReport load_encoder_weights(NavModel& m, const std::filesystem::path& checkpoint,
                                bool strict) {
    return load_encoder_weights(m, load_checkpoint(checkpoint), strict);
}

}  // namespace pignav

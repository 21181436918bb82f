#include "pignav/config.hpp"

#include <fstream>

#include "pignav/model.hpp"

namespace pignav {

using nlohmann::json;

namespace {

json model_defaults() { return ModelConfig{}.to_json(); }

json train_defaults() {
    return json{{"learning_rate", 5e-5}, {"batch_size", 32},
                {"epochs", 10},          {"samples_per_episode", 2},
                {"t_min", 5},            {"t_max", 64},
                {"nav_dist_exponent", 1},{"ablation", "all"}};
}

json rollout_defaults() {
    return json{{"budget", 100}, {"goal_radius", 1.0}, {"max_step", 1.5},
                {"action_scale", 1.0}};
}

void merge_validated(json& base, const json& overlay, const std::string& prefix) {
    if (!overlay.is_object())
        throw UserError("config: expected an object at '" + (prefix.empty() ? "/" : prefix) + "'");
    for (const auto& [key, value] : overlay.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!base.contains(key)) throw UserError("unknown config key: " + path);
        json& slot = base[key];
        if (slot.is_object()) {
            merge_validated(slot, value, path);
        } else {
            if (slot.is_number() && value.is_number()) slot = value;
            else if (slot.type() == value.type()) slot = value;
            else if (slot.is_boolean() && value.is_boolean()) slot = value;
            else
                throw UserError("config key has wrong type: " + path);
        }
    }
}

}  // namespace

json RunConfig::default_tree(const std::string& command) {
    if (command == "gen-world")
        return json{{"seed", 0}, {"size", 16}, {"density", 0.2}};
    if (command == "gen-data")
        return json{{"episodes", 100},     {"seed", 0},
                    {"min_goal_dist", 5.0}, {"start_jitter", 0.35},
                    {"image_size", 64},     {"train_fraction", 0.9},
                    {"filter_factor", 5.0}};
    if (command == "pretrain")
        return json{{"seed", 0}, {"model", model_defaults()}, {"train", train_defaults()}};
    if (command == "finetune")
        return json{{"seed", 0},
                    {"fraction", 1.0},
                    {"model", model_defaults()},
                    {"train", train_defaults()}};
    if (command == "label")
        return json{{"classifier", "mock"},
                    {"mock_threshold", 0.02},
                    {"prompt1", "keep clips showing sustained first-person movement"},
                    {"prompt2", "keep clips with free navigation and no menu overlays"},
                    {"clip_seconds", 10.0},
                    {"fps_in", 30.0},
                    {"fps_out", 30.0},
                    {"pairs_per_clip", 48}};
    if (command == "eval") {
        json j = rollout_defaults();
        j["tasks"] = 150;
        j["seed"] = 0;
        j["easy_threshold"] = 8.0;
        j["medium_threshold"] = 16.0;
        return j;
    }
    if (command == "ablate") {
        json j = rollout_defaults();
        j["seed"] = 0;
        j["tasks_per_level"] = 3;
        j["easy_threshold"] = 8.0;
        j["medium_threshold"] = 16.0;
        j["model"] = model_defaults();
        j["train"] = train_defaults();
        return j;
    }
    if (command == "curve") {
        json j = rollout_defaults();
        j["seed"] = 0;
        j["fractions"] = {1.0, 0.5, 0.25, 0.125, 0.0625};
        j["tasks_per_level"] = 3;
        j["easy_threshold"] = 8.0;
        j["medium_threshold"] = 16.0;
        j["model"] = model_defaults();
        j["train"] = train_defaults();
        return j;
    }
    throw UserError("unknown command: " + command);
}

RunConfig RunConfig::resolve(const std::string& command,
                             const std::optional<std::filesystem::path>& config_file,
                             const std::vector<std::string>& overrides) {
    RunConfig rc;
    rc.command_ = command;
    rc.tree_ = default_tree(command);

    if (config_file) {
        std::ifstream in(*config_file);
        if (!in) throw UserError("cannot open config file: " + config_file->string());
        json file_tree;
        try {
            in >> file_tree;
        } catch (const json::exception& e) {
            throw UserError("config file parse error: " + std::string(e.what()));
        }
        merge_validated(rc.tree_, file_tree, "");
    }

    for (const std::string& kv : overrides) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw UserError("override must look like key=value: " + kv);
        const std::string key = kv.substr(0, eq);
        const std::string raw = kv.substr(eq + 1);

        json* node = &rc.tree_;
        size_t start = 0;
        while (true) {
            const size_t dot = key.find('.', start);
            const std::string part = key.substr(start, dot - start);
            if (!node->is_object() || !node->contains(part))
                throw UserError("unknown config key: " + key);
            node = &(*node)[part];
            if (dot == std::string::npos) break;
            start = dot + 1;
        }
        if (node->is_object()) throw UserError("cannot assign to a config section: " + key);

        json value;
        try {
            value = json::parse(raw);
        } catch (const json::exception&) {
            value = raw;  // unquoted strings
        }
        if (node->is_string() && !value.is_string()) value = raw;
        if (node->is_number() && !value.is_number())
            throw UserError("config key has wrong type: " + key);
        if (node->is_boolean() && !value.is_boolean())
            throw UserError("config key has wrong type: " + key);
        if (node->is_array() && !value.is_array())
            throw UserError("config key has wrong type: " + key);
        *node = value;
    }
    return rc;
}

const json* RunConfig::find(const std::string& dotted) const {
    const json* node = &tree_;
    size_t start = 0;
    while (true) {
        const size_t dot = dotted.find('.', start);
        const std::string part = dotted.substr(start, dot - start);
        if (!node->is_object() || !node->contains(part)) return nullptr;
        node = &(*node)[part];
        if (dot == std::string::npos) return node;
        start = dot + 1;
    }
}

void RunConfig::snapshot(const std::filesystem::path& dir) const {
    // The raw resolved tree, so the file feeds straight back into --config.
    std::ofstream out(dir / "config.json");
    if (!out) throw std::runtime_error("snapshot: cannot write to " + dir.string());
    out << tree_.dump(2) << '\n';
}

ScopedOutputDir::ScopedOutputDir(const std::filesystem::path& dir) : dir_(dir) {
    if (std::filesystem::exists(dir)) {
        if (!std::filesystem::is_directory(dir) || !std::filesystem::is_empty(dir))
            throw UserError("output path exists and is not an empty directory: " +
                            dir.string());
    } else {
        std::filesystem::create_directories(dir);
    }
}

ScopedOutputDir::~ScopedOutputDir() {
    if (!committed_) {
        std::error_code ec;
        std::filesystem::remove_all(dir_, ec);
    }
}

}  // namespace pignav

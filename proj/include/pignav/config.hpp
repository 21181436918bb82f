// Layered run configuration: per-command defaults, then a JSON config file,
// then dotted-key command-line overrides. The fully resolved tree is
// snapshotted verbatim into every output directory.
#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pignav {

/// Caller mistakes (bad flags, missing files); the CLI maps these to exit 1.
struct UserError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class RunConfig {
public:
    /// The known key tree (and default values) for a subcommand.
    static nlohmann::json default_tree(const std::string& command);

    /// defaults <- config file <- dotted key=value overrides. Unknown keys in
    /// either layer raise UserError.
    static RunConfig resolve(const std::string& command,
                             const std::optional<std::filesystem::path>& config_file,
                             const std::vector<std::string>& overrides);

    const nlohmann::json& tree() const { return tree_; }
    std::string command() const { return command_; }

    template <class T>
    T get(const std::string& dotted) const {
        const nlohmann::json* node = find(dotted);
        if (!node) throw UserError("unknown config key: " + dotted);
        try {
            return node->get<T>();
        } catch (const nlohmann::json::exception&) {
            throw UserError("config key has wrong type: " + dotted);
        }
    }

    /// Writes the resolved tree to <dir>/config.json.
    void snapshot(const std::filesystem::path& dir) const;

private:
    const nlohmann::json* find(const std::string& dotted) const;
    nlohmann::json tree_;
    std::string command_;
};

/// Creates an output directory that is removed again unless commit() is
/// called, so failed runs leave no partial artifacts behind.
class ScopedOutputDir {
public:
    explicit ScopedOutputDir(const std::filesystem::path& dir);
    ~ScopedOutputDir();
    ScopedOutputDir(const ScopedOutputDir&) = delete;
    ScopedOutputDir& operator=(const ScopedOutputDir&) = delete;

    const std::filesystem::path& path() const { return dir_; }
    void commit() { committed_ = true; }

private:
    std::filesystem::path dir_;
    bool committed_ = false;
};

}  // namespace pignav

// Named-tensor checkpoint archive: magic, JSON header (config snapshot, seed,
// training step, tensor directory), then raw little-endian payload.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pignav/model.hpp"

namespace pignav {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void save_checkpoint(const NavModel& m, const std::filesystem::path& file);
NavModel load_checkpoint(const std::filesystem::path& file);

/// True for tensors belonging to the shared encoder (patch embedding, blocks,
/// final layer norm, positional embeddings). CLS/type tokens and heads are not
/// encoder tensors and are never replaced by load_encoder_weights.
bool is_encoder_tensor(const std::string& name);

struct LoadReport {
    std::vector<std::string> loaded;
    std::vector<std::string> skipped;  // "name: reason" entries
    std::string summary() const;
};

/// Replaces matching encoder tensors of `m` with those from `source`.
/// strict mode throws on any missing or shape-mismatched encoder tensor.
LoadReport load_encoder_weights(NavModel& m, const NavModel& source, bool strict);
LoadReport load_encoder_weights(NavModel& m, const std::filesystem::path& checkpoint,
                                bool strict);

}  // namespace pignav

// Early-fusion transformer policy: obs and goal patch tokens are tagged with
// learnable type vectors and fed jointly through one encoder; a CLS readout
// feeds four prediction heads. The non-fusion variant runs the same encoder
// on each image separately and concatenates the two CLS outputs.
#pragma once

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <vector>

#include "pignav/image.hpp"
#include "pignav/rng.hpp"
#include "pignav/tensor.hpp"

namespace pignav {

struct ModelConfig {
    enum class Variant { early_fusion, non_fusion };
    enum class HeadLayout { nav, idm };

    int image_size = 64;
    int patch_size = 8;
    int embed_dim = 128;
    int depth = 4;
    int heads = 4;
    int mlp_ratio = 4;
    int head_hidden = 256;
    int n_waypoint = 10;
    int n_global = 10;
    Variant variant = Variant::early_fusion;
    HeadLayout head_layout = HeadLayout::nav;

    int patches_per_image() const {
        const int g = image_size / patch_size;
        return g * g;
    }
    int patch_dim() const { return patch_size * patch_size * 3; }
    int tokens_early() const { return 1 + 2 * patches_per_image(); }
    int tokens_single() const { return 1 + patches_per_image(); }
    int head_input_dim() const {
        return variant == Variant::early_fusion ? embed_dim : 2 * embed_dim;
    }

    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

const char* to_string(ModelConfig::Variant v);
ModelConfig::Variant variant_from_string(const std::string& s);

template <class S>
struct NamedTensor {
    std::string name;
    nn::Mat<S> value;
};

template <class S>
struct ModelOutputsT {
    nn::Mat<S> waypoints;    // B x (n_waypoint * 4)
    nn::Mat<S> rel_goal;     // B x 4
    nn::Mat<S> nav_dist;     // B x 1
    nn::Mat<S> global_path;  // B x (n_global * 4)
};
using ModelOutputs = ModelOutputsT<float>;

/// Flattens images into rows of patch vectors: row b * P + p holds patch p of
/// image b, pixels row-major within the patch, RGB interleaved, scaled to [0, 1].
template <class S>
nn::Mat<S> images_to_patches(std::span<const Image* const> imgs, const ModelConfig& cfg) {
    const int ps = cfg.patch_size;
    const int grid = cfg.image_size / ps;
    const int P = cfg.patches_per_image();
    nn::Mat<S> out(static_cast<Eigen::Index>(imgs.size()) * P, cfg.patch_dim());
    for (size_t b = 0; b < imgs.size(); ++b) {
        const Image& img = *imgs[b];
        if (img.width != cfg.image_size || img.height != cfg.image_size)
            throw std::invalid_argument("images_to_patches: image resolution mismatch");
        for (int gy = 0; gy < grid; ++gy)
            for (int gx = 0; gx < grid; ++gx) {
                const Eigen::Index row = static_cast<Eigen::Index>(b) * P + gy * grid + gx;
                int col = 0;
                for (int py = 0; py < ps; ++py) {
                    const uint8_t* src = img.px(gx * ps, gy * ps + py);
                    for (int k = 0; k < ps * 3; ++k)
                        out(row, col++) = static_cast<S>(src[k]) / S(255);
                }
            }
    }
    return out;
}

template <class S>
class NavModelT {
public:
    ModelConfig cfg;
    uint64_t seed = 0;
    long train_step = 0;
    std::vector<NamedTensor<S>> params;

    /// Deterministic initialization: weights and embeddings are truncated
    /// normal (sigma 0.02), biases zero, layer-norm gains one.
    static NavModelT build(const ModelConfig& cfg, uint64_t seed) {
        cfg.validate();
        NavModelT m;
        m.cfg = cfg;
        m.seed = seed;
        Rng rng(Rng::derive(seed, 0x4d4f44454cULL));
        const int D = cfg.embed_dim;

        auto tn = [&](const std::string& name, int rows, int cols) {
            nn::Mat<S> v(rows, cols);
            for (Eigen::Index c = 0; c < v.cols(); ++c)
                for (Eigen::Index r = 0; r < v.rows(); ++r) {
                    double z = rng.normal();
                    while (std::abs(z) > 2.0) z = rng.normal();
                    v(r, c) = static_cast<S>(0.02 * z);
                }
            m.params.push_back({name, std::move(v)});
        };
        auto zeros = [&](const std::string& name, int rows, int cols) {
            m.params.push_back({name, nn::Mat<S>::Zero(rows, cols)});
        };
        auto ones = [&](const std::string& name, int rows, int cols) {
            m.params.push_back({name, nn::Mat<S>::Ones(rows, cols)});
        };

        tn("patch_embed.weight", cfg.patch_dim(), D);
        zeros("patch_embed.bias", 1, D);
        tn("cls_token", 1, D);
        tn("type_obs", 1, D);
        tn("type_goal", 1, D);
        tn("pos_embed", cfg.patches_per_image(), D);
        for (int l = 0; l < cfg.depth; ++l) {
            const std::string p = "blocks." + std::to_string(l) + ".";
            ones(p + "ln1.gain", 1, D);
            zeros(p + "ln1.bias", 1, D);
            for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) tn(p + w, D, D);
            for (const char* b : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"}) zeros(p + b, 1, D);
            ones(p + "ln2.gain", 1, D);
            zeros(p + "ln2.bias", 1, D);
            tn(p + "mlp.w1", D, cfg.mlp_ratio * D);
            zeros(p + "mlp.b1", 1, cfg.mlp_ratio * D);
            tn(p + "mlp.w2", cfg.mlp_ratio * D, D);
            zeros(p + "mlp.b2", 1, D);
        }
        ones("final_ln.gain", 1, D);
        zeros("final_ln.bias", 1, D);

        auto head = [&](const std::string& name, int out_dim) {
            tn(name + ".w1", cfg.head_input_dim(), cfg.head_hidden);
            zeros(name + ".b1", 1, cfg.head_hidden);
            tn(name + ".w2", cfg.head_hidden, out_dim);
            zeros(name + ".b2", 1, out_dim);
        };
        if (cfg.head_layout == ModelConfig::HeadLayout::nav) {
            head("heads.waypoint", 4 * cfg.n_waypoint);
            head("heads.relative", 4);
            head("heads.distance", 1);
            head("heads.global", 4 * cfg.n_global);
        } else {
            head("heads.action", 4);
        }
        return m;
    }

    int param_index(const std::string& name) const {
        for (size_t i = 0; i < params.size(); ++i)
            if (params[i].name == name) return static_cast<int>(i);
        throw std::out_of_range("NavModel: no parameter named " + name);
    }

    long long param_count() const {
        long long n = 0;
        for (const auto& p : params) n += p.value.size();
        return n;
    }

    struct Fwd {
        std::vector<int> param_ids;  // tape ids aligned with params
        int head_in = -1;
        int encoded = -1;                     // early fusion: final-LN token sequence
        int obs_cls = -1, goal_cls = -1;      // non-fusion: per-branch CLS readouts
        int waypoints = -1, rel_goal = -1, nav_dist = -1, global_path = -1;
        int action = -1;  // idm head layout
        int batch = 0;
    };

    /// Records the forward pass on the tape. obs/goal patches are
    /// (batch * patches_per_image) x patch_dim.
    Fwd forward(nn::Tape<S>& tape, const nn::Mat<S>& obs_patches,
                const nn::Mat<S>& goal_patches) const {
        const int P = cfg.patches_per_image();
        if (obs_patches.rows() != goal_patches.rows() || obs_patches.rows() % P != 0 ||
            obs_patches.cols() != cfg.patch_dim() || goal_patches.cols() != cfg.patch_dim())
            throw std::invalid_argument("forward: patch matrix shape mismatch");
        const int B = static_cast<int>(obs_patches.rows()) / P;
        if (B < 1) throw std::invalid_argument("forward: empty batch");

        Fwd f;
        f.batch = B;
        f.param_ids.reserve(params.size());
        for (const auto& p : params) f.param_ids.push_back(tape.param(p.value));
        auto id = [&](const std::string& name) { return f.param_ids[static_cast<size_t>(param_index(name))]; };

        const int obs_e = tape.add_row(
            tape.matmul(tape.input(obs_patches), id("patch_embed.weight")), id("patch_embed.bias"));
        const int goal_e = tape.add_row(
            tape.matmul(tape.input(goal_patches), id("patch_embed.weight")), id("patch_embed.bias"));

        auto encoder = [&](int x, int seq) {
            for (int l = 0; l < cfg.depth; ++l) {
                const std::string p = "blocks." + std::to_string(l) + ".";
                const int h = tape.layer_norm(x, id(p + "ln1.gain"), id(p + "ln1.bias"));
                const int q = tape.add_row(tape.matmul(h, id(p + "attn.wq")), id(p + "attn.bq"));
                const int k = tape.add_row(tape.matmul(h, id(p + "attn.wk")), id(p + "attn.bk"));
                const int v = tape.add_row(tape.matmul(h, id(p + "attn.wv")), id(p + "attn.bv"));
                const int att = tape.attention(q, k, v, B, seq, cfg.heads);
                const int proj =
                    tape.add_row(tape.matmul(att, id(p + "attn.wo")), id(p + "attn.bo"));
                x = tape.add(x, proj);
                const int h2 = tape.layer_norm(x, id(p + "ln2.gain"), id(p + "ln2.bias"));
                int mlp = tape.add_row(tape.matmul(h2, id(p + "mlp.w1")), id(p + "mlp.b1"));
                mlp = tape.gelu(mlp);
                mlp = tape.add_row(tape.matmul(mlp, id(p + "mlp.w2")), id(p + "mlp.b2"));
                x = tape.add(x, mlp);
            }
            return tape.layer_norm(x, id("final_ln.gain"), id("final_ln.bias"));
        };

        if (cfg.variant == ModelConfig::Variant::early_fusion) {
            int x = tape.assemble_pair(obs_e, goal_e, id("cls_token"), id("type_obs"),
                                       id("type_goal"), id("pos_embed"), B);
            x = encoder(x, cfg.tokens_early());
            f.encoded = x;
            f.head_in = tape.rows_strided(x, 0, cfg.tokens_early(), B);
        } else {
            int xo = tape.assemble_single(obs_e, id("cls_token"), id("type_obs"),
                                          id("pos_embed"), B);
            xo = encoder(xo, cfg.tokens_single());
            f.obs_cls = tape.rows_strided(xo, 0, cfg.tokens_single(), B);
            int xg = tape.assemble_single(goal_e, id("cls_token"), id("type_goal"),
                                          id("pos_embed"), B);
            xg = encoder(xg, cfg.tokens_single());
            f.goal_cls = tape.rows_strided(xg, 0, cfg.tokens_single(), B);
            f.head_in = tape.concat_cols(f.obs_cls, f.goal_cls);
        }

        auto head = [&](const std::string& name) {
            int h = tape.add_row(tape.matmul(f.head_in, id(name + ".w1")), id(name + ".b1"));
            h = tape.gelu(h);
            return tape.add_row(tape.matmul(h, id(name + ".w2")), id(name + ".b2"));
        };
        if (cfg.head_layout == ModelConfig::HeadLayout::nav) {
            f.waypoints = head("heads.waypoint");
            f.rel_goal = head("heads.relative");
            f.nav_dist = head("heads.distance");
            f.global_path = head("heads.global");
        } else {
            f.action = head("heads.action");
        }
        return f;
    }

    ModelOutputsT<S> infer_patches(const nn::Mat<S>& obs_patches,
                                   const nn::Mat<S>& goal_patches) const {
        nn::Tape<S> tape;
        const Fwd f = forward(tape, obs_patches, goal_patches);
        ModelOutputsT<S> out;
        if (cfg.head_layout == ModelConfig::HeadLayout::nav) {
            out.waypoints = tape.val(f.waypoints);
            out.rel_goal = tape.val(f.rel_goal);
            out.nav_dist = tape.val(f.nav_dist);
            out.global_path = tape.val(f.global_path);
        } else {
            out.rel_goal = tape.val(f.action);
        }
        return out;
    }

    ModelOutputsT<S> infer_images(std::span<const Image* const> obs,
                                  std::span<const Image* const> goal) const {
        if (obs.size() != goal.size() || obs.empty())
            throw std::invalid_argument("infer_images: obs/goal batch mismatch");
        return infer_patches(images_to_patches<S>(obs, cfg), images_to_patches<S>(goal, cfg));
    }
};

using NavModel = NavModelT<float>;

}  // namespace pignav

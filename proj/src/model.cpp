#include "pignav/model.hpp"

namespace pignav {

void ModelConfig::validate() const {
    if (image_size < patch_size || image_size % patch_size != 0)
        throw std::invalid_argument("ModelConfig: image_size must be a multiple of patch_size");
    if (embed_dim < heads || embed_dim % heads != 0)
        throw std::invalid_argument("ModelConfig: embed_dim must be a multiple of heads");
    if (depth < 1 || heads < 1 || mlp_ratio < 1 || head_hidden < 1)
        throw std::invalid_argument("ModelConfig: encoder dimensions must be positive");
    if (n_waypoint < 1 || n_global < 1)
        throw std::invalid_argument("ModelConfig: head sizes must be positive");
}

const char* to_string(ModelConfig::Variant v) {
    return v == ModelConfig::Variant::early_fusion ? "early_fusion" : "non_fusion";
}

ModelConfig::Variant variant_from_string(const std::string& s) {
    if (s == "early_fusion") return ModelConfig::Variant::early_fusion;
    if (s == "non_fusion") return ModelConfig::Variant::non_fusion;
    throw std::invalid_argument("unknown model variant: " + s);
}

nlohmann::json ModelConfig::to_json() const {
    return nlohmann::json{{"image_size", image_size},
                          {"patch_size", patch_size},
                          {"embed_dim", embed_dim},
                          {"depth", depth},
                          {"heads", heads},
                          {"mlp_ratio", mlp_ratio},
                          {"head_hidden", head_hidden},
                          {"n_waypoint", n_waypoint},
                          {"n_global", n_global},
                          {"variant", to_string(variant)},
                          {"head_layout",
                           head_layout == HeadLayout::nav ? "nav" : "idm"}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.image_size = j.value("image_size", c.image_size);
    c.patch_size = j.value("patch_size", c.patch_size);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.depth = j.value("depth", c.depth);
    c.heads = j.value("heads", c.heads);
    c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
    c.head_hidden = j.value("head_hidden", c.head_hidden);
    c.n_waypoint = j.value("n_waypoint", c.n_waypoint);
    c.n_global = j.value("n_global", c.n_global);
    if (j.contains("variant")) c.variant = variant_from_string(j["variant"].get<std::string>());
    if (j.contains("head_layout"))
        c.head_layout = j["head_layout"].get<std::string>() == "idm" ? HeadLayout::idm
                                                                     : HeadLayout::nav;
    c.validate();
    return c;
}

}  // namespace pignav

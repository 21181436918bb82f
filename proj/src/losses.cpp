#include "pignav/losses.hpp"

namespace pignav {

const char* to_string(AblationMode m) {
    switch (m) {
        case AblationMode::waypoint_only: return "waypoint_only";
        case AblationMode::no_goal: return "no_goal";
        case AblationMode::no_distance: return "no_distance";
        case AblationMode::no_global: return "no_global";
        case AblationMode::all: return "all";
    }
    return "?";
}

const char* display_name(AblationMode m) {
    switch (m) {
        case AblationMode::waypoint_only: return "Waypoint Only";
        case AblationMode::no_goal: return "No Goal";
        case AblationMode::no_distance: return "No Distance";
        case AblationMode::no_global: return "No Global";
        case AblationMode::all: return "All";
    }
    return "?";
}

AblationMode ablation_from_string(const std::string& s) {
    if (s == "waypoint_only") return AblationMode::waypoint_only;
    if (s == "no_goal") return AblationMode::no_goal;
    if (s == "no_distance") return AblationMode::no_distance;
    if (s == "no_global") return AblationMode::no_global;
    if (s == "all") return AblationMode::all;
    throw std::invalid_argument("unknown ablation mode: " + s);
}

LossWeights LossWeights::for_mode(AblationMode m) {
    LossWeights w;
    switch (m) {
        case AblationMode::waypoint_only:
            w.relative = w.distance = w.global_path = 0.0;
            break;
        case AblationMode::no_goal: w.relative = 0.0; break;
        case AblationMode::no_distance: w.distance = 0.0; break;
        case AblationMode::no_global: w.global_path = 0.0; break;
        case AblationMode::all: break;
    }
    return w;
}

}  // namespace pignav

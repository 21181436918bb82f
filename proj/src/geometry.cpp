#include "pignav/geometry.hpp"

#include <cmath>

namespace pignav {

namespace {

void require_finite(const Pose& p, const char* who) {
    if (!(std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.yaw)))
        throw std::invalid_argument(std::string(who) + ": non-finite pose");
}

}  // namespace

double wrap_angle(double theta) {
    if (!std::isfinite(theta)) throw std::invalid_argument("wrap_angle: non-finite angle");
    double r = std::fmod(theta + kPi, 2.0 * kPi);
    if (r <= 0.0) r += 2.0 * kPi;
    return r - kPi;
}

RelPose relative_pose(const Pose& ref, const Pose& target) {
    require_finite(ref, "relative_pose");
    require_finite(target, "relative_pose");
    const double c = std::cos(ref.yaw), s = std::sin(ref.yaw);
    const double ex = target.x - ref.x, ey = target.y - ref.y;
    return RelPose{c * ex + s * ey, -s * ex + c * ey, wrap_angle(target.yaw - ref.yaw)};
}

Pose compose_forward(const Pose& ref, const RelPose& rel) {
    require_finite(ref, "compose_forward");
    if (!(std::isfinite(rel.dx) && std::isfinite(rel.dy) && std::isfinite(rel.dyaw)))
        throw std::invalid_argument("compose_forward: non-finite relative pose");
    const double c = std::cos(ref.yaw), s = std::sin(ref.yaw);
    return Pose(ref.x + c * rel.dx - s * rel.dy, ref.y + s * rel.dx + c * rel.dy,
                ref.yaw + rel.dyaw);
}

WaypointAction encode_action(const RelPose& rel) {
    return WaypointAction{rel.dx, rel.dy, std::cos(rel.dyaw), std::sin(rel.dyaw)};
}

RelPose decode_waypoint(const WaypointAction& a) {
    const double n = std::hypot(a.cos_dyaw, a.sin_dyaw);
    if (n < 1e-6)
        throw DegenerateHeadingError("decode_waypoint: (cos, sin) norm below 1e-6");
    return RelPose{a.dx, a.dy, wrap_angle(std::atan2(a.sin_dyaw / n, a.cos_dyaw / n))};
}

double pose_yaw_distance(const WaypointAction& a, const WaypointAction& b) {
    const double dx = b.dx - a.dx;
    const double dy = b.dy - a.dy;
    const double dc = b.cos_dyaw - a.cos_dyaw;
    const double ds = b.sin_dyaw - a.sin_dyaw;
    return dx * dx + dy * dy + dc * dc + ds * ds;
}

double pose_yaw_distance(const RelPose& a, const RelPose& b) {
    return pose_yaw_distance(encode_action(a), encode_action(b));
}

double path_length(std::span<const Pose> poses, int exponent) {
    if (poses.empty()) throw std::invalid_argument("path_length: empty pose sequence");
    if (exponent != 1 && exponent != 2)
        throw std::invalid_argument("path_length: exponent must be 1 or 2");
    double total = 0.0;
    for (size_t i = 1; i < poses.size(); ++i) {
        const double dx = poses[i].x - poses[i - 1].x;
        const double dy = poses[i].y - poses[i - 1].y;
        const double d2 = dx * dx + dy * dy;
        total += exponent == 1 ? std::sqrt(d2) : d2;
    }
    return total;
}

std::vector<int> global_indices(int horizon, int n) {
    if (horizon < 1) throw std::invalid_argument("global_indices: horizon must be >= 1");
    if (n < 1) throw std::invalid_argument("global_indices: n must be >= 1");
    std::vector<int> out(static_cast<size_t>(n));
    for (int k = 1; k <= n; ++k)
        out[static_cast<size_t>(k - 1)] =
            static_cast<int>(static_cast<long long>(k) * horizon / n);
    return out;
}

}  // namespace pignav

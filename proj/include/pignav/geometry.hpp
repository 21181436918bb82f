// SE(2) pose algebra, the position-yaw metric, path length and global-path
// index sampling. Everything here is a pure function on immutable values.
#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace pignav {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi]. Throws std::invalid_argument on non-finite input.
double wrap_angle(double theta);

/// World-frame pose. Yaw is measured counter-clockwise from world +x and is
/// kept wrapped in (-pi, pi] by construction.
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double yaw = 0.0;

    Pose() = default;
    Pose(double x_, double y_, double yaw_) : x(x_), y(y_), yaw(wrap_angle(yaw_)) {}
};

/// Pose of a target expressed in a reference pose's frame (+x forward, +y left).
struct RelPose {
    double dx = 0.0;
    double dy = 0.0;
    double dyaw = 0.0;
};

/// 4-dim waypoint action [dx, dy, cos dyaw, sin dyaw]. Encoded actions carry a
/// unit (cos, sin) pair; raw model outputs need not until decoded.
struct WaypointAction {
    double dx = 0.0;
    double dy = 0.0;
    double cos_dyaw = 1.0;
    double sin_dyaw = 0.0;
};

/// Thrown by decode_waypoint when the (cos, sin) pair carries no heading.
struct DegenerateHeadingError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Pose of `target` in the frame of `ref` (SE(2) inverse-compose).
RelPose relative_pose(const Pose& ref, const Pose& target);

/// Applies a relative pose forward from `ref`; inverse of relative_pose.
Pose compose_forward(const Pose& ref, const RelPose& rel);

/// Encodes a relative pose into the 4-dim action space.
WaypointAction encode_action(const RelPose& rel);

/// Recovers a relative pose from a (possibly unnormalized) action.
/// Throws DegenerateHeadingError when ||(cos, sin)|| < 1e-6.
RelPose decode_waypoint(const WaypointAction& a);

/// Squared position-yaw metric on encoded 4-vectors:
/// (dx2-dx1)^2 + (dy2-dy1)^2 + (cos2-cos1)^2 + (sin2-sin1)^2.
double pose_yaw_distance(const WaypointAction& a, const WaypointAction& b);
double pose_yaw_distance(const RelPose& a, const RelPose& b);

/// Traversal length along a pose sequence. exponent 1 sums Euclidean step
/// norms; exponent 2 sums squared step norms. A single pose has length 0.
double path_length(std::span<const Pose> poses, int exponent = 1);

/// N indices equally spaced in time over a horizon of T steps:
/// element k (1-based) is floor(k*T/N); the last element is exactly T.
std::vector<int> global_indices(int horizon, int n);

}  // namespace pignav

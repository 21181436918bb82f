// Procedural occupancy-grid worlds with deterministic egocentric raycast
// rendering, a shortest-path oracle, collision-clipped stepping, expert
// trajectory generation and difficulty-binned task sampling.
#pragma once

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "pignav/episode.hpp"
#include "pignav/geometry.hpp"
#include "pignav/image.hpp"

namespace pignav {

struct Cell {
    int x = 0;
    int y = 0;
    bool operator==(const Cell&) const = default;
};

class World {
public:
    int width = 0;
    int height = 0;
    double cell_size = 1.0;
    uint64_t seed = 0;
    double density = 0.0;
    std::vector<uint8_t> occ;  // row-major y * width + x, 1 = wall

    bool in_bounds(int cx, int cy) const {
        return cx >= 0 && cy >= 0 && cx < width && cy < height;
    }
    /// Out-of-bounds counts as occupied.
    bool occupied(int cx, int cy) const {
        return !in_bounds(cx, cy) || occ[static_cast<size_t>(cy) * width + cx] != 0;
    }
    bool occupied_at(double x, double y) const;
    Cell cell_at(double x, double y) const;
    Pose cell_center(Cell c, double yaw = 0.0) const;
    std::vector<Cell> free_cells() const;

    /// Deterministic per-cell wall color hashed from (seed, cell coords);
    /// makes egocentric views location-discriminative.
    std::array<uint8_t, 3> wall_color(int cx, int cy) const;
};

/// Generates a size x size world with solid borders whose free cells form one
/// 4-connected component; retries up to 100 layouts before giving up.
World generate_world(uint64_t seed, int size = 16, double obstacle_density = 0.2);

/// Raycast view of the agent's forward field of view. Pure function of
/// (world, pose, resolution); throws if the pose sits in an occupied cell.
Image render(const World& w, const Pose& p, int out_h = 64, int out_w = 64,
             double fov = kPi / 2.0);

struct PathResult {
    bool reachable = false;
    double length = 0.0;       // meters
    std::vector<Cell> cells;   // start .. goal inclusive
};

/// 8-connected shortest path with exact costs (1 straight, sqrt(2) diagonal)
/// and no corner cutting; ties broken by lexicographic cell order.
PathResult shortest_path_cells(const World& w, Cell a, Cell b);
PathResult shortest_path(const World& w, const Pose& a, const Pose& b);

/// Applies a waypoint action: clips the planar displacement to max_step,
/// moves to the last collision-free point along the segment (sampled at
/// 0.05-cell resolution), then applies the heading change. Never throws on
/// collisions; a degenerate (cos, sin) pair keeps the current heading.
Pose step(const World& w, const Pose& p, const WaypointAction& a, double max_step = 1.5);

/// Pose chain of an expert run: rotate toward the next cell center, then
/// translate to it, for every cell of the shortest path.
std::vector<Pose> expert_pose_chain(const World& w, const Pose& start, Cell goal);

/// Expert episode following the shortest path, one rendered frame per pose
/// change. The terminal pose sits exactly on the goal cell center.
Episode gen_expert_episode(const World& w, const Pose& start, Cell goal, int img_h = 64,
                           int img_w = 64, double fov = kPi / 2.0);

enum class Difficulty { easy, medium, hard };
const char* to_string(Difficulty d);
Difficulty difficulty_from_string(const std::string& s);

struct EvalTask {
    Pose start;
    Pose goal;
    double oracle_dist = 0.0;  // shortest-path length, meters
    Difficulty difficulty = Difficulty::easy;
};

/// Rejection-samples start/goal cell pairs until every difficulty level holds
/// exactly n_per_level tasks. Start yaw is uniform; goal yaw snaps to the 8
/// compass headings so goal views match the expert data distribution.
std::vector<EvalTask> sample_tasks(const World& w, int n_per_level,
                                   std::pair<double, double> thresholds = {8.0, 16.0},
                                   uint64_t seed = 0);

nlohmann::json world_to_json(const World& w);
World world_from_json(const nlohmann::json& j);
void save_world(const World& w, const std::filesystem::path& file);
World load_world(const std::filesystem::path& file);

nlohmann::json tasks_to_json(const std::vector<EvalTask>& tasks);
std::vector<EvalTask> tasks_from_json(const nlohmann::json& j);

}  // namespace pignav

#include "pignav/world.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <queue>

#include "pignav/rng.hpp"

namespace pignav {

using nlohmann::json;

bool World::occupied_at(double x, double y) const {
    return occupied(static_cast<int>(std::floor(x / cell_size)),
                    static_cast<int>(std::floor(y / cell_size)));
}

Cell World::cell_at(double x, double y) const {
    return Cell{static_cast<int>(std::floor(x / cell_size)),
                static_cast<int>(std::floor(y / cell_size))};
}

Pose World::cell_center(Cell c, double yaw) const {
    return Pose((c.x + 0.5) * cell_size, (c.y + 0.5) * cell_size, yaw);
}

std::vector<Cell> World::free_cells() const {
    std::vector<Cell> out;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (!occupied(x, y)) out.push_back(Cell{x, y});
    return out;
}

namespace {

std::array<uint8_t, 3> hsv_to_rgb(double h, double s, double v) {
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else { r = c; b = x; }
    const double m = v - c;
    auto q = [&](double u) { return static_cast<uint8_t>(std::lround((u + m) * 255.0)); };
    return {q(r), q(g), q(b)};
}

bool free_cells_connected(const World& w) {
    std::vector<uint8_t> seen(w.occ.size(), 0);
    int total_free = 0;
    Cell first{-1, -1};
    for (int y = 0; y < w.height; ++y)
        for (int x = 0; x < w.width; ++x)
            if (!w.occupied(x, y)) {
                ++total_free;
                if (first.x < 0) first = Cell{x, y};
            }
    if (total_free == 0) return false;

    std::deque<Cell> queue{first};
    seen[static_cast<size_t>(first.y) * w.width + first.x] = 1;
    int reached = 0;
    while (!queue.empty()) {
        const Cell c = queue.front();
        queue.pop_front();
        ++reached;
        const int nx[4] = {c.x + 1, c.x - 1, c.x, c.x};
        const int ny[4] = {c.y, c.y, c.y + 1, c.y - 1};
        for (int k = 0; k < 4; ++k) {
            if (w.occupied(nx[k], ny[k])) continue;
            uint8_t& mark = seen[static_cast<size_t>(ny[k]) * w.width + nx[k]];
            if (!mark) {
                mark = 1;
                queue.push_back(Cell{nx[k], ny[k]});
            }
        }
    }
    return reached == total_free;
}

}  // namespace

std::array<uint8_t, 3> World::wall_color(int cx, int cy) const {
    const uint64_t key = splitmix64(seed ^ splitmix64((static_cast<uint64_t>(static_cast<uint32_t>(cx)) << 32) |
                                                      static_cast<uint64_t>(static_cast<uint32_t>(cy))));
    const double hue = static_cast<double>(key & 0xFFFF) / 65536.0 * 360.0;
    const double sat = 0.45 + 0.40 * static_cast<double>((key >> 16) & 0xFF) / 255.0;
    const double val = 0.55 + 0.45 * static_cast<double>((key >> 24) & 0xFF) / 255.0;
    return hsv_to_rgb(hue, sat, val);
}

World generate_world(uint64_t seed, int size, double obstacle_density) {
    if (size < 4) throw std::invalid_argument("generate_world: size must be >= 4");
    if (!(obstacle_density >= 0.0 && obstacle_density <= 0.5))
        throw std::invalid_argument("generate_world: density must be in [0, 0.5]");

    for (int attempt = 0; attempt < 100; ++attempt) {
        World w;
        w.width = w.height = size;
        w.cell_size = 1.0;
        w.seed = seed;
        w.density = obstacle_density;
        w.occ.assign(static_cast<size_t>(size) * size, 0);

        Rng rng(Rng::derive(seed, static_cast<uint64_t>(attempt)));
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const bool border = x == 0 || y == 0 || x == size - 1 || y == size - 1;
                const bool wall = border || rng.uniform() < obstacle_density;
                w.occ[static_cast<size_t>(y) * size + x] = wall ? 1 : 0;
            }
        if (free_cells_connected(w)) return w;
    }
    throw std::runtime_error("generate_world: no connected layout after 100 attempts");
}

Image render(const World& w, const Pose& p, int out_h, int out_w, double fov) {
    if (out_h < 2 || out_w < 1) throw std::invalid_argument("render: resolution too small");
    if (w.occupied_at(p.x, p.y))
        throw std::invalid_argument("render: pose inside an occupied cell");

    Image img(out_w, out_h);
    const int horizon = out_h / 2;
    static constexpr std::array<uint8_t, 3> kCeiling{38, 42, 66};
    static constexpr std::array<uint8_t, 3> kFloor{84, 80, 74};

    const double rx = p.x / w.cell_size, ry = p.y / w.cell_size;
    for (int j = 0; j < out_w; ++j) {
        const double rel = fov * (0.5 - (j + 0.5) / out_w);  // +rel = agent's left
        const double ang = p.yaw + rel;
        const double dx = std::cos(ang), dy = std::sin(ang);

        // DDA through the grid; the solid border guarantees a hit.
        int cx = static_cast<int>(std::floor(rx)), cy = static_cast<int>(std::floor(ry));
        const int step_x = dx > 0 ? 1 : -1, step_y = dy > 0 ? 1 : -1;
        const double inf = std::numeric_limits<double>::infinity();
        const double t_dx = dx != 0.0 ? std::abs(1.0 / dx) : inf;
        const double t_dy = dy != 0.0 ? std::abs(1.0 / dy) : inf;
        double t_mx = dx > 0 ? (cx + 1 - rx) / dx : (dx < 0 ? (cx - rx) / dx : inf);
        double t_my = dy > 0 ? (cy + 1 - ry) / dy : (dy < 0 ? (cy - ry) / dy : inf);
        double t = 0.0;
        bool hit_x_face = true;
        while (true) {
            if (t_mx < t_my) {
                t = t_mx;
                t_mx += t_dx;
                cx += step_x;
                hit_x_face = true;
            } else {
                t = t_my;
                t_my += t_dy;
                cy += step_y;
                hit_x_face = false;
            }
            if (!w.in_bounds(cx, cy) || w.occupied(cx, cy)) break;
        }

        const double perp = std::max(t * std::cos(rel), 1e-6);  // cell units
        const int half = static_cast<int>(std::min<double>(horizon, out_h / (2.0 * perp)));
        const double shade =
            std::clamp(1.0 / (1.0 + 0.35 * perp), 0.25, 1.0) * (hit_x_face ? 1.0 : 0.82);
        const auto base = w.wall_color(cx, cy);
        const std::array<uint8_t, 3> col{
            static_cast<uint8_t>(std::lround(base[0] * shade)),
            static_cast<uint8_t>(std::lround(base[1] * shade)),
            static_cast<uint8_t>(std::lround(base[2] * shade))};

        for (int y = 0; y < out_h; ++y) {
            const std::array<uint8_t, 3>& c =
                y < horizon - half ? kCeiling : (y >= horizon + half ? kFloor : col);
            uint8_t* px = img.px(j, y);
            px[0] = c[0];
            px[1] = c[1];
            px[2] = c[2];
        }
    }
    return img;
}

PathResult shortest_path_cells(const World& w, Cell a, Cell b) {
    if (w.occupied(a.x, a.y) || w.occupied(b.x, b.y))
        throw std::invalid_argument("shortest_path: endpoint in occupied cell");

    PathResult out;
    if (a == b) {
        out.reachable = true;
        out.cells = {a};
        return out;
    }

    const double kSqrt2 = std::sqrt(2.0);
    const size_t n = w.occ.size();
    auto idx = [&](Cell c) { return static_cast<size_t>(c.y) * w.width + c.x; };
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<int32_t> parent(n, -1);

    // Priority ordered by (g + octile heuristic, y, x) for determinism.
    auto h = [&](Cell c) {
        const double ax = std::abs(c.x - b.x), ay = std::abs(c.y - b.y);
        return std::max(ax, ay) + (kSqrt2 - 1.0) * std::min(ax, ay);
    };
    using Entry = std::tuple<double, int, int>;  // (f, y, x)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    dist[idx(a)] = 0.0;
    open.emplace(h(a), a.y, a.x);

    static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

    while (!open.empty()) {
        const auto [f, cy, cx] = open.top();
        open.pop();
        const Cell c{cx, cy};
        const double g = dist[idx(c)];
        if (f > g + h(c) + 1e-12) continue;  // stale entry
        if (c == b) break;
        for (int k = 0; k < 8; ++k) {
            const Cell nb{cx + kDx[k], cy + kDy[k]};
            if (w.occupied(nb.x, nb.y)) continue;
            const bool diagonal = k >= 4;
            if (diagonal && (w.occupied(cx + kDx[k], cy) || w.occupied(cx, cy + kDy[k])))
                continue;  // no corner cutting
            const double ng = g + (diagonal ? kSqrt2 : 1.0);
            if (ng < dist[idx(nb)] - 1e-12) {
                dist[idx(nb)] = ng;
                parent[idx(nb)] = static_cast<int32_t>(idx(c));
                open.emplace(ng + h(nb), nb.y, nb.x);
            }
        }
    }

    if (!std::isfinite(dist[idx(b)])) return out;  // unreachable
    out.reachable = true;
    out.length = dist[idx(b)] * w.cell_size;
    for (int32_t i = static_cast<int32_t>(idx(b)); i >= 0; i = parent[static_cast<size_t>(i)])
        out.cells.push_back(Cell{i % w.width, i / w.width});
    std::reverse(out.cells.begin(), out.cells.end());
    return out;
}

PathResult shortest_path(const World& w, const Pose& a, const Pose& b) {
    return shortest_path_cells(w, w.cell_at(a.x, a.y), w.cell_at(b.x, b.y));
}

Pose step(const World& w, const Pose& p, const WaypointAction& a, double max_step) {
    const double n = std::hypot(a.cos_dyaw, a.sin_dyaw);
    const double dyaw = n < 1e-6 ? 0.0 : std::atan2(a.sin_dyaw, a.cos_dyaw);

    double dx = a.dx, dy = a.dy;
    double d = std::hypot(dx, dy);
    if (d > max_step && d > 0.0) {
        dx *= max_step / d;
        dy *= max_step / d;
        d = max_step;
    }
    const double c = std::cos(p.yaw), s = std::sin(p.yaw);
    const double wx = c * dx - s * dy, wy = s * dx + c * dy;

    double fx = p.x, fy = p.y;
    const int n_samp = std::max(1, static_cast<int>(std::ceil(d / (0.05 * w.cell_size))));
    for (int i = 1; i <= n_samp; ++i) {
        const double t = static_cast<double>(i) / n_samp;
        const double qx = p.x + wx * t, qy = p.y + wy * t;
        if (w.occupied_at(qx, qy)) break;
        fx = qx;
        fy = qy;
    }
    return Pose(fx, fy, p.yaw + dyaw);
}

std::vector<Pose> expert_pose_chain(const World& w, const Pose& start, Cell goal) {
    if (w.occupied_at(start.x, start.y))
        throw std::invalid_argument("expert_pose_chain: start in occupied cell");
    const Cell sc = w.cell_at(start.x, start.y);
    if (sc == goal)
        throw std::invalid_argument("expert_pose_chain: start and goal share a cell");
    const PathResult path = shortest_path_cells(w, sc, goal);
    if (!path.reachable) throw std::runtime_error("expert_pose_chain: goal unreachable");

    std::vector<Pose> chain{start};
    Pose cur = start;
    for (size_t i = 1; i < path.cells.size(); ++i) {
        const Pose target = w.cell_center(path.cells[i]);
        const double heading = std::atan2(target.y - cur.y, target.x - cur.x);
        if (std::abs(wrap_angle(heading - cur.yaw)) > 1e-9) {
            cur = Pose(cur.x, cur.y, heading);
            chain.push_back(cur);
        }
        cur = Pose(target.x, target.y, heading);
        chain.push_back(cur);
    }
    return chain;
}

Episode gen_expert_episode(const World& w, const Pose& start, Cell goal, int img_h, int img_w,
                           double fov) {
    const std::vector<Pose> chain = expert_pose_chain(w, start, goal);
    Episode e;
    e.meta.source_id = "sim:" + std::to_string(w.seed);
    e.meta.fps = 30.0;
    e.meta.world_seed = w.seed;
    e.poses = chain;
    e.frames.reserve(chain.size());
    for (const Pose& p : chain) e.frames.push_back(render(w, p, img_h, img_w, fov));
    return e;
}

const char* to_string(Difficulty d) {
    switch (d) {
        case Difficulty::easy: return "easy";
        case Difficulty::medium: return "medium";
        case Difficulty::hard: return "hard";
    }
    return "?";
}

Difficulty difficulty_from_string(const std::string& s) {
    if (s == "easy") return Difficulty::easy;
    if (s == "medium") return Difficulty::medium;
    if (s == "hard") return Difficulty::hard;
    throw std::invalid_argument("unknown difficulty: " + s);
}

std::vector<EvalTask> sample_tasks(const World& w, int n_per_level,
                                   std::pair<double, double> thresholds, uint64_t seed) {
    if (n_per_level < 1) throw std::invalid_argument("sample_tasks: n_per_level must be >= 1");
    if (!(thresholds.first > 0 && thresholds.second > thresholds.first))
        throw std::invalid_argument("sample_tasks: thresholds must be increasing");

    const std::vector<Cell> free = w.free_cells();
    if (free.size() < 2) throw std::invalid_argument("sample_tasks: world has no free pairs");

    Rng rng(seed);
    std::array<std::vector<EvalTask>, 3> bins;
    const long long max_attempts = 20000LL + 4000LL * n_per_level;
    for (long long attempt = 0; attempt < max_attempts; ++attempt) {
        const Cell s = free[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(free.size()) - 1))];
        const Cell g = free[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(free.size()) - 1))];
        const double start_yaw = rng.uniform(-kPi, kPi);
        const double goal_yaw = static_cast<double>(rng.uniform_int(0, 7)) * kPi / 4.0;
        if (s == g) continue;
        const PathResult path = shortest_path_cells(w, s, g);
        if (!path.reachable || path.length <= 0.0) continue;

        const Difficulty d = path.length <= thresholds.first    ? Difficulty::easy
                             : path.length <= thresholds.second ? Difficulty::medium
                                                                : Difficulty::hard;
        auto& bin = bins[static_cast<size_t>(d)];
        if (static_cast<int>(bin.size()) >= n_per_level) continue;
        bin.push_back(EvalTask{w.cell_center(s, start_yaw), w.cell_center(g, wrap_angle(goal_yaw)),
                               path.length, d});
        if (static_cast<int>(bins[0].size()) >= n_per_level &&
            static_cast<int>(bins[1].size()) >= n_per_level &&
            static_cast<int>(bins[2].size()) >= n_per_level)
            break;
    }
    for (int d = 0; d < 3; ++d)
        if (static_cast<int>(bins[static_cast<size_t>(d)].size()) < n_per_level)
            throw std::runtime_error(std::string("sample_tasks: could not fill difficulty level '") +
                                     to_string(static_cast<Difficulty>(d)) + "'");

    std::vector<EvalTask> out;
    out.reserve(static_cast<size_t>(3 * n_per_level));
    for (auto& bin : bins)
        for (EvalTask& t : bin) out.push_back(std::move(t));
    return out;
}

json world_to_json(const World& w) {
    // Run-length encoded occupancy: first value, then run lengths.
    json runs = json::array();
    if (!w.occ.empty()) {
        runs.push_back(static_cast<int>(w.occ[0]));
        int count = 1;
        for (size_t i = 1; i < w.occ.size(); ++i) {
            if (w.occ[i] == w.occ[i - 1]) {
                ++count;
            } else {
                runs.push_back(count);
                count = 1;
            }
        }
        runs.push_back(count);
    }
    return json{{"seed", w.seed},     {"width", w.width},   {"height", w.height},
                {"density", w.density}, {"cell_size", w.cell_size}, {"occ_rle", runs}};
}

World world_from_json(const json& j) {
    World w;
    w.seed = j.at("seed").get<uint64_t>();
    w.width = j.at("width").get<int>();
    w.height = j.at("height").get<int>();
    w.density = j.at("density").get<double>();
    w.cell_size = j.at("cell_size").get<double>();
    const auto& runs = j.at("occ_rle");
    if (!runs.is_array() || runs.size() < 2)
        throw std::invalid_argument("world_from_json: malformed occ_rle");
    uint8_t value = runs[0].get<int>() != 0 ? 1 : 0;
    w.occ.reserve(static_cast<size_t>(w.width) * w.height);
    for (size_t i = 1; i < runs.size(); ++i) {
        const int count = runs[i].get<int>();
        w.occ.insert(w.occ.end(), static_cast<size_t>(count), value);
        value = value ? 0 : 1;
    }
    if (w.occ.size() != static_cast<size_t>(w.width) * w.height)
        throw std::invalid_argument("world_from_json: occ_rle length mismatch");
    return w;
}

void save_world(const World& w, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("save_world: cannot open " + file.string());
    out << world_to_json(w).dump(2) << '\n';
}

World load_world(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("load_world: cannot open " + file.string());
    json j;
    in >> j;
    return world_from_json(j);
}

json tasks_to_json(const std::vector<EvalTask>& tasks) {
    json arr = json::array();
    for (const EvalTask& t : tasks)
        arr.push_back(json{{"start", {t.start.x, t.start.y, t.start.yaw}},
                           {"goal", {t.goal.x, t.goal.y, t.goal.yaw}},
                           {"oracle_dist", t.oracle_dist},
                           {"difficulty", to_string(t.difficulty)}});
    return arr;
}

std::vector<EvalTask> tasks_from_json(const json& j) {
    std::vector<EvalTask> out;
    for (const auto& e : j) {
        EvalTask t;
        t.start = Pose(e.at("start")[0], e.at("start")[1], e.at("start")[2]);
        t.goal = Pose(e.at("goal")[0], e.at("goal")[1], e.at("goal")[2]);
        t.oracle_dist = e.at("oracle_dist").get<double>();
        t.difficulty = difficulty_from_string(e.at("difficulty").get<std::string>());
        out.push_back(t);
    }
    return out;
}

}  // namespace pignav

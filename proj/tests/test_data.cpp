#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "pignav/dataset.hpp"

using namespace pignav;
namespace fs = std::filesystem;

namespace {

Image test_image(int w, int h, int tag) {
    Image img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            uint8_t* p = img.px(x, y);
            p[0] = static_cast<uint8_t>((x * 7 + tag) & 0xFF);
            p[1] = static_cast<uint8_t>((y * 13 + tag * 3) & 0xFF);
            p[2] = static_cast<uint8_t>((x ^ y ^ tag) & 0xFF);
        }
    return img;
}

Episode make_episode(const std::vector<Pose>& poses, int img = 8) {
    Episode e;
    e.poses = poses;
    for (size_t i = 0; i < poses.size(); ++i)
        e.frames.push_back(test_image(img, img, static_cast<int>(i)));
    e.meta.source_id = "test";
    e.meta.fps = 30.0;
    return e;
}

Episode straight_line_episode(int n) {
    std::vector<Pose> poses;
    for (int i = 0; i < n; ++i) poses.emplace_back(static_cast<double>(i), 0.0, 0.0);
    return make_episode(poses);
}

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("pignav_data_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("episode save/load round trip is bit-exact") {
    const fs::path dir = temp_dir("roundtrip");
    Episode e = straight_line_episode(5);
    e.meta.world_seed = 42;
    save_episode(e, dir / "ep");
    const Episode back = load_episode(dir / "ep");
    REQUIRE(back.length() == e.length());
    for (int i = 0; i < e.length(); ++i) {
        CHECK(back.frames[static_cast<size_t>(i)] == e.frames[static_cast<size_t>(i)]);
        CHECK(back.poses[static_cast<size_t>(i)].x == e.poses[static_cast<size_t>(i)].x);
        CHECK(back.poses[static_cast<size_t>(i)].y == e.poses[static_cast<size_t>(i)].y);
        CHECK(back.poses[static_cast<size_t>(i)].yaw == e.poses[static_cast<size_t>(i)].yaw);
    }
    CHECK(back.meta == e.meta);
    fs::remove_all(dir);
}

TEST_CASE("episode round trip over random episodes") {
    const fs::path dir = temp_dir("random_roundtrip");
    Rng rng(77);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<Pose> poses;
        const int n = static_cast<int>(rng.uniform_int(2, 40));
        for (int i = 0; i < n; ++i)
            poses.emplace_back(rng.uniform(-100, 100), rng.uniform(-100, 100),
                               rng.uniform(-3, 3));
        const Episode e = make_episode(poses, 12);
        const fs::path d = dir / ("ep" + std::to_string(trial));
        save_episode(e, d);
        const Episode back = load_episode(d);
        REQUIRE(back.length() == e.length());
        for (int i = 0; i < e.length(); ++i) {
            CHECK(back.frames[static_cast<size_t>(i)] == e.frames[static_cast<size_t>(i)]);
            CHECK(back.poses[static_cast<size_t>(i)].x == e.poses[static_cast<size_t>(i)].x);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("load errors name the offending file") {
    const fs::path dir = temp_dir("load_errors");
    CHECK_THROWS_AS(load_episode(dir / "missing"), EpisodeIoError);

    const Episode e = straight_line_episode(4);
    save_episode(e, dir / "ep");
    fs::remove(dir / "ep" / "frames" / "000002.png");
    try {
        load_episode(dir / "ep");
        FAIL("expected EpisodeIoError");
    } catch (const EpisodeIoError& err) {
        CHECK(std::string(err.what()).find("000002.png") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("manifest with dangling path fails to load") {
    const fs::path dir = temp_dir("dangling");
    DatasetManifest m;
    m.scale = 1.0;
    m.episodes.push_back(ManifestEntry{"episode_000000", 4, "train"});
    save_manifest(m, dir);
    CHECK_THROWS_AS(load_dataset(dir), EpisodeIoError);
    fs::remove_all(dir);
}

TEST_CASE("filter_outliers keeps uniform episodes whole") {
    const Episode e = straight_line_episode(11);
    const auto parts = filter_outliers(e);
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].length() == 11);
}

TEST_CASE("filter_outliers splits at the injected jump") {
    // 10 unit steps plus one 10-unit jump in the middle: m = 20/11, 5m < 10.
    std::vector<Pose> poses;
    double x = 0;
    for (int i = 0; i <= 5; ++i) poses.emplace_back(x++, 0.0, 0.0);
    x += 9.0;  // jump of 10 total from the previous pose
    for (int i = 0; i < 6; ++i) poses.emplace_back(x++, 0.0, 0.0);
    const Episode e = make_episode(poses);
    REQUIRE(e.length() == 12);

    const double mean = (10.0 + 10.0) / 11.0;
    REQUIRE(10.0 > 5.0 * mean);

    const auto parts = filter_outliers(e);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].length() == 6);
    CHECK(parts[1].length() == 6);
    // fragments are contiguous slices
    CHECK(parts[0].poses.back().x == doctest::Approx(5.0));
    CHECK(parts[1].poses.front().x == doctest::Approx(15.0));
}

TEST_CASE("filter_outliers drops too-short fragments") {
    const Episode e = make_episode({Pose(0, 0, 0), Pose(100, 0, 0)});
    CHECK(filter_outliers(e).empty());  // both fragments are single frames
}

TEST_CASE("filter_outliers leaves all-zero displacement episodes unchanged") {
    const Episode e = make_episode({Pose(1, 1, 0), Pose(1, 1, 1), Pose(1, 1, 2)});
    const auto parts = filter_outliers(e);
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].length() == 3);
}

TEST_CASE("normalize_dataset examples") {
    // all steps length 2 -> scale 0.5
    auto [eps1, scale1] = normalize_dataset(
        {make_episode({Pose(0, 0, 0), Pose(2, 0, 0), Pose(4, 0, 0)})});
    CHECK(scale1 == doctest::Approx(0.5));
    CHECK(eps1[0].poses[1].x == doctest::Approx(1.0));
    CHECK(eps1[0].poses[1].yaw == doctest::Approx(0.0));  // yaw untouched

    // two episodes, mean displacements 1 and 3, equal transition counts -> 1/2
    auto [eps2, scale2] = normalize_dataset(
        {make_episode({Pose(0, 0, 0), Pose(1, 0, 0), Pose(2, 0, 0)}),
         make_episode({Pose(0, 0, 0), Pose(3, 0, 0), Pose(6, 0, 0)})});
    CHECK(scale2 == doctest::Approx(0.5));

    // post-condition + idempotence
    CHECK(pooled_mean_step(eps2) == doctest::Approx(1.0).epsilon(1e-9));
    auto [eps3, scale3] = normalize_dataset(std::move(eps2));
    CHECK(scale3 == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(normalize_dataset({make_episode({Pose(0, 0, 0), Pose(0, 0, 1)})}),
                    std::invalid_argument);
}

TEST_CASE("make_sample: straight-line episode labels") {
    const Episode e = straight_line_episode(25);
    const TrainingSample s = make_sample(e, 0, 20);
    REQUIRE(s.waypoints.size() == 10);
    for (int k = 1; k <= 10; ++k) {
        const WaypointAction& a = s.waypoints[static_cast<size_t>(k - 1)];
        CHECK(a.dx == doctest::Approx(k));
        CHECK(a.dy == doctest::Approx(0.0));
        CHECK(a.cos_dyaw == doctest::Approx(1.0));
        CHECK(a.sin_dyaw == doctest::Approx(0.0));
    }
    CHECK(s.nav_dist == doctest::Approx(20.0));
    REQUIRE(s.global_path.size() == 10);
    for (int k = 1; k <= 10; ++k)
        CHECK(s.global_path[static_cast<size_t>(k - 1)].dx == doctest::Approx(2.0 * k));
    CHECK(s.rel_goal.dx == doctest::Approx(20.0));
    CHECK(s.horizon == 20);
}

TEST_CASE("make_sample: T_sub = 0 gives identity labels") {
    const Episode e = straight_line_episode(5);
    const TrainingSample s = make_sample(e, 2, 0);
    for (const WaypointAction& a : s.waypoints) {
        CHECK(a.dx == doctest::Approx(0.0));
        CHECK(a.dy == doctest::Approx(0.0));
        CHECK(a.cos_dyaw == doctest::Approx(1.0));
        CHECK(a.sin_dyaw == doctest::Approx(0.0));
    }
    CHECK(s.nav_dist == doctest::Approx(0.0));
    CHECK(s.rel_goal.dx == doctest::Approx(0.0));
    for (const WaypointAction& a : s.global_path) CHECK(a.dx == doctest::Approx(0.0));
    CHECK(s.obs == s.goal);
}

TEST_CASE("make_sample: waypoints past the goal clamp to the goal") {
    const Episode e = straight_line_episode(10);
    const TrainingSample s = make_sample(e, 0, 4);
    for (int k = 5; k <= 10; ++k) {
        const WaypointAction& a = s.waypoints[static_cast<size_t>(k - 1)];
        CHECK(a.dx == doctest::Approx(s.rel_goal.dx));
        CHECK(a.dy == doctest::Approx(s.rel_goal.dy));
    }
    // last global index is exactly T_sub
    CHECK(s.global_path.back().dx == doctest::Approx(s.rel_goal.dx));
    CHECK_THROWS_AS(make_sample(e, 8, 5), std::out_of_range);
}

TEST_CASE("training sample labels are SE(2) invariant") {
    Rng rng(15);
    std::vector<Pose> poses;
    Pose p(0, 0, 0);
    poses.push_back(p);
    for (int i = 0; i < 20; ++i) {
        p = compose_forward(p, RelPose{rng.uniform(0.2, 1.5), 0, rng.uniform(-0.8, 0.8)});
        poses.push_back(p);
    }
    const Episode e = make_episode(poses);

    const double tx = 13.0, ty = -4.5, phi = 1.1;
    std::vector<Pose> moved;
    for (const Pose& q : poses) {
        const double c = std::cos(phi), s = std::sin(phi);
        moved.emplace_back(tx + c * q.x - s * q.y, ty + s * q.x + c * q.y, q.yaw + phi);
    }
    const Episode e2 = make_episode(moved);

    const TrainingSample s1 = make_sample(e, 3, 12);
    const TrainingSample s2 = make_sample(e2, 3, 12);
    for (size_t k = 0; k < s1.waypoints.size(); ++k) {
        CHECK(std::abs(s1.waypoints[k].dx - s2.waypoints[k].dx) < 1e-9);
        CHECK(std::abs(s1.waypoints[k].dy - s2.waypoints[k].dy) < 1e-9);
        CHECK(std::abs(s1.waypoints[k].cos_dyaw - s2.waypoints[k].cos_dyaw) < 1e-9);
        CHECK(std::abs(s1.waypoints[k].sin_dyaw - s2.waypoints[k].sin_dyaw) < 1e-9);
    }
    CHECK(std::abs(s1.nav_dist - s2.nav_dist) < 1e-9);
}

TEST_CASE("sample_training_pair: forced and deterministic cases") {
    const Episode e6 = straight_line_episode(6);
    Rng rng(1);
    const TrainingSample s = sample_training_pair(e6, rng);
    CHECK(s.horizon == 5);  // T forced to 5, t forced to 0
    CHECK(s.obs == e6.frames[0]);

    const Episode e30 = straight_line_episode(30);
    Rng r1(99), r2(99);
    const TrainingSample a = sample_training_pair(e30, r1);
    const TrainingSample b = sample_training_pair(e30, r2);
    CHECK(a.horizon == b.horizon);
    CHECK(a.nav_dist == b.nav_dist);
    CHECK(a.obs == b.obs);

    const Episode tiny = straight_line_episode(5);
    Rng r3(1);
    CHECK_THROWS_AS(sample_training_pair(tiny, r3), std::invalid_argument);
}

TEST_CASE("sample_training_pair: T_sub distribution is uniform (chi-squared)") {
    const Episode e = straight_line_episode(70);  // T range [5, 64]: 60 bins
    Rng rng(2024);
    std::vector<int> counts(65, 0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i)
        counts[static_cast<size_t>(sample_training_pair(e, rng).horizon)]++;
    const double expected = draws / 60.0;
    double chi2 = 0.0;
    for (int t = 5; t <= 64; ++t) {
        const double d = counts[static_cast<size_t>(t)] - expected;
        chi2 += d * d / expected;
    }
    // 99.9% quantile of chi-squared with 59 dof is ~98.3
    CHECK(chi2 < 98.3);
}

TEST_CASE("split_dataset") {
    DatasetManifest m;
    for (int i = 0; i < 10; ++i)
        m.episodes.push_back(ManifestEntry{"ep" + std::to_string(i), 10, ""});
    split_dataset(m, 0.9, 7);
    int train = 0, val = 0;
    for (const auto& e : m.episodes) (e.split == "train" ? train : val)++;
    CHECK(train == 9);
    CHECK(val == 1);

    DatasetManifest m2 = m;
    for (auto& e : m2.episodes) e.split.clear();
    split_dataset(m2, 0.9, 7);
    for (size_t i = 0; i < m.episodes.size(); ++i)
        CHECK(m.episodes[i].split == m2.episodes[i].split);

    DatasetManifest m100;
    for (int i = 0; i < 100; ++i)
        m100.episodes.push_back(ManifestEntry{"ep" + std::to_string(i), 10, ""});
    split_dataset(m100, 0.9, 3);
    int train100 = 0;
    for (const auto& e : m100.episodes) train100 += e.split == "train" ? 1 : 0;
    CHECK(train100 == 90);

    DatasetManifest single;
    single.episodes.push_back(ManifestEntry{"ep", 5, ""});
    CHECK_THROWS_AS(split_dataset(single, 0.9, 0), std::invalid_argument);
}

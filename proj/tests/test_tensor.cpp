#include <doctest.h>

#include <cmath>
#include <functional>

#include "pignav/model.hpp"
#include "pignav/rng.hpp"
#include "pignav/tensor.hpp"

using namespace pignav;
using nn::Mat;
using nn::Tape;

namespace {

Mat<double> random_mat(Rng& rng, int rows, int cols, double span = 1.0) {
    Mat<double> m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-span, span);
    return m;
}

/// Central-difference check of d(loss)/d(leaf) for every entry of one leaf.
/// build(tape, leaf_id) must return a scalar node.
void check_leaf_gradient(Mat<double> leaf,
                         const std::function<int(Tape<double>&, int)>& build,
                         double tol = 1e-7) {
    Tape<double> tape;
    const int p = tape.param(leaf);
    const int loss = build(tape, p);
    tape.backward(loss);
    const Mat<double> analytic = tape.grad(p);
    REQUIRE(analytic.rows() == leaf.rows());

    const double h = 1e-6;
    for (Eigen::Index c = 0; c < leaf.cols(); ++c)
        for (Eigen::Index r = 0; r < leaf.rows(); ++r) {
            Mat<double> plus = leaf, minus = leaf;
            plus(r, c) += h;
            minus(r, c) -= h;
            Tape<double> tp, tm;
            const double fp = tp.val(build(tp, tp.param(plus)))(0, 0);
            const double fm = tm.val(build(tm, tm.param(minus)))(0, 0);
            const double numeric = (fp - fm) / (2.0 * h);
            const double denom = std::max({std::abs(numeric), std::abs(analytic(r, c)), 1.0});
            CHECK(std::abs(numeric - analytic(r, c)) / denom < tol);
        }
}

}  // namespace

TEST_CASE("matmul gradients") {
    Rng rng(1);
    const Mat<double> other = random_mat(rng, 4, 3);
    const Mat<double> left = random_mat(rng, 5, 4);
    check_leaf_gradient(random_mat(rng, 5, 4), [&](Tape<double>& t, int p) {
        return t.mean_all(t.matmul(p, t.input(other)));
    });
    check_leaf_gradient(random_mat(rng, 4, 3), [&](Tape<double>& t, int p) {
        return t.mean_all(t.matmul(t.input(left), p));
    });
}

TEST_CASE("add_row, scale and lincomb gradients") {
    Rng rng(2);
    const Mat<double> a = random_mat(rng, 6, 4);
    check_leaf_gradient(random_mat(rng, 1, 4), [&](Tape<double>& t, int p) {
        return t.mean_all(t.add_row(t.input(a), p));
    });
    check_leaf_gradient(random_mat(rng, 3, 3), [&](Tape<double>& t, int p) {
        const int a2 = t.scale(p, 2.0);
        return t.mean_all(t.lincomb({{0.7, p}, {1.3, a2}}));
    });
}

TEST_CASE("gelu gradients") {
    Rng rng(3);
    check_leaf_gradient(random_mat(rng, 5, 6, 2.5), [&](Tape<double>& t, int p) {
        return t.mean_all(t.gelu(p));
    });
}

TEST_CASE("sse_rows gradient") {
    Rng rng(31);
    const Mat<double> target = random_mat(rng, 4, 5);
    check_leaf_gradient(random_mat(rng, 4, 5), [&](Tape<double>& t, int p) {
        return t.mean_all(t.sse_rows(p, target));
    });
}

TEST_CASE("layer_norm gradients (input, gain, bias)") {
    Rng rng(4);
    const Mat<double> x = random_mat(rng, 5, 8, 2.0);
    const Mat<double> gain = random_mat(rng, 1, 8).array() + 1.5;
    const Mat<double> bias = random_mat(rng, 1, 8);
    const Mat<double> target = random_mat(rng, 5, 8);
    check_leaf_gradient(x, [&](Tape<double>& t, int p) {
        return t.mean_all(t.sse_rows(t.layer_norm(p, t.input(gain), t.input(bias)), target));
    });
    check_leaf_gradient(gain, [&](Tape<double>& t, int p) {
        return t.mean_all(t.sse_rows(t.layer_norm(t.input(x), p, t.input(bias)), target));
    });
    check_leaf_gradient(bias, [&](Tape<double>& t, int p) {
        return t.mean_all(t.sse_rows(t.layer_norm(t.input(x), t.input(gain), p), target));
    });
}

TEST_CASE("attention gradients (q, k, v)") {
    Rng rng(5);
    const int batch = 2, seq = 5, dim = 8, heads = 2;
    const Mat<double> q = random_mat(rng, batch * seq, dim);
    const Mat<double> k = random_mat(rng, batch * seq, dim);
    const Mat<double> v = random_mat(rng, batch * seq, dim);
    const Mat<double> target = random_mat(rng, batch * seq, dim);

    auto loss_from = [&](Tape<double>& t, int qi, int ki, int vi) {
        return t.mean_all(t.sse_rows(t.attention(qi, ki, vi, batch, seq, heads), target));
    };
    check_leaf_gradient(q, [&](Tape<double>& t, int p) {
        return loss_from(t, p, t.input(k), t.input(v));
    });
    check_leaf_gradient(k, [&](Tape<double>& t, int p) {
        return loss_from(t, t.input(q), p, t.input(v));
    });
    check_leaf_gradient(v, [&](Tape<double>& t, int p) {
        return loss_from(t, t.input(q), t.input(k), p);
    });
}

TEST_CASE("assemble_pair gradients") {
    Rng rng(6);
    const int B = 2, P = 3, D = 4;
    const Mat<double> obs = random_mat(rng, B * P, D);
    const Mat<double> goal = random_mat(rng, B * P, D);
    const Mat<double> cls = random_mat(rng, 1, D);
    const Mat<double> t_obs = random_mat(rng, 1, D);
    const Mat<double> t_goal = random_mat(rng, 1, D);
    const Mat<double> pos = random_mat(rng, P, D);
    const Mat<double> target = random_mat(rng, B * (1 + 2 * P), D);

    auto build_with = [&](Tape<double>& t, int o, int g, int c, int to, int tg, int ps) {
        return t.mean_all(t.sse_rows(t.assemble_pair(o, g, c, to, tg, ps, B), target));
    };
    check_leaf_gradient(obs, [&](Tape<double>& t, int p) {
        return build_with(t, p, t.input(goal), t.input(cls), t.input(t_obs), t.input(t_goal),
                          t.input(pos));
    });
    check_leaf_gradient(cls, [&](Tape<double>& t, int p) {
        return build_with(t, t.input(obs), t.input(goal), p, t.input(t_obs), t.input(t_goal),
                          t.input(pos));
    });
    check_leaf_gradient(pos, [&](Tape<double>& t, int p) {
        return build_with(t, t.input(obs), t.input(goal), t.input(cls), t.input(t_obs),
                          t.input(t_goal), p);
    });
    check_leaf_gradient(t_goal, [&](Tape<double>& t, int p) {
        return build_with(t, t.input(obs), t.input(goal), t.input(cls), t.input(t_obs), p,
                          t.input(pos));
    });
}

TEST_CASE("assemble_single and rows_strided and concat_cols gradients") {
    Rng rng(7);
    const int B = 2, P = 3, D = 4;
    const Mat<double> x = random_mat(rng, B * P, D);
    const Mat<double> cls = random_mat(rng, 1, D);
    const Mat<double> type = random_mat(rng, 1, D);
    const Mat<double> pos = random_mat(rng, P, D);
    const Mat<double> target = random_mat(rng, B * (1 + P), D);
    check_leaf_gradient(x, [&](Tape<double>& t, int p) {
        return t.mean_all(t.sse_rows(
            t.assemble_single(p, t.input(cls), t.input(type), t.input(pos), B), target));
    });

    const Mat<double> y = random_mat(rng, 6, 4);
    check_leaf_gradient(y, [&](Tape<double>& t, int p) {
        return t.mean_all(t.sse_rows(t.rows_strided(p, 0, 3, 2), Mat<double>::Zero(2, 4)));
    });

    const Mat<double> left = random_mat(rng, 3, 3);
    check_leaf_gradient(random_mat(rng, 3, 2), [&](Tape<double>& t, int p) {
        return t.mean_all(t.sse_rows(t.concat_cols(t.input(left), p), Mat<double>::Zero(3, 5)));
    });
}

TEST_CASE("attention probabilities are a convex combination") {
    Rng rng(8);
    const int seq = 7, dim = 8, heads = 2;
    Tape<double> t;
    const int q = t.input(random_mat(rng, seq, dim, 3.0));
    const int k = t.input(random_mat(rng, seq, dim, 3.0));
    Mat<double> ones = Mat<double>::Ones(seq, dim);
    const int v = t.input(std::move(ones));
    const int att = t.attention(q, k, v, 1, seq, heads);
    // All-ones values: every output entry must be exactly a probability sum = 1.
    const Mat<double>& out = t.val(att);
    for (Eigen::Index r = 0; r < out.rows(); ++r)
        for (Eigen::Index c = 0; c < out.cols(); ++c)
            CHECK(out(r, c) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Adam skips parameters without gradients") {
    nn::Adam<float> opt(0.1f);
    Mat<float> a = Mat<float>::Ones(2, 2);
    Mat<float> b = Mat<float>::Ones(2, 2);
    const Mat<float> ga = Mat<float>::Ones(2, 2);
    const Mat<float> gb;  // empty: no gradient reached this parameter
    opt.step({&a, &b}, {&ga, &gb});
    CHECK(a(0, 0) < 1.0f);
    CHECK(b(0, 0) == 1.0f);
}

TEST_CASE("inference determinism: identical forwards bit-match") {
    Rng rng(9);
    ModelConfig cfg;
    cfg.image_size = 16;
    cfg.patch_size = 8;
    cfg.embed_dim = 32;
    cfg.depth = 2;
    cfg.heads = 2;
    cfg.head_hidden = 16;
    const auto model = NavModelT<double>::build(cfg, 3);
    const Mat<double> obs = random_mat(rng, 2 * cfg.patches_per_image(), cfg.patch_dim());
    const Mat<double> goal = random_mat(rng, 2 * cfg.patches_per_image(), cfg.patch_dim());
    const auto o1 = model.infer_patches(obs, goal);
    const auto o2 = model.infer_patches(obs, goal);
    CHECK(o1.waypoints == o2.waypoints);
    CHECK(o1.rel_goal == o2.rel_goal);
    CHECK(o1.nav_dist == o2.nav_dist);
    CHECK(o1.global_path == o2.global_path);
}

// The four supervised objectives. Every term is the position-yaw squared
// metric summed over its prediction slots (plain squared error for the
// distance scalar); batch values are means over samples.
#pragma once

#include <span>
#include <utility>

#include "pignav/dataset.hpp"
#include "pignav/model.hpp"

namespace pignav {

/// The five auxiliary-loss settings of the ablation grid.
enum class AblationMode { waypoint_only, no_goal, no_distance, no_global, all };

const char* to_string(AblationMode m);
const char* display_name(AblationMode m);  // table row label
AblationMode ablation_from_string(const std::string& s);

struct LossWeights {
    double waypoint = 1.0;
    double relative = 1.0;
    double distance = 1.0;
    double global_path = 1.0;

    static LossWeights for_mode(AblationMode m);
    bool any_enabled() const {
        return waypoint > 0 || relative > 0 || distance > 0 || global_path > 0;
    }
};

struct LossBreakdown {
    double total = 0, waypoint = 0, relative = 0, distance = 0, global_path = 0;
};

template <class S>
struct LabelBatch {
    nn::Mat<S> waypoints;    // B x (n_way * 4)
    nn::Mat<S> rel_goal;     // B x 4
    nn::Mat<S> nav_dist;     // B x 1
    nn::Mat<S> global_path;  // B x (n_global * 4)
};

template <class S>
LabelBatch<S> make_label_batch(std::span<const TrainingSample> samples) {
    if (samples.empty()) throw std::invalid_argument("make_label_batch: empty batch");
    const Eigen::Index B = static_cast<Eigen::Index>(samples.size());
    const Eigen::Index n_way = static_cast<Eigen::Index>(samples[0].waypoints.size());
    const Eigen::Index n_glob = static_cast<Eigen::Index>(samples[0].global_path.size());
    LabelBatch<S> lab;
    lab.waypoints.resize(B, 4 * n_way);
    lab.rel_goal.resize(B, 4);
    lab.nav_dist.resize(B, 1);
    lab.global_path.resize(B, 4 * n_glob);
    auto put4 = [](nn::Mat<S>& m, Eigen::Index r, Eigen::Index c, const WaypointAction& a) {
        m(r, c) = static_cast<S>(a.dx);
        m(r, c + 1) = static_cast<S>(a.dy);
        m(r, c + 2) = static_cast<S>(a.cos_dyaw);
        m(r, c + 3) = static_cast<S>(a.sin_dyaw);
    };
    for (Eigen::Index b = 0; b < B; ++b) {
        const TrainingSample& s = samples[static_cast<size_t>(b)];
        for (Eigen::Index k = 0; k < n_way; ++k)
            put4(lab.waypoints, b, 4 * k, s.waypoints[static_cast<size_t>(k)]);
        put4(lab.rel_goal, b, 0, s.rel_goal);
        lab.nav_dist(b, 0) = static_cast<S>(s.nav_dist);
        for (Eigen::Index k = 0; k < n_glob; ++k)
            put4(lab.global_path, b, 4 * k, s.global_path[static_cast<size_t>(k)]);
    }
    return lab;
}

namespace detail {
template <class S>
S mean_row_sse(const nn::Mat<S>& pred, const nn::Mat<S>& label) {
    if (pred.rows() != label.rows() || pred.cols() != label.cols())
        throw std::invalid_argument("loss: prediction/label shape mismatch");
    return (pred - label).rowwise().squaredNorm().mean();
}
}  // namespace detail

/// Sum over the waypoint chunk of the position-yaw metric, batch mean.
template <class S>
S waypoint_loss(const ModelOutputsT<S>& out, const LabelBatch<S>& lab) {
    return detail::mean_row_sse(out.waypoints, lab.waypoints);
}

template <class S>
S relative_loss(const ModelOutputsT<S>& out, const LabelBatch<S>& lab) {
    return detail::mean_row_sse(out.rel_goal, lab.rel_goal);
}

template <class S>
S distance_loss(const ModelOutputsT<S>& out, const LabelBatch<S>& lab) {
    return detail::mean_row_sse(out.nav_dist, lab.nav_dist);
}

template <class S>
S global_loss(const ModelOutputsT<S>& out, const LabelBatch<S>& lab) {
    return detail::mean_row_sse(out.global_path, lab.global_path);
}

/// Weighted sum of the enabled terms plus the per-term breakdown (raw values,
/// disabled terms contribute exactly 0 to the total).
template <class S>
std::pair<S, LossBreakdown> total_loss(const ModelOutputsT<S>& out, const LabelBatch<S>& lab,
                                       const LossWeights& w) {
    if (!w.any_enabled()) throw std::invalid_argument("total_loss: all weights are zero");
    LossBreakdown b;
    b.waypoint = static_cast<double>(waypoint_loss(out, lab));
    b.relative = static_cast<double>(relative_loss(out, lab));
    b.distance = static_cast<double>(distance_loss(out, lab));
    b.global_path = static_cast<double>(global_loss(out, lab));
    double total = 0;
    if (w.waypoint > 0) total += w.waypoint * b.waypoint;
    if (w.relative > 0) total += w.relative * b.relative;
    if (w.distance > 0) total += w.distance * b.distance;
    if (w.global_path > 0) total += w.global_path * b.global_path;
    b.total = total;
    return {static_cast<S>(total), b};
}

/// In-graph loss: only enabled terms enter the tape so disabled heads receive
/// no gradient. The returned breakdown holds raw per-term values.
template <class S>
struct GraphLoss {
    int total = -1;
    LossBreakdown breakdown;
};

template <class S>
GraphLoss<S> build_graph_loss(nn::Tape<S>& tape, const typename NavModelT<S>::Fwd& f,
                              const LabelBatch<S>& lab, const LossWeights& w) {
    if (!w.any_enabled()) throw std::invalid_argument("build_graph_loss: all weights are zero");
    GraphLoss<S> g;
    std::vector<std::pair<S, int>> terms;
    auto term = [&](int out_id, const nn::Mat<S>& label, double weight, double& slot) {
        const int mean_id = tape.mean_all(tape.sse_rows(out_id, label));
        slot = static_cast<double>(tape.val(mean_id)(0, 0));
        if (weight > 0) terms.emplace_back(static_cast<S>(weight), mean_id);
    };
    term(f.waypoints, lab.waypoints, w.waypoint, g.breakdown.waypoint);
    term(f.rel_goal, lab.rel_goal, w.relative, g.breakdown.relative);
    term(f.nav_dist, lab.nav_dist, w.distance, g.breakdown.distance);
    term(f.global_path, lab.global_path, w.global_path, g.breakdown.global_path);
    g.total = tape.lincomb(terms);
    g.breakdown.total = static_cast<double>(tape.val(g.total)(0, 0));
    return g;
}

}  // namespace pignav

#include "pignav/idm.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pignav {

double MockMotionClassifier::motion_energy(const VideoSegment& segment) {
    if (segment.frames.size() < 2) return 0.0;
    double acc = 0.0;
    for (size_t t = 0; t + 1 < segment.frames.size(); ++t)
        acc += mean_abs_diff(segment.frames[t], segment.frames[t + 1]);
    return acc / static_cast<double>(segment.frames.size() - 1);
}

bool MockMotionClassifier::classify(const VideoSegment& segment,
                                    const std::string& prompt) const {
    double threshold = default_threshold_;
    const std::string key = "motion>=";
    if (const size_t pos = prompt.find(key); pos != std::string::npos) {
        try {
            threshold = std::stod(prompt.substr(pos + key.size()));
        } catch (const std::exception&) {
            // malformed directive falls back to the default threshold
        }
    }
    return motion_energy(segment) >= threshold;
}

std::vector<VideoSegment> segment_video(const std::vector<Image>& frames, double fps_in,
                                        double clip_seconds, double fps_out,
                                        const std::string& source_id) {
    if (frames.empty()) throw std::invalid_argument("segment_video: empty frame sequence");
    if (fps_in <= 0 || fps_out <= 0 || clip_seconds <= 0)
        throw std::invalid_argument("segment_video: rates must be positive");

    // Nearest-frame resampling onto the fps_out time grid.
    const size_t n_out = static_cast<size_t>(
        std::floor(static_cast<double>(frames.size()) * fps_out / fps_in));
    std::vector<size_t> src(n_out);
    for (size_t j = 0; j < n_out; ++j)
        src[j] = std::min<size_t>(
            frames.size() - 1,
            static_cast<size_t>(std::llround(static_cast<double>(j) * fps_in / fps_out)));

    const size_t clip_len = static_cast<size_t>(std::llround(clip_seconds * fps_out));
    const size_t remainder_floor = static_cast<size_t>(std::llround(2.0 * fps_out));

    std::vector<VideoSegment> out;
    size_t clip_id = 0;
    for (size_t start = 0; start < n_out; start += clip_len) {
        const size_t count = std::min(clip_len, n_out - start);
        if (count < clip_len && count < remainder_floor) break;
        VideoSegment seg;
        seg.fps = fps_out;
        seg.source_id = source_id.empty() ? "clip_" + std::to_string(clip_id)
                                          : source_id + ":" + std::to_string(clip_id);
        seg.frames.reserve(count);
        for (size_t j = 0; j < count; ++j) seg.frames.push_back(frames[src[start + j]]);
        out.push_back(std::move(seg));
        ++clip_id;
    }
    return out;
}

const char* to_string(FilterResult r) {
    switch (r) {
        case FilterResult::kept: return "true";
        case FilterResult::dropped: return "false";
        case FilterResult::fault: return "fault";
    }
    return "?";
}

FilterOutcome two_stage_filter(const std::vector<VideoSegment>& segments,
                               const SegmentClassifier& clf, const std::string& prompt1,
                               const std::string& prompt2) {
    FilterOutcome out;
    auto run_stage = [&](const std::vector<VideoSegment>& in, int stage,
                         const std::string& prompt) {
        std::vector<VideoSegment> kept;
        for (const VideoSegment& seg : in) {
            FilterDecision d{seg.source_id, stage, "prompt" + std::to_string(stage),
                             FilterResult::dropped, seg.gold};
            try {
                if (clf.classify(seg, prompt)) {
                    d.result = FilterResult::kept;
                    kept.push_back(seg);
                }
            } catch (const std::exception&) {
                d.result = FilterResult::fault;
            }
            out.decisions.push_back(std::move(d));
        }
        return kept;
    };
    out.survivors = run_stage(run_stage(segments, 1, prompt1), 2, prompt2);
    return out;
}

FilterMetrics filter_metrics(std::span<const FilterDecision> decisions, int stage) {
    FilterMetrics m;
    int scored = 0;
    for (const FilterDecision& d : decisions) {
        if (d.stage != stage || !d.gold.has_value() || d.result == FilterResult::fault)
            continue;
        ++scored;
        const bool predicted = d.result == FilterResult::kept;
        if (predicted && *d.gold) ++m.tp;
        else if (predicted && !*d.gold) ++m.fp;
        else if (!predicted && *d.gold) ++m.fn;
        else ++m.tn;
    }
    if (scored == 0)
        throw std::invalid_argument("filter_metrics: no gold-labeled decisions for stage " +
                                    std::to_string(stage));
    if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / (m.tp + m.fp);
    else m.precision_flagged = true;
    if (m.tp + m.fn > 0) m.recall = static_cast<double>(m.tp) / (m.tp + m.fn);
    else m.recall_flagged = true;
    if (m.precision + m.recall > 0)
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

std::vector<PromptScore> rank_prompts(const std::vector<VideoSegment>& segments,
                                      const SegmentClassifier& clf,
                                      const std::vector<std::string>& prompts,
                                      double w_precision, double w_recall) {
    std::vector<PromptScore> scores;
    for (const std::string& prompt : prompts) {
        int tp = 0, fp = 0, fn = 0;
        int scored = 0;
        for (const VideoSegment& seg : segments) {
            if (!seg.gold.has_value()) continue;
            ++scored;
            bool pred = false;
            try {
                pred = clf.classify(seg, prompt);
            } catch (const std::exception&) {
                pred = false;
            }
            if (pred && *seg.gold) ++tp;
            else if (pred && !*seg.gold) ++fp;
            else if (!pred && *seg.gold) ++fn;
        }
        if (scored == 0) throw std::invalid_argument("rank_prompts: no gold-labeled segments");
        PromptScore s;
        s.prompt = prompt;
        s.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        s.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        s.score = w_precision * s.precision + w_recall * s.recall;
        scores.push_back(std::move(s));
    }
    std::stable_sort(scores.begin(), scores.end(),
                     [](const PromptScore& a, const PromptScore& b) { return a.score > b.score; });
    return scores;
}

IdmTrainResult train_idm(const std::vector<Episode>& episodes, ModelConfig cfg,
                         const IdmTrainConfig& tc) {
    cfg.head_layout = ModelConfig::HeadLayout::idm;
    cfg.validate();

    struct Pair {
        const Episode* e;
        int t;
    };
    std::vector<Pair> pairs;
    for (const Episode& e : episodes)
        for (int t = 0; t + 1 < e.length(); ++t) pairs.push_back(Pair{&e, t});
    if (pairs.empty()) throw std::invalid_argument("train_idm: no consecutive frame pairs");

    IdmTrainResult result;
    result.model = NavModel::build(cfg, tc.seed);
    nn::Adam<float> opt(static_cast<float>(tc.learning_rate));
    Rng rng(Rng::derive(tc.seed, 0x49444dULL));

    std::vector<const Image*> obs_ptr(static_cast<size_t>(tc.batch_size));
    std::vector<const Image*> next_ptr(static_cast<size_t>(tc.batch_size));
    nn::Mat<float> target(tc.batch_size, 4);

    for (int step = 1; step <= tc.steps; ++step) {
        for (int b = 0; b < tc.batch_size; ++b) {
            const Pair& p =
                pairs[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(pairs.size()) - 1))];
            const bool identity = rng.uniform() < tc.identity_fraction;
            const int t2 = identity ? p.t : p.t + 1;
            obs_ptr[static_cast<size_t>(b)] = &p.e->frames[static_cast<size_t>(p.t)];
            next_ptr[static_cast<size_t>(b)] = &p.e->frames[static_cast<size_t>(t2)];
            const WaypointAction a = encode_action(
                relative_pose(p.e->poses[static_cast<size_t>(p.t)],
                              p.e->poses[static_cast<size_t>(t2)]));
            target(b, 0) = static_cast<float>(a.dx);
            target(b, 1) = static_cast<float>(a.dy);
            target(b, 2) = static_cast<float>(a.cos_dyaw);
            target(b, 3) = static_cast<float>(a.sin_dyaw);
        }
        nn::Tape<float> tape;
        const NavModel::Fwd f =
            result.model.forward(tape, images_to_patches<float>(obs_ptr, cfg),
                                 images_to_patches<float>(next_ptr, cfg));
        const int loss = tape.mean_all(tape.sse_rows(f.action, target));
        tape.backward(loss);

        std::vector<nn::Mat<float>*> values(result.model.params.size());
        std::vector<const nn::Mat<float>*> grads(result.model.params.size());
        for (size_t i = 0; i < result.model.params.size(); ++i) {
            values[i] = &result.model.params[i].value;
            grads[i] = &tape.grad(f.param_ids[i]);
        }
        opt.step(std::move(values), grads);
        result.curve.emplace_back(step, static_cast<double>(tape.val(loss)(0, 0)));
    }
    result.model.train_step = tc.steps;
    return result;
}

std::vector<AnnotationRecord> annotate(const std::vector<VideoSegment>& segments,
                                       const NavModel& idm, int pairs_per_clip) {
    if (pairs_per_clip < 1) throw std::invalid_argument("annotate: pairs_per_clip must be >= 1");
    if (idm.cfg.head_layout != ModelConfig::HeadLayout::idm)
        throw std::invalid_argument("annotate: model lacks the action head layout");

    std::vector<AnnotationRecord> records;
    for (const VideoSegment& seg : segments) {
        const int len = static_cast<int>(seg.frames.size());
        if (len < 2) throw std::invalid_argument("annotate: clip shorter than 2 frames: " +
                                                 seg.source_id);
        const int avail = len - 1;  // pair starts 0 .. len-2
        const int n = std::min(pairs_per_clip, avail);
        const bool flagged = n < pairs_per_clip;

        std::vector<int> starts(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            starts[static_cast<size_t>(i)] =
                n == 1 ? 0
                       : static_cast<int>(std::llround(static_cast<double>(i) * (len - 2) /
                                                       (n - 1)));

        std::vector<const Image*> obs_ptr, next_ptr;
        for (int t : starts) {
            obs_ptr.push_back(&seg.frames[static_cast<size_t>(t)]);
            next_ptr.push_back(&seg.frames[static_cast<size_t>(t) + 1]);
        }
        const ModelOutputs out = idm.infer_images(obs_ptr, next_ptr);
        for (int i = 0; i < n; ++i) {
            AnnotationRecord r;
            r.clip = seg.source_id;
            r.t = starts[static_cast<size_t>(i)];
            for (int k = 0; k < 4; ++k)
                r.action[static_cast<size_t>(k)] = static_cast<double>(out.rel_goal(i, k));
            r.flagged_short = flagged;
            records.push_back(std::move(r));
        }
    }
    return records;
}

void write_annotations_jsonl(const std::filesystem::path& file,
                             std::span<const AnnotationRecord> records) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("write_annotations_jsonl: cannot open " + file.string());
    for (const AnnotationRecord& r : records) {
        nlohmann::json j{{"clip", r.clip},
                         {"t", r.t},
                         {"action", {r.action[0], r.action[1], r.action[2], r.action[3]}}};
        if (r.flagged_short) j["flagged_short"] = true;
        out << j.dump() << '\n';
    }
}

void write_decision_log_csv(const std::filesystem::path& file,
                            std::span<const FilterDecision> decisions) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("write_decision_log_csv: cannot open " + file.string());
    out << "clip,stage,prompt_id,decision,gold\n";
    for (const FilterDecision& d : decisions) {
        out << d.clip << ',' << d.stage << ',' << d.prompt_id << ',' << to_string(d.result)
            << ',';
        if (d.gold.has_value()) out << (*d.gold ? "true" : "false");
        out << '\n';
    }
}

}  // namespace pignav

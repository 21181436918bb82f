// Game-video labeling pipeline: clip segmentation, two-stage filtering behind
// a pluggable classifier interface with precision/recall audit, inverse
// dynamics model training, and per-frame-pair action annotation.
#pragma once

#include <memory>
#include <optional>

#include "pignav/trainer.hpp"

namespace pignav {

struct VideoSegment {
    std::vector<Image> frames;
    double fps = 30.0;
    std::string source_id;
    std::optional<bool> gold;  // manual label, when audited
};

class SegmentClassifier {
public:
    virtual ~SegmentClassifier() = default;
    /// Deterministic for a fixed (segment, prompt) pair.
    virtual bool classify(const VideoSegment& segment, const std::string& prompt) const = 0;
};

/// Deterministic stand-in for a video-language model: a segment passes when
/// its mean frame-to-frame motion energy clears a threshold. A prompt may
/// carry a "motion>=X" directive; otherwise the default threshold applies.
class MockMotionClassifier final : public SegmentClassifier {
public:
    explicit MockMotionClassifier(double default_threshold = 0.02)
        : default_threshold_(default_threshold) {}
    bool classify(const VideoSegment& segment, const std::string& prompt) const override;
    static double motion_energy(const VideoSegment& segment);

private:
    double default_threshold_;
};

/// Throws in classify(); exercises the pipeline's fault path.
class FaultyClassifier final : public SegmentClassifier {
public:
    bool classify(const VideoSegment&, const std::string&) const override {
        throw std::runtime_error("classifier backend unavailable");
    }
};

/// Resamples to fps_out by nearest-frame selection and cuts clips of
/// clip_seconds; a final remainder is kept when at least 2 seconds long.
std::vector<VideoSegment> segment_video(const std::vector<Image>& frames, double fps_in,
                                        double clip_seconds = 10.0, double fps_out = 30.0,
                                        const std::string& source_id = "");

enum class FilterResult { kept, dropped, fault };
const char* to_string(FilterResult r);

struct FilterDecision {
    std::string clip;
    int stage = 1;
    std::string prompt_id;
    FilterResult result = FilterResult::dropped;
    std::optional<bool> gold;
};

struct FilterOutcome {
    std::vector<VideoSegment> survivors;
    std::vector<FilterDecision> decisions;
};

/// Stage 1 keeps segments the classifier accepts under prompt1; stage 2
/// re-filters the survivors under prompt2. Classifier faults drop the segment
/// and are logged; the pipeline continues.
FilterOutcome two_stage_filter(const std::vector<VideoSegment>& segments,
                               const SegmentClassifier& clf, const std::string& prompt1,
                               const std::string& prompt2);

struct FilterMetrics {
    double precision = 0, recall = 0, f1 = 0;
    bool precision_flagged = false;  // zero denominator
    bool recall_flagged = false;
    int tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Precision/recall/F1 of one stage's decisions against gold labels.
/// Throws when no decision of that stage carries a gold label.
FilterMetrics filter_metrics(std::span<const FilterDecision> decisions, int stage);

struct PromptScore {
    std::string prompt;
    double precision = 0, recall = 0, score = 0;
};

/// Ranks candidate prompts on gold-labeled segments by
/// w_precision * precision + w_recall * recall, best first.
std::vector<PromptScore> rank_prompts(const std::vector<VideoSegment>& segments,
                                      const SegmentClassifier& clf,
                                      const std::vector<std::string>& prompts,
                                      double w_precision = 0.8, double w_recall = 0.2);

struct IdmTrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 32;
    int steps = 600;
    uint64_t seed = 0;
    double identity_fraction = 0.1;  // share of (f, f) pairs with identity targets
};

struct IdmTrainResult {
    NavModel model;  // idm head layout: single 4-dim action head
    std::vector<std::pair<long, double>> curve;
};

/// Trains the inverse dynamics model on consecutive-frame pairs with encoded
/// relative-pose targets under the position-yaw metric.
IdmTrainResult train_idm(const std::vector<Episode>& episodes, ModelConfig cfg,
                         const IdmTrainConfig& tc);

struct AnnotationRecord {
    std::string clip;
    int t = 0;  // first frame of the (t, t+1) pair
    std::array<double, 4> action{0, 0, 1, 0};
    bool flagged_short = false;  // clip shorter than the requested pair count
};

/// pairs_per_clip consecutive-frame pairs at uniform temporal spacing per
/// clip; short clips annotate every available pair and are flagged.
std::vector<AnnotationRecord> annotate(const std::vector<VideoSegment>& segments,
                                       const NavModel& idm, int pairs_per_clip = 48);

void write_annotations_jsonl(const std::filesystem::path& file,
                             std::span<const AnnotationRecord> records);
void write_decision_log_csv(const std::filesystem::path& file,
                            std::span<const FilterDecision> decisions);

}  // namespace pignav

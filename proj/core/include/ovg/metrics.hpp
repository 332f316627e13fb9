#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "ovg/box.hpp"
#include "ovg/samples.hpp"

namespace ovg {

enum class SizeBucket { small, middle, large };

const char* to_string(SizeBucket b);
SizeBucket bucket_from_string(const std::string& s);

constexpr double kAccThreshold = 0.5;
constexpr double kSmallArea = 32.0 * 32.0;
constexpr double kLargeArea = 96.0 * 96.0;

/// Intersection over union in [0, 1]; 0 when the union is empty.
double iou(const BBox& a, const BBox& b);

/// small iff area < 32^2, large iff area > 96^2, middle otherwise
/// (both boundaries count as middle).
SizeBucket size_bucket(const BBox& gt);

/// Correct iff IoU >= 0.5.
bool is_correct(double iou_value);

struct BucketStat {
    int correct = 0;
    int total = 0;
    double accuracy() const { return total == 0 ? 0.0 : 100.0 * correct / total; }
};

struct RecallStat {
    int phrases = 0;
    std::array<int, 3> hits{};  // at k = 1, 5, 10
    double recall(int slot) const { return phrases == 0 ? 0.0 : 100.0 * hits[static_cast<std::size_t>(slot)] / phrases; }
};

/// Evaluation summary; percentages in [0, 100].
struct EvalReport {
    std::array<BucketStat, 3> buckets{};  // indexed by SizeBucket
    int correct = 0;
    int total = 0;
    RecallStat pl_base;   // base-only sentences
    RecallStat pl_novel;  // base+novel sentences
    bool clipped_predictions = true;

    double acc50() const { return total == 0 ? 0.0 : 100.0 * correct / total; }
    const BucketStat& bucket(SizeBucket b) const { return buckets[static_cast<std::size_t>(b)]; }

    /// Flat JSON document.
    std::string to_json() const;
    static EvalReport from_json(const std::string& text);
};

/// Overall and per-bucket Acc50 with buckets taken from the ground truth.
/// Throws InputError on length mismatch.
EvalReport acc50(std::span<const BBox> preds, std::span<const BBox> gts);

constexpr std::array<int, 3> kRecallKs{1, 5, 10};

/// Ranked predictions for one phrase chunk of a sentence.
struct PhrasePrediction {
    int chunk = 0;  // index into PLSample::chunks
    std::vector<BBox> ranked;
};

/// Accumulates R@1/5/10 for one sentence into the matching split of
/// `report`. A phrase hits at k when any of its top-k boxes reaches
/// IoU >= 0.5 with any box of its chain; box-less chains are skipped.
void accumulate_recall(const PLSample& sample, std::span<const PhrasePrediction> predictions, EvalReport& report);

/// Recall values (percent) at k = 1, 5, 10 over a set of sentences, all splits pooled.
std::array<double, 3> recall_at_k(std::span<const PLSample> samples,
                                  std::span<const std::vector<PhrasePrediction>> predictions);

}  // namespace ovg

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ovg/data.hpp"
#include "ovg/metrics.hpp"
#include "ovg/model.hpp"
#include "ovg/train.hpp"

namespace ovg {

/// What a predictor sees for one query. `truth` is only consulted by the
/// oracle predictor.
struct PredictInput {
    const ad::Matrix& pixels;  // resized to the model input
    double width;
    double height;
    const std::string& text;
    const std::vector<BBox>& truth;
};

/// Ranks candidate boxes (pixels of the original image, best first).
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual std::vector<BBox> rank(const PredictInput& in) const = 0;
    virtual int input_size() const = 0;
};

/// Final-layer boxes ordered by alignment score; ties keep query order so
/// the first entry is the pipeline's top-1 box.
class ModelPredictor final : public Predictor {
public:
    explicit ModelPredictor(const Grounder& model) : model_(&model) {}
    std::vector<BBox> rank(const PredictInput& in) const override;
    int input_size() const override { return model_->config().image_size; }

private:
    const Grounder* model_;
};

/// Returns the ground-truth boxes; a full-image box when there are none.
class OraclePredictor final : public Predictor {
public:
    explicit OraclePredictor(int input_size) : size_(input_size) {}
    std::vector<BBox> rank(const PredictInput& in) const override;
    int input_size() const override { return size_; }

private:
    int size_;
};

struct SamplePrediction {
    std::string image_id;
    BBox pred;  // clipped to the image
    BBox gt;
    double iou = 0.0;
    SizeBucket bucket = SizeBucket::middle;
    bool correct = false;
};

struct Evaluation {
    EvalReport report;
    std::vector<SamplePrediction> predictions;

    /// JSON array of {"image_id", "pred_bbox", "gt_bbox", "iou", "bucket", "correct"}.
    std::string predictions_json() const;
};

std::vector<SamplePrediction> parse_predictions(const std::string& json_text);

/// Acc50 over grounding samples; predictions are clipped to the image first.
Evaluation evaluate_grounding(const Predictor& predictor, const std::vector<TrainingSample>& samples);

/// A phrase-localization sentence with its image prepared.
struct PhraseSample {
    PLSample sample;
    ad::Matrix pixels;
    double width = 0.0;
    double height = 0.0;
};

/// R@1/5/10 split by base-only and base+novel sentences.
EvalReport evaluate_phrases(const Predictor& predictor, const std::vector<PhraseSample>& samples);

/// Loads and resizes the images of a grounding manifest. Image files live
/// at image_path(); their size must match the record.
std::vector<TrainingSample> load_grounding_samples(const std::filesystem::path& manifest_path,
                                                   const DatasetManifest& m, int input_size);
std::vector<PhraseSample> load_phrase_samples(const std::filesystem::path& manifest_path, const DatasetManifest& m,
                                              int input_size);

/// In-memory variant for generated datasets.
std::vector<TrainingSample> grounding_samples(const SyntheticDataset& ds, int input_size);

}  // namespace ovg

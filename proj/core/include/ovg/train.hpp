#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ovg/box.hpp"
#include "ovg/config.hpp"
#include "ovg/metrics.hpp"
#include "ovg/model.hpp"
#include "ovg/nn.hpp"

namespace ovg {

/// Adam with decoupled weight decay over every parameter of a store.
class AdamW {
public:
    AdamW(nn::ParamStore& store, double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8);

    void step();
    long steps() const { return t_; }

private:
    nn::ParamStore* store_;
    double lr_, wd_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<ad::Matrix> m_, v_;
};

/// Rescales all gradients so their global L2 norm is at most `max_norm`
/// (no-op when max_norm <= 0). Returns the norm before clipping.
double clip_grad_norm(nn::ParamStore& store, double max_norm);

/// A grounding sample with its image already resized to the model input.
struct TrainingSample {
    std::string image_id;
    ad::Matrix pixels;
    double width = 0.0;
    double height = 0.0;
    std::string expression;
    BBox target;
};

struct StepLog {
    int step = 0;
    double loss = 0.0;
    double giou = 0.0;
    double l1 = 0.0;
    double cts = 0.0;
    double grad_norm = 0.0;
};

/// Everything needed to audit or replay a training run.
struct RunRecord {
    ModelConfig config;
    std::uint64_t seed = 0;
    std::vector<StepLog> steps;
    EvalReport final_report;
    double wall_clock_seconds = 0.0;

    std::string to_json() const;
    static RunRecord from_json(const std::string& text);
};

using StepCallback = std::function<void(const StepLog&)>;

/// Mini-batch training for cfg.train_steps optimizer steps. Batches are
/// drawn from a per-epoch permutation seeded by cfg.seed, so a run is a
/// pure function of (config, weights, samples).
std::vector<StepLog> train(Grounder& model, const std::vector<TrainingSample>& samples,
                           const StepCallback& on_step = {});

/// Expression vocabulary of a grounding manifest.
Vocabulary build_vocabulary(const std::vector<TrainingSample>& samples);

}  // namespace ovg

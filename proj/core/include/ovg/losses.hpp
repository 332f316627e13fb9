#pragma once

#include <span>
#include <vector>

#include "ovg/box.hpp"
#include "ovg/config.hpp"
#include "ovg/decoder.hpp"

namespace ovg {

/// Mean absolute difference over (cx, cy, w, h).
double l1_loss(const NormBox& pred, const NormBox& gt);

/// Generalized IoU in (-1, 1].
double giou(const BBox& a, const BBox& b);

/// 1 - GIoU. `pred` may be degenerate; a zero-area `gt` throws AnnotationError.
double giou_loss(const BBox& pred, const BBox& gt);

/// Differentiable counterparts on a (1, 4) predicted (cx, cy, w, h) row.
ad::Var l1_loss(const ad::Var& pred, const NormBox& gt);
ad::Var giou_loss(const ad::Var& pred, const NormBox& gt);

struct MatchResult {
    std::vector<int> positives;  // O_i^+
    std::vector<double> cost;    // per query
};

/// Singleton positive set: the query minimizing
/// lambda_l1 * L1 + lambda_giou * (1 - GIoU) against the single target,
/// lowest index on ties.
MatchResult assign_positives(std::span<const NormBox> boxes, const NormBox& gt, const ModelConfig& cfg);
MatchResult assign_positives(const DecoderOutput& output, const NormBox& gt, const ModelConfig& cfg);

/// Contrastive alignment of one text embedding against N object embeddings:
/// mean over positives j of -log softmax_j(objects * text / tau).
/// Throws MatchingError on an empty positive set and ConfigError if tau <= 0.
ad::Var contrastive_loss(const ad::Var& text, const ad::Var& objects, std::span<const int> positives, double tau);
double contrastive_loss(const ad::Matrix& text, const ad::Matrix& objects, std::span<const int> positives,
                        double tau);

/// lambda_giou * giou + lambda_l1 * l1 + lambda_cts * cts.
double total_loss(double l_giou, double l_l1, double l_cts, const ModelConfig& cfg);
ad::Var total_loss(const ad::Var& l_giou, const ad::Var& l_l1, const ad::Var& l_cts, const ModelConfig& cfg);

}  // namespace ovg

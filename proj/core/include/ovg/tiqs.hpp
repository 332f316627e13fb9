#pragma once

#include <span>
#include <vector>

#include "ovg/box.hpp"
#include "ovg/config.hpp"
#include "ovg/encoder.hpp"
#include "ovg/nn.hpp"

namespace ovg {

/// Pairwise cosine similarity (T, L) between image and text tokens. Masked
/// text columns hold -infinity; zero-norm rows give cosine 0.
ad::Matrix similarity_logits(const ad::Matrix& v_img, const ad::Matrix& v_txt, const ad::KeyMask& mask);

/// Per-token score: max over the finite (unmasked) columns.
std::vector<double> reduce_max(const ad::Matrix& logits);

/// Indices of the k largest scores in non-increasing order; equal scores
/// keep ascending index order. Throws ConfigError unless 1 <= k <= size.
std::vector<int> topk_indices(std::span<const double> scores, int k);

/// The k decoder queries: content rows, anchor boxes (as logits) and provenance.
struct QuerySet {
    ad::Var content;        // (k, C) selected token features
    ad::Var anchor_logits;  // (k, 4) inverse-sigmoid (cx, cy, w, h)
    std::vector<int> token_index;
    std::vector<double> score;

    int size() const { return static_cast<int>(token_index.size()); }
    std::vector<NormBox> anchors() const;
};

/// Text-image query selection.
class QuerySelector {
public:
    QuerySelector() = default;
    QuerySelector(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng);

    QuerySet operator()(const ad::Var& v_img, const ad::Var& v_txt, const ad::KeyMask& mask,
                        const TokenLayout& layout) const;

    /// Same as operator() with an explicit similarity matrix and k.
    QuerySet select(const ad::Matrix& logits, const ad::Var& v_img, const TokenLayout& layout, int k) const;

private:
    int k_ = 1;
    nn::Linear anchor_head_;  // zero-initialized: anchors start at the grid prior
};

}  // namespace ovg

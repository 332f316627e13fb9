#pragma once

#include <atomic>
#include <memory>
#include <vector>

#include "ovg/box.hpp"
#include "ovg/config.hpp"
#include "ovg/nn.hpp"
#include "ovg/tiqs.hpp"

namespace ovg {

/// Max over unmasked text tokens of the cosine between each query and each
/// text token; one score per query, in [-1, 1].
std::vector<double> alignment_scores(const ad::Matrix& queries, const ad::Matrix& v_txt, const ad::KeyMask& mask);

/// Intermediate values of one decoder layer.
struct DecodeTrace {
    ad::Var self_attended;  // t_l
    ad::Var image_gathered; // t'_l
    ad::Var text_update;    // t_v
    ad::Var updated;        // t_q^{i+1}
};

struct LayerPrediction {
    std::vector<NormBox> boxes;
    std::vector<double> scores;
    ad::Var queries;     // (k, C)
    ad::Var box_logits;  // (k, 4)
};

struct DecoderOutput {
    std::vector<LayerPrediction> layers;
    int top1_index = 0;
    NormBox top1_norm;
    BBox top1;  // pixels of the original image, clipped to its bounds

    const LayerPrediction& final_layer() const { return layers.back(); }
};

/// One cross-modality decoder layer. The query passes through self-attention,
/// cross-attention over the language-weighted image tokens and cross-attention
/// over the text tokens; each stage adds a residual delta, and the cumulative
/// delta t_v updates the query as
///
///     t_q' = N(N(t_q + t_v) + FFN(N(t_q + t_v)))
///
/// where N is layer normalization (or row L2 normalization with
/// `update_norm = l2`).
class DecoderLayer {
public:
    DecoderLayer() = default;
    DecoderLayer(nn::ParamStore& store, const std::string& name, const ModelConfig& cfg, Rng& rng);

    DecodeTrace decode(const ad::Var& queries, const ad::Var& anchor_logits, const ad::Var& v_img_mod,
                       const ad::Var& v_txt, const ad::KeyMask& mask) const;

    /// Refined (k, 4) box logits: anchor logits plus the box head's delta.
    ad::Var refine(const ad::Var& queries, const ad::Var& anchor_logits) const;

    /// Applies N(.) as configured.
    ad::Var normalize(const ad::Var& x, int which) const;

    /// Set to bypass the FFN (treated as a zero function) for structural checks.
    void disable_ffn(bool off) { ffn_disabled_ = off; }

private:
    UpdateNorm norm_kind_ = UpdateNorm::layer;
    bool ffn_disabled_ = false;
    nn::Linear pos_in_, pos_out_;
    nn::LayerNorm norm_self_, norm_image_, norm_text_;
    nn::MultiHeadAttention self_attn_, image_attn_, text_attn_;
    nn::LayerNorm update_norm_inner_, update_norm_outer_;
    nn::FeedForward ffn_;
    nn::Linear box_hidden_, box_out_;
};

class Decoder {
public:
    Decoder() = default;
    Decoder(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng);

    /// Runs every layer. `image_width/height` are the original image
    /// dimensions used for the pixel-space top-1 box.
    DecoderOutput operator()(const QuerySet& queries, const ad::Var& v_img_mod, const ad::Var& v_txt,
                             const ad::KeyMask& mask, double image_width, double image_height) const;

    int num_layers() const { return static_cast<int>(layers_.size()); }
    DecoderLayer& layer(int i) { return layers_.at(static_cast<std::size_t>(i)); }
    const DecoderLayer& layer(int i) const { return layers_.at(static_cast<std::size_t>(i)); }

    /// Total decode_layer invocations since construction (instrumentation).
    long layer_calls() const { return counter_->load(); }

private:
    std::vector<DecoderLayer> layers_;
    std::shared_ptr<std::atomic<long>> counter_ = std::make_shared<std::atomic<long>>(0);
};

/// Converts sigmoid box logits to normalized boxes.
std::vector<NormBox> boxes_from_logits(const ad::Matrix& logits);

}  // namespace ovg

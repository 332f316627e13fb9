#pragma once

#include <atomic>
#include <vector>

#include "ovg/backbone.hpp"
#include "ovg/config.hpp"
#include "ovg/nn.hpp"

namespace ovg {

/// Per-token bookkeeping for the flattened image sequence.
struct TokenLayout {
    std::vector<int> level;     // pyramid level index (log2(stride / 4))
    ad::Matrix centers;         // (T, 2) normalized cell centers (cx, cy)
    std::vector<double> cell;   // normalized cell extent per token

    int size() const { return static_cast<int>(level.size()); }
};

/// Layout of the flattened tokens of `pyr`, blocks in the pyramid's level order.
TokenLayout make_layout(const ImageFeaturePyramid& pyr, int image_size);

/// Fixed 2-D sine embedding of token centers, (T, dim).
ad::Matrix sine_position_embedding(const ad::Matrix& centers, int dim);

/// Encoder output: fused image tokens v'_v and text tokens v'_l.
struct FusedFeatures {
    ad::Var v_img;  // (T, C)
    ad::Var v_txt;  // (L, C)
    ad::KeyMask text_mask;
    TokenLayout layout;
};

/// One pre-norm transformer block: self-attention then feed-forward.
class EncoderBlock {
public:
    EncoderBlock() = default;
    EncoderBlock(nn::ParamStore& store, const std::string& name, const ModelConfig& cfg, Rng& rng);

    ad::Var operator()(const ad::Var& x, const ad::Var* pos, const ad::KeyMask* mask) const;

private:
    nn::LayerNorm norm_attn_;
    nn::MultiHeadAttention attn_;
    nn::LayerNorm norm_ffn_;
    nn::FeedForward ffn_;
};

/// Flattens the pyramid, adds position + level embeddings and runs the
/// image self-attention stack. Dense multi-head attention over all scales
/// stands in for deformable sampling.
class ImageEnhancer {
public:
    ImageEnhancer() = default;
    ImageEnhancer(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng);

    ad::Var operator()(const ImageFeaturePyramid& pyr, TokenLayout* layout_out = nullptr) const;

    /// Runs on already flattened tokens; `layout` must describe `tokens`.
    ad::Var forward_tokens(const ad::Var& tokens, const TokenLayout& layout) const;

private:
    int image_size_ = 0;
    int dim_ = 0;
    ad::Var level_embed_;  // (levels, C)
    std::vector<EncoderBlock> blocks_;
    nn::LayerNorm out_norm_;
};

/// Masked self-attention stack over text tokens.
class TextEnhancer {
public:
    TextEnhancer() = default;
    TextEnhancer(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng);

    /// Throws InputError if every position is masked. Masked rows of the
    /// result are zero.
    ad::Var operator()(const ad::Var& tokens, const ad::KeyMask& mask) const;

private:
    std::vector<EncoderBlock> blocks_;
    nn::LayerNorm out_norm_;
};

/// Bidirectional cross-modality fusion. Each round applies text-to-image
/// attention (updating image tokens) and then image-to-text attention
/// (updating text tokens); a round's output is the next round's input.
class CrossModalFusion {
public:
    CrossModalFusion() = default;
    CrossModalFusion(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng);

    /// Throws ConfigError when `rounds` < 1 or exceeds the built layers.
    /// `text_to_image_weights`, when given, collects every head's attention
    /// probabilities of every text-to-image pass.
    std::pair<ad::Var, ad::Var> operator()(const ad::Var& v_img, const ad::Var& v_txt,
                                           const ad::KeyMask& mask, int rounds,
                                           std::vector<ad::Matrix>* text_to_image_weights = nullptr) const;

    int max_rounds() const { return static_cast<int>(layers_.size()); }

    /// Total rounds executed since construction (instrumentation).
    long rounds_executed() const { return counter_->load(); }

private:
    struct Round {
        nn::LayerNorm img_norm_a, txt_norm_a;
        nn::MultiHeadAttention text_to_image;
        nn::LayerNorm txt_norm_b, img_norm_b;
        nn::MultiHeadAttention image_to_text;
    };
    std::vector<Round> layers_;
    std::shared_ptr<std::atomic<long>> counter_ = std::make_shared<std::atomic<long>>(0);
};

/// Enhancement of both streams followed by min(N_v, N_l) fusion rounds.
class FeatureEncoder {
public:
    FeatureEncoder() = default;
    FeatureEncoder(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng);

    FusedFeatures operator()(const ImageFeaturePyramid& pyr, const TextTokens& text) const;

    const ImageEnhancer& image() const { return image_; }
    const TextEnhancer& text() const { return text_; }
    const CrossModalFusion& fusion() const { return fusion_; }

private:
    int rounds_ = 1;
    ImageEnhancer image_;
    TextEnhancer text_;
    CrossModalFusion fusion_;
};

}  // namespace ovg

#pragma once

#include <memory>
#include <string>

#include "ovg/backbone.hpp"
#include "ovg/config.hpp"
#include "ovg/decoder.hpp"
#include "ovg/encoder.hpp"
#include "ovg/lgfa.hpp"
#include "ovg/nn.hpp"
#include "ovg/tiqs.hpp"

namespace ovg {

/// Every intermediate of one forward pass, kept for losses and inspection.
struct ForwardResult {
    TextTokens text;
    FusedFeatures fused;    // v'_v, v'_l
    ad::Var lgfa_scores;    // (T, 1)
    ad::Var v_img_mod;      // v''_v
    QuerySet queries;
    DecoderOutput output;
};

/// The full grounding network: backbones, fusion encoder, query selection,
/// language-guided feature attention and the cross-modality decoder.
class Grounder {
public:
    Grounder(const ModelConfig& cfg, const Vocabulary& vocab);
    Grounder(const ModelConfig& cfg, const Vocabulary& vocab, const BackboneFactories& factories);

    Grounder(const Grounder&) = delete;
    Grounder& operator=(const Grounder&) = delete;

    /// `pixels` is the (S*S, 3) matrix of an image already resized to the
    /// model input size S; the original dimensions scale the top-1 box.
    ForwardResult forward_pixels(const ad::Matrix& pixels, const std::string& expression, double image_width,
                                 double image_height) const;

    /// Resizes `image` to the input size and runs the pipeline.
    ForwardResult forward(const Image& image, const std::string& expression) const;

    /// Inference without building a gradient graph.
    DecoderOutput predict(const Image& image, const std::string& expression) const;

    const ModelConfig& config() const { return cfg_; }
    const Vocabulary& vocabulary() const { return vocab_; }
    nn::ParamStore& params() { return store_; }
    const nn::ParamStore& params() const { return store_; }

    const FeatureEncoder& encoder() const { return encoder_; }
    Lgfa& lgfa() { return lgfa_; }
    const Decoder& decoder() const { return decoder_; }

private:
    ModelConfig cfg_;
    Vocabulary vocab_;
    nn::ParamStore store_;
    std::unique_ptr<ImageBackbone> image_backbone_;
    std::unique_ptr<TextBackbone> text_backbone_;
    FeatureEncoder encoder_;
    QuerySelector selector_;
    Lgfa lgfa_;
    Decoder decoder_;
};

/// Pixel matrix of `image` resized to size x size.
ad::Matrix prepare_pixels(const Image& image, int size);

/// Scalar training objective of one sample plus its parts.
struct LossTerms {
    ad::Var total;
    double giou = 0.0;
    double l1 = 0.0;
    double cts = 0.0;
    int positive = 0;
};

/// Matches the final-layer boxes to `gt`, then applies the GIoU and L1 terms
/// to the positive query's box and the contrastive term between the pooled
/// text embedding (masked mean of v'_l) and the final query states, all
/// L2-normalized. With `aux_loss`, every layer contributes its own terms.
LossTerms grounding_loss(const ForwardResult& result, const NormBox& gt, const ModelConfig& cfg);

/// Masked mean of the rows of `tokens`, (1, C).
ad::Var masked_mean(const ad::Var& tokens, const ad::KeyMask& mask);

}  // namespace ovg

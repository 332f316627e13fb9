#pragma once

#include "ovg/config.hpp"
#include "ovg/nn.hpp"

namespace ovg {

/// Language-guided feature attention.
///
/// A text-conditioned semantic map is built by attending from every image
/// token to the text tokens. Both the image tokens and the semantic map are
/// linearly projected (separate projections) and L2-normalized; the per-token
/// relevance is a Gaussian of the cosine gap,
///
///     S_x = alpha * exp(-(1 - cos_x)^2 / (2 sigma^2)),
///
/// and image features are re-weighted as beta * v * S + (1 - beta) * v.
/// alpha starts at 1; sigma = 1e-3 + softplus(rho) starts at 1.
class Lgfa {
public:
    static constexpr double kSigmaFloor = 1e-3;

    Lgfa() = default;
    Lgfa(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng);

    /// (T, C) semantic map v'_s. Throws InputError if every text token is masked.
    ad::Var semantic_map(const ad::Var& v_img, const ad::Var& v_txt, const ad::KeyMask& mask) const;

    /// (T, 1) relevance scores for row-aligned pairs of image token / semantic map.
    ad::Var score(const ad::Var& v_img, const ad::Var& v_sem) const;

    /// Full module: semantic map, scores and blend with the configured beta.
    ad::Var operator()(const ad::Var& v_img, const ad::Var& v_txt, const ad::KeyMask& mask,
                       ad::Var* scores_out = nullptr) const;

    ad::Var alpha() const { return alpha_; }
    /// Effective sigma as a differentiable 1x1 value.
    ad::Var sigma() const;

    void set_alpha(double a);
    /// Sets the underlying parameter so that sigma() == s; requires s > floor.
    void set_sigma(double s);

    const nn::Linear& image_projection() const { return proj_img_; }
    const nn::Linear& semantic_projection() const { return proj_sem_; }

private:
    double beta_ = 0.7;
    nn::MultiHeadAttention attn_;
    nn::Linear proj_img_;
    nn::Linear proj_sem_;
    ad::Var alpha_;
    ad::Var sigma_raw_;
};

/// Gaussian-of-cosine score on already unit-normalized rows; (T, 1).
ad::Var lgfa_score_from_unit(const ad::Var& v_hat, const ad::Var& s_hat, const ad::Var& alpha,
                             const ad::Var& sigma);

/// beta * v * S + (1 - beta) * v with S broadcast per row. Throws ConfigError
/// unless beta lies in [0, 1].
ad::Var lgfa_blend(const ad::Var& v_img, const ad::Var& scores, double beta);

}  // namespace ovg

#include "ovg/lgfa.hpp"

#include <algorithm>
#include <cmath>

#include "ovg/errors.hpp"

namespace ovg {

namespace {

double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

}  // namespace

Lgfa::Lgfa(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng)
    : beta_(cfg.beta),
      attn_(store, "lgfa.attn", cfg.feature_dim, cfg.num_heads, rng),
      proj_img_(store, "lgfa.proj_image", cfg.feature_dim, cfg.feature_dim, rng),
      proj_sem_(store, "lgfa.proj_semantic", cfg.feature_dim, cfg.feature_dim, rng) {
    alpha_ = store.add("lgfa.alpha", ad::Matrix::Constant(1, 1, 1.0));
    sigma_raw_ = store.add("lgfa.sigma_raw", ad::Matrix::Constant(1, 1, inverse_softplus(1.0 - kSigmaFloor)));
}

ad::Var Lgfa::semantic_map(const ad::Var& v_img, const ad::Var& v_txt, const ad::KeyMask& mask) const {
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
        throw InputError("semantic map needs at least one unmasked text token");
    return attn_(v_img, v_txt, v_txt, &mask);
}

ad::Var Lgfa::sigma() const { return ad::add_scalar(ad::softplus(sigma_raw_), kSigmaFloor); }

void Lgfa::set_alpha(double a) { alpha_.mutable_value()(0, 0) = a; }

void Lgfa::set_sigma(double s) {
    if (!(s > kSigmaFloor)) throw ConfigError("sigma must exceed the reparameterization floor");
    sigma_raw_.mutable_value()(0, 0) = inverse_softplus(s - kSigmaFloor);
}

ad::Var lgfa_score_from_unit(const ad::Var& v_hat, const ad::Var& s_hat, const ad::Var& alpha,
                             const ad::Var& sigma) {
    const ad::Var cos = ad::row_dot(v_hat, s_hat);
    const ad::Var gap = ad::square(ad::add_scalar(ad::scale(cos, -1.0), 1.0));
    const ad::Var inv_two_var = ad::reciprocal(ad::scale(ad::square(sigma), 2.0));
    return ad::mul(ad::exp(ad::scale(ad::mul(gap, inv_two_var), -1.0)), alpha);
}

ad::Var Lgfa::score(const ad::Var& v_img, const ad::Var& v_sem) const {
    if (v_img.rows() != v_sem.rows() || v_img.cols() != v_sem.cols())
        throw InputError("LGFA score: image tokens and semantic map differ in shape");
    const ad::Var v_hat = ad::l2_normalize_rows(proj_img_(v_img));
    const ad::Var s_hat = ad::l2_normalize_rows(proj_sem_(v_sem));
    return lgfa_score_from_unit(v_hat, s_hat, alpha_, sigma());
}

ad::Var lgfa_blend(const ad::Var& v_img, const ad::Var& scores, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
    if (scores.rows() != v_img.rows() || scores.cols() != 1)
        throw InputError("LGFA blend: scores must be a (T, 1) column");
    return ad::add(ad::scale(ad::mul(v_img, scores), beta), ad::scale(v_img, 1.0 - beta));
}

ad::Var Lgfa::operator()(const ad::Var& v_img, const ad::Var& v_txt, const ad::KeyMask& mask,
                         ad::Var* scores_out) const {
    const ad::Var s = score(v_img, semantic_map(v_img, v_txt, mask));
    if (scores_out) *scores_out = s;
    return lgfa_blend(v_img, s, beta_);
}

}  // namespace ovg

#include "ovg/encoder.hpp"

#include <cmath>

#include "ovg/errors.hpp"

namespace ovg {

TokenLayout make_layout(const ImageFeaturePyramid& pyr, int image_size) {
    TokenLayout layout;
    const int total = pyr.num_tokens();
    layout.centers.resize(total, 2);
    layout.level.reserve(static_cast<std::size_t>(total));
    layout.cell.reserve(static_cast<std::size_t>(total));
    int t = 0;
    for (const auto& lvl : pyr.levels) {
        const int level_index = static_cast<int>(std::lround(std::log2(lvl.stride / 4.0)));
        for (int y = 0; y < lvl.height; ++y)
            for (int x = 0; x < lvl.width; ++x, ++t) {
                layout.centers(t, 0) = (x + 0.5) / lvl.width;
                layout.centers(t, 1) = (y + 0.5) / lvl.height;
                layout.level.push_back(level_index);
                layout.cell.push_back(static_cast<double>(lvl.stride) / image_size);
            }
    }
    return layout;
}

ad::Matrix sine_position_embedding(const ad::Matrix& centers, int dim) {
    const int half = dim / 2;
    const int freqs = std::max(1, half / 2);
    ad::Matrix out = ad::Matrix::Zero(centers.rows(), dim);
    for (Eigen::Index t = 0; t < centers.rows(); ++t) {
        for (int axis = 0; axis < 2; ++axis) {
            const double coord = centers(t, axis) * 2.0 * M_PI;
            for (int f = 0; f < freqs; ++f) {
                const double rate = std::pow(100.0, -static_cast<double>(f) / freqs);
                const int base = axis * half + 2 * f;
                if (base < dim) out(t, base) = std::sin(coord * rate * 8.0);
                if (base + 1 < dim) out(t, base + 1) = std::cos(coord * rate * 8.0);
            }
        }
    }
    return out;
}

EncoderBlock::EncoderBlock(nn::ParamStore& store, const std::string& name, const ModelConfig& cfg, Rng& rng)
    : norm_attn_(store, name + ".norm1", cfg.feature_dim),
      attn_(store, name + ".attn", cfg.feature_dim, cfg.num_heads, rng),
      norm_ffn_(store, name + ".norm2", cfg.feature_dim),
      ffn_(store, name + ".ffn", cfg.feature_dim, cfg.ffn_dim, rng) {}

ad::Var EncoderBlock::operator()(const ad::Var& x, const ad::Var* pos, const ad::KeyMask* mask) const {
    const ad::Var h = norm_attn_(x);
    const ad::Var qk = pos ? ad::add(h, *pos) : h;
    ad::Var y = ad::add(x, attn_(qk, qk, h, mask));
    return ad::add(y, ffn_(norm_ffn_(y)));
}

ImageEnhancer::ImageEnhancer(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng)
    : image_size_(cfg.image_size), dim_(cfg.feature_dim) {
    ad::Matrix lvl(cfg.num_feature_levels, cfg.feature_dim);
    for (Eigen::Index i = 0; i < lvl.size(); ++i) lvl.data()[i] = normal(rng, 0.0, 0.1);
    level_embed_ = store.add("encoder.image.level_embed", std::move(lvl));
    for (int i = 0; i < cfg.num_encoder_layers; ++i)
        blocks_.emplace_back(store, "encoder.image.layer" + std::to_string(i), cfg, rng);
    out_norm_ = nn::LayerNorm(store, "encoder.image.out_norm", cfg.feature_dim);
}

ad::Var ImageEnhancer::operator()(const ImageFeaturePyramid& pyr, TokenLayout* layout_out) const {
    pyr.validate();
    if (pyr.channels() != dim_) throw InputError("image features do not match feature_dim");
    std::vector<ad::Var> blocks;
    blocks.reserve(pyr.levels.size());
    for (const auto& l : pyr.levels) blocks.push_back(l.features);
    const ad::Var tokens = blocks.size() == 1 ? blocks.front() : ad::concat_rows(blocks);
    TokenLayout layout = make_layout(pyr, image_size_);
    ad::Var out = forward_tokens(tokens, layout);
    if (layout_out) *layout_out = std::move(layout);
    return out;
}

ad::Var ImageEnhancer::forward_tokens(const ad::Var& tokens, const TokenLayout& layout) const {
    if (tokens.rows() != layout.size()) throw InputError("token layout does not match token count");
    if (tokens.cols() != dim_) throw InputError("image tokens do not match feature_dim");
    for (int lvl : layout.level)
        if (lvl < 0 || lvl >= level_embed_.rows()) throw InputError("token level outside configured pyramid");
    const ad::Var level = ad::gather_rows(level_embed_, layout.level);
    const ad::Var pos = ad::constant(sine_position_embedding(layout.centers, dim_));
    ad::Var x = ad::add(ad::add(tokens, level), pos);
    for (const auto& block : blocks_) x = block(x, &pos, nullptr);
    return out_norm_(x);
}

TextEnhancer::TextEnhancer(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng) {
    for (int i = 0; i < cfg.num_text_layers; ++i)
        blocks_.emplace_back(store, "encoder.text.layer" + std::to_string(i), cfg, rng);
    out_norm_ = nn::LayerNorm(store, "encoder.text.out_norm", cfg.feature_dim);
}

ad::Var TextEnhancer::operator()(const ad::Var& tokens, const ad::KeyMask& mask) const {
    if (static_cast<Eigen::Index>(mask.size()) != tokens.rows()) throw InputError("text mask length mismatch");
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
        throw InputError("every text token is masked");
    ad::Var x = ad::mask_rows(tokens, mask);
    for (const auto& block : blocks_) x = block(x, nullptr, &mask);
    return ad::mask_rows(out_norm_(x), mask);
}

CrossModalFusion::CrossModalFusion(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng) {
    const int c = cfg.feature_dim;
    for (int i = 0; i < cfg.fusion_rounds(); ++i) {
        const std::string p = "encoder.fusion.round" + std::to_string(i);
        Round r;
        r.img_norm_a = nn::LayerNorm(store, p + ".t2i.img_norm", c);
        r.txt_norm_a = nn::LayerNorm(store, p + ".t2i.txt_norm", c);
        r.text_to_image = nn::MultiHeadAttention(store, p + ".t2i.attn", c, cfg.num_heads, rng, true);
        r.txt_norm_b = nn::LayerNorm(store, p + ".i2t.txt_norm", c);
        r.img_norm_b = nn::LayerNorm(store, p + ".i2t.img_norm", c);
        r.image_to_text = nn::MultiHeadAttention(store, p + ".i2t.attn", c, cfg.num_heads, rng, true);
        layers_.push_back(std::move(r));
    }
}

std::pair<ad::Var, ad::Var> CrossModalFusion::operator()(const ad::Var& v_img, const ad::Var& v_txt,
                                                         const ad::KeyMask& mask, int rounds,
                                                         std::vector<ad::Matrix>* text_to_image_weights) const {
    if (rounds < 1) throw ConfigError("fusion requires at least one round");
    if (rounds > max_rounds())
        throw ConfigError("requested " + std::to_string(rounds) + " fusion rounds but only " +
                          std::to_string(max_rounds()) + " are built");
    if (v_img.cols() != v_txt.cols()) throw InputError("image and text feature dims differ");
    ad::Var img = v_img;
    ad::Var txt = v_txt;
    for (int i = 0; i < rounds; ++i) {
        const Round& r = layers_[static_cast<std::size_t>(i)];
        const ad::Var txt_kv = r.txt_norm_a(txt);
        std::vector<ad::Matrix> weights;
        img = ad::add(img, r.text_to_image(r.img_norm_a(img), txt_kv, txt_kv, &mask,
                                           text_to_image_weights ? &weights : nullptr));
        if (text_to_image_weights)
            text_to_image_weights->insert(text_to_image_weights->end(), weights.begin(), weights.end());
        const ad::Var img_kv = r.img_norm_b(img);
        txt = ad::add(txt, r.image_to_text(r.txt_norm_b(txt), img_kv, img_kv));
        txt = ad::mask_rows(txt, mask);
        counter_->fetch_add(1);
    }
    return {img, txt};
}

FeatureEncoder::FeatureEncoder(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng)
    : rounds_(cfg.fusion_rounds()), image_(store, cfg, rng), text_(store, cfg, rng), fusion_(store, cfg, rng) {}

FusedFeatures FeatureEncoder::operator()(const ImageFeaturePyramid& pyr, const TextTokens& text) const {
    FusedFeatures out;
    const ad::Var img = image_(pyr, &out.layout);
    const ad::Var txt = text_(text.embeddings, text.mask);
    auto [fi, ft] = fusion_(img, txt, text.mask, rounds_);
    out.v_img = std::move(fi);
    out.v_txt = std::move(ft);
    out.text_mask = text.mask;
    return out;
}

}  // namespace ovg

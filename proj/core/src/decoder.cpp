#include "ovg/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ovg/errors.hpp"

namespace ovg {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::vector<double> alignment_scores(const ad::Matrix& queries, const ad::Matrix& v_txt, const ad::KeyMask& mask) {
    return reduce_max(similarity_logits(queries, v_txt, mask));
}

std::vector<NormBox> boxes_from_logits(const ad::Matrix& logits) {
    std::vector<NormBox> out;
    out.reserve(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i)
        out.push_back({sigmoid(logits(i, 0)), sigmoid(logits(i, 1)), std::max(sigmoid(logits(i, 2)), 1e-12),
                       std::max(sigmoid(logits(i, 3)), 1e-12)});
    return out;
}

DecoderLayer::DecoderLayer(nn::ParamStore& store, const std::string& name, const ModelConfig& cfg, Rng& rng)
    : norm_kind_(cfg.update_norm),
      pos_in_(store, name + ".anchor_pos.fc1", 4, cfg.feature_dim, rng),
      pos_out_(store, name + ".anchor_pos.fc2", cfg.feature_dim, cfg.feature_dim, rng),
      norm_self_(store, name + ".self.norm", cfg.feature_dim),
      norm_image_(store, name + ".image.norm", cfg.feature_dim),
      norm_text_(store, name + ".text.norm", cfg.feature_dim),
      self_attn_(store, name + ".self.attn", cfg.feature_dim, cfg.num_heads, rng),
      image_attn_(store, name + ".image.attn", cfg.feature_dim, cfg.num_heads, rng),
      text_attn_(store, name + ".text.attn", cfg.feature_dim, cfg.num_heads, rng),
      update_norm_inner_(store, name + ".update.norm_inner", cfg.feature_dim),
      update_norm_outer_(store, name + ".update.norm_outer", cfg.feature_dim),
      ffn_(store, name + ".ffn", cfg.feature_dim, cfg.ffn_dim, rng),
      box_hidden_(store, name + ".box.fc1", cfg.feature_dim, cfg.feature_dim, rng),
      box_out_(store, name + ".box.fc2", cfg.feature_dim, 4, rng, true) {}

ad::Var DecoderLayer::normalize(const ad::Var& x, int which) const {
    if (norm_kind_ == UpdateNorm::l2) return ad::l2_normalize_rows(x);
    return which == 0 ? update_norm_inner_(x) : update_norm_outer_(x);
}

DecodeTrace DecoderLayer::decode(const ad::Var& queries, const ad::Var& anchor_logits, const ad::Var& v_img_mod,
                                 const ad::Var& v_txt, const ad::KeyMask& mask) const {
    if (anchor_logits.rows() != queries.rows() || anchor_logits.cols() != 4)
        throw InputError("decoder: anchors must be (k, 4)");
    const ad::Var pos = pos_out_(ad::relu(pos_in_(ad::sigmoid(anchor_logits))));

    DecodeTrace tr;
    const ad::Var q_self = ad::add(norm_self_(queries), pos);
    tr.self_attended = self_attn_(q_self, q_self, norm_self_(queries));

    const ad::Var q_img = ad::add(norm_image_(ad::add(queries, tr.self_attended)), pos);
    tr.image_gathered = ad::add(tr.self_attended, image_attn_(q_img, v_img_mod, v_img_mod));

    const ad::Var q_txt = norm_text_(ad::add(queries, tr.image_gathered));
    tr.text_update = ad::add(tr.image_gathered, text_attn_(q_txt, v_txt, v_txt, &mask));

    const ad::Var inner = normalize(ad::add(queries, tr.text_update), 0);
    const ad::Var pre = ffn_disabled_ ? inner : ad::add(inner, ffn_(inner));
    tr.updated = normalize(pre, 1);
    return tr;
}

ad::Var DecoderLayer::refine(const ad::Var& queries, const ad::Var& anchor_logits) const {
    return ad::add(anchor_logits, box_out_(ad::relu(box_hidden_(queries))));
}

Decoder::Decoder(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng) {
    for (int i = 0; i < cfg.num_decoder_layers; ++i)
        layers_.emplace_back(store, "decoder.layer" + std::to_string(i), cfg, rng);
}

DecoderOutput Decoder::operator()(const QuerySet& queries, const ad::Var& v_img_mod, const ad::Var& v_txt,
                                  const ad::KeyMask& mask, double image_width, double image_height) const {
    DecoderOutput out;
    ad::Var q = queries.content;
    ad::Var anchors = queries.anchor_logits;
    for (const auto& layer : layers_) {
        q = layer.decode(q, anchors, v_img_mod, v_txt, mask).updated;
        counter_->fetch_add(1);
        anchors = layer.refine(q, anchors);
        LayerPrediction pred;
        pred.queries = q;
        pred.box_logits = anchors;
        pred.boxes = boxes_from_logits(anchors.value());
        pred.scores = alignment_scores(q.value(), v_txt.value(), mask);
        out.layers.push_back(std::move(pred));
    }
    const auto& scores = out.final_layer().scores;
    out.top1_index = static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    out.top1_norm = out.final_layer().boxes[static_cast<std::size_t>(out.top1_index)];
    out.top1 = norm_to_bbox(out.top1_norm, image_width, image_height, true);
    return out;
}

}  // namespace ovg

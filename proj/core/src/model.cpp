#include "ovg/model.hpp"

#include <algorithm>
#include <numeric>

#include "ovg/errors.hpp"
#include "ovg/losses.hpp"

namespace ovg {

Grounder::Grounder(const ModelConfig& cfg, const Vocabulary& vocab)
    : Grounder(cfg, vocab, BackboneFactories::for_config(cfg)) {}

Grounder::Grounder(const ModelConfig& cfg, const Vocabulary& vocab, const BackboneFactories& factories)
    : cfg_(cfg), vocab_(vocab) {
    cfg_.validate();
    if (!factories.image || !factories.text) throw ConfigError("backbone factories are incomplete");
    // Construction order fixes parameter names and the draw order of the rng.
    Rng rng = make_rng(cfg_.seed);
    image_backbone_ = factories.image(store_, cfg_, rng);
    text_backbone_ = factories.text(store_, cfg_, vocab_, rng);
    encoder_ = FeatureEncoder(store_, cfg_, rng);
    selector_ = QuerySelector(store_, cfg_, rng);
    lgfa_ = Lgfa(store_, cfg_, rng);
    decoder_ = Decoder(store_, cfg_, rng);
}

ForwardResult Grounder::forward_pixels(const ad::Matrix& pixels, const std::string& expression, double image_width,
                                       double image_height) const {
    const int size = image_backbone_->input_size();
    if (pixels.rows() != static_cast<Eigen::Index>(size) * size || pixels.cols() != 3)
        throw InputError("pixel matrix must be (" + std::to_string(size * size) + ", 3)");
    ForwardResult r;
    const ImageFeaturePyramid pyr = image_backbone_->embed(ad::constant(pixels), size, size);
    r.text = text_backbone_->embed(expression);
    r.fused = encoder_(pyr, r.text);
    const auto& mask = r.fused.text_mask;
    r.v_img_mod = lgfa_(r.fused.v_img, r.fused.v_txt, mask, &r.lgfa_scores);
    const ad::Var& tiqs_input = cfg_.tiqs_input == TiqsInput::pre_lgfa ? r.fused.v_img : r.v_img_mod;
    r.queries = selector_(tiqs_input, r.fused.v_txt, mask, r.fused.layout);
    r.output = decoder_(r.queries, r.v_img_mod, r.fused.v_txt, mask, image_width, image_height);
    return r;
}

ForwardResult Grounder::forward(const Image& image, const std::string& expression) const {
    if (image.channels != 3)
        throw InputError("image must have 3 channels, got " + std::to_string(image.channels));
    return forward_pixels(prepare_pixels(image, image_backbone_->input_size()), expression, image.width,
                          image.height);
}

DecoderOutput Grounder::predict(const Image& image, const std::string& expression) const {
    ad::NoGradGuard guard;
    return forward(image, expression).output;
}

ad::Matrix prepare_pixels(const Image& image, int size) {
    if (image.width == size && image.height == size) return to_pixel_matrix(image);
    return to_pixel_matrix(resize_bilinear(image, size, size));
}

ad::Var masked_mean(const ad::Var& tokens, const ad::KeyMask& mask) {
    const long n = std::count(mask.begin(), mask.end(), true);
    if (n == 0) throw InputError("masked mean over an all-masked sequence");
    ad::Matrix w = ad::Matrix::Zero(1, tokens.rows());
    for (Eigen::Index i = 0; i < tokens.rows(); ++i)
        if (mask[static_cast<std::size_t>(i)]) w(0, i) = 1.0 / static_cast<double>(n);
    return ad::matmul(ad::constant(std::move(w)), tokens);
}

namespace {

struct LayerTerms {
    ad::Var giou, l1, cts;
    int positive = 0;
};

LayerTerms layer_terms(const LayerPrediction& layer, const ad::Var& text, const ad::Var& v_txt,
                       const ad::KeyMask& mask, const NormBox& gt, const ModelConfig& cfg) {
    LayerTerms t;
    const MatchResult match = assign_positives(layer.boxes, gt, cfg);
    t.positive = match.positives.front();
    const ad::Var box = ad::sigmoid(ad::slice_rows(layer.box_logits, t.positive, 1));
    t.giou = giou_loss(box, gt);
    t.l1 = l1_loss(box, gt);
    const ad::Var objects = ad::l2_normalize_rows(layer.queries);
    t.cts = contrastive_loss(text, objects, match.positives, cfg.temperature);
    if (cfg.contrastive_symmetric) {
        // Object-to-text direction at token level: the positive query against
        // every unmasked text token, all of which count as positives.
        std::vector<int> valid;
        for (std::size_t j = 0; j < mask.size(); ++j)
            if (mask[j]) valid.push_back(static_cast<int>(j));
        const ad::Var tokens = ad::l2_normalize_rows(ad::gather_rows(v_txt, valid));
        std::vector<int> all(valid.size());
        std::iota(all.begin(), all.end(), 0);
        const ad::Var reverse =
            contrastive_loss(ad::slice_rows(objects, t.positive, 1), tokens, all, cfg.temperature);
        t.cts = ad::scale(t.cts + reverse, 0.5);
    }
    return t;
}

}  // namespace

LossTerms grounding_loss(const ForwardResult& result, const NormBox& gt, const ModelConfig& cfg) {
    const ad::Var text = ad::l2_normalize_rows(masked_mean(result.fused.v_txt, result.fused.text_mask));
    const auto& layers = result.output.layers;
    if (layers.empty()) throw InputError("decoder produced no layers");
    LossTerms out;
    const std::size_t first = cfg.aux_loss ? 0 : layers.size() - 1;
    for (std::size_t i = first; i < layers.size(); ++i) {
        const LayerTerms t = layer_terms(layers[i], text, result.fused.v_txt, result.fused.text_mask, gt, cfg);
        const ad::Var total = total_loss(t.giou, t.l1, t.cts, cfg);
        out.total = out.total.defined() ? out.total + total : total;
        if (i + 1 == layers.size()) {
            out.giou = t.giou.item();
            out.l1 = t.l1.item();
            out.cts = t.cts.item();
            out.positive = t.positive;
        }
    }
    return out;
}

}  // namespace ovg

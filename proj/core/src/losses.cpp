#include "ovg/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ovg/errors.hpp"

namespace ovg {

double l1_loss(const NormBox& pred, const NormBox& gt) {
    return (std::abs(pred.cx - gt.cx) + std::abs(pred.cy - gt.cy) + std::abs(pred.w - gt.w) +
            std::abs(pred.h - gt.h)) /
           4.0;
}

double giou(const BBox& a, const BBox& b) {
    const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    const double enclose = (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) * (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
    const double iou = uni > 0.0 ? inter / uni : 0.0;
    if (!(enclose > 0.0)) return iou;
    return iou - (enclose - uni) / enclose;
}

double giou_loss(const BBox& pred, const BBox& gt) {
    if (!(gt.area() > 0.0)) throw AnnotationError("ground-truth box has zero area");
    return 1.0 - giou(pred, gt);
}

ad::Var l1_loss(const ad::Var& pred, const NormBox& gt) {
    if (pred.rows() != 1 || pred.cols() != 4) throw InputError("l1_loss expects a (1, 4) prediction");
    ad::Matrix g(1, 4);
    g << gt.cx, gt.cy, gt.w, gt.h;
    return ad::mean(ad::abs(ad::sub(pred, ad::constant(std::move(g)))));
}

ad::Var giou_loss(const ad::Var& pred, const NormBox& gt) {
    if (pred.rows() != 1 || pred.cols() != 4) throw InputError("giou_loss expects a (1, 4) prediction");
    if (!(gt.w > 0.0 && gt.h > 0.0)) throw AnnotationError("ground-truth box has zero area");
    using ad::Var;
    auto c = [](double v) { return ad::constant(ad::Matrix::Constant(1, 1, v)); };
    const Var cx = ad::element(pred, 0, 0), cy = ad::element(pred, 0, 1);
    const Var hw = ad::scale(ad::element(pred, 0, 2), 0.5), hh = ad::scale(ad::element(pred, 0, 3), 0.5);
    const Var px1 = ad::sub(cx, hw), px2 = ad::add(cx, hw);
    const Var py1 = ad::sub(cy, hh), py2 = ad::add(cy, hh);
    const Var gx1 = c(gt.cx - 0.5 * gt.w), gx2 = c(gt.cx + 0.5 * gt.w);
    const Var gy1 = c(gt.cy - 0.5 * gt.h), gy2 = c(gt.cy + 0.5 * gt.h);
    const Var zero = c(0.0);
    const Var iw = ad::maximum(ad::sub(ad::minimum(px2, gx2), ad::maximum(px1, gx1)), zero);
    const Var ih = ad::maximum(ad::sub(ad::minimum(py2, gy2), ad::maximum(py1, gy1)), zero);
    const Var inter = ad::mul(iw, ih);
    const Var pred_area = ad::mul(ad::sub(px2, px1), ad::sub(py2, py1));
    const Var uni = ad::sub(ad::add_scalar(pred_area, gt.w * gt.h), inter);
    const Var enclose = ad::mul(ad::sub(ad::maximum(px2, gx2), ad::minimum(px1, gx1)),
                                ad::sub(ad::maximum(py2, gy2), ad::minimum(py1, gy1)));
    const Var iou = ad::mul(inter, ad::reciprocal(uni));
    const Var penalty = ad::mul(ad::sub(enclose, uni), ad::reciprocal(enclose));
    return ad::add_scalar(ad::scale(ad::sub(iou, penalty), -1.0), 1.0);
}

MatchResult assign_positives(std::span<const NormBox> boxes, const NormBox& gt, const ModelConfig& cfg) {
    MatchResult m;
    if (boxes.empty()) return m;
    const BBox g = norm_to_bbox(gt, 1.0, 1.0);
    m.cost.reserve(boxes.size());
    for (const auto& b : boxes)
        m.cost.push_back(cfg.lambda_l1 * l1_loss(b, gt) + cfg.lambda_giou * giou_loss(norm_to_bbox(b, 1.0, 1.0), g));
    const auto best = std::min_element(m.cost.begin(), m.cost.end());
    m.positives.push_back(static_cast<int>(best - m.cost.begin()));
    return m;
}

MatchResult assign_positives(const DecoderOutput& output, const NormBox& gt, const ModelConfig& cfg) {
    return assign_positives(output.final_layer().boxes, gt, cfg);
}

ad::Var contrastive_loss(const ad::Var& text, const ad::Var& objects, std::span<const int> positives, double tau) {
    if (positives.empty()) throw MatchingError("contrastive loss needs at least one positive object");
    if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
    if (text.rows() != 1 || text.cols() != objects.cols())
        throw InputError("contrastive loss: text must be (1, C) matching object width");
    for (int j : positives)
        if (j < 0 || j >= objects.rows()) throw InputError("contrastive loss: positive index out of range");
    const ad::Var logits = ad::scale(ad::matmul_nt(text, objects), 1.0 / tau);  // (1, N)
    const ad::Var lse = ad::logsumexp_rows(logits);
    const ad::Var picked = ad::gather_rows(ad::transpose(logits), positives);  // (|P|, 1)
    return ad::sub(lse, ad::mean(picked));
}

double contrastive_loss(const ad::Matrix& text, const ad::Matrix& objects, std::span<const int> positives,
                        double tau) {
    ad::NoGradGuard guard;
    return contrastive_loss(ad::constant(text), ad::constant(objects), positives, tau).item();
}

double total_loss(double l_giou, double l_l1, double l_cts, const ModelConfig& cfg) {
    return cfg.lambda_giou * l_giou + cfg.lambda_l1 * l_l1 + cfg.lambda_cts * l_cts;
}

ad::Var total_loss(const ad::Var& l_giou, const ad::Var& l_l1, const ad::Var& l_cts, const ModelConfig& cfg) {
    return ad::add(ad::add(ad::scale(l_giou, cfg.lambda_giou), ad::scale(l_l1, cfg.lambda_l1)),
                   ad::scale(l_cts, cfg.lambda_cts));
}

}  // namespace ovg

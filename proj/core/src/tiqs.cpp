#include "ovg/tiqs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ovg/errors.hpp"

namespace ovg {

namespace {

constexpr double kNormEps = 1e-12;

double logit(double p) {
    p = std::clamp(p, 1e-6, 1.0 - 1e-6);
    return std::log(p / (1.0 - p));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

ad::Matrix similarity_logits(const ad::Matrix& v_img, const ad::Matrix& v_txt, const ad::KeyMask& mask) {
    if (v_img.rows() == 0 || v_txt.rows() == 0) throw InputError("similarity needs non-empty inputs");
    if (v_img.cols() != v_txt.cols()) throw InputError("similarity: feature dims differ");
    if (static_cast<Eigen::Index>(mask.size()) != v_txt.rows()) throw InputError("similarity: mask length mismatch");
    const Eigen::VectorXd ni = v_img.rowwise().norm().cwiseMax(kNormEps);
    const Eigen::VectorXd nt = v_txt.rowwise().norm().cwiseMax(kNormEps);
    ad::Matrix s = v_img * v_txt.transpose();
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
        if (!mask[j]) {
            s.col(j).setConstant(-std::numeric_limits<double>::infinity());
            continue;
        }
        for (Eigen::Index i = 0; i < s.rows(); ++i) s(i, j) = std::clamp(s(i, j) / (ni(i) * nt(j)), -1.0, 1.0);
    }
    return s;
}

std::vector<double> reduce_max(const ad::Matrix& logits) {
    std::vector<double> out(static_cast<std::size_t>(logits.rows()), -std::numeric_limits<double>::infinity());
    for (Eigen::Index i = 0; i < logits.rows(); ++i)
        for (Eigen::Index j = 0; j < logits.cols(); ++j)
            if (std::isfinite(logits(i, j))) out[i] = std::max(out[i], logits(i, j));
    return out;
}

std::vector<int> topk_indices(std::span<const double> scores, int k) {
    if (k <= 0) throw ConfigError("top-k requires k >= 1");
    if (k > static_cast<int>(scores.size()))
        throw ConfigError("top-k: k=" + std::to_string(k) + " exceeds " + std::to_string(scores.size()) + " candidates");
    std::vector<int> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto before = [&](int a, int b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), before);
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

std::vector<NormBox> QuerySet::anchors() const {
    std::vector<NormBox> out;
    const ad::Matrix& l = anchor_logits.value();
    for (Eigen::Index i = 0; i < l.rows(); ++i)
        out.push_back({sigmoid(l(i, 0)), sigmoid(l(i, 1)), sigmoid(l(i, 2)), sigmoid(l(i, 3))});
    return out;
}

QuerySelector::QuerySelector(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng)
    : k_(cfg.top_k), anchor_head_(store, "tiqs.anchor_head", cfg.feature_dim, 4, rng, true) {}

QuerySet QuerySelector::operator()(const ad::Var& v_img, const ad::Var& v_txt, const ad::KeyMask& mask,
                                   const TokenLayout& layout) const {
    return select(similarity_logits(v_img.value(), v_txt.value(), mask), v_img, layout, k_);
}

QuerySet QuerySelector::select(const ad::Matrix& logits, const ad::Var& v_img, const TokenLayout& layout,
                               int k) const {
    if (logits.rows() != v_img.rows() || layout.size() != v_img.rows())
        throw InputError("query selection: logits, tokens and layout disagree on token count");
    const std::vector<double> reduced = reduce_max(logits);
    QuerySet q;
    q.token_index = topk_indices(reduced, k);
    for (int i : q.token_index) q.score.push_back(reduced[static_cast<std::size_t>(i)]);
    q.content = ad::gather_rows(v_img, q.token_index);
    ad::Matrix prior(k, 4);
    for (int r = 0; r < k; ++r) {
        const int t = q.token_index[static_cast<std::size_t>(r)];
        // Initial extent spans two grid cells of the token's level.
        const double size = std::min(0.9, 2.0 * layout.cell[static_cast<std::size_t>(t)]);
        prior(r, 0) = logit(layout.centers(t, 0));
        prior(r, 1) = logit(layout.centers(t, 1));
        prior(r, 2) = logit(size);
        prior(r, 3) = logit(size);
    }
    q.anchor_logits = ad::add(anchor_head_(q.content), ad::constant(std::move(prior)));
    return q;
}

}  // namespace ovg

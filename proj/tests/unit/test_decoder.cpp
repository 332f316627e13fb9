#include <gtest/gtest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "ovg/decoder.hpp"
#include "ovg/model.hpp"

using namespace ovg;
using ovg::testkit::random_matrix;

namespace {

struct LayerFixture {
    ModelConfig cfg = testkit::grad_config();
    nn::ParamStore store;
    Rng rng = make_rng(31);
    DecoderLayer layer;
    ad::Var queries, anchors, img, txt;
    ad::KeyMask mask{true, true, false};

    explicit LayerFixture(int k = 4) {
        layer = DecoderLayer(store, "dec", cfg, rng);
        store.perturb(rng, 0.1);
        queries = ad::parameter(random_matrix(rng, k, 8));
        anchors = ad::parameter(random_matrix(rng, k, 4, 0.5));
        img = ad::parameter(random_matrix(rng, 12, 8));
        txt = ad::parameter(random_matrix(rng, 3, 8));
    }

    void zero_params(const std::string& needle) {
        for (auto& [name, v] : store.entries())
            if (name.find(needle) != std::string::npos) {
                ad::Var h = v;
                h.mutable_value().setZero();
            }
    }
};

Image random_image(Rng& rng, int size) {
    Image im(size, size);
    for (auto& px : im.data) px = uniform(rng, 0.0, 1.0);
    return im;
}

}  // namespace

TEST(DecoderLayer, ZeroTextUpdateReducesToQueryOnlyRule) {
    LayerFixture f;
    f.zero_params("attn.o.");
    const DecodeTrace tr = f.layer.decode(f.queries, f.anchors, f.img, f.txt, f.mask);
    EXPECT_EQ(tr.text_update.value().cwiseAbs().maxCoeff(), 0.0);
    const ad::Var inner = f.layer.normalize(f.queries, 0);
    const ad::Matrix ffn_part = tr.updated.value();
    f.layer.disable_ffn(true);
    const ad::Matrix no_ffn = f.layer.decode(f.queries, f.anchors, f.img, f.txt, f.mask).updated.value();
    EXPECT_LT((no_ffn - f.layer.normalize(inner, 1).value()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GT((ffn_part - no_ffn).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(DecoderLayer, FfnDisabledStructure) {
    for (UpdateNorm norm : {UpdateNorm::layer, UpdateNorm::l2}) {
        LayerFixture f;
        f.cfg.update_norm = norm;
        nn::ParamStore store;
        Rng rng = make_rng(32);
        DecoderLayer layer(store, "dec", f.cfg, rng);
        store.perturb(rng, 0.1);
        layer.disable_ffn(true);
        const DecodeTrace tr = layer.decode(f.queries, f.anchors, f.img, f.txt, f.mask);
        const ad::Var expect = layer.normalize(layer.normalize(ad::add(f.queries, tr.text_update), 0), 1);
        EXPECT_EQ(tr.updated.value(), expect.value());
        if (norm == UpdateNorm::l2)
            for (Eigen::Index r = 0; r < tr.updated.rows(); ++r) EXPECT_NEAR(tr.updated.value().row(r).norm(), 1.0, 1e-12);
    }
}

TEST(DecoderLayer, SingleQuerySelfAttentionIsCopy) {
    LayerFixture f(1);
    const DecodeTrace tr = f.layer.decode(f.queries, f.anchors, f.img, f.txt, f.mask);
    EXPECT_EQ(tr.updated.rows(), 1);
    // With one key, self-attention returns the projected value of the query itself,
    // independent of the positional query/key terms.
    const DecodeTrace moved = f.layer.decode(f.queries, ad::constant(f.anchors.value().array() + 1.0), f.img, f.txt, f.mask);
    EXPECT_LT((tr.self_attended.value() - moved.self_attended.value()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DecoderLayer, ZeroRefinementKeepsAnchors) {
    LayerFixture f;
    f.zero_params("box.fc2");
    EXPECT_EQ(f.layer.refine(f.queries, f.anchors).value(), f.anchors.value());
}

TEST(DecoderLayer, FullLayerGradient) {
    LayerFixture f;
    const ad::Matrix wq = random_matrix(f.rng, 4, 8), wb = random_matrix(f.rng, 4, 4);
    auto loss = [&] {
        const ad::Var q = f.layer.decode(f.queries, f.anchors, f.img, f.txt, f.mask).updated;
        return ad::add(testkit::readout(q, wq), testkit::readout(ad::sigmoid(f.layer.refine(q, f.anchors)), wb));
    };
    auto leaves = f.store.entries();
    for (auto [n, v] : {std::pair{"queries", f.queries}, {"anchors", f.anchors}, {"img", f.img}, {"txt", f.txt}})
        leaves.emplace_back(n, v);
    const auto res = testkit::gradcheck(loss, leaves);
    EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

TEST(BoxHead, SigmoidRange) {
    Rng rng = make_rng(33);
    const auto boxes = boxes_from_logits(random_matrix(rng, 200, 4, 30.0));
    for (const auto& b : boxes) {
        for (double v : {b.cx, b.cy, b.w, b.h}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_GT(b.w, 0.0);
    }
}

TEST(AlignmentScores, CosineRange) {
    Rng rng = make_rng(34);
    const auto s = alignment_scores(random_matrix(rng, 50, 8), random_matrix(rng, 4, 8), {true, false, true, true});
    for (double v : s) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Pipeline, ToyContractLayerCountAndArgmax) {
    const ModelConfig cfg = ModelConfig::toy();
    const Vocabulary vocab({"red square", "blue circle"});
    Grounder model(cfg, vocab);
    Rng rng = make_rng(35);
    const Image im = random_image(rng, 64);
    const long before = model.decoder().layer_calls();
    const DecoderOutput out = model.predict(im, "red square");
    EXPECT_EQ(model.decoder().layer_calls() - before, cfg.num_decoder_layers);
    ASSERT_EQ(static_cast<int>(out.layers.size()), cfg.num_decoder_layers);
    for (const auto& layer : out.layers) {
        EXPECT_EQ(static_cast<int>(layer.boxes.size()), 10);
        EXPECT_EQ(layer.queries.rows(), 10);
        for (double s : layer.scores) EXPECT_TRUE(std::isfinite(s));
    }
    EXPECT_GE(out.top1.x1, 0.0);
    EXPECT_GE(out.top1.y1, 0.0);
    EXPECT_LE(out.top1.x2, 64.0);
    EXPECT_LE(out.top1.y2, 64.0);
    const auto& scores = out.final_layer().scores;
    EXPECT_EQ(out.top1_index, std::max_element(scores.begin(), scores.end()) - scores.begin());
    for (double c : {0.01, 3.0, 1e6}) {
        std::vector<double> scaled = scores;
        for (double& s : scaled) s *= c;
        EXPECT_EQ(out.top1_index, std::max_element(scaled.begin(), scaled.end()) - scaled.begin());
    }
    const DecoderOutput again = model.predict(im, "red square");
    EXPECT_EQ(again.top1, out.top1);
    EXPECT_EQ(again.top1_index, out.top1_index);
}

TEST(Pipeline, SameSeedSameWeights) {
    const ModelConfig cfg = ModelConfig::toy();
    const Vocabulary vocab({"red square"});
    Grounder a(cfg, vocab), b(cfg, vocab);
    ASSERT_EQ(a.params().entries().size(), b.params().entries().size());
    for (std::size_t i = 0; i < a.params().entries().size(); ++i)
        EXPECT_EQ(a.params().entries()[i].second.value(), b.params().entries()[i].second.value());
}

TEST(Pipeline, NonSquareImagesScaleTheTopBox) {
    const ModelConfig cfg = ModelConfig::toy();
    Grounder model(cfg, Vocabulary({"red square"}));
    Rng rng = make_rng(36);
    Image im(128, 96);
    for (auto& px : im.data) px = uniform(rng, 0.0, 1.0);
    const DecoderOutput out = model.predict(im, "red square");
    EXPECT_LE(out.top1.x2, 128.0);
    EXPECT_LE(out.top1.y2, 96.0);
    EXPECT_TRUE(out.top1.valid());
}

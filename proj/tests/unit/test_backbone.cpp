#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "ovg/backbone.hpp"
#include "ovg/errors.hpp"
#include "ovg/model.hpp"

using namespace ovg;
using ovg::testkit::random_matrix;

namespace {

struct ToyBackbones {
    ModelConfig cfg = ModelConfig::toy();
    nn::ParamStore store;
    Rng rng = make_rng(cfg.seed);
    Vocabulary vocab{std::vector<std::string>{"the red cup", "a blue square"}};
    ToyImageBackbone image{store, cfg, rng};
    ToyTextBackbone text{store, cfg, vocab, rng};
};

}  // namespace

TEST(ImageBackbone, ToyShapeContract) {
    ToyBackbones b;
    const Image zeros(64, 64, 3, 0.0);
    const ImageFeaturePyramid pyr = b.image.embed_image(zeros);
    ASSERT_EQ(pyr.levels.size(), 2u);
    EXPECT_EQ(pyr.levels[0].height, 16);
    EXPECT_EQ(pyr.levels[0].width, 16);
    EXPECT_EQ(pyr.levels[0].stride, 4);
    EXPECT_EQ(pyr.levels[0].features.cols(), 64);
    EXPECT_EQ(pyr.levels[1].height, 8);
    EXPECT_EQ(pyr.levels[1].width, 8);
    EXPECT_EQ(pyr.levels[1].stride, 8);
    EXPECT_EQ(pyr.num_tokens(), 320);
    EXPECT_NO_THROW(pyr.validate());
}

TEST(ImageBackbone, DeterministicAndChannelChecked) {
    ToyBackbones b;
    Rng rng = make_rng(9);
    Image img(64, 64, 3);
    for (auto& v : img.data) v = uniform(rng, 0, 1);
    const auto p1 = b.image.embed_image(img);
    const auto p2 = b.image.embed_image(img);
    for (std::size_t l = 0; l < p1.levels.size(); ++l)
        EXPECT_EQ(p1.levels[l].features.value(), p2.levels[l].features.value());
    EXPECT_THROW(b.image.embed_image(Image(64, 64, 1)), InputError);
    EXPECT_THROW(b.image.embed_image(Image(32, 32, 3)), InputError);
}

TEST(ImageBackbone, InputGradientMatchesFiniteDifferences) {
    ModelConfig cfg = ModelConfig::toy();
    cfg.image_size = 16;
    cfg.feature_dim = 8;
    cfg.num_heads = 2;
    nn::ParamStore store;
    Rng rng = make_rng(2);
    ToyImageBackbone image(store, cfg, rng);
    ad::Var pixels = ad::parameter(random_matrix(rng, 16 * 16, 3));
    const ad::Matrix w0 = random_matrix(rng, 16, 8), w1 = random_matrix(rng, 4, 8);
    auto f = [&] {
        const auto pyr = image.embed(pixels, 16, 16);
        return ad::add(testkit::readout(pyr.levels[0].features, w0), testkit::readout(pyr.levels[1].features, w1));
    };
    const auto res = testkit::gradcheck(f, {{"pixels", pixels}});
    EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

TEST(TextBackbone, ShapeTruncationAndUnknownWords) {
    ToyBackbones b;
    const TextTokens t = b.text.embed("red cup");
    EXPECT_EQ(t.length(), 2);
    EXPECT_EQ(t.embeddings.rows(), 2);
    EXPECT_EQ(t.embeddings.cols(), 64);

    std::string long_text;
    for (int i = 0; i < 40; ++i) long_text += "red ";
    EXPECT_EQ(b.text.embed(long_text).length(), 16);

    const TextTokens unk = b.text.embed("zebra Cup");
    EXPECT_EQ(b.vocab.index("zebra"), Vocabulary::kUnk);
    EXPECT_EQ(unk.tokens[1], "cup");
    EXPECT_EQ(unk.length(), 2);
}

TEST(TextBackbone, EmptyTextThrows) {
    ToyBackbones b;
    EXPECT_THROW(b.text.embed(""), InputError);
    EXPECT_THROW(b.text.embed("  \t "), InputError);
}

TEST(Vocabulary, SortedUniqueWithUnkFirst) {
    const Vocabulary v(std::vector<std::string>{"b a", "A c"});
    EXPECT_EQ(v.words(), (std::vector<std::string>{"<unk>", "a", "b", "c"}));
    EXPECT_EQ(Vocabulary::from_words(v.words()), v);
    EXPECT_THROW(Vocabulary::from_words({"a"}), ConfigError);
}

namespace {

/// A second image backbone: one average-pooled level per stride, then a
/// fixed channel lift. It owns no parameters.
class PoolingBackbone final : public ImageBackbone {
public:
    explicit PoolingBackbone(const ModelConfig& cfg) : cfg_(cfg) {}

    ImageFeaturePyramid embed(const ad::Var& pixels, int height, int width) const override {
        ImageFeaturePyramid pyr;
        for (int l = 0; l < cfg_.num_feature_levels; ++l) {
            const int p = 4 << l;
            const ad::Var patches = ad::patchify(pixels, height, width, 3, p);
            ad::Matrix lift = ad::Matrix::Zero(patches.cols(), cfg_.feature_dim);
            for (Eigen::Index i = 0; i < lift.rows(); ++i) lift(i, i % cfg_.feature_dim) = 1.0 / (p * p);
            pyr.levels.push_back({height / p, width / p, p, ad::matmul(patches, ad::constant(lift))});
        }
        return pyr;
    }
    int input_size() const override { return cfg_.image_size; }

private:
    ModelConfig cfg_;
};

}  // namespace

TEST(BackboneSeam, SecondBackboneRunsThroughTheSamePipeline) {
    ModelConfig cfg = ModelConfig::toy();
    cfg.backbone = "external";
    const Vocabulary vocab(std::vector<std::string>{"the red square"});
    EXPECT_THROW(Grounder(cfg, vocab), ConfigError);

    BackboneFactories f = BackboneFactories::toy();
    f.image = [](nn::ParamStore&, const ModelConfig& c, Rng&) -> std::unique_ptr<ImageBackbone> {
        return std::make_unique<PoolingBackbone>(c);
    };
    Grounder model(cfg, vocab, f);
    for (const auto& [name, _] : model.params().entries()) EXPECT_EQ(name.rfind("backbone.image", 0), std::string::npos);
    const DecoderOutput out = model.predict(Image(64, 64, 3, 0.3), "the red square");
    EXPECT_EQ(out.final_layer().boxes.size(), 10u);
    EXPECT_TRUE(out.top1.valid());
}

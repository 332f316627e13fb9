#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "ovg/checkpoint.hpp"
#include "ovg/data.hpp"
#include "ovg/errors.hpp"
#include "ovg/evaluate.hpp"
#include "ovg/model.hpp"
#include "ovg/train.hpp"

using namespace ovg;

namespace {

ModelConfig small_config() {
    ModelConfig cfg = ModelConfig::toy();
    cfg.feature_dim = 16;
    cfg.num_heads = 2;
    cfg.ffn_dim = 32;
    cfg.top_k = 4;
    cfg.batch_size = 2;
    cfg.train_steps = 4;
    return cfg;
}

std::vector<TrainingSample> scenes(int n, int size) {
    return grounding_samples(generate_synthetic(n, {}, 7), size);
}

}  // namespace

TEST(Grounder, ForwardResultShapes) {
    const ModelConfig cfg = small_config();
    const auto samples = scenes(1, cfg.image_size);
    Grounder model(cfg, build_vocabulary(samples));
    const auto& s = samples[0];
    const ForwardResult r = model.forward_pixels(s.pixels, s.expression, s.width, s.height);
    EXPECT_EQ(r.fused.v_img.rows(), cfg.num_image_tokens());
    EXPECT_EQ(r.lgfa_scores.rows(), cfg.num_image_tokens());
    EXPECT_EQ(r.v_img_mod.rows(), cfg.num_image_tokens());
    EXPECT_EQ(r.queries.size(), cfg.top_k);
    EXPECT_EQ(r.fused.v_txt.rows(), static_cast<Eigen::Index>(r.text.tokens.size()));
    EXPECT_THROW(model.forward_pixels(ad::Matrix::Zero(10, 3), s.expression, 10, 10), InputError);
    EXPECT_THROW(model.forward(Image(64, 64, 1), s.expression), InputError);
}

TEST(Grounder, TiqsInputSwitch) {
    ModelConfig cfg = small_config();
    const auto samples = scenes(1, cfg.image_size);
    const auto& s = samples[0];
    cfg.tiqs_input = TiqsInput::pre_lgfa;
    Grounder pre(cfg, build_vocabulary(samples));
    cfg.tiqs_input = TiqsInput::post_lgfa;
    Grounder post(cfg, build_vocabulary(samples));
    const auto a = pre.forward_pixels(s.pixels, s.expression, s.width, s.height);
    const auto b = post.forward_pixels(s.pixels, s.expression, s.width, s.height);
    // Same weights; only the token features the selector sees differ.
    EXPECT_EQ(a.queries.content.value(), ad::gather_rows(a.fused.v_img, a.queries.token_index).value());
    EXPECT_EQ(b.queries.content.value(), ad::gather_rows(b.v_img_mod, b.queries.token_index).value());
}

TEST(GroundingLoss, TermsAreConsistent) {
    ModelConfig cfg = small_config();
    const auto samples = scenes(1, cfg.image_size);
    Grounder model(cfg, build_vocabulary(samples));
    const auto& s = samples[0];
    const auto r = model.forward_pixels(s.pixels, s.expression, s.width, s.height);
    const NormBox gt = bbox_to_norm(s.target, s.width, s.height);
    const LossTerms t = grounding_loss(r, gt, cfg);
    EXPECT_NEAR(t.total.item(), cfg.lambda_giou * t.giou + cfg.lambda_l1 * t.l1 + cfg.lambda_cts * t.cts, 1e-12);
    EXPECT_GE(t.cts, 0.0);
    EXPECT_GE(t.giou, 0.0);
    EXPECT_LT(t.giou, 2.0);
    EXPECT_GE(t.positive, 0);
    EXPECT_LT(t.positive, cfg.top_k);

    cfg.aux_loss = true;
    EXPECT_GT(grounding_loss(r, gt, cfg).total.item(), t.total.item() - 1e-12);
    cfg.aux_loss = false;
    cfg.contrastive_symmetric = true;
    EXPECT_TRUE(std::isfinite(grounding_loss(r, gt, cfg).total.item()));
}

TEST(MaskedMean, IgnoresMaskedRows) {
    ad::Matrix m(3, 2);
    m << 1, 2, 100, 100, 3, 4;
    EXPECT_EQ(masked_mean(ad::constant(m), {true, false, true}).value(), (ad::Matrix(1, 2) << 2, 3).finished());
}

TEST(AdamW, FirstStepAndDecay) {
    nn::ParamStore store;
    ad::Var w = store.add("w", ad::Matrix::Constant(1, 2, 1.0));
    w.node()->grad_ref() = (ad::Matrix(1, 2) << 0.5, -2.0).finished();
    AdamW opt(store, 0.1, 0.01);
    opt.step();
    // Bias-corrected first step moves each weight by lr * sign(g) (up to eps),
    // after decoupled decay lr * wd * w.
    EXPECT_NEAR(w.value()(0, 0), 1.0 - 0.1 * 0.01 - 0.1, 1e-7);
    EXPECT_NEAR(w.value()(0, 1), 1.0 - 0.1 * 0.01 + 0.1, 1e-7);
    EXPECT_EQ(opt.steps(), 1);
    EXPECT_THROW(AdamW(store, 0.0, 0.0), ConfigError);
}

TEST(ClipGradNorm, RescalesGlobally) {
    nn::ParamStore store;
    ad::Var a = store.add("a", ad::Matrix::Zero(1, 1));
    ad::Var b = store.add("b", ad::Matrix::Zero(1, 1));
    a.node()->grad_ref()(0, 0) = 3.0;
    b.node()->grad_ref()(0, 0) = 4.0;
    EXPECT_DOUBLE_EQ(clip_grad_norm(store, 1.0), 5.0);
    EXPECT_NEAR(a.grad()(0, 0), 0.6, 1e-12);
    EXPECT_NEAR(b.grad()(0, 0), 0.8, 1e-12);
    EXPECT_NEAR(clip_grad_norm(store, 10.0), 1.0, 1e-12);
    EXPECT_NEAR(a.grad()(0, 0), 0.6, 1e-12);
}

TEST(Train, ShortRunsAreBitIdentical) {
    const ModelConfig cfg = small_config();
    const auto samples = scenes(4, cfg.image_size);
    auto run = [&] {
        Grounder model(cfg, build_vocabulary(samples));
        return train(model, samples);
    };
    const auto a = run(), b = run();
    ASSERT_EQ(a.size(), 4u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].loss, b[i].loss);
        EXPECT_EQ(a[i].grad_norm, b[i].grad_norm);
        EXPECT_TRUE(std::isfinite(a[i].loss));
    }
}

TEST(Checkpoint, RoundTripReproducesPredictions) {
    const ModelConfig cfg = small_config();
    const auto samples = scenes(2, cfg.image_size);
    Grounder model(cfg, build_vocabulary(samples));
    Rng rng = make_rng(71);
    model.params().perturb(rng, 0.05);
    const std::string text = serialize_checkpoint(model);
    const auto loaded = parse_checkpoint(text);
    EXPECT_EQ(loaded->config(), cfg);
    EXPECT_EQ(loaded->vocabulary(), model.vocabulary());
    EXPECT_EQ(serialize_checkpoint(*loaded), text);
    const auto& s = samples[1];
    EXPECT_EQ(loaded->forward_pixels(s.pixels, s.expression, s.width, s.height).output.top1,
              model.forward_pixels(s.pixels, s.expression, s.width, s.height).output.top1);
    EXPECT_EQ(checkpoint_kind(text), CheckpointKind::model);
    EXPECT_EQ(checkpoint_config(text), cfg);
}

TEST(Checkpoint, MismatchIsConfigError) {
    ModelConfig cfg = small_config();
    const auto samples = scenes(1, cfg.image_size);
    Grounder model(cfg, build_vocabulary(samples));
    const std::string text = serialize_checkpoint(model);
    cfg.feature_dim = 8;
    Grounder other(cfg, build_vocabulary(samples));
    EXPECT_THROW(load_weights(other, text), ConfigError);

    nlohmann::json j = nlohmann::json::parse(text);
    j["params"].erase(j["params"].begin());
    EXPECT_THROW(parse_checkpoint(j.dump()), ConfigError);
    j = nlohmann::json::parse(text);
    j["params"]["bogus"] = {{"rows", 1}, {"cols", 1}, {"data", {0.0}}};
    EXPECT_THROW(parse_checkpoint(j.dump()), ConfigError);
    EXPECT_THROW(parse_checkpoint("not json"), ParseError);
    EXPECT_EQ(checkpoint_kind(serialize_oracle_checkpoint(cfg)), CheckpointKind::oracle);
}

TEST(RunRecord, JsonRoundTrip) {
    RunRecord r;
    r.config = small_config();
    r.seed = 9;
    r.steps = {{1, 2.5, 0.5, 0.25, 0.125, 3.0}, {2, 0.1 + 0.2, 1e-300, 0, 0, 0}};
    r.wall_clock_seconds = 1.5;
    const RunRecord back = RunRecord::from_json(r.to_json());
    EXPECT_EQ(back.config, r.config);
    EXPECT_EQ(back.seed, 9u);
    ASSERT_EQ(back.steps.size(), 2u);
    EXPECT_EQ(back.steps[1].loss, 0.1 + 0.2);
    EXPECT_EQ(back.steps[1].giou, 1e-300);
}

TEST(Evaluate, OracleIsPerfectAndClipsPredictions) {
    const auto ds = generate_synthetic(6, {}, 3);
    const auto samples = grounding_samples(ds, 64);
    const Evaluation e = evaluate_grounding(OraclePredictor(64), samples);
    EXPECT_EQ(e.report.acc50(), 100.0);
    EXPECT_EQ(e.report.total, 6);
    const auto back = parse_predictions(e.predictions_json());
    ASSERT_EQ(back.size(), 6u);
    EXPECT_EQ(back[0].pred, e.predictions[0].pred);
    EXPECT_TRUE(back[0].correct);
}

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "ovg/errors.hpp"
#include "ovg/nn.hpp"

using namespace ovg;
using ovg::testkit::random_matrix;

TEST(ParamStore, RejectsDuplicateNames) {
    nn::ParamStore s;
    s.add("w", ad::Matrix::Zero(2, 2));
    EXPECT_THROW(s.add("w", ad::Matrix::Zero(1, 1)), ConfigError);
    EXPECT_EQ(s.num_scalars(), 4u);
    EXPECT_NE(s.find("w"), nullptr);
    EXPECT_EQ(s.find("nope"), nullptr);
}

TEST(Linear, ShapesAndZeroInit) {
    nn::ParamStore s;
    Rng rng = make_rng(1);
    nn::Linear lin(s, "lin", 3, 5, rng);
    nn::Linear zero(s, "zero", 3, 5, rng, true);
    const ad::Var x = ad::constant(random_matrix(rng, 4, 3));
    EXPECT_EQ(lin(x).rows(), 4);
    EXPECT_EQ(lin(x).cols(), 5);
    EXPECT_EQ(zero(x).value().norm(), 0.0);
}

TEST(Attention, SingleKeyCopiesValueProjection) {
    nn::ParamStore s;
    Rng rng = make_rng(2);
    nn::MultiHeadAttention attn(s, "a", 8, 2, rng);
    const ad::Var q = ad::constant(random_matrix(rng, 5, 8));
    const ad::Var kv = ad::constant(random_matrix(rng, 1, 8));
    std::vector<ad::Matrix> weights;
    const ad::Matrix out = attn(q, kv, kv, nullptr, &weights).value();
    ASSERT_EQ(weights.size(), 2u);
    for (const auto& w : weights) EXPECT_TRUE(w.isOnes(0.0));
    for (Eigen::Index r = 1; r < out.rows(); ++r) EXPECT_LT((out.row(r) - out.row(0)).norm(), 1e-12);
}

TEST(Attention, MaskedKeysGetZeroWeight) {
    nn::ParamStore s;
    Rng rng = make_rng(3);
    nn::MultiHeadAttention attn(s, "a", 8, 4, rng);
    const ad::Var q = ad::constant(random_matrix(rng, 3, 8));
    const ad::Var kv = ad::constant(random_matrix(rng, 4, 8));
    const ad::KeyMask mask{true, false, true, false};
    std::vector<ad::Matrix> weights;
    attn(q, kv, kv, &mask, &weights);
    for (const auto& w : weights) {
        EXPECT_EQ(w.col(1).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(w.col(3).cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Attention, Errors) {
    nn::ParamStore s;
    Rng rng = make_rng(4);
    EXPECT_THROW(nn::MultiHeadAttention(s, "bad", 8, 3, rng), ConfigError);
    nn::MultiHeadAttention attn(s, "a", 8, 2, rng);
    const ad::Var q = ad::constant(random_matrix(rng, 3, 8));
    const ad::Var kv = ad::constant(random_matrix(rng, 2, 8));
    const ad::KeyMask none{false, false};
    EXPECT_THROW(attn(q, kv, kv, &none), InputError);
    const ad::KeyMask short_mask{true};
    EXPECT_THROW(attn(q, kv, kv, &short_mask), InputError);
    EXPECT_THROW(attn(q, ad::constant(random_matrix(rng, 2, 4)), kv), InputError);
}

TEST(Attention, GradientMatchesFiniteDifferences) {
    nn::ParamStore s;
    Rng rng = make_rng(5);
    nn::MultiHeadAttention attn(s, "a", 8, 2, rng, true);
    s.perturb(rng, 0.2);
    ad::Var q = ad::parameter(random_matrix(rng, 3, 8));
    ad::Var kv = ad::parameter(random_matrix(rng, 4, 8));
    const ad::KeyMask mask{true, true, false, true};
    const ad::Matrix w = random_matrix(rng, 3, 8);
    auto leaves = s.entries();
    leaves.emplace_back("q", q);
    leaves.emplace_back("kv", kv);
    const auto res = testkit::gradcheck([&] { return testkit::readout(attn(q, kv, kv, &mask), w); }, leaves);
    EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

#include <gtest/gtest.h>

#include <Eigen/LU>
#include <cmath>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "ovg/errors.hpp"
#include "ovg/losses.hpp"

using namespace ovg;
using ovg::testkit::random_matrix;

namespace {

BBox random_box(Rng& rng) {
    const double x = uniform(rng, -5, 5), y = uniform(rng, -5, 5);
    return {x, y, x + uniform(rng, 0.01, 4), y + uniform(rng, 0.01, 4)};
}

oracle::Box ob(const BBox& b) { return {b.x1, b.y1, b.x2, b.y2}; }

ad::Matrix nb_row(const NormBox& b) {
    ad::Matrix m(1, 4);
    m << b.cx, b.cy, b.w, b.h;
    return m;
}

}  // namespace

TEST(L1Loss, Examples) {
    const NormBox a{0.3, 0.4, 0.2, 0.5};
    const NormBox b{0.4, 0.5, 0.3, 0.6};
    EXPECT_EQ(l1_loss(a, a), 0.0);
    EXPECT_NEAR(l1_loss(a, b), 0.1, 1e-12);
    EXPECT_EQ(l1_loss(a, b), l1_loss(b, a));
    EXPECT_NEAR(l1_loss(ad::constant(nb_row(a)), b).item(), 0.1, 1e-12);
}

TEST(GiouLoss, Examples) {
    const BBox unit{0, 0, 1, 1};
    EXPECT_EQ(giou_loss(unit, unit), 0.0);
    EXPECT_NEAR(giou_loss(unit, BBox{2, 2, 3, 3}), 16.0 / 9.0, 1e-9);
    EXPECT_NEAR(giou(unit, BBox{2, 2, 3, 3}), -7.0 / 9.0, 1e-12);
    EXPECT_LT(giou_loss(BBox{0, 0, 1e-3, 1e-3}, BBox{1e6, 1e6, 1e6 + 1, 1e6 + 1}), 2.0);
    EXPECT_THROW(giou_loss(unit, BBox{1, 1, 1, 3}), AnnotationError);
    EXPECT_NO_THROW(giou_loss(BBox{1, 1, 1, 1}, unit));
}

TEST(GiouLoss, MatchesAreaArithmeticOracle) {
    Rng rng = make_rng(41);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const BBox a = random_box(rng), b = random_box(rng);
        worst = std::max(worst, std::abs(giou_loss(a, b) - (1.0 - oracle::giou(ob(a), ob(b)))));
        const double l = giou_loss(a, b);
        EXPECT_GE(l, 0.0);
        EXPECT_LT(l, 2.0);
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(GiouLoss, DifferentiableFormAgreesAndChecksGradient) {
    Rng rng = make_rng(42);
    for (int i = 0; i < 50; ++i) {
        const NormBox p{uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8), uniform(rng, 0.05, 0.5), uniform(rng, 0.05, 0.5)};
        const NormBox g{uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8), uniform(rng, 0.05, 0.5), uniform(rng, 0.05, 0.5)};
        const double scalar = giou_loss(norm_to_bbox(p, 1, 1), norm_to_bbox(g, 1, 1));
        ad::Var pv = ad::parameter(nb_row(p));
        EXPECT_NEAR(giou_loss(pv, g).item(), scalar, 1e-12);
        const auto res = testkit::gradcheck([&] { return ad::add(giou_loss(pv, g), l1_loss(pv, g)); }, {{"box", pv}});
        EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
    }
}

TEST(AssignPositives, ExactHitAndTies) {
    const ModelConfig cfg;
    const NormBox gt{0.5, 0.5, 0.2, 0.2};
    const std::vector<NormBox> boxes{{0.1, 0.1, 0.1, 0.1}, gt, {0.9, 0.9, 0.1, 0.1}};
    EXPECT_EQ(assign_positives(boxes, gt, cfg).positives, std::vector<int>{1});

    const std::vector<NormBox> twins{{0.4, 0.5, 0.2, 0.2}, {0.4, 0.5, 0.2, 0.2}, {0.9, 0.1, 0.1, 0.1}};
    const MatchResult m = assign_positives(twins, gt, cfg);
    ASSERT_EQ(m.positives.size(), 1u);
    EXPECT_EQ(m.positives[0], 0);
    // Brute-force cost scan.
    for (std::size_t i = 0; i < twins.size(); ++i) {
        const double c = cfg.lambda_l1 * l1_loss(twins[i], gt) +
                         cfg.lambda_giou * (1.0 - oracle::giou(ob(norm_to_bbox(twins[i], 1, 1)), ob(norm_to_bbox(gt, 1, 1))));
        EXPECT_NEAR(m.cost[i], c, 1e-12);
    }
}

TEST(AssignPositives, InvariantToJointWeightScaling) {
    Rng rng = make_rng(43);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<NormBox> boxes;
        for (int i = 0; i < 10; ++i)
            boxes.push_back({uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.05, 0.4), uniform(rng, 0.05, 0.4)});
        const NormBox gt{uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8), uniform(rng, 0.05, 0.4), uniform(rng, 0.05, 0.4)};
        ModelConfig a, b;
        b.lambda_l1 *= 3.5;
        b.lambda_giou *= 3.5;
        EXPECT_EQ(assign_positives(boxes, gt, a).positives, assign_positives(boxes, gt, b).positives);
    }
}

TEST(ContrastiveLoss, UniformCaseIsLogN) {
    for (int n : {2, 4, 8, 16}) {
        const ad::Matrix objects = ad::Matrix::Ones(n, 3);
        const ad::Matrix text = ad::Matrix::Ones(1, 3);
        const int pos = 0;
        EXPECT_NEAR(contrastive_loss(text, objects, std::span<const int>(&pos, 1), 0.07), std::log(n), 1e-9);
    }
}

TEST(ContrastiveLoss, LimitAndScalarOracle) {
    ad::Matrix text(1, 2), objects(2, 2);
    text << 1, 0;
    objects << 1, 0, 0, 1;
    const std::vector<int> pos{0};
    EXPECT_NEAR(contrastive_loss(text, objects, pos, 0.07), oracle::neg_log_softmax({1.0 / 0.07, 0.0}, 0), 1e-12);
    EXPECT_LT(contrastive_loss(text, objects, pos, 1e-3), 1e-12);
    objects(1, 1) = 0.0;
    objects(0, 0) = 1e4;
    EXPECT_LT(contrastive_loss(text, objects, pos, 1.0), 1e-12);
}

TEST(ContrastiveLoss, MultiplePositivesAverage) {
    Rng rng = make_rng(44);
    const ad::Matrix text = random_matrix(rng, 1, 4);
    const ad::Matrix objects = random_matrix(rng, 5, 4);
    const std::vector<int> pos{1, 3};
    std::vector<double> logits;
    for (int j = 0; j < 5; ++j) logits.push_back(objects.row(j).dot(text.row(0)) / 0.5);
    const double expect = 0.5 * (oracle::neg_log_softmax(logits, 1) + oracle::neg_log_softmax(logits, 3));
    EXPECT_NEAR(contrastive_loss(text, objects, pos, 0.5), expect, 1e-12);
}

TEST(ContrastiveLoss, Errors) {
    const ad::Matrix t = ad::Matrix::Ones(1, 2), o = ad::Matrix::Ones(3, 2);
    EXPECT_THROW(contrastive_loss(t, o, std::vector<int>{}, 0.07), MatchingError);
    EXPECT_THROW(contrastive_loss(t, o, std::vector<int>{0}, 0.0), ConfigError);
    EXPECT_THROW(contrastive_loss(t, o, std::vector<int>{0}, -1.0), ConfigError);
}

TEST(ContrastiveLoss, OrthogonalTextComponentIsIgnored) {
    Rng rng = make_rng(45);
    const ad::Matrix objects = random_matrix(rng, 3, 8);
    const ad::Matrix text = random_matrix(rng, 1, 8);
    const Eigen::MatrixXd kernel = Eigen::FullPivLU<Eigen::MatrixXd>(objects).kernel();
    ASSERT_GT(kernel.cols(), 0);
    const ad::Matrix shifted = text + 5.0 * kernel.col(0).transpose();
    const std::vector<int> pos{2};
    EXPECT_NEAR(contrastive_loss(text, objects, pos, 0.07), contrastive_loss(shifted, objects, pos, 0.07), 1e-9);
    // A component that is not orthogonal changes the loss.
    const ad::Matrix leaking = text + 5.0 * objects.row(2);
    EXPECT_GT(std::abs(contrastive_loss(text, objects, pos, 0.07) - contrastive_loss(leaking, objects, pos, 0.07)), 1e-6);
}

TEST(ContrastiveLoss, GradientMatchesFiniteDifferences) {
    Rng rng = make_rng(46);
    ad::Var text = ad::parameter(random_matrix(rng, 1, 8, 0.3));
    ad::Var objects = ad::parameter(random_matrix(rng, 8, 8, 0.3));
    const std::vector<int> pos{2, 5};
    const auto res = testkit::gradcheck([&] { return contrastive_loss(text, objects, pos, 0.07); },
                                        {{"text", text}, {"objects", objects}});
    EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

TEST(TotalLoss, WeightsAndLinearity) {
    const ModelConfig cfg;
    EXPECT_EQ(total_loss(1, 1, 1, cfg), 9.0);
    EXPECT_EQ(total_loss(0, 0, 0, cfg), 0.0);
    EXPECT_EQ(total_loss(1, 0, 0, cfg), 2.0);
    EXPECT_EQ(total_loss(0, 1, 0, cfg), 5.0);
    EXPECT_EQ(total_loss(0, 0, 1, cfg), 2.0);
    ModelConfig twice = cfg;
    twice.lambda_giou *= 2;
    twice.lambda_l1 *= 2;
    twice.lambda_cts *= 2;
    EXPECT_EQ(total_loss(0.3, 0.7, 1.1, twice), 2.0 * total_loss(0.3, 0.7, 1.1, cfg));
    auto c = [](double v) { return ad::constant(ad::Matrix::Constant(1, 1, v)); };
    EXPECT_EQ(total_loss(c(1), c(1), c(1), cfg).item(), 9.0);
}

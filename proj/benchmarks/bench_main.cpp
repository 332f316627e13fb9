#include <benchmark/benchmark.h>

#include "ovg/data.hpp"
#include "ovg/evaluate.hpp"
#include "ovg/metrics.hpp"
#include "ovg/model.hpp"
#include "ovg/nn.hpp"
#include "ovg/train.hpp"

using namespace ovg;

namespace {

ad::Matrix random(Rng& rng, int rows, int cols) {
    ad::Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
}

struct ToyFixture {
    ModelConfig cfg = ModelConfig::toy();
    std::vector<TrainingSample> samples = grounding_samples(generate_synthetic(4, {}, 1), cfg.image_size);
    Grounder model{cfg, build_vocabulary(samples)};
};

}  // namespace

// Full toy forward pass without a gradient graph.
static void BM_PipelineForward(benchmark::State& state) {
    ToyFixture f;
    const auto& s = f.samples[0];
    ad::NoGradGuard guard;
    for (auto _ : state)
        benchmark::DoNotOptimize(f.model.forward_pixels(s.pixels, s.expression, s.width, s.height).output.top1);
}
BENCHMARK(BM_PipelineForward)->Unit(benchmark::kMillisecond);

// Forward + loss + backward for one sample.
static void BM_TrainSampleStep(benchmark::State& state) {
    ToyFixture f;
    const auto& s = f.samples[0];
    const NormBox gt = bbox_to_norm(s.target, s.width, s.height);
    for (auto _ : state) {
        const auto r = f.model.forward_pixels(s.pixels, s.expression, s.width, s.height);
        ad::backward(grounding_loss(r, gt, f.cfg).total);
        f.model.params().zero_grad();
    }
}
BENCHMARK(BM_TrainSampleStep)->Unit(benchmark::kMillisecond);

// Self-attention over T tokens at C=64, 4 heads.
static void BM_Attention(benchmark::State& state) {
    const int t = static_cast<int>(state.range(0));
    nn::ParamStore store;
    Rng rng = make_rng(3);
    nn::MultiHeadAttention attn(store, "a", 64, 4, rng);
    const ad::Var x = ad::constant(random(rng, t, 64));
    ad::NoGradGuard guard;
    for (auto _ : state) benchmark::DoNotOptimize(attn(x, x, x).value().data());
    state.SetComplexityN(t);
}
BENCHMARK(BM_Attention)->RangeMultiplier(2)->Range(40, 640)->Complexity();

static void BM_Iou(benchmark::State& state) {
    Rng rng = make_rng(4);
    std::vector<BBox> boxes;
    for (int i = 0; i < 1024; ++i) {
        const double x = uniform(rng, 0, 100), y = uniform(rng, 0, 100);
        boxes.push_back({x, y, x + uniform(rng, 1, 50), y + uniform(rng, 1, 50)});
    }
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(iou(boxes[i & 1023], boxes[(i + 7) & 1023]));
        ++i;
    }
}
BENCHMARK(BM_Iou);
BENCHMARK_MAIN();

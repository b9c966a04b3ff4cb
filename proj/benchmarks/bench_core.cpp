// Throughput benchmarks for the hot paths: scene simulation, encoding,
// decoding, next-step prediction, rollout, and the evaluation metrics.
// Module weights are freshly initialized; these measure cost, not quality.

#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "ock/eval.hpp"
#include "ock/kinematics.hpp"
#include "ock/metrics.hpp"
#include "ock/predictor.hpp"
#include "ock/scene.hpp"
#include "ock/slot_encoder.hpp"
#include "ock/trainer.hpp"

namespace {

const bool kInit = [] {
    torch::set_num_threads(1);
    torch::manual_seed(0);
    return true;
}();

ock::SceneConfig desk_scene() {
    ock::SceneConfig sc;
    sc.seed = 11;
    return sc;
}

ock::SlotEncoder make_encoder() {
    torch::manual_seed(1);
    ock::SlotEncoder enc{ock::EncoderConfig{}};
    enc->eval();
    return enc;
}

ock::Predictor make_predictor(ock::PredictorMode mode) {
    torch::manual_seed(2);
    ock::PredictorConfig pc;
    pc.mode = mode;
    ock::Predictor pred(pc);
    pred->eval();
    return pred;
}

void BM_SimulateClip(benchmark::State& state) {
    ock::SceneConfig sc = desk_scene();
    for (auto _ : state) {
        sc.seed += 1;
        benchmark::DoNotOptimize(ock::simulate_clip(sc));
    }
}
BENCHMARK(BM_SimulateClip)->Unit(benchmark::kMillisecond);

void BM_EncodeFrame(benchmark::State& state) {
    auto enc = make_encoder();
    torch::Tensor frames = torch::rand({1, 1, 64, 64, 3});
    torch::NoGradGuard g;
    for (auto _ : state) benchmark::DoNotOptimize(enc->encode_video_batch(frames));
}
BENCHMARK(BM_EncodeFrame)->Unit(benchmark::kMillisecond);

void BM_DecodeSlots(benchmark::State& state) {
    auto enc = make_encoder();
    torch::Tensor slots = torch::randn({1, 3, 64});
    torch::NoGradGuard g;
    for (auto _ : state) benchmark::DoNotOptimize(enc->decode_batch(slots));
}
BENCHMARK(BM_DecodeSlots)->Unit(benchmark::kMillisecond);

void BM_SoftArgmax(benchmark::State& state) {
    torch::Tensor alphas = torch::rand({24, 3, 64, 64});
    torch::NoGradGuard g;
    for (auto _ : state) benchmark::DoNotOptimize(ock::object_positions(alphas));
}
BENCHMARK(BM_SoftArgmax)->Unit(benchmark::kMillisecond);

void BM_KinTokens(benchmark::State& state) {
    torch::manual_seed(3);
    ock::Kinematics kin(64);
    kin->eval();
    ock::PredictorConfig pc;
    torch::Tensor positions = torch::rand({1, 6, 3, 2});
    torch::NoGradGuard g;
    for (auto _ : state) benchmark::DoNotOptimize(ock::window_kin_tokens(kin, pc, positions));
}
BENCHMARK(BM_KinTokens)->Unit(benchmark::kMillisecond);

void BM_PredictNext(benchmark::State& state) {
    const auto mode = static_cast<ock::PredictorMode>(state.range(0));
    auto pred = make_predictor(mode);
    torch::Tensor slots = torch::randn({1, 6, 3, 64});
    std::optional<torch::Tensor> kins;
    const int64_t per_obj = pred->config().kin_tokens_per_object();
    if (per_obj > 0) kins = torch::randn({1, 6, 3 * per_obj, 64});
    torch::NoGradGuard g;
    for (auto _ : state) benchmark::DoNotOptimize(pred->predict_next(slots, kins));
}
BENCHMARK(BM_PredictNext)
    ->Arg(static_cast<int>(ock::PredictorMode::joint))
    ->Arg(static_cast<int>(ock::PredictorMode::cross))
    ->Arg(static_cast<int>(ock::PredictorMode::baseline))
    ->Unit(benchmark::kMillisecond);

void BM_RolloutOneStep(benchmark::State& state) {
    auto enc = make_encoder();
    auto pred = make_predictor(ock::PredictorMode::joint);
    torch::manual_seed(4);
    ock::Kinematics kin(64);
    kin->eval();
    ock::VideoClip clip = ock::simulate_clip(desk_scene());
    torch::Tensor burn = clip.frames.slice(0, 0, 6);
    for (auto _ : state) benchmark::DoNotOptimize(ock::rollout(burn, 1, enc, kin, pred));
}
BENCHMARK(BM_RolloutOneStep)->Unit(benchmark::kMillisecond);

void BM_Psnr(benchmark::State& state) {
    torch::Tensor a = torch::rand({64, 64, 3}), b = torch::rand({64, 64, 3});
    for (auto _ : state) benchmark::DoNotOptimize(ock::psnr(a, b));
}
BENCHMARK(BM_Psnr)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
    torch::Tensor a = torch::rand({64, 64, 3}), b = torch::rand({64, 64, 3});
    for (auto _ : state) benchmark::DoNotOptimize(ock::ssim(a, b));
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMillisecond);

void BM_FgAri(benchmark::State& state) {
    torch::manual_seed(5);
    torch::Tensor gt = torch::randint(0, 3, {64, 64}, torch::kLong);
    torch::Tensor pred = torch::randint(0, 3, {64, 64}, torch::kLong);
    for (auto _ : state) benchmark::DoNotOptimize(ock::fg_ari(pred, gt, 0));
}
BENCHMARK(BM_FgAri)->Unit(benchmark::kMillisecond);

void BM_Miou(benchmark::State& state) {
    torch::manual_seed(6);
    torch::Tensor gt = torch::randint(0, 3, {64, 64}, torch::kLong);
    torch::Tensor pred = torch::randint(0, 3, {64, 64}, torch::kLong);
    for (auto _ : state) benchmark::DoNotOptimize(ock::miou(pred, gt, 0));
}
BENCHMARK(BM_Miou)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

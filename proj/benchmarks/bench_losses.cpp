#include <benchmark/benchmark.h>

#include "endogede/losses.hpp"
#include "endogede/synth.hpp"
#include "endogede/train.hpp"

using namespace endogede;

namespace {

SceneBundle bench_scene() {
    SceneConfig cfg;
    cfg.seed = 7;
    cfg.width = 80;
    cfg.height = 64;
    cfg.frames = 3;
    return gen_scene(cfg);
}

} // namespace

static void BM_photometric_loss(benchmark::State& state) {
    SceneBundle scene = bench_scene();
    Tensor mask = Tensor::ones(Shape{64, 80});
    for (auto _ : state) {
        Tensor loss = photometric_loss(scene.frames[0].image, scene.frames[1].image, mask);
        benchmark::DoNotOptimize(loss.item());
    }
}
BENCHMARK(BM_photometric_loss);

static void BM_photometric_backward(benchmark::State& state) {
    SceneBundle scene = bench_scene();
    Tensor pred = scene.frames[0].image.clone();
    pred.set_requires_grad();
    Tensor mask = Tensor::ones(Shape{64, 80});
    for (auto _ : state) {
        pred.zero_grad();
        Tape tape;
        Tensor loss = photometric_loss(pred, scene.frames[1].image, mask);
        tape.backward(loss);
        benchmark::DoNotOptimize(pred.grad_data());
    }
}
BENCHMARK(BM_photometric_backward);

static void BM_rigid_warp(benchmark::State& state) {
    SceneBundle scene = bench_scene();
    RigidPose rel = scene.relative_pose(1, 0);
    Tensor aa(Shape{3}), tr(Shape{3});
    for (int i = 0; i < 3; ++i) {
        aa.data()[i] = static_cast<float>(rel.axis_angle[static_cast<size_t>(i)]);
        tr.data()[i] = static_cast<float>(rel.translation[static_cast<size_t>(i)]);
    }
    Tensor k4 = scene.intrinsics.to_tensor();
    for (auto _ : state) {
        WarpResult w = rigid_warp(scene.frames[0].image, scene.frames[1].depth,
                                  pose_exp(aa, tr), k4);
        benchmark::DoNotOptimize(w.image.data());
    }
}
BENCHMARK(BM_rigid_warp);

static void BM_stage3_step(benchmark::State& state) {
    TrainConfig cfg;
    cfg.seed = 11;
    cfg.interval = 1;
    cfg.scene.seed = 12;
    cfg.scene.width = 80;
    cfg.scene.height = 64;
    cfg.scene.frames = 3;
    cfg.stage3_gt_triples = true;
    cfg.stage3_gt_flows = true;
    SceneBundle scene = gen_scene(cfg.scene);
    InitOptions opt;
    opt.triples_from_gt = true;
    opt.flows_from_gt = true;
    opt.depth_scale = 1.3;
    DirectParams params = init_params(scene, 1, 1, opt);
    Trainer trainer(std::move(scene), std::move(params), cfg);
    for (auto _ : state) {
        StageTrace t = trainer.run_stage3(1);
        benchmark::DoNotOptimize(t.losses[0]);
    }
}
BENCHMARK(BM_stage3_step);

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "endogede/gradcheck.hpp"
#include "endogede/geometry.hpp"
#include "endogede/synth.hpp"

using namespace endogede;

namespace {

const Intrinsics kK{100.0, 100.0, 39.5, 31.5};

PoseMat pose_from(std::array<float, 3> aa, std::array<float, 3> t) {
    return pose_exp(Tensor(Shape{3}, {aa[0], aa[1], aa[2]}),
                    Tensor(Shape{3}, {t[0], t[1], t[2]}));
}

} // namespace

TEST_CASE("backproject hand cases and errors") {
    auto p = backproject(kK.cx, kK.cy, 1.0, kK);
    CHECK(p[0] == doctest::Approx(0.0));
    CHECK(p[1] == doctest::Approx(0.0));
    CHECK(p[2] == doctest::Approx(1.0));

    auto q = backproject(kK.cx + kK.fx, kK.cy, 2.0, kK);
    CHECK(q[0] == doctest::Approx(2.0));
    CHECK(q[1] == doctest::Approx(0.0));
    CHECK(q[2] == doctest::Approx(2.0));

    CHECK_THROWS_AS(backproject(0, 0, 0.0, kK), ValueError);
    CHECK_THROWS_AS(backproject(0, 0, -1.0, kK), ValueError);
}

TEST_CASE("project hand cases and the in-front flag") {
    Projected pr = project({0, 0, 1}, kK);
    CHECK(pr.in_front);
    CHECK(pr.u == doctest::Approx(kK.cx));
    CHECK(pr.v == doctest::Approx(kK.cy));
    CHECK_FALSE(project({1, 1, 0}, kK).in_front);
    CHECK_FALSE(project({1, 1, -2}, kK).in_front);
}

TEST_CASE("project and backproject are inverse") {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        double u = rng.uniform(0, 79), v = rng.uniform(0, 63), d = rng.uniform(0.5, 9.5);
        auto p = backproject(u, v, d, kK);
        Projected pr = project(p, kK);
        CHECK(pr.in_front);
        CHECK(pr.u == doctest::Approx(u).epsilon(1e-5));
        CHECK(pr.v == doctest::Approx(v).epsilon(1e-5));
    }
}

TEST_CASE("pose exponential: identity, group laws, quarter turn") {
    PoseMat id = pose_from({0, 0, 0}, {0, 0, 0});
    CHECK(max_abs_diff(id.rotation, identity_matrix(3)) < 1e-7);

    PoseMat p = pose_from({0.3f, -0.2f, 0.5f}, {0.1f, -0.4f, 0.25f});
    PoseMat q = pose_compose(p, pose_inverse(p));
    CHECK(max_abs_diff(q.rotation, identity_matrix(3)) < 1e-6);
    CHECK(max_abs_diff(q.translation, Tensor::zeros(Shape{3})) < 1e-6);

    // rotation by pi/2 about z maps (1,0,0) to (0,1,0)
    PoseMat rz = pose_from({0, 0, static_cast<float>(M_PI / 2)}, {0, 0, 0});
    Tensor pt(Shape{1, 3}, {1, 0, 0});
    Tensor moved = pose_apply(rz, pt);
    CHECK(moved.at({0, 0}) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(moved.at({0, 1}) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(moved.at({0, 2}) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("plain RigidPose agrees with the tensor exponential") {
    RigidPose rp;
    rp.axis_angle = {0.21, -0.34, 0.15};
    rp.translation = {0.4, 0.1, -0.2};
    auto rm = rp.rotation_matrix();
    PoseMat pm = pose_from({0.21f, -0.34f, 0.15f}, {0.4f, 0.1f, -0.2f});
    for (int i = 0; i < 9; ++i)
        CHECK(pm.rotation.data()[i] == doctest::Approx(rm[static_cast<size_t>(i)]).epsilon(1e-5));

    // log is the left inverse of exp
    auto aa = axis_angle_from_matrix(rm);
    for (int i = 0; i < 3; ++i)
        CHECK(aa[static_cast<size_t>(i)] ==
              doctest::Approx(rp.axis_angle[static_cast<size_t>(i)]).epsilon(1e-9));

    // compose against direct application
    RigidPose a, b;
    a.axis_angle = {0.1, 0.2, -0.1};
    a.translation = {1, 2, 3};
    b.axis_angle = {-0.3, 0.05, 0.2};
    b.translation = {-0.5, 0.25, 0.75};
    RigidPose c = RigidPose::compose(a, b);
    std::array<double, 3> x{0.3, -0.7, 1.1};
    auto direct = a.apply(b.apply(x));
    auto composed = c.apply(x);
    for (int i = 0; i < 3; ++i)
        CHECK(composed[static_cast<size_t>(i)] ==
              doctest::Approx(direct[static_cast<size_t>(i)]).epsilon(1e-9));
}

TEST_CASE("identity-pose rigid warp reproduces the source everywhere") {
    SceneConfig cfg;
    cfg.seed = 21;
    cfg.width = 40;
    cfg.height = 32;
    cfg.frames = 1;
    SceneBundle scene = gen_scene(cfg);
    const SceneFrame& f = scene.frames[0];

    PoseMat id = pose_from({0, 0, 0}, {0, 0, 0});
    WarpResult w = rigid_warp(f.image, f.depth, id, scene.intrinsics.to_tensor());
    CHECK(max_abs_diff(w.image, f.image) < 1e-5);
    for (long long i = 0; i < w.valid.size(); ++i) CHECK(w.valid.data()[i] == 1.0f);
}

TEST_CASE("fronto-parallel translation shifts by fx*tx/depth pixels") {
    const int H = 24, W = 30;
    Tensor depth = Tensor::full(Shape{H, W}, 2.0f);
    PoseMat pose = pose_from({0, 0, 0}, {0.1f, 0, 0});
    WarpGrid grid = rigid_warp_grid(depth, pose, kK.to_tensor());
    // expected shift: fx * tx / d = 100 * 0.1 / 2 = 5 px
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            CHECK(grid.coords.at({y, x, 0}) == doctest::Approx(x + 5.0).epsilon(1e-4));
            CHECK(grid.coords.at({y, x, 1}) ==
                  doctest::Approx(static_cast<double>(y)).epsilon(1e-4));
        }
}

TEST_CASE("depth and translation scale jointly cancel in the warp grid") {
    Rng rng(9);
    Tensor depth = rand_uniform(rng, Shape{16, 20}, 1.5, 3.5);
    PoseMat pose = pose_from({0.02f, -0.01f, 0.03f}, {0.05f, -0.02f, 0.04f});
    WarpGrid g1 = rigid_warp_grid(depth, pose, kK.to_tensor());

    Tensor depth_scaled = mul(depth, 3.0f);
    PoseMat pose_scaled = pose_from({0.02f, -0.01f, 0.03f}, {0.15f, -0.06f, 0.12f});
    WarpGrid g2 = rigid_warp_grid(depth_scaled, pose_scaled, kK.to_tensor());
    CHECK(max_abs_diff(g1.coords, g2.coords) < 1e-4);
}

TEST_CASE("valid pixels always sample strictly inside the source image") {
    SceneConfig cfg;
    cfg.seed = 77;
    cfg.width = 32;
    cfg.height = 24;
    cfg.frames = 3;
    cfg.max_translation = 0.08;
    SceneBundle scene = gen_scene(cfg);
    RigidPose rel = scene.relative_pose(1, 2);
    PoseMat pose = pose_from(
        {static_cast<float>(rel.axis_angle[0]), static_cast<float>(rel.axis_angle[1]),
         static_cast<float>(rel.axis_angle[2])},
        {static_cast<float>(rel.translation[0]), static_cast<float>(rel.translation[1]),
         static_cast<float>(rel.translation[2])});
    WarpGrid grid = rigid_warp_grid(scene.frames[1].depth, pose, scene.intrinsics.to_tensor());
    SampleResult s = bilinear_sample(scene.frames[2].image, grid.coords);
    Tensor valid = mul(s.mask, grid.in_front);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 32; ++x)
            if (valid.at({y, x}) == 1.0f) {
                CHECK(grid.coords.at({y, x, 0}) >= 0.0f);
                CHECK(grid.coords.at({y, x, 0}) <= 31.0f);
                CHECK(grid.coords.at({y, x, 1}) >= 0.0f);
                CHECK(grid.coords.at({y, x, 1}) <= 23.0f);
            }
}

TEST_CASE("flow warp: zero flow, integer shift, rigid consistency") {
    Rng rng(15);
    Tensor img = rand_uniform(rng, Shape{10, 12, 3});
    WarpResult idw = flow_warp(img, Tensor::zeros(Shape{10, 12, 2}));
    CHECK(max_abs_diff(idw.image, img) == 0.0);

    // +1 column shift: sample at x+1
    Tensor shift(Shape{10, 12, 2});
    for (int p = 0; p < 120; ++p) shift.data()[p * 2] = 1.0f;
    WarpResult sh = flow_warp(img, shift);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x + 1 < 12; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(sh.image.at({y, x, c}) == img.at({y, x + 1, c}));
    for (int y = 0; y < 10; ++y) CHECK(sh.valid.at({y, 11}) == 0.0f);

    // flow built from a rigid grid reproduces the rigid warp exactly
    Tensor depth = rand_uniform(rng, Shape{10, 12}, 1.5, 3.0);
    PoseMat pose = pose_from({0.01f, 0.02f, -0.015f}, {0.03f, -0.02f, 0.01f});
    Tensor k4 = kK.to_tensor();
    WarpGrid grid = rigid_warp_grid(depth, pose, k4);
    Tensor flow = sub(grid.coords, identity_grid(10, 12));
    WarpResult via_flow = flow_warp(img, flow);
    WarpResult via_rigid = rigid_warp(img, depth, pose, k4);
    CHECK(max_abs_diff(via_flow.image, via_rigid.image) == 0.0);
}

TEST_CASE("gradients flow through the rigid warp to depth, pose and intrinsics") {
    SceneConfig cfg;
    cfg.seed = 5;
    cfg.width = 20;
    cfg.height = 16;
    cfg.frames = 2;
    cfg.max_translation = 0.04;
    cfg.max_rotation_deg = 1.0;
    SceneBundle scene = gen_scene(cfg);
    RigidPose rel = scene.relative_pose(0, 1);

    Tensor depth = scene.frames[0].depth.clone();
    Tensor aa(Shape{3}), tr(Shape{3});
    for (int i = 0; i < 3; ++i) {
        aa.data()[i] = static_cast<float>(rel.axis_angle[static_cast<size_t>(i)]);
        tr.data()[i] = static_cast<float>(rel.translation[static_cast<size_t>(i)]);
    }
    Tensor k4 = scene.intrinsics.to_tensor();
    const Tensor& target = scene.frames[0].image;
    const Tensor& source = scene.frames[1].image;

    depth.set_requires_grad();
    aa.set_requires_grad();
    tr.set_requires_grad();
    k4.set_requires_grad();
    auto rep = check_gradients(
        [&]() {
            PoseMat pose = pose_exp(aa, tr);
            WarpResult w = rigid_warp(source, depth, pose, k4);
            Tensor diff = mean_lastdim(square(sub(w.image, target)));
            return masked_mean(reshape(diff, Shape{16, 20}), w.valid);
        },
        {{"depth", depth}, {"pose_aa", aa}, {"pose_t", tr}, {"k4", k4}}, {.eps = 2e-3});
    CHECK(rep.max_rel_error < 1e-3);
}

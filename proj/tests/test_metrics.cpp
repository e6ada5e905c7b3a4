#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "endogede/metrics.hpp"

#include "oracles.hpp"

using namespace endogede;

namespace {

std::vector<TimedPose> traj_of(const std::vector<std::array<double, 3>>& pts) {
    std::vector<TimedPose> out;
    for (size_t i = 0; i < pts.size(); ++i) {
        TimedPose tp;
        tp.timestamp = 0.1 * static_cast<double>(i);
        tp.pose.translation = pts[i];
        out.push_back(tp);
    }
    return out;
}

} // namespace

TEST_CASE("depth metrics: perfect prediction") {
    Tensor gt(Shape{2, 2}, {1, 2, 3, 4});
    EvalReport r = depth_metrics(gt, gt, 150.0, DepthScaling::None);
    CHECK(r.abs_rel == doctest::Approx(0.0));
    CHECK(r.sq_rel == doctest::Approx(0.0));
    CHECK(r.rmse == doctest::Approx(0.0));
    CHECK(r.rmse_log == doctest::Approx(0.0));
    CHECK(r.delta == doctest::Approx(1.0));
    CHECK(r.n_pixels == 4);
}

TEST_CASE("median scaling removes a global factor") {
    Tensor gt(Shape{2, 2}, {1, 2, 3, 4});
    Tensor pred(Shape{2, 2}, {2, 4, 6, 8});
    EvalReport r = depth_metrics(pred, gt, 150.0, DepthScaling::Median);
    CHECK(r.abs_rel == doctest::Approx(0.0));
    CHECK(r.delta == doctest::Approx(1.0));
    CHECK(r.scale_applied == doctest::Approx(0.5));

    EvalReport r2 = depth_metrics(pred, gt, 150.0, DepthScaling::None);
    CHECK(r2.abs_rel == doctest::Approx(1.0));
}

TEST_CASE("depth metrics hand example") {
    Tensor pred(Shape{2}, {2, 2});
    Tensor gt(Shape{2}, {1, 4});
    EvalReport r = depth_metrics(pred, gt, 150.0, DepthScaling::None);
    CHECK(r.abs_rel == doctest::Approx(0.75).epsilon(1e-6));
    CHECK(r.sq_rel == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.rmse == doctest::Approx(std::sqrt(2.5)).epsilon(1e-6));
    CHECK(r.rmse_log == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    CHECK(r.delta == doctest::Approx(0.0));
}

TEST_CASE("depth metrics: valid set from gt > 0 and the cap; empty set errors") {
    Tensor gt(Shape{4}, {0.0f, 1.0f, 200.0f, 2.0f});
    Tensor pred(Shape{4}, {9.0f, 1.0f, 9.0f, 2.0f});
    EvalReport r = depth_metrics(pred, gt, 150.0, DepthScaling::None);
    CHECK(r.n_pixels == 2);
    CHECK(r.abs_rel == doctest::Approx(0.0));

    Tensor all_invalid(Shape{4}, {0.0f, 0.0f, 0.0f, 0.0f});
    CHECK_THROWS_AS(depth_metrics(pred, all_invalid, 150.0, DepthScaling::None), ValueError);
}

TEST_CASE("median-scaled metrics are invariant to any positive prediction rescale") {
    Rng rng(7);
    Tensor gt = rand_uniform(rng, Shape{8, 9}, 0.5, 5.0);
    Tensor pred = rand_uniform(rng, Shape{8, 9}, 0.5, 5.0);
    EvalReport a = depth_metrics(pred, gt, 150.0, DepthScaling::Median);
    for (double c : {0.1, 3.0, 42.0}) {
        EvalReport b = depth_metrics(mul(pred, static_cast<float>(c)), gt, 150.0,
                                     DepthScaling::Median);
        CHECK(b.abs_rel == doctest::Approx(a.abs_rel).epsilon(1e-5));
        CHECK(b.rmse == doctest::Approx(a.rmse).epsilon(1e-5));
        CHECK(b.delta == doctest::Approx(a.delta).epsilon(1e-9));
    }
}

TEST_CASE("metrics are permutation invariant over pixels") {
    Rng rng(9);
    Tensor gt = rand_uniform(rng, Shape{24}, 0.5, 5.0);
    Tensor pred = rand_uniform(rng, Shape{24}, 0.5, 5.0);
    EvalReport a = depth_metrics(pred, gt, 150.0, DepthScaling::Median);

    std::vector<int> perm(24);
    for (int i = 0; i < 24; ++i) perm[static_cast<size_t>(i)] = i;
    Rng shuffler(11);
    for (int i = 23; i > 0; --i)
        std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(shuffler.uniform_int(0, i))]);
    Tensor gt_p(Shape{24}), pred_p(Shape{24});
    for (int i = 0; i < 24; ++i) {
        gt_p.data()[i] = gt.data()[perm[static_cast<size_t>(i)]];
        pred_p.data()[i] = pred.data()[perm[static_cast<size_t>(i)]];
    }
    EvalReport b = depth_metrics(pred_p, gt_p, 150.0, DepthScaling::Median);
    CHECK(b.abs_rel == doctest::Approx(a.abs_rel).epsilon(1e-6));
    CHECK(b.rmse_log == doctest::Approx(a.rmse_log).epsilon(1e-6));
}

TEST_CASE("ate: self comparison, scale and offset invariance") {
    Rng rng(13);
    std::vector<std::array<double, 3>> pts;
    for (int i = 0; i < 10; ++i)
        pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    auto gt = traj_of(pts);
    CHECK(ate(gt, gt).ate == doctest::Approx(0.0).epsilon(1e-9));

    std::vector<std::array<double, 3>> scaled, offset;
    for (auto& p : pts) {
        scaled.push_back({2 * p[0], 2 * p[1], 2 * p[2]});
        offset.push_back({p[0] + 1.0, p[1], p[2]});
    }
    CHECK(ate(traj_of(scaled), gt).ate == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(ate(traj_of(offset), gt).ate == doctest::Approx(0.0).epsilon(1e-9));

    // full similarity transform: rotate + scale + translate
    RigidPose rot;
    rot.axis_angle = {0.4, -0.2, 0.7};
    std::vector<std::array<double, 3>> warped;
    for (auto& p : pts) {
        auto q = rot.apply(p);
        warped.push_back({1.7 * q[0] + 3.0, 1.7 * q[1] - 1.0, 1.7 * q[2] + 0.5});
    }
    CHECK(ate(traj_of(warped), gt).ate == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("ate agrees with a derivative-free alignment oracle") {
    Rng rng(17);
    std::vector<std::array<double, 3>> gt_pts, pred_pts;
    for (int i = 0; i < 8; ++i) {
        std::array<double, 3> p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        gt_pts.push_back(p);
        pred_pts.push_back({p[0] + rng.uniform(-0.1, 0.1), p[1] + rng.uniform(-0.1, 0.1),
                            p[2] + rng.uniform(-0.1, 0.1)});
    }
    double impl = ate(traj_of(pred_pts), traj_of(gt_pts)).ate;
    double brute = oracle::brute_force_ate(pred_pts, gt_pts);
    CHECK(impl == doctest::Approx(brute).epsilon(0.02));
    CHECK(impl <= brute + 1e-6);  // closed form can only be at least as good
}

TEST_CASE("ate: one displaced pose among identities matches the oracle") {
    std::vector<std::array<double, 3>> gt_pts(10, {0, 0, 0});
    auto pred_pts = gt_pts;
    pred_pts[4] = {1.0, 0.0, 0.0};
    double impl = ate(traj_of(pred_pts), traj_of(gt_pts)).ate;
    double brute = oracle::brute_force_ate(pred_pts, gt_pts);
    CHECK(impl <= brute + 1e-6);
    CHECK(impl == doctest::Approx(brute).epsilon(0.05));
}

TEST_CASE("ate needs at least 3 associated poses, association by timestamp") {
    auto gt = traj_of({{0, 0, 0}, {1, 0, 0}});
    CHECK_THROWS_AS(ate(gt, gt), ValueError);

    // shifted timestamps beyond the window associate nothing
    std::vector<std::array<double, 3>> pts{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    auto a = traj_of(pts);
    auto b = traj_of(pts);
    for (auto& tp : b) tp.timestamp += 5.0;
    CHECK_THROWS_AS(ate(a, b), ValueError);

    // small jitter within the window still associates
    auto c = traj_of(pts);
    for (auto& tp : c) tp.timestamp += 0.015;
    CHECK(ate(c, a).ate == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("umeyama alignment recovers a known similarity") {
    Rng rng(21);
    RigidPose rot;
    rot.axis_angle = {0.2, 0.5, -0.3};
    double scale = 2.5;
    std::array<double, 3> trans{1.0, -2.0, 0.5};
    std::vector<std::array<double, 3>> src, dst;
    for (int i = 0; i < 20; ++i) {
        std::array<double, 3> p{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        src.push_back(p);
        auto q = rot.apply(p);
        dst.push_back({scale * q[0] + trans[0], scale * q[1] + trans[1], scale * q[2] + trans[2]});
    }
    SimilarityTransform t = umeyama_alignment(src, dst);
    CHECK(t.scale == doctest::Approx(scale).epsilon(1e-9));
    for (size_t i = 0; i < src.size(); ++i) {
        auto m = t.apply(src[i]);
        for (int c = 0; c < 3; ++c)
            CHECK(m[static_cast<size_t>(c)] == doctest::Approx(dst[i][static_cast<size_t>(c)]).epsilon(1e-9));
    }
}

#pragma once

#include <string>
#include <vector>

#include "endogede/geometry.hpp"
#include "endogede/tensor.hpp"

namespace endogede {

enum class DepthScaling { None, Median };

struct EvalReport {
    double abs_rel = 0.0;
    double sq_rel = 0.0;
    double rmse = 0.0;
    double rmse_log = 0.0;   // natural log
    double delta = 0.0;      // fraction with max(d/d_hat, d_hat/d) < 1.25
    long long n_pixels = 0;
    double scale_applied = 1.0;
    double cap = 0.0;
};

// Valid set: gt > 0 and gt <= cap. Median scaling multiplies pred by
// median(gt)/median(pred) over the valid set first. Predictions are floored
// at 1e-6 to keep the log metric finite.
EvalReport depth_metrics(const Tensor& pred, const Tensor& gt, double cap = 150.0,
                         DepthScaling scaling = DepthScaling::Median);

// Trajectory evaluation: nearest-timestamp association (within max_dt),
// least-squares similarity alignment of positions, RMSE of the residuals.
struct AteReport {
    double ate = 0.0;
    long long n_poses = 0;
    double scale = 1.0;
};
AteReport ate(const std::vector<TimedPose>& pred, const std::vector<TimedPose>& gt,
              double max_dt = 0.02);

// Least-squares similarity fit mapping src points onto dst (Umeyama).
struct SimilarityTransform {
    double scale = 1.0;
    std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
    std::array<double, 3> translation{0, 0, 0};
    std::array<double, 3> apply(const std::array<double, 3>& p) const;
};
SimilarityTransform umeyama_alignment(const std::vector<std::array<double, 3>>& src,
                                      const std::vector<std::array<double, 3>>& dst);

} // namespace endogede

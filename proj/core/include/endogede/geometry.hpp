#pragma once

#include <array>
#include <string>
#include <vector>

#include "endogede/image_ops.hpp"
#include "endogede/tensor.hpp"

namespace endogede {

// Pinhole intrinsics in pixels. Pixel centers at integer coordinates,
// origin top-left (same convention as the sampler).
struct Intrinsics {
    double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;

    Tensor to_tensor() const {
        return Tensor(Shape{4}, {static_cast<float>(fx), static_cast<float>(fy),
                                 static_cast<float>(cx), static_cast<float>(cy)});
    }
    static Intrinsics from_tensor(const Tensor& k4);
    void validate(int width, int height, double margin = 4.0) const;
};

Intrinsics read_intrinsics_json(const std::string& path);
void write_intrinsics_json(const std::string& path, const Intrinsics& k);

// ---- plain-double SE(3) (scene generation, trajectory IO, oracles) --------

// Axis-angle rotation (radians) + translation. As a relative pose the
// convention is target-camera -> source-camera coordinates.
struct RigidPose {
    std::array<double, 3> axis_angle{0, 0, 0};
    std::array<double, 3> translation{0, 0, 0};

    std::array<double, 9> rotation_matrix() const;   // row-major
    std::array<double, 3> apply(const std::array<double, 3>& p) const;
    RigidPose inverse() const;
    static RigidPose compose(const RigidPose& a, const RigidPose& b);  // a after b
    std::array<double, 4> quaternion() const;        // (qx, qy, qz, qw)
    static RigidPose from_quaternion(const std::array<double, 4>& q,
                                     const std::array<double, 3>& t);
};

std::array<double, 3> axis_angle_from_matrix(const std::array<double, 9>& r);

// ---- differentiable SE(3) (tensor graph) ------------------------------------

// Rotation matrix [3,3] and translation [3] built on the tape.
struct PoseMat {
    Tensor rotation;
    Tensor translation;
};

// Rodrigues exponential of a 6-vector pose (axis-angle [3], translation [3]).
PoseMat pose_exp(const Tensor& axis_angle, const Tensor& translation);
PoseMat pose_inverse(const PoseMat& p);
PoseMat pose_compose(const PoseMat& a, const PoseMat& b);
// Transforms points [n,3] by R*p + t.
Tensor pose_apply(const PoseMat& p, const Tensor& points);

// ---- projection & warping ------------------------------------------------------

// ((u-cx)/fx*d, (v-cy)/fy*d, d); plain-double single-point version.
std::array<double, 3> backproject(double u, double v, double d, const Intrinsics& k);
// (fx*X/Z + cx, fy*Y/Z + cy); in_front false when Z <= z_eps.
struct Projected {
    double u = 0.0, v = 0.0;
    bool in_front = false;
};
Projected project(const std::array<double, 3>& p, const Intrinsics& k);

inline constexpr double kZEps = 1e-6;

// Sampling grid for the inverse rigid warp: each target pixel lifted with
// depth, mapped through pose (target->source), projected into the source.
struct WarpGrid {
    Tensor coords;    // [H,W,2] source-pixel coordinates
    Tensor in_front;  // [H,W] constant mask, 1 where Z > z_eps
};
WarpGrid rigid_warp_grid(const Tensor& depth, const PoseMat& pose, const Tensor& k4);

struct WarpResult {
    Tensor image;   // [H,W,C]
    Tensor valid;   // [H,W] constant mask: in-front AND in-bounds
};
WarpResult rigid_warp(const Tensor& src_image, const Tensor& target_depth,
                      const PoseMat& pose, const Tensor& k4);

// Samples src at p + flow(p); flow is a target->source displacement [H,W,2].
WarpResult flow_warp(const Tensor& src_image, const Tensor& flow);

// ---- trajectories -------------------------------------------------------------

struct TimedPose {
    double timestamp = 0.0;
    RigidPose pose;     // camera-to-world
};

// TUM format: "t x y z qx qy qz qw" per line, '#' comments.
std::vector<TimedPose> read_tum_trajectory(const std::string& path);
void write_tum_trajectory(const std::string& path, const std::vector<TimedPose>& traj);

} // namespace endogede

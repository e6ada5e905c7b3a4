#include "endogede/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "endogede/json_writer.hpp"

namespace endogede {

Intrinsics Intrinsics::from_tensor(const Tensor& k4) {
    if (k4.size() != 4) throw ShapeError("intrinsics tensor must hold 4 values");
    const float* p = k4.data();
    return Intrinsics{p[0], p[1], p[2], p[3]};
}

void Intrinsics::validate(int width, int height, double margin) const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw ValueError("intrinsics: fx, fy must be positive");
    if (cx < -margin * width || cx > (margin + 1) * width || cy < -margin * height ||
        cy > (margin + 1) * height)
        throw ValueError("intrinsics: principal point far outside image bounds");
}

Intrinsics read_intrinsics_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw IoError("bad intrinsics json " + path + ": " + e.what());
    }
    Intrinsics k;
    try {
        k.fx = j.at("fx").get<double>();
        k.fy = j.at("fy").get<double>();
        k.cx = j.at("cx").get<double>();
        k.cy = j.at("cy").get<double>();
    } catch (const std::exception& e) {
        throw IoError("intrinsics json needs fx, fy, cx, cy: " + std::string(e.what()));
    }
    return k;
}

void write_intrinsics_json(const std::string& path, const Intrinsics& k) {
    Json j = Json::object();
    j.set("fx", k.fx).set("fy", k.fy).set("cx", k.cx).set("cy", k.cy);
    write_text_file(path, j.dump(2));
}

// ---- plain-double SE(3) -------------------------------------------------------

std::array<double, 9> RigidPose::rotation_matrix() const {
    const auto& w = axis_angle;
    double th2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    double th = std::sqrt(th2);
    double a, b;  // sin(th)/th, (1-cos(th))/th^2
    if (th < 1e-8) {
        a = 1.0 - th2 / 6.0;
        b = 0.5 - th2 / 24.0;
    } else {
        a = std::sin(th) / th;
        b = (1.0 - std::cos(th)) / th2;
    }
    double wx = w[0], wy = w[1], wz = w[2];
    // R = I + a*[w]x + b*[w]x^2
    return {1.0 + b * (-wz * wz - wy * wy), -a * wz + b * wx * wy, a * wy + b * wx * wz,
            a * wz + b * wx * wy, 1.0 + b * (-wx * wx - wz * wz), -a * wx + b * wy * wz,
            -a * wy + b * wx * wz, a * wx + b * wy * wz, 1.0 + b * (-wx * wx - wy * wy)};
}

std::array<double, 3> RigidPose::apply(const std::array<double, 3>& p) const {
    auto r = rotation_matrix();
    return {r[0] * p[0] + r[1] * p[1] + r[2] * p[2] + translation[0],
            r[3] * p[0] + r[4] * p[1] + r[5] * p[2] + translation[1],
            r[6] * p[0] + r[7] * p[1] + r[8] * p[2] + translation[2]};
}

std::array<double, 3> axis_angle_from_matrix(const std::array<double, 9>& r) {
    double tr = r[0] + r[4] + r[8];
    double c = std::max(-1.0, std::min(1.0, (tr - 1.0) / 2.0));
    double th = std::acos(c);
    if (th < 1e-10) return {0.0, 0.0, 0.0};
    if (th > M_PI - 1e-6) {
        // near pi: extract axis from the symmetric part
        double xx = std::sqrt(std::max(0.0, (r[0] + 1.0) / 2.0));
        double yy = std::sqrt(std::max(0.0, (r[4] + 1.0) / 2.0));
        double zz = std::sqrt(std::max(0.0, (r[8] + 1.0) / 2.0));
        if (r[1] < 0) yy = -yy;
        if (r[2] < 0) zz = -zz;
        return {th * xx, th * yy, th * zz};
    }
    double s = 2.0 * std::sin(th);
    return {th * (r[7] - r[5]) / s, th * (r[2] - r[6]) / s, th * (r[3] - r[1]) / s};
}

RigidPose RigidPose::inverse() const {
    auto r = rotation_matrix();
    RigidPose inv;
    inv.axis_angle = {-axis_angle[0], -axis_angle[1], -axis_angle[2]};
    // t' = -R^T t
    inv.translation = {-(r[0] * translation[0] + r[3] * translation[1] + r[6] * translation[2]),
                       -(r[1] * translation[0] + r[4] * translation[1] + r[7] * translation[2]),
                       -(r[2] * translation[0] + r[5] * translation[1] + r[8] * translation[2])};
    return inv;
}

RigidPose RigidPose::compose(const RigidPose& a, const RigidPose& b) {
    auto ra = a.rotation_matrix();
    auto rb = b.rotation_matrix();
    std::array<double, 9> rc{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) acc += ra[i * 3 + k] * rb[k * 3 + j];
            rc[static_cast<size_t>(i * 3 + j)] = acc;
        }
    RigidPose c;
    c.axis_angle = axis_angle_from_matrix(rc);
    auto t = a.apply(b.translation);
    c.translation = t;
    return c;
}

std::array<double, 4> RigidPose::quaternion() const {
    const auto& w = axis_angle;
    double th = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
    if (th < 1e-12) return {0.0, 0.0, 0.0, 1.0};
    double s = std::sin(th / 2.0) / th;
    return {w[0] * s, w[1] * s, w[2] * s, std::cos(th / 2.0)};
}

RigidPose RigidPose::from_quaternion(const std::array<double, 4>& q,
                                     const std::array<double, 3>& t) {
    double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (norm < 1e-12) throw ValueError("zero quaternion");
    double x = q[0] / norm, y = q[1] / norm, z = q[2] / norm, w = q[3] / norm;
    double sin_half = std::sqrt(x * x + y * y + z * z);
    RigidPose p;
    p.translation = t;
    if (sin_half < 1e-12) return p;
    double th = 2.0 * std::atan2(sin_half, w);
    if (th > M_PI) th -= 2.0 * M_PI;
    double k = th / sin_half;
    p.axis_angle = {x * k, y * k, z * k};
    return p;
}

// ---- differentiable SE(3) --------------------------------------------------------

PoseMat pose_exp(const Tensor& axis_angle, const Tensor& translation) {
    if (axis_angle.size() != 3 || translation.size() != 3)
        throw ShapeError("pose_exp expects 3-vectors");
    Tensor w = reshape(axis_angle, Shape{3});
    Tensor wx = narrow_lastdim(w, 0, 1);
    Tensor wy = narrow_lastdim(w, 1, 1);
    Tensor wz = narrow_lastdim(w, 2, 1);
    Tensor th2 = wx * wx + wy * wy + wz * wz;

    // Trig coefficients; branch chosen on the current value (eager graph),
    // Taylor form avoids sqrt(0) in the small-angle regime.
    Tensor a, b;
    if (th2.item() < 1e-8f) {
        a = 1.0f - th2 / 6.0f;
        b = 0.5f - th2 / 24.0f;
    } else {
        Tensor th = sqrt(th2);
        a = sin(th) / th;
        b = (1.0f - cos(th)) / th2;
    }

    Tensor r00 = 1.0f + b * (0.0f - wz * wz - wy * wy);
    Tensor r01 = 0.0f - a * wz + b * wx * wy;
    Tensor r02 = a * wy + b * wx * wz;
    Tensor r10 = a * wz + b * wx * wy;
    Tensor r11 = 1.0f + b * (0.0f - wx * wx - wz * wz);
    Tensor r12 = 0.0f - a * wx + b * wy * wz;
    Tensor r20 = 0.0f - a * wy + b * wx * wz;
    Tensor r21 = a * wx + b * wy * wz;
    Tensor r22 = 1.0f + b * (0.0f - wx * wx - wy * wy);

    PoseMat p;
    p.rotation = reshape(concat_flat({r00, r01, r02, r10, r11, r12, r20, r21, r22}), Shape{3, 3});
    p.translation = reshape(translation, Shape{3});
    return p;
}

PoseMat pose_inverse(const PoseMat& p) {
    PoseMat inv;
    inv.rotation = transpose(p.rotation);
    Tensor t = reshape(p.translation, Shape{3, 1});
    inv.translation = reshape(matmul(inv.rotation, t), Shape{3}) * -1.0f;
    return inv;
}

PoseMat pose_compose(const PoseMat& a, const PoseMat& b) {
    PoseMat c;
    c.rotation = matmul(a.rotation, b.rotation);
    Tensor tb = reshape(b.translation, Shape{3, 1});
    c.translation = reshape(matmul(a.rotation, tb), Shape{3}) + a.translation;
    return c;
}

Tensor pose_apply(const PoseMat& p, const Tensor& points) {
    if (points.rank() != 2 || points.dim(1) != 3)
        throw ShapeError("pose_apply expects [n,3] points, got " + shape_str(points.shape()));
    Tensor rotated = matmul(points, transpose(p.rotation));
    return rotated + reshape(p.translation, Shape{1, 3});
}

// ---- projection -------------------------------------------------------------------

std::array<double, 3> backproject(double u, double v, double d, const Intrinsics& k) {
    if (!(d > 0.0)) throw ValueError("backproject requires positive depth");
    return {(u - k.cx) / k.fx * d, (v - k.cy) / k.fy * d, d};
}

Projected project(const std::array<double, 3>& p, const Intrinsics& k) {
    Projected out;
    if (p[2] <= kZEps) return out;  // in_front stays false, coords invalid
    out.in_front = true;
    out.u = k.fx * p[0] / p[2] + k.cx;
    out.v = k.fy * p[1] / p[2] + k.cy;
    return out;
}

WarpGrid rigid_warp_grid(const Tensor& depth, const PoseMat& pose, const Tensor& k4) {
    if (depth.rank() != 2)
        throw ShapeError("rigid_warp_grid expects [H,W] depth, got " + shape_str(depth.shape()));
    const int H = depth.dim(0), W = depth.dim(1);
    const long long n = static_cast<long long>(H) * W;

    Tensor fx = narrow_lastdim(reshape(k4, Shape{4}), 0, 1);
    Tensor fy = narrow_lastdim(reshape(k4, Shape{4}), 1, 1);
    Tensor cx = narrow_lastdim(reshape(k4, Shape{4}), 2, 1);
    Tensor cy = narrow_lastdim(reshape(k4, Shape{4}), 3, 1);

    Tensor grid = identity_grid(H, W);               // constant
    Tensor u = reshape(narrow_lastdim(grid, 0, 1), Shape{static_cast<int>(n), 1});
    Tensor v = reshape(narrow_lastdim(grid, 1, 1), Shape{static_cast<int>(n), 1});
    Tensor d = reshape(depth, Shape{static_cast<int>(n), 1});

    Tensor x = (u - cx) / fx * d;
    Tensor y = (v - cy) / fy * d;
    Tensor pts = concat_lastdim(concat_lastdim(x, y), d);   // [n,3] target camera
    Tensor src = pose_apply(pose, pts);                     // [n,3] source camera

    Tensor xs = narrow_lastdim(src, 0, 1);
    Tensor ys = narrow_lastdim(src, 1, 1);
    Tensor zs = narrow_lastdim(src, 2, 1);
    Tensor in_front = ge_mask(zs.detach(), static_cast<float>(kZEps));  // constant
    Tensor z_safe = clamp_min(zs, static_cast<float>(kZEps));
    Tensor us = fx * xs / z_safe + cx;
    Tensor vs = fy * ys / z_safe + cy;

    WarpGrid out;
    out.coords = reshape(concat_lastdim(us, vs), Shape{H, W, 2});
    out.in_front = reshape(in_front, Shape{H, W});
    return out;
}

WarpResult rigid_warp(const Tensor& src_image, const Tensor& target_depth,
                      const PoseMat& pose, const Tensor& k4) {
    WarpGrid grid = rigid_warp_grid(target_depth, pose, k4);
    SampleResult s = bilinear_sample(src_image, grid.coords);
    WarpResult out;
    out.image = s.values;
    out.valid = mul(s.mask, grid.in_front);   // both constant masks
    return out;
}

WarpResult flow_warp(const Tensor& src_image, const Tensor& flow) {
    if (flow.rank() != 3 || flow.dim(2) != 2)
        throw ShapeError("flow_warp expects [H,W,2] flow, got " + shape_str(flow.shape()));
    Tensor base = identity_grid(flow.dim(0), flow.dim(1));
    SampleResult s = bilinear_sample(src_image, add(base, flow));
    return {s.values, s.mask};
}

// ---- trajectories --------------------------------------------------------------------

std::vector<TimedPose> read_tum_trajectory(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<TimedPose> traj;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        double t, x, y, z, qx, qy, qz, qw;
        if (!(ss >> t >> x >> y >> z >> qx >> qy >> qz >> qw))
            throw IoError("malformed trajectory line in " + path + ": " + line);
        TimedPose tp;
        tp.timestamp = t;
        tp.pose = RigidPose::from_quaternion({qx, qy, qz, qw}, {x, y, z});
        traj.push_back(tp);
    }
    for (size_t i = 1; i < traj.size(); ++i)
        if (traj[i].timestamp <= traj[i - 1].timestamp)
            throw ValueError("trajectory timestamps must be strictly increasing: " + path);
    return traj;
}

void write_tum_trajectory(const std::string& path, const std::vector<TimedPose>& traj) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    char buf[256];
    for (const TimedPose& tp : traj) {
        auto q = tp.pose.quaternion();
        std::snprintf(buf, sizeof(buf), "%.6f %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n",
                      tp.timestamp, tp.pose.translation[0], tp.pose.translation[1],
                      tp.pose.translation[2], q[0], q[1], q[2], q[3]);
        f << buf;
    }
    if (!f) throw IoError("write failed: " + path);
}

} // namespace endogede

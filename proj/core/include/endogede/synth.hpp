#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "endogede/geometry.hpp"
#include "endogede/tensor.hpp"

namespace endogede {

// Procedural scene: a value-noise textured height field lit by a moving
// point light, observed along a smooth random trajectory. Every frame obeys
// image = clamp(albedo * gain * shading + specular, 0, 1) with analytic
// albedo/shading/depth, so ground truth is exact and multi-view consistent.
struct SceneConfig {
    std::uint64_t seed = 0;
    int width = 80;
    int height = 64;
    int frames = 3;
    int max_specular = 0;           // 0..3 Gaussian highlights per frame
    double gain_lo = 1.0;           // per-frame brightness gain range (0,2)
    double gain_hi = 1.0;
    std::vector<double> gains;      // explicit per-frame gains override

    // surface and texture
    double base_depth = 2.5;        // mean distance camera -> surface
    double terrain_amplitude = 0.25;
    double texture_wavelength = 2.2;  // world units of the coarsest octave
    int texture_octaves = 3;
    double albedo_lo = 0.15, albedo_hi = 0.75;

    // motion bounds per consecutive frame
    double max_rotation_deg = 2.0;
    double max_translation = 0.05;
    // per-frame jitter of the point light; 0 keeps the light fixed so that
    // shading is a surface property and ground truth warps are exact
    double light_motion = 0.0;
};

struct SceneFrame {
    Tensor image;     // [H,W,3]
    Tensor albedo;    // [H,W,3]
    Tensor shading;   // [H,W,1], includes the per-frame gain
    Tensor specular;  // [H,W,1]
    Tensor mask;      // [H,W,1] albedo-derivation probability
    Tensor depth;     // [H,W]
    RigidPose cam_to_world;
    std::array<double, 3> light{0, 0, 0};
    double gain = 1.0;
};

struct SceneBundle {
    SceneConfig config;
    Intrinsics intrinsics;
    std::vector<SceneFrame> frames;

    // relative pose target -> source camera coordinates
    RigidPose relative_pose(int target, int source) const;
    // rigid-geometry optical flow (target -> source displacement), [H,W,2]
    Tensor gt_flow(int target, int source) const;
};

SceneBundle gen_scene(const SceneConfig& config);

// Band-limited lattice noise in [0,1]; continuous domain, seeded lattice.
double value_noise(std::uint64_t seed, double x, double y);
double fbm_noise(std::uint64_t seed, double x, double y, int octaves);

} // namespace endogede

#include "endogede/synth.hpp"

#include <cmath>

#include "endogede/rng.hpp"

namespace endogede {

namespace {

double lattice_hash(std::uint64_t seed, long long xi, long long yi) {
    std::uint64_t h = seed;
    h ^= static_cast<std::uint64_t>(xi) * 0x9e3779b97f4a7c15ULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h ^= static_cast<std::uint64_t>(yi) * 0xc2b2ae3d27d4eb4fULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

} // namespace

double value_noise(std::uint64_t seed, double x, double y) {
    double fx = std::floor(x), fy = std::floor(y);
    long long x0 = static_cast<long long>(fx), y0 = static_cast<long long>(fy);
    double tx = smoothstep(x - fx), ty = smoothstep(y - fy);
    double v00 = lattice_hash(seed, x0, y0);
    double v01 = lattice_hash(seed, x0 + 1, y0);
    double v10 = lattice_hash(seed, x0, y0 + 1);
    double v11 = lattice_hash(seed, x0 + 1, y0 + 1);
    return (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11);
}

double fbm_noise(std::uint64_t seed, double x, double y, int octaves) {
    double acc = 0.0, amp = 1.0, freq = 1.0, norm = 0.0;
    for (int o = 0; o < octaves; ++o) {
        acc += amp * value_noise(seed + static_cast<std::uint64_t>(o) * 7919, x * freq, y * freq);
        norm += amp;
        amp *= 0.3;   // fast octave falloff keeps the texture interpolation-friendly
        freq *= 2.0;
    }
    return acc / norm;
}

namespace {

struct Surface {
    const SceneConfig* cfg;
    std::uint64_t height_seed;

    double height(double x, double y) const {
        double s = 1.0 / (2.0 * cfg->texture_wavelength);
        return cfg->base_depth +
               cfg->terrain_amplitude * (2.0 * fbm_noise(height_seed, x * s, y * s, 3) - 1.0);
    }

    std::array<double, 3> normal(double x, double y) const {
        const double h = 1e-4;
        double hx = (height(x + h, y) - height(x - h, y)) / (2 * h);
        double hy = (height(x, y + h) - height(x, y - h)) / (2 * h);
        double inv = 1.0 / std::sqrt(hx * hx + hy * hy + 1.0);
        return {hx * inv, hy * inv, -inv};   // oriented toward the cameras
    }
};

struct Texture {
    const SceneConfig* cfg;
    std::uint64_t seed;

    std::array<double, 3> albedo(double x, double y) const {
        double s = 1.0 / cfg->texture_wavelength;
        std::array<double, 3> a;
        for (int c = 0; c < 3; ++c)
            a[static_cast<size_t>(c)] =
                cfg->albedo_lo + (cfg->albedo_hi - cfg->albedo_lo) *
                                     fbm_noise(seed + static_cast<std::uint64_t>(c) * 104729,
                                               x * s, y * s, cfg->texture_octaves);
        return a;
    }
};

double shade(const Surface& surf, const std::array<double, 3>& p,
             const std::array<double, 3>& light) {
    auto n = surf.normal(p[0], p[1]);
    std::array<double, 3> l{light[0] - p[0], light[1] - p[1], light[2] - p[2]};
    double dist2 = l[0] * l[0] + l[1] * l[1] + l[2] * l[2];
    double inv = 1.0 / std::sqrt(dist2);
    double ndotl = (n[0] * l[0] + n[1] * l[1] + n[2] * l[2]) * inv;
    if (ndotl < 0.0) ndotl = 0.0;
    double atten = 1.0 / (1.0 + 0.03 * dist2);
    return 0.22 + 0.28 * ndotl * atten;
}

// Camera-frame depth of the surface along the pixel ray; bisection on a
// monotone signed distance (the terrain slope is far below the ray slope).
double ray_depth(const Surface& surf, const RigidPose& cam_to_world, double xn, double yn) {
    auto r = cam_to_world.rotation_matrix();
    const auto& c = cam_to_world.translation;
    std::array<double, 3> dir{r[0] * xn + r[1] * yn + r[2], r[3] * xn + r[4] * yn + r[5],
                              r[6] * xn + r[7] * yn + r[8]};
    auto f = [&](double s) {
        double px = c[0] + s * dir[0];
        double py = c[1] + s * dir[1];
        double pz = c[2] + s * dir[2];
        return pz - surf.height(px, py);
    };
    double lo = 0.3 * surf.cfg->base_depth, hi = 3.0 * surf.cfg->base_depth;
    if (f(lo) >= 0.0 || f(hi) <= 0.0)
        throw ValueError("scene ray does not hit the surface; camera left the valid volume");
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

RigidPose SceneBundle::relative_pose(int target, int source) const {
    const RigidPose& tt = frames[static_cast<size_t>(target)].cam_to_world;
    const RigidPose& ts = frames[static_cast<size_t>(source)].cam_to_world;
    return RigidPose::compose(ts.inverse(), tt);
}

Tensor SceneBundle::gt_flow(int target, int source) const {
    const SceneFrame& ft = frames[static_cast<size_t>(target)];
    const int H = config.height, W = config.width;
    RigidPose rel = relative_pose(target, source);
    Tensor flow(Shape{H, W, 2});
    float* pf = flow.data();
    const float* pd = ft.depth.data();
    for (int v = 0; v < H; ++v)
        for (int u = 0; u < W; ++u) {
            double d = pd[v * W + u];
            auto pt = backproject(u, v, d, intrinsics);
            auto ps = rel.apply(pt);
            Projected pr = project(ps, intrinsics);
            pf[(v * W + u) * 2 + 0] = static_cast<float>(pr.u - u);
            pf[(v * W + u) * 2 + 1] = static_cast<float>(pr.v - v);
        }
    return flow;
}

SceneBundle gen_scene(const SceneConfig& config) {
    if (config.frames < 1) throw ConfigError("scene needs at least one frame");
    if (!config.gains.empty() &&
        static_cast<int>(config.gains.size()) != config.frames)
        throw ConfigError("explicit gains must match the frame count");

    SceneBundle bundle;
    bundle.config = config;
    const int H = config.height, W = config.width;
    bundle.intrinsics = Intrinsics{0.8 * W, 0.8 * W, (W - 1) / 2.0, (H - 1) / 2.0};

    Rng rng(config.seed == 0 ? 0x6f1db57932ULL : config.seed);
    Surface surf{&config, rng.next_u64()};
    Texture tex{&config, rng.next_u64()};
    Rng traj_rng = rng.fork(1);
    Rng light_rng = rng.fork(2);
    Rng spec_rng = rng.fork(3);
    Rng gain_rng = rng.fork(4);

    const double max_rot = config.max_rotation_deg * M_PI / 180.0;

    RigidPose pose;   // frame 0 at the world origin looking +z
    for (int f = 0; f < config.frames; ++f) {
        if (f > 0) {
            RigidPose delta;
            for (int a = 0; a < 3; ++a) {
                delta.axis_angle[static_cast<size_t>(a)] = traj_rng.uniform(-max_rot, max_rot);
                delta.translation[static_cast<size_t>(a)] =
                    traj_rng.uniform(-config.max_translation, config.max_translation);
            }
            pose = RigidPose::compose(pose, delta);
        }

        SceneFrame frame;
        frame.cam_to_world = pose;
        frame.gain = config.gains.empty() ? gain_rng.uniform(config.gain_lo, config.gain_hi)
                                          : config.gains[static_cast<size_t>(f)];
        double lm = config.light_motion;
        frame.light = {0.35 + lm * light_rng.uniform(-1.0, 1.0),
                       -0.25 + lm * light_rng.uniform(-1.0, 1.0),
                       -0.15 + lm * light_rng.uniform(-0.5, 0.5)};

        frame.image = Tensor(Shape{H, W, 3});
        frame.albedo = Tensor(Shape{H, W, 3});
        frame.shading = Tensor(Shape{H, W, 1});
        frame.specular = Tensor(Shape{H, W, 1});
        frame.mask = Tensor(Shape{H, W, 1});
        frame.depth = Tensor(Shape{H, W});

        int n_spec = config.max_specular > 0 ? spec_rng.uniform_int(0, config.max_specular) : 0;
        std::vector<std::array<double, 3>> spots;  // u, v, radius
        std::vector<double> spot_amp;
        for (int sp = 0; sp < n_spec; ++sp) {
            spots.push_back({spec_rng.uniform(4.0, W - 5.0), spec_rng.uniform(4.0, H - 5.0),
                             spec_rng.uniform(1.5, 3.5)});
            spot_amp.push_back(spec_rng.uniform(0.2, 0.4));
        }

        const Intrinsics& k = bundle.intrinsics;
        auto rmat = pose.rotation_matrix();
        float* pi = frame.image.data();
        float* pa = frame.albedo.data();
        float* psh = frame.shading.data();
        float* psp = frame.specular.data();
        float* pd = frame.depth.data();
        for (int v = 0; v < H; ++v)
            for (int u = 0; u < W; ++u) {
                double xn = (u - k.cx) / k.fx;
                double yn = (v - k.cy) / k.fy;
                double d = ray_depth(surf, pose, xn, yn);
                pd[v * W + u] = static_cast<float>(d);
                std::array<double, 3> pc{xn * d, yn * d, d};
                std::array<double, 3> pw{
                    rmat[0] * pc[0] + rmat[1] * pc[1] + rmat[2] * pc[2] + pose.translation[0],
                    rmat[3] * pc[0] + rmat[4] * pc[1] + rmat[5] * pc[2] + pose.translation[1],
                    rmat[6] * pc[0] + rmat[7] * pc[1] + rmat[8] * pc[2] + pose.translation[2]};
                auto alb = tex.albedo(pw[0], pw[1]);
                double sh = frame.gain * shade(surf, pw, frame.light);
                double spec = 0.0;
                for (size_t sp = 0; sp < spots.size(); ++sp) {
                    double du = u - spots[sp][0], dv = v - spots[sp][1];
                    double r2 = spots[sp][2] * spots[sp][2];
                    spec += spot_amp[sp] * std::exp(-(du * du + dv * dv) / (2.0 * r2));
                }
                psh[v * W + u] = static_cast<float>(sh);
                psp[v * W + u] = static_cast<float>(spec);
                for (int c = 0; c < 3; ++c) {
                    double a = alb[static_cast<size_t>(c)];
                    pa[(v * W + u) * 3 + c] = static_cast<float>(a);
                    double val = a * sh + spec;
                    pi[(v * W + u) * 3 + c] =
                        static_cast<float>(val < 0.0 ? 0.0 : (val > 1.0 ? 1.0 : val));
                }
            }

        // assignment mask from the relative strength of albedo vs shading
        // gradients (albedo-edge indicator)
        float* pmask = frame.mask.data();
        auto fwd = [&](const float* src, int stride, int idx, int next_ok) {
            return next_ok ? static_cast<double>(src[idx + stride]) - src[idx] : 0.0;
        };
        for (int v = 0; v < H; ++v)
            for (int u = 0; u < W; ++u) {
                double ga = 0.0;
                for (int c = 0; c < 3; ++c) {
                    int idx = (v * W + u) * 3 + c;
                    ga += std::fabs(fwd(pa, 3, idx, u + 1 < W)) / 3.0;
                    ga += std::fabs(fwd(pa, W * 3, idx, v + 1 < H)) / 3.0;
                }
                double gs = std::fabs(fwd(psh, 1, v * W + u, u + 1 < W)) +
                            std::fabs(fwd(psh, W, v * W + u, v + 1 < H));
                double mean_a = (pa[(v * W + u) * 3] + pa[(v * W + u) * 3 + 1] +
                                 pa[(v * W + u) * 3 + 2]) / 3.0;
                double mean_s = psh[v * W + u];
                double wa = ga * mean_s, ws = gs * mean_a;
                pmask[v * W + u] = static_cast<float>(wa / (wa + ws + 1e-9));
            }

        bundle.frames.push_back(std::move(frame));
    }
    return bundle;
}

} // namespace endogede

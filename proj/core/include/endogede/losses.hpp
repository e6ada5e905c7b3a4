#pragma once

#include <map>
#include <string>
#include <vector>

#include "endogede/tensor.hpp"

namespace endogede {

// Loss weights; defaults are the training constants used throughout.
struct LossWeights {
    double beta = 0.85;              // SSIM/L1 mix inside the photometric loss
    double w_flow_smooth = 0.001;    // stage-1 flow smoothness
    double w_ret = 0.1;              // stage-2 Retinex term
    double w_rec_intrinsic = 0.02;   // stage-3 warped-recomposition term
    double w_rec_raw = 0.01;         // stage-3 warped-image term
    double w_if = 0.02;              // illumination-free albedo alignment
    double w_ap_smooth = 0.01;       // appearance-field smoothness
    double w_depth_smooth = 0.001;   // depth smoothness
};

// Named term values for training logs; accumulated where losses compose.
using LossBreakdown = std::map<std::string, double>;

struct PhotoStats {
    double masked_fraction = 1.0;
    bool empty_mask = false;
};

// Per-pixel, per-channel SSIM with 3x3 box statistics, replicate padding,
// C1 = 0.01^2, C2 = 0.03^2.
Tensor ssim(const Tensor& a, const Tensor& b);

// mean over visible pixels of beta*(1-SSIM)/2 + (1-beta)*|I - I_hat|,
// channel-meaned first; the mean normalizes by the visible count, so mask
// area does not rescale the loss. An all-zero mask yields 0 with a flag.
Tensor photometric_loss(const Tensor& pred, const Tensor& target, const Tensor& mask,
                        const LossWeights& w = {}, PhotoStats* stats = nullptr);

// Forward-backward flow consistency: visible iff p + fwd(p) lands in bounds
// and |fwd(p) + bwd(p + fwd(p))| < max(3.0, 0.05*|fwd(p)|). Binary [H,W].
Tensor visibility_mask(const Tensor& flow_fwd, const Tensor& flow_bwd);

// clamp(n*I, 0, 1); n must lie in (0,2).
Tensor augment_brightness(const Tensor& image, double n);

// L_p(A1*S, I) + L_p(An*S, I) with a full-ones mask. S broadcasts over the
// color channels.
Tensor recomposition_loss(const Tensor& albedo_raw, const Tensor& albedo_aug,
                          const Tensor& shading, const Tensor& image,
                          const LossWeights& w = {}, LossBreakdown* breakdown = nullptr);

// L_p(grad A, grad I * M) + L_p(grad S, mean_c(grad I) * (1-M)); gradients
// stack (dx, dy) along channels.
Tensor retinex_loss(const Tensor& albedo, const Tensor& shading, const Tensor& mask,
                    const Tensor& image, const LossWeights& w = {},
                    LossBreakdown* breakdown = nullptr);

// Stage 1: L_p(I_t, I_warp) + w * mean(|grad O| * exp(-|grad I_ref|)),
// full-ones photometric mask.
Tensor flow_loss(const Tensor& target, const Tensor& flow_warped, const Tensor& flow,
                 const Tensor& edge_ref, const LossWeights& w = {},
                 LossBreakdown* breakdown = nullptr);

// One frame's stage-2 term: recomposition of the raw image plus the
// brightness-augmented branch (same albedo, shading scaled by n), plus the
// weighted Retinex term.
Tensor stage2_frame_loss(const Tensor& albedo, const Tensor& shading, const Tensor& mask,
                         const Tensor& image, double brightness_n,
                         const LossWeights& w = {}, LossBreakdown* breakdown = nullptr);

// w_ap * mean(|grad A_p| * exp(+|grad(I_t - I_warp_opt)|))
//  + w_d * mean(|grad (D/mean D)| * exp(+|grad I_t|)); gradient magnitudes
// channel-meaned before the exponent.
Tensor smoothness_loss(const Tensor& appearance, const Tensor& depth, const Tensor& target,
                       const Tensor& flow_warped, const LossWeights& w = {},
                       LossBreakdown* breakdown = nullptr);

// One warped source frame feeding the stage-3 objective.
struct WarpedSource {
    Tensor image;             // I_{s->t}
    Tensor albedo;            // A_{s->t}
    Tensor shading;           // S_{s->t}
    Tensor valid;             // warp validity mask [H,W]
    Tensor visibility;        // flow-consistency visibility V [H,W]
    Tensor flow_warped_image; // I^opt_{s->t} from stage 1
    Tensor appearance;        // additive brightness correction A_p [H,W,1]
};

// Per source: smoothness + w_rec_intrinsic*L_p(A*S warped, I_t)
//  + w_rec_raw*L_p(I_{s->t} + A_p, I_t) + w_if*L_p(A_{s->t}, A_t), with
// photometric masks V AND valid; summed over the sources.
Tensor stage3_loss(const Tensor& target_image, const Tensor& target_albedo,
                   const Tensor& target_depth, const std::vector<WarpedSource>& sources,
                   const LossWeights& w = {}, LossBreakdown* breakdown = nullptr);

} // namespace endogede

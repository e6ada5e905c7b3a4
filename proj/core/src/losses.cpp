#include "endogede/losses.hpp"

#include <cmath>

#include "endogede/image_ops.hpp"

namespace endogede {

namespace {

constexpr float kC1 = 0.01f * 0.01f;
constexpr float kC2 = 0.03f * 0.03f;

void note(LossBreakdown* b, const std::string& key, const Tensor& v) {
    if (b) (*b)[key] += static_cast<double>(v.item());
}

// (dx, dy) stacked along channels -> [H,W,2C].
Tensor grad_stack(const Tensor& img) {
    auto [dx, dy] = spatial_gradient(img);
    return concat_lastdim(dx, dy);
}

// Channel-mean absolute gradient magnitude |dx| + |dy|, shape [H,W,1].
Tensor edge_magnitude(const Tensor& img) {
    auto [dx, dy] = spatial_gradient(img);
    return mean_lastdim(abs(dx)) + mean_lastdim(abs(dy));
}

Tensor full_mask_like(const Tensor& img) {
    return Tensor::ones(Shape{img.dim(0), img.dim(1)});
}

} // namespace

Tensor ssim(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("ssim shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    Tensor mu_a = avg_pool3x3(a);
    Tensor mu_b = avg_pool3x3(b);
    Tensor mu_aa = mu_a * mu_a;
    Tensor mu_bb = mu_b * mu_b;
    Tensor mu_ab = mu_a * mu_b;
    Tensor sigma_a = avg_pool3x3(a * a) - mu_aa;
    Tensor sigma_b = avg_pool3x3(b * b) - mu_bb;
    Tensor sigma_ab = avg_pool3x3(a * b) - mu_ab;
    Tensor num = (2.0f * mu_ab + kC1) * (2.0f * sigma_ab + kC2);
    Tensor den = (mu_aa + mu_bb + kC1) * (sigma_a + sigma_b + kC2);
    return num / den;
}

Tensor photometric_loss(const Tensor& pred, const Tensor& target, const Tensor& mask,
                        const LossWeights& w, PhotoStats* stats) {
    if (pred.shape() != target.shape())
        throw ShapeError("photometric_loss shape mismatch: " + shape_str(pred.shape()) +
                         " vs " + shape_str(target.shape()));
    if (mask.rank() != 2 || mask.dim(0) != pred.dim(0) || mask.dim(1) != pred.dim(1))
        throw ShapeError("photometric_loss mask must be [H,W]");
    float beta = static_cast<float>(w.beta);

    // Invisible prediction pixels are filled with the target before the
    // comparison; otherwise their (zeroed) values would leak into the SSIM
    // box windows of adjacent visible pixels. They still contribute nothing
    // to the loss and stay out of the normalizing count.
    Tensor cmp = pred;
    double covered = 0.0;
    {
        const float* m = mask.data();
        bool partial = false;
        for (long long i = 0; i < mask.size(); ++i) {
            covered += m[i];
            partial = partial || m[i] != 1.0f;
        }
        if (partial) {
            Tensor m3 = reshape(mask, Shape{pred.dim(0), pred.dim(1), 1});
            cmp = pred * m3 + target.detach() * (1.0f - m3);
        }
    }

    Tensor dssim = (1.0f - ssim(target, cmp)) * 0.5f;
    Tensor l1 = abs(target - cmp);
    Tensor per_px = mean_lastdim(beta * dssim + (1.0f - beta) * l1);   // [H,W,1]
    per_px = reshape(per_px, Shape{pred.dim(0), pred.dim(1)});
    bool empty = false;
    Tensor loss = masked_mean(per_px, mask, &empty);
    if (stats) {
        stats->masked_fraction = covered / static_cast<double>(mask.size());
        stats->empty_mask = empty;
    }
    return loss;
}

Tensor visibility_mask(const Tensor& flow_fwd, const Tensor& flow_bwd) {
    if (flow_fwd.rank() != 3 || flow_fwd.dim(2) != 2 || flow_fwd.shape() != flow_bwd.shape())
        throw ShapeError("visibility_mask expects matching [H,W,2] flows");
    const int H = flow_fwd.dim(0), W = flow_fwd.dim(1);
    Tensor base = identity_grid(H, W);
    // all-constant computation; masks never carry gradients
    SampleResult bwd_at_fwd = bilinear_sample(flow_bwd.detach(), add(base, flow_fwd.detach()));
    Tensor out(Shape{H, W});
    const float* ff = flow_fwd.data();
    const float* fb = bwd_at_fwd.values.data();
    const float* inb = bwd_at_fwd.mask.data();
    float* po = out.data();
    for (int p = 0; p < H * W; ++p) {
        if (inb[p] == 0.0f) continue;
        double fx = ff[p * 2], fy = ff[p * 2 + 1];
        double rx = fx + fb[p * 2], ry = fy + fb[p * 2 + 1];
        double res = std::sqrt(rx * rx + ry * ry);
        double fwd_mag = std::sqrt(fx * fx + fy * fy);
        po[p] = res < std::max(3.0, 0.05 * fwd_mag) ? 1.0f : 0.0f;
    }
    return out;
}

Tensor augment_brightness(const Tensor& image, double n) {
    if (!(n > 0.0) || !(n < 2.0))
        throw ConfigError("brightness factor must lie in (0,2), got " + std::to_string(n));
    return clamp(image * static_cast<float>(n), 0.0f, 1.0f);
}

Tensor recomposition_loss(const Tensor& albedo_raw, const Tensor& albedo_aug,
                          const Tensor& shading, const Tensor& image,
                          const LossWeights& w, LossBreakdown* breakdown) {
    Tensor ones = full_mask_like(image);
    Tensor raw = photometric_loss(albedo_raw * shading, image, ones, w);
    Tensor aug = photometric_loss(albedo_aug * shading, image, ones, w);
    note(breakdown, "rec_raw_albedo", raw);
    note(breakdown, "rec_aug_albedo", aug);
    return raw + aug;
}

Tensor retinex_loss(const Tensor& albedo, const Tensor& shading, const Tensor& mask,
                    const Tensor& image, const LossWeights& w, LossBreakdown* breakdown) {
    Tensor ones = full_mask_like(image);
    Tensor gi = grad_stack(image);                       // [H,W,2C]
    Tensor ga = grad_stack(albedo);
    Tensor gs = grad_stack(shading);                     // [H,W,2]
    Tensor gi_mean = concat_lastdim(mean_lastdim(narrow_lastdim(gi, 0, image.dim(2))),
                                    mean_lastdim(narrow_lastdim(gi, image.dim(2), image.dim(2))));
    Tensor albedo_term = photometric_loss(ga, gi * mask, ones, w);
    Tensor shading_term = photometric_loss(gs, gi_mean * (1.0f - mask), ones, w);
    note(breakdown, "ret_albedo", albedo_term);
    note(breakdown, "ret_shading", shading_term);
    return albedo_term + shading_term;
}

Tensor flow_loss(const Tensor& target, const Tensor& flow_warped, const Tensor& flow,
                 const Tensor& edge_ref, const LossWeights& w, LossBreakdown* breakdown) {
    Tensor ones = full_mask_like(target);
    Tensor photo = photometric_loss(flow_warped, target, ones, w);
    Tensor smooth = mean(mul(mean_lastdim(abs(grad_stack(flow))),
                             exp(-1.0f * edge_magnitude(edge_ref))));
    note(breakdown, "flow_photometric", photo);
    note(breakdown, "flow_smooth", smooth);
    return photo + static_cast<float>(w.w_flow_smooth) * smooth;
}

Tensor stage2_frame_loss(const Tensor& albedo, const Tensor& shading, const Tensor& mask,
                         const Tensor& image, double brightness_n,
                         const LossWeights& w, LossBreakdown* breakdown) {
    // Raw branch: the field triple must recompose the frame. Augmented
    // branch: the albedo is reused unchanged (illumination-invariant) while
    // the shading absorbs the brightness factor.
    Tensor ones = full_mask_like(image);
    Tensor aug_image = augment_brightness(image, brightness_n);
    Tensor rec_raw = photometric_loss(albedo * shading, image, ones, w);
    Tensor rec_aug = photometric_loss(
        clamp(albedo * (shading * static_cast<float>(brightness_n)), 0.0f, 1.0f),
        aug_image, ones, w);
    Tensor rec = rec_raw + rec_aug;
    Tensor ret = retinex_loss(albedo, shading, mask, image, w, breakdown);
    note(breakdown, "stage2_rec", rec);
    note(breakdown, "stage2_ret", ret);
    return rec + static_cast<float>(w.w_ret) * ret;
}

Tensor smoothness_loss(const Tensor& appearance, const Tensor& depth, const Tensor& target,
                       const Tensor& flow_warped, const LossWeights& w,
                       LossBreakdown* breakdown) {
    Tensor ap_term = mean(mul(mean_lastdim(abs(grad_stack(appearance))),
                              exp(edge_magnitude(target - flow_warped))));
    // mean-normalized depth decouples the term from the depth scale
    Tensor d3 = reshape(depth, Shape{depth.dim(0), depth.dim(1), 1});
    Tensor d_norm = d3 / mean(d3);
    Tensor depth_term = mean(mul(mean_lastdim(abs(grad_stack(d_norm))),
                                 exp(edge_magnitude(target))));
    note(breakdown, "smooth_appearance", ap_term);
    note(breakdown, "smooth_depth", depth_term);
    return static_cast<float>(w.w_ap_smooth) * ap_term +
           static_cast<float>(w.w_depth_smooth) * depth_term;
}

Tensor stage3_loss(const Tensor& target_image, const Tensor& target_albedo,
                   const Tensor& target_depth, const std::vector<WarpedSource>& sources,
                   const LossWeights& w, LossBreakdown* breakdown) {
    if (sources.empty()) throw ConfigError("stage3_loss needs at least one warped source");
    Tensor total = Tensor::scalar(0.0f);
    for (const WarpedSource& s : sources) {
        Tensor m = mul(s.visibility.detach(), s.valid.detach());
        Tensor sm = smoothness_loss(s.appearance, target_depth, target_image,
                                    s.flow_warped_image.detach(), w, breakdown);
        Tensor rec_intr = photometric_loss(s.albedo * s.shading, target_image, m, w);
        Tensor corrected = s.image + s.appearance;
        Tensor rec_raw = photometric_loss(corrected, target_image, m, w);
        Tensor iff = photometric_loss(s.albedo, target_albedo, m, w);
        note(breakdown, "stage3_rec_intrinsic", rec_intr);
        note(breakdown, "stage3_rec_raw", rec_raw);
        note(breakdown, "stage3_if", iff);
        total = total + sm + static_cast<float>(w.w_rec_intrinsic) * rec_intr +
                static_cast<float>(w.w_rec_raw) * rec_raw + static_cast<float>(w.w_if) * iff;
    }
    return total;
}

} // namespace endogede

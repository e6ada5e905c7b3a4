#include "endogede/image_ops.hpp"

#include <cmath>
#include <tuple>

namespace endogede {

namespace {

void require_hwc(const Tensor& img, const char* op) {
    if (img.rank() != 3)
        throw ShapeError(std::string(op) + " requires an [H,W,C] tensor, got " +
                         shape_str(img.shape()));
}

struct Corner {
    bool ok;
    int x0, y0;
    float fx, fy;
};

// Boundary slack: float32 grid math lands exact-edge samples a few ulps
// outside; such points are clamped onto the edge and stay valid.
constexpr float kEdgeTol = 1e-4f;

Corner corner_of(const float* coords, int p, int H, int W) {
    float x = coords[p * 2 + 0];
    float y = coords[p * 2 + 1];
    Corner c;
    c.ok = x >= -kEdgeTol && x <= static_cast<float>(W - 1) + kEdgeTol && y >= -kEdgeTol &&
           y <= static_cast<float>(H - 1) + kEdgeTol;
    if (x < 0.0f) x = 0.0f;
    if (x > static_cast<float>(W - 1)) x = static_cast<float>(W - 1);
    if (y < 0.0f) y = 0.0f;
    if (y > static_cast<float>(H - 1)) y = static_cast<float>(H - 1);
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    // exact right/bottom edge degenerates to a zero-weight phantom neighbor
    if (x0 > W - 2) x0 = W - 2;
    if (y0 > H - 2) y0 = H - 2;
    if (x0 < 0) x0 = 0;
    if (y0 < 0) y0 = 0;
    c.x0 = x0;
    c.y0 = y0;
    c.fx = x - static_cast<float>(x0);
    c.fy = y - static_cast<float>(y0);
    return c;
}

} // namespace

SampleResult bilinear_sample(const Tensor& img, const Tensor& coords) {
    require_hwc(img, "bilinear_sample");
    if (coords.rank() != 3 || coords.dim(2) != 2)
        throw ShapeError("bilinear_sample coords must be [H',W',2], got " +
                         shape_str(coords.shape()));
    const int H = img.dim(0), W = img.dim(1), C = img.dim(2);
    const int Ho = coords.dim(0), Wo = coords.dim(1);

    Tensor out(Shape{Ho, Wo, C});
    Tensor mask(Shape{Ho, Wo});
    const float* pim = img.data();
    const float* pc = coords.data();
    float* po = out.data();
    float* pm = mask.data();

    for (int p = 0; p < Ho * Wo; ++p) {
        Corner cr = corner_of(pc, p, H, W);
        pm[p] = cr.ok ? 1.0f : 0.0f;
        if (!cr.ok) continue;
        const float* r0 = pim + (cr.y0 * W + cr.x0) * C;
        const float* r1 = pim + ((cr.y0 + 1) * W + cr.x0) * C;
        for (int c = 0; c < C; ++c) {
            float v00 = r0[c], v01 = r0[C + c];
            float v10 = r1[c], v11 = r1[C + c];
            po[p * C + c] = (1.0f - cr.fy) * ((1.0f - cr.fx) * v00 + cr.fx * v01) +
                            cr.fy * ((1.0f - cr.fx) * v10 + cr.fx * v11);
        }
    }

    Tape* tp = Tape::active();
    bool gi = detail::grad_flows(img), gc = detail::grad_flows(coords);
    if (tp && (gi || gc)) {
        detail::mark_tape_product(out);
        Tensor imgc = img, coordsc = coords, outc = out;
        tp->record([imgc, coordsc, outc, gi, gc, H, W, C, Ho, Wo]() {
            const float* go = outc.grad_data();
            const float* pim2 = imgc.data();
            const float* pc2 = coordsc.data();
            float* gimg = gi ? detail::grad_accum(imgc) : nullptr;
            float* gco = gc ? detail::grad_accum(coordsc) : nullptr;
            for (int p = 0; p < Ho * Wo; ++p) {
                Corner cr = corner_of(pc2, p, H, W);
                if (!cr.ok) continue;
                float dx_acc = 0.0f, dy_acc = 0.0f;
                for (int c = 0; c < C; ++c) {
                    float g = go[p * C + c];
                    int i00 = (cr.y0 * W + cr.x0) * C + c;
                    int i01 = i00 + C;
                    int i10 = i00 + W * C;
                    int i11 = i10 + C;
                    if (gimg) {
                        gimg[i00] += g * (1.0f - cr.fy) * (1.0f - cr.fx);
                        gimg[i01] += g * (1.0f - cr.fy) * cr.fx;
                        gimg[i10] += g * cr.fy * (1.0f - cr.fx);
                        gimg[i11] += g * cr.fy * cr.fx;
                    }
                    if (gco) {
                        float v00 = pim2[i00], v01 = pim2[i01];
                        float v10 = pim2[i10], v11 = pim2[i11];
                        dx_acc += g * ((1.0f - cr.fy) * (v01 - v00) + cr.fy * (v11 - v10));
                        dy_acc += g * ((1.0f - cr.fx) * (v10 - v00) + cr.fx * (v11 - v01));
                    }
                }
                if (gco) {
                    gco[p * 2 + 0] += dx_acc;
                    gco[p * 2 + 1] += dy_acc;
                }
            }
        });
    }
    return {out, mask};
}

std::pair<Tensor, Tensor> spatial_gradient(const Tensor& img) {
    require_hwc(img, "spatial_gradient");
    const int H = img.dim(0), W = img.dim(1), C = img.dim(2);
    if (H < 2 || W < 2)
        throw ShapeError("spatial_gradient requires H,W >= 2, got " + shape_str(img.shape()));
    Tensor dx(Shape{H, W, C});
    Tensor dy(Shape{H, W, C});
    const float* pi = img.data();
    float* px = dx.data();
    float* py = dy.data();
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                int i = (y * W + x) * C + c;
                px[i] = x + 1 < W ? pi[i + C] - pi[i] : 0.0f;
                py[i] = y + 1 < H ? pi[i + W * C] - pi[i] : 0.0f;
            }
    Tape* tp = Tape::active();
    if (tp && detail::grad_flows(img)) {
        detail::mark_tape_product(dx);
        detail::mark_tape_product(dy);
        Tensor imgc = img, dxc = dx, dyc = dy;
        tp->record([imgc, dxc, dyc, H, W, C]() {
            const float* gx = dxc.grad_data();
            const float* gy = dyc.grad_data();
            float* g = detail::grad_accum(imgc);
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    for (int c = 0; c < C; ++c) {
                        int i = (y * W + x) * C + c;
                        if (x + 1 < W) {
                            g[i + C] += gx[i];
                            g[i] -= gx[i];
                        }
                        if (y + 1 < H) {
                            g[i + W * C] += gy[i];
                            g[i] -= gy[i];
                        }
                    }
        });
    }
    return {dx, dy};
}

Tensor avg_pool3x3(const Tensor& img) {
    require_hwc(img, "avg_pool3x3");
    const int H = img.dim(0), W = img.dim(1), C = img.dim(2);
    if (H < 3 || W < 3)
        throw ShapeError("avg_pool3x3 requires H,W >= 3, got " + shape_str(img.shape()));
    Tensor out(Shape{H, W, C});
    const float* pi = img.data();
    float* po = out.data();
    auto cl = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        acc += pi[(cl(y + dy, H) * W + cl(x + dx, W)) * C + c];
                po[(y * W + x) * C + c] = static_cast<float>(acc / 9.0);
            }
    Tape* tp = Tape::active();
    if (tp && detail::grad_flows(img)) {
        detail::mark_tape_product(out);
        Tensor imgc = img, outc = out;
        tp->record([imgc, outc, H, W, C, cl]() {
            const float* go = outc.grad_data();
            float* g = detail::grad_accum(imgc);
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    for (int c = 0; c < C; ++c) {
                        float gv = go[(y * W + x) * C + c] / 9.0f;
                        if (gv == 0.0f) continue;
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx)
                                g[(cl(y + dy, H) * W + cl(x + dx, W)) * C + c] += gv;
                    }
        });
    }
    return out;
}

Tensor identity_grid(int height, int width) {
    Tensor g(Shape{height, width, 2});
    float* p = g.data();
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            p[(y * width + x) * 2 + 0] = static_cast<float>(x);
            p[(y * width + x) * 2 + 1] = static_cast<float>(y);
        }
    return g;
}

} // namespace endogede

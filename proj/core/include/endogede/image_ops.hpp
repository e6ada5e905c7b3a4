#pragma once

#include <utility>

#include "endogede/tensor.hpp"

namespace endogede {

// Image tensors are [H, W, C]; sampling coordinates are [H', W', 2] with
// coords[...,0] = x (rightward) and coords[...,1] = y (downward). Pixel
// centers sit at integer coordinates, origin at the top-left pixel.

struct SampleResult {
    Tensor values;  // [H', W', C], zero where invalid
    Tensor mask;    // [H', W'], 1 where the sample point lies in bounds
};

// Bilinear interpolation, differentiable in both the image and the coords.
// A point is valid when x in [0, W-1] and y in [0, H-1]; everything outside
// samples to zero with mask 0 rather than clamping.
SampleResult bilinear_sample(const Tensor& img, const Tensor& coords);

// Forward differences; the last column (dx) / row (dy) is zero so the
// outputs keep the input shape. Requires H, W >= 2.
std::pair<Tensor, Tensor> spatial_gradient(const Tensor& img);

// 3x3 box filter with replicate padding. Requires H, W >= 3.
Tensor avg_pool3x3(const Tensor& img);

// [H, W, 2] grid with coords (x, y) = (column, row); a constant tensor.
Tensor identity_grid(int height, int width);

} // namespace endogede

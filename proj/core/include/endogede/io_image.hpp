#pragma once

#include <string>

#include "endogede/tensor.hpp"

namespace endogede {

// PFM: 'PF' (color, [H,W,3]) or 'Pf' (gray, [H,W] / [H,W,1]), little-endian
// (scale -1.0), scanlines stored bottom-to-top per the format convention.
void write_pfm(const std::string& path, const Tensor& img);
Tensor read_pfm(const std::string& path);   // [H,W,3] or [H,W,1]

// PPM P6, 8-bit; values clamped to [0,1] and scaled to 255.
void write_ppm(const std::string& path, const Tensor& img);   // [H,W,3]
Tensor read_ppm(const std::string& path);                     // [H,W,3] in [0,1]

} // namespace endogede

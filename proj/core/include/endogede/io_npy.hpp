#pragma once

#include <string>

#include "endogede/tensor.hpp"

namespace endogede {

// NPY v1.0, C-order, little-endian. Writing always emits '<f4'; reading
// accepts '<f4' and '<f8' (converted to float32 on load).
void write_npy(const std::string& path, const Tensor& t);
Tensor read_npy(const std::string& path);

} // namespace endogede

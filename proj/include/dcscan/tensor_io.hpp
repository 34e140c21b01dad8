#pragma once

#include <string>

#include "dcscan/tensor.hpp"

namespace dcscan {

// DCT1 binary tensor format: magic "DCT1", u32 LE rank, rank u32 LE extents,
// then the row-major f64 LE payload. Lossless round trip.
void write_dct1(const std::string& path, const Tensor& t);
Tensor read_dct1(const std::string& path);

}  // namespace dcscan

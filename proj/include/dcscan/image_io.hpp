#pragma once

#include <string>

#include "dcscan/tensor.hpp"

namespace dcscan {

// Binary PGM (P5), maxval 255. Pixels map linearly: write round(v*255) of a
// [H,W] image in [0,1]; read divides by 255. Round trip quantizes to 1/255.
void write_pgm(const std::string& path, const Tensor& img);
Tensor read_pgm(const std::string& path);

// Same container for class-index maps: raw gray value = class index.
void write_pgm_indexed(const std::string& path, const IntGrid& grid);
IntGrid read_pgm_indexed(const std::string& path);

}  // namespace dcscan

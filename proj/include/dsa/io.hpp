#pragma once

#include <string>

#include "dsa/image.hpp"

namespace dsa::io {

// Raw float image container: magic "IMGF", u32 height, u32 width, then
// height*width*3 float32 values row-major RGB, all little-endian. Values are
// quantized to float32 on write; read(write(img)) is lossless from then on.
void write_imgf(const Image& img, const std::string& path);
Image read_imgf(const std::string& path);

// Mask container: magic "MSKB", u32 height, u32 width, height*width bytes
// of 0/1. Lossless round trip.
void write_mask(const Mask& m, const std::string& path);
Mask read_mask(const std::string& path);

/// 8-bit PNG for human inspection (values clamped to [0,1] then scaled).
void write_png(const Image& img, const std::string& path);

} // namespace dsa::io

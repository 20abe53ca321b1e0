#ifndef CHARTEX_IMAGE_IO_HPP_
#define CHARTEX_IMAGE_IO_HPP_

#include <string>

#include "chartex/core.hpp"

namespace chartex {

// Reads a PNG or JPEG file (by extension, falling back to magic bytes) into
// an RGB image with values in [0,1]. Throws DataError on unreadable files.
Image load_image(const std::string& path);

// Writes an 8-bit RGB PNG. Values are clamped to [0,1] and rounded, so the
// save/load round trip is exact for images already quantized to 1/255 steps.
void save_png(const Image& img, const std::string& path);

}  // namespace chartex

#endif  // CHARTEX_IMAGE_IO_HPP_

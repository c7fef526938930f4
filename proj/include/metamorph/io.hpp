#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metamorph/deformation.hpp"
#include "metamorph/image.hpp"

namespace metamorph {

/// 8-bit grayscale raster of any size; row r holds the pixels with y index r.
struct GrayRaster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
};

struct RgbRaster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // r, g, b interleaved
};

/// Binary PGM (P5, maxval 255) or grayscale PNG, detected from the file header.
GrayRaster read_gray(const std::string& path);
/// Format chosen by extension (.pgm or .png).
void write_gray(const GrayRaster& raster, const std::string& path);
void write_rgb_png(const RgbRaster& raster, const std::string& path);

/// Loads a (2^M + 1)^2 image with intensities scaled to [0, 1]. Other sizes
/// raise DimensionError naming the nearest valid size.
Image load_image(const std::string& path);
/// Clamps to [0, 1] and quantizes with round-half-up.
void save_image(const Image& u, const std::string& path);
GrayRaster quantize(const Image& u);

/// Side length 2^M + 1 closest to `size` (M >= 1).
int nearest_valid_size(int size);

/// Pads by edge replication or crops, keeping the raster centred.
GrayRaster resize_canvas(const GrayRaster& raster, int size);

/// "MDEF1", u32 level, u32 width, u32 height of the full control grid, then
/// (dx, dy) as little-endian doubles in row-major order.
std::vector<std::uint8_t> encode_deformation(const Deformation& phi);
Deformation decode_deformation(const std::vector<std::uint8_t>& bytes);
void save_deformation(const Deformation& phi, const std::string& path);
Deformation load_deformation(const std::string& path);

std::vector<std::uint8_t> read_file(const std::string& path);
/// Writes to a temporary file in the same directory and renames it over `path`.
void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes);
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace metamorph

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stereoref/raster.hpp"

namespace stereoref {

using Gray16Image = Raster<std::uint16_t>;

struct IndexedImage {
  Raster<std::uint8_t> indices;
  std::vector<Rgb8> palette;
};

// PNG codecs. Output carries no timestamp or text chunks, so encoding the
// same raster twice gives identical bytes. Readers throw FileError (malformed)
// when the file is not a PNG of the expected kind; the in-memory variants use
// "<memory>" as the path.

std::vector<std::uint8_t> encode_png(const ColorImage& image);
std::vector<std::uint8_t> encode_png(const Gray16Image& image);
std::vector<std::uint8_t> encode_png(const IndexedImage& image);

// Accepts any 8- or 16-bit PNG; gray, palette and alpha are converted to RGB.
ColorImage decode_png_rgb(const std::vector<std::uint8_t>& bytes, const std::string& path = "<memory>");
// Requires a 16-bit single-channel PNG.
Gray16Image decode_png_gray16(const std::vector<std::uint8_t>& bytes, const std::string& path = "<memory>");
// Requires a palette PNG.
IndexedImage decode_png_indexed(const std::vector<std::uint8_t>& bytes, const std::string& path = "<memory>");

ColorImage read_png_rgb(const std::string& path);
Gray16Image read_png_gray16(const std::string& path);
IndexedImage read_png_indexed(const std::string& path);

void write_png(const std::string& path, const ColorImage& image);
void write_png(const std::string& path, const Gray16Image& image);
void write_png(const std::string& path, const IndexedImage& image);

// Whole-file helpers shared by the dataset code. read_file throws
// FileError(missing) when the file does not exist; write_file replaces the
// target atomically through a temporary sibling and rename.
std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace stereoref

#include "stereoref/png_io.hpp"

#include <png.h>
#include <unistd.h>

#include <atomic>
#include <csetjmp>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "stereoref/errors.hpp"

namespace stereoref {

namespace {

namespace fs = std::filesystem;

// libpng reports failures through longjmp. The functions below that call
// setjmp keep only trivially destructible locals so the jump is well defined;
// buffers live in caller-owned structs.

struct WriteSink {
  std::vector<std::uint8_t>* out;
};

void write_cb(png_structp png, png_bytep data, png_size_t n) {
  auto* sink = static_cast<WriteSink*>(png_get_io_ptr(png));
  sink->out->insert(sink->out->end(), data, data + n);
}

void flush_cb(png_structp) {}

struct ReadSource {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
};

void read_cb(png_structp png, png_bytep out, png_size_t n) {
  auto* src = static_cast<ReadSource*>(png_get_io_ptr(png));
  if (src->size - src->pos < n) png_error(png, "unexpected end of data");
  std::memcpy(out, src->data + src->pos, n);
  src->pos += n;
}

struct ErrorSlot {
  char message[256];
};

void error_cb(png_structp png, png_const_charp msg) {
  auto* slot = static_cast<ErrorSlot*>(png_get_error_ptr(png));
  std::snprintf(slot->message, sizeof slot->message, "%s", msg);
  png_longjmp(png, 1);
}

void warning_cb(png_structp, png_const_charp) {}

struct EncodeJob {
  int width;
  int height;
  int bit_depth;
  int color_type;
  const png_color* palette;
  int palette_size;
  png_bytep* rows;
  std::vector<std::uint8_t>* out;
};

bool encode_raw(const EncodeJob& job, ErrorSlot* err) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, err, error_cb, warning_cb);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  WriteSink sink{job.out};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &sink, write_cb, flush_cb);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(job.width), static_cast<png_uint_32>(job.height), job.bit_depth,
               job.color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (job.palette != nullptr) png_set_PLTE(png, info, job.palette, job.palette_size);
  png_write_info(png, info);
  png_write_image(png, job.rows);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

enum class Want { rgb8, gray16, indexed };

struct Decoded {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  std::vector<png_color> palette;
  bool wrong_kind = false;
};

bool decode_raw(const std::uint8_t* data, std::size_t size, Want want, Decoded* out, ErrorSlot* err) {
  if (size < 8 || png_sig_cmp(data, 0, 8) != 0) {
    std::snprintf(err->message, sizeof err->message, "not a PNG file");
    return false;
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, err, error_cb, warning_cb);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  ReadSource src{data, size, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &src, read_cb);
  png_read_info(png, info);
  out->width = png_get_image_width(png, info);
  out->height = png_get_image_height(png, info);
  out->bit_depth = png_get_bit_depth(png, info);
  out->color_type = png_get_color_type(png, info);

  switch (want) {
    case Want::gray16:
      if (out->color_type != PNG_COLOR_TYPE_GRAY || out->bit_depth != 16) {
        out->wrong_kind = true;
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
      }
      break;
    case Want::indexed: {
      if (out->color_type != PNG_COLOR_TYPE_PALETTE) {
        out->wrong_kind = true;
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
      }
      png_colorp plte = nullptr;
      int n = 0;
      png_get_PLTE(png, info, &plte, &n);
      out->palette.assign(plte, plte + n);
      if (out->bit_depth < 8) png_set_packing(png);
      break;
    }
    case Want::rgb8:
      png_set_expand(png);
      png_set_strip_16(png);
      png_set_strip_alpha(png);
      png_set_gray_to_rgb(png);
      break;
  }
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out->pixels.resize(stride * out->height);
  out->rows.resize(out->height);
  for (png_uint_32 y = 0; y < out->height; ++y) out->rows[y] = out->pixels.data() + y * stride;
  png_read_image(png, out->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

Decoded decode(const std::vector<std::uint8_t>& bytes, Want want, const std::string& path) {
  Decoded d;
  ErrorSlot err{};
  std::snprintf(err.message, sizeof err.message, "libpng failure");
  if (!decode_raw(bytes.data(), bytes.size(), want, &d, &err)) {
    if (d.wrong_kind) {
      const char* expected = want == Want::gray16 ? "16-bit grayscale" : "palette";
      throw FileError(FileError::Kind::malformed, path, std::string("expected a ") + expected + " PNG");
    }
    throw FileError(FileError::Kind::malformed, path, err.message);
  }
  return d;
}

std::vector<std::uint8_t> encode(EncodeJob job) {
  std::vector<std::uint8_t> out;
  job.out = &out;
  ErrorSlot err{};
  std::snprintf(err.message, sizeof err.message, "libpng failure");
  if (!encode_raw(job, &err)) throw Error(std::string("PNG encoding failed: ") + err.message);
  return out;
}

void require_nonempty(int w, int h) {
  if (w <= 0 || h <= 0) throw InvalidArgument("cannot encode an empty image as PNG");
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ColorImage& image) {
  require_nonempty(image.width(), image.height());
  static_assert(sizeof(Rgb8) == 3);
  std::vector<png_bytep> rows(image.height());
  auto* base = reinterpret_cast<png_bytep>(const_cast<Rgb8*>(image.pixels().data()));
  for (int y = 0; y < image.height(); ++y) rows[y] = base + static_cast<std::size_t>(y) * image.width() * 3;
  return encode({image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB, nullptr, 0, rows.data(), nullptr});
}

std::vector<std::uint8_t> encode_png(const Gray16Image& image) {
  require_nonempty(image.width(), image.height());
  std::vector<std::uint8_t> be(image.size() * 2);
  auto px = image.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    be[2 * i] = static_cast<std::uint8_t>(px[i] >> 8);
    be[2 * i + 1] = static_cast<std::uint8_t>(px[i] & 0xFF);
  }
  std::vector<png_bytep> rows(image.height());
  for (int y = 0; y < image.height(); ++y) rows[y] = be.data() + static_cast<std::size_t>(y) * image.width() * 2;
  return encode({image.width(), image.height(), 16, PNG_COLOR_TYPE_GRAY, nullptr, 0, rows.data(), nullptr});
}

std::vector<std::uint8_t> encode_png(const IndexedImage& image) {
  const auto& idx = image.indices;
  require_nonempty(idx.width(), idx.height());
  if (image.palette.empty() || image.palette.size() > 256) throw InvalidArgument("palette must hold 1 to 256 colors");
  for (std::uint8_t i : idx.pixels())
    if (i >= image.palette.size()) throw InvalidArgument("palette index out of range");
  std::vector<png_color> plte;
  for (const Rgb8& c : image.palette) plte.push_back({c.r, c.g, c.b});
  std::vector<png_bytep> rows(idx.height());
  auto* base = const_cast<png_bytep>(idx.pixels().data());
  for (int y = 0; y < idx.height(); ++y) rows[y] = base + static_cast<std::size_t>(y) * idx.width();
  return encode({idx.width(), idx.height(), 8, PNG_COLOR_TYPE_PALETTE, plte.data(), static_cast<int>(plte.size()),
                 rows.data(), nullptr});
}

ColorImage decode_png_rgb(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  Decoded d = decode(bytes, Want::rgb8, path);
  ColorImage out(static_cast<int>(d.width), static_cast<int>(d.height));
  std::memcpy(out.pixels().data(), d.pixels.data(), out.size() * 3);
  return out;
}

Gray16Image decode_png_gray16(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  Decoded d = decode(bytes, Want::gray16, path);
  Gray16Image out(static_cast<int>(d.width), static_cast<int>(d.height));
  auto px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i)
    px[i] = static_cast<std::uint16_t>((d.pixels[2 * i] << 8) | d.pixels[2 * i + 1]);
  return out;
}

IndexedImage decode_png_indexed(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  Decoded d = decode(bytes, Want::indexed, path);
  IndexedImage out;
  out.indices = Raster<std::uint8_t>(static_cast<int>(d.width), static_cast<int>(d.height));
  std::memcpy(out.indices.pixels().data(), d.pixels.data(), out.indices.size());
  for (const png_color& c : d.palette) out.palette.push_back({c.red, c.green, c.blue});
  return out;
}

ColorImage read_png_rgb(const std::string& path) { return decode_png_rgb(read_file(path), path); }
Gray16Image read_png_gray16(const std::string& path) { return decode_png_gray16(read_file(path), path); }
IndexedImage read_png_indexed(const std::string& path) { return decode_png_indexed(read_file(path), path); }

void write_png(const std::string& path, const ColorImage& image) { write_file(path, encode_png(image)); }
void write_png(const std::string& path, const Gray16Image& image) { write_file(path, encode_png(image)); }
void write_png(const std::string& path, const IndexedImage& image) { write_file(path, encode_png(image)); }

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw FileError(FileError::Kind::missing, path, "no such file");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(FileError::Kind::io, path, "cannot open for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw FileError(FileError::Kind::io, path, "read failed");
  return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  static std::atomic<unsigned> counter{0};
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".tmp" +
                                               std::to_string(::getpid()) + "_" + std::to_string(counter++));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError(FileError::Kind::io, path, "cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw FileError(FileError::Kind::io, path, "write failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw FileError(FileError::Kind::io, path, "rename failed: " + ec.message());
  }
}

}  // namespace stereoref

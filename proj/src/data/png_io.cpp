#include "mid/data/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "mid/core/error.hpp"

namespace mid {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<unsigned char> bytes;  // row-major, big-endian samples for 16-bit
};

// Plain C control flow only: libpng reports errors via longjmp.
bool decode(std::FILE* fp, RawPng& out, std::string& error) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    error = "out of memory";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    error = "out of memory";
    return false;
  }
  std::vector<png_bytep>* rows = new std::vector<png_bytep>();
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    delete rows;
    error = "corrupt or unsupported PNG";
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out.bytes.resize(rowbytes * static_cast<std::size_t>(out.height));
  rows->resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) (*rows)[y] = out.bytes.data() + rowbytes * y;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  delete rows;
  return true;
}

bool encode(std::FILE* fp, int width, int height, int channels, int bit_depth,
            std::vector<unsigned char>& bytes, std::string& error) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    error = "out of memory";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    error = "out of memory";
    return false;
  }
  std::vector<png_bytep>* rows = new std::vector<png_bytep>(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    delete rows;
    error = "PNG encoding failed";
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  for (int y = 0; y < height; ++y) (*rows)[y] = bytes.data() + rowbytes * y;
  png_write_image(png, rows->data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  delete rows;
  return true;
}

}  // namespace

unsigned quantize_sample(float value, int bit_depth) {
  const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
  const double v = std::clamp(static_cast<double>(value), 0.0, 1.0) * maxv;
  return static_cast<unsigned>(std::floor(v + 0.5));
}

ImageTensor quantize(const ImageTensor& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw InvalidArgument("quantize: bit depth must be 8 or 16");
  const float maxv = bit_depth == 16 ? 65535.0f : 255.0f;
  ImageTensor out = image;
  for (float& v : out.data()) v = static_cast<float>(quantize_sample(v, bit_depth)) / maxv;
  return out;
}

ImageTensor read_png(const std::filesystem::path& path, int* bit_depth) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  unsigned char sig[8] = {};
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(path.string() + ": not a PNG file");
  }
  std::rewind(fp.get());
  RawPng raw;
  std::string error;
  if (!decode(fp.get(), raw, error)) throw IoError(path.string() + ": " + error);
  if (raw.channels != 1 && raw.channels != 3) {
    throw IoError(path.string() + ": unsupported channel count " + std::to_string(raw.channels));
  }
  if (bit_depth) *bit_depth = raw.bit_depth;

  ImageTensor img(raw.height, raw.width, raw.channels);
  auto data = img.data();
  if (raw.bit_depth == 16) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const unsigned v = (static_cast<unsigned>(raw.bytes[2 * i]) << 8) | raw.bytes[2 * i + 1];
      data[i] = static_cast<float>(v) / 65535.0f;
    }
  } else {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(raw.bytes[i]) / 255.0f;
  }
  return img;
}

void write_png(const std::filesystem::path& path, const ImageTensor& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw InvalidArgument("write_png: bit depth must be 8 or 16");
  if (image.channels() != 1 && image.channels() != 3) {
    throw InvalidArgument("write_png: only 1- or 3-channel images are supported");
  }
  auto data = image.data();
  std::vector<unsigned char> bytes(data.size() * (bit_depth / 8));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const unsigned q = quantize_sample(data[i], bit_depth);
    if (bit_depth == 16) {
      bytes[2 * i] = static_cast<unsigned char>(q >> 8);
      bytes[2 * i + 1] = static_cast<unsigned char>(q & 0xFF);
    } else {
      bytes[i] = static_cast<unsigned char>(q);
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  std::string error;
  if (!encode(fp.get(), image.width(), image.height(), image.channels(), bit_depth, bytes, error)) {
    throw IoError(path.string() + ": " + error);
  }
}

}  // namespace mid

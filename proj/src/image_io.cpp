#include "scriptalign/image_io.hpp"

#include <png.h>

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "scriptalign/error.hpp"

namespace scriptalign {

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open image " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct PngReadState {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t count) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->offset + count > state->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(out, state->bytes->data() + state->offset, count);
  state->offset += count;
}

[[noreturn]] void png_throw(png_structp, png_const_charp msg) { throw ImageIoError(msg); }
void png_warn(png_structp, png_const_charp) {}

GrayRaster decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_throw, png_warn);
  if (!png) throw ImageIoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  GrayRaster raster;
  try {
    PngReadState state{&bytes, 0};
    png_set_read_fn(png, &state, png_read_from_memory);
    png_read_info(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE) {
      png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    png_read_update_info(png, info);
    raster.height = png_get_image_height(png, info);
    raster.width = png_get_image_width(png, info);
    if (png_get_rowbytes(png, info) != raster.width) throw ImageIoError("unexpected PNG layout");
    raster.data.resize(raster.height * raster.width);
    std::vector<png_bytep> rows(raster.height);
    for (std::size_t r = 0; r < raster.height; ++r) rows[r] = raster.data.data() + r * raster.width;
    png_read_image(png, rows.data());
  } catch (const ImageIoError& e) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError(name + ": " + e.what());
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return raster;
}

GrayRaster decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  std::size_t pos = 2;
  const bool binary = bytes[1] == '5';
  auto next_int = [&]() -> long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      any = true;
    }
    if (!any) throw ImageIoError(name + ": malformed PGM header");
    return v;
  };
  GrayRaster raster;
  raster.width = static_cast<std::size_t>(next_int());
  raster.height = static_cast<std::size_t>(next_int());
  const long maxval = next_int();
  if (maxval <= 0 || maxval > 65535) throw ImageIoError(name + ": bad PGM maxval");
  const std::size_t count = raster.width * raster.height;
  raster.data.resize(count);
  auto scale = [maxval](long v) {
    return static_cast<std::uint8_t>(std::lround(static_cast<double>(v) * 255.0 / maxval));
  };
  if (binary) {
    ++pos;  // single whitespace after maxval
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    if (bytes.size() < pos + count * bpp) throw ImageIoError(name + ": truncated PGM");
    for (std::size_t i = 0; i < count; ++i) {
      long v = bytes[pos + i * bpp];
      if (bpp == 2) v = (v << 8) | bytes[pos + i * bpp + 1];
      raster.data[i] = maxval == 255 ? static_cast<std::uint8_t>(v) : scale(v);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) raster.data[i] = scale(next_int());
  }
  return raster;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

}  // namespace

GrayRaster read_raster(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  static constexpr std::array<std::uint8_t, 8> kPngSig = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(kPngSig.begin(), kPngSig.end(), bytes.begin())) {
    return decode_png(bytes, path.string());
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '2')) {
    return decode_pgm(bytes, path.string());
  }
  throw ImageIoError(path.string() + ": unsupported image format (expected PNG or PGM)");
}

SubwordImage read_image(const std::filesystem::path& path) {
  const GrayRaster raster = read_raster(path);
  return normalize_image(raster.data, raster.height, raster.width);
}

GrayRaster quantize(const SubwordImage& img) {
  GrayRaster raster{img.height(), img.width(), {}};
  raster.data.reserve(img.pixels().size());
  for (double v : img.pixels()) raster.data.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
  return raster;
}

void write_pgm(const std::filesystem::path& path, const SubwordImage& img) {
  const GrayRaster raster = quantize(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path.string());
  out << "P5\n" << raster.width << ' ' << raster.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(raster.data.data()),
            static_cast<std::streamsize>(raster.data.size()));
}

std::vector<std::uint8_t> encode_png(const SubwordImage& img) {
  GrayRaster raster = quantize(img);
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_throw, png_warn);
  if (!png) throw ImageIoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  try {
    png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width),
                 static_cast<png_uint_32>(raster.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t r = 0; r < raster.height; ++r) {
      png_write_row(png, raster.data.data() + r * raster.width);
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::filesystem::path& path, const SubwordImage& img) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace scriptalign

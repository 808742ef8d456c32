#include "scriptalign/core.hpp"

#include <algorithm>
#include <cmath>

#include "scriptalign/error.hpp"
#include "scriptalign/rng.hpp"

namespace scriptalign {

SubwordImage::SubwordImage(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), pixels_(height * width, fill) {
  if (height == 0 || width == 0) throw InvalidImage("image dimensions must be >= 1");
}

SubwordImage::SubwordImage(std::size_t height, std::size_t width, std::vector<double> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (height == 0 || width == 0) throw InvalidImage("image dimensions must be >= 1");
  if (pixels_.size() != height * width) throw InvalidImage("pixel count does not match dimensions");
  for (double v : pixels_) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidImage("intensity outside [0,1]");
  }
}

void validate_canvas(const CanvasSpec& canvas) {
  if (canvas.target_height < 8 || canvas.target_width < 8) {
    throw InvalidImage("canvas dimensions must be >= 8, got " +
                       std::to_string(canvas.target_height) + "x" +
                       std::to_string(canvas.target_width));
  }
}

std::uint64_t occurrence_key(const SubwordAnnotation& token) {
  std::uint64_t h = hash_string(token.manuscript_id);
  h = mix64(h ^ token.page);
  h = mix64(h ^ token.line);
  h = mix64(h ^ token.position);
  return h;
}

bool is_well_formed(const TextLine& line) {
  for (std::size_t i = 0; i < line.tokens.size(); ++i) {
    if (line.tokens[i].position != i) return false;
  }
  return true;
}

SubwordImage normalize_image(std::span<const std::uint8_t> raw, std::size_t height,
                             std::size_t width) {
  if (raw.empty() || height == 0 || width == 0) throw InvalidImage("empty image grid");
  if (raw.size() != height * width) throw InvalidImage("grid size does not match dimensions");
  std::vector<double> px(raw.size());
  std::transform(raw.begin(), raw.end(), px.begin(),
                 [](std::uint8_t v) { return static_cast<double>(v) / 255.0; });
  return SubwordImage(height, width, std::move(px));
}

namespace {

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

// Source taps for each destination index, half-pixel centers, clamped borders.
std::vector<Tap> make_taps(std::size_t src, std::size_t dst) {
  std::vector<Tap> taps(dst);
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (std::size_t d = 0; d < dst; ++d) {
    double s = (static_cast<double>(d) + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const auto lo = static_cast<std::size_t>(std::floor(s));
    const std::size_t hi = std::min(lo + 1, src - 1);
    taps[d] = {lo, hi, s - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

SubwordImage resize_bilinear(const SubwordImage& img, std::size_t height, std::size_t width) {
  if (img.empty()) throw InvalidImage("cannot resize an empty image");
  if (height == 0 || width == 0) throw InvalidImage("target dimensions must be >= 1");
  if (height == img.height() && width == img.width()) return img;

  const auto rows = make_taps(img.height(), height);
  const auto cols = make_taps(img.width(), width);
  std::vector<double> out(height * width);
  for (std::size_t r = 0; r < height; ++r) {
    const Tap& ty = rows[r];
    for (std::size_t c = 0; c < width; ++c) {
      const Tap& tx = cols[c];
      const double top = img.at(ty.lo, tx.lo) * (1.0 - tx.frac) + img.at(ty.lo, tx.hi) * tx.frac;
      const double bot = img.at(ty.hi, tx.lo) * (1.0 - tx.frac) + img.at(ty.hi, tx.hi) * tx.frac;
      // Convex combinations stay in [0,1] up to rounding; clamp the rounding.
      out[r * width + c] = std::clamp(top * (1.0 - ty.frac) + bot * ty.frac, 0.0, 1.0);
    }
  }
  return SubwordImage(height, width, std::move(out));
}

SubwordImage rescale_to_canvas(const SubwordImage& img, const CanvasSpec& canvas) {
  if (img.empty()) throw InvalidImage("cannot rescale an empty image");
  if (canvas.target_height == 0 || canvas.target_width == 0) {
    throw InvalidImage("canvas dimensions must be >= 1");
  }
  const double ratio =
      static_cast<double>(canvas.target_height) / static_cast<double>(img.height());
  const auto scaled_width = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(img.width()) * ratio)));
  SubwordImage step = resize_bilinear(img, canvas.target_height, scaled_width);
  return resize_bilinear(step, canvas.target_height, canvas.target_width);
}

}  // namespace scriptalign

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace scriptalign {

// Grayscale raster with intensities in [0,1], stored row-major.
class SubwordImage {
 public:
  SubwordImage() = default;
  SubwordImage(std::size_t height, std::size_t width, double fill = 0.0);
  SubwordImage(std::size_t height, std::size_t width, std::vector<double> pixels);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  bool empty() const { return pixels_.empty(); }

  double at(std::size_t row, std::size_t col) const { return pixels_[row * width_ + col]; }
  double& at(std::size_t row, std::size_t col) { return pixels_[row * width_ + col]; }

  std::span<const double> pixels() const { return pixels_; }
  std::span<double> pixels() { return pixels_; }

  bool operator==(const SubwordImage&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> pixels_;
};

struct CanvasSpec {
  std::size_t target_height = 83;
  std::size_t target_width = 69;

  bool operator==(const CanvasSpec&) const = default;
};

// Throws InvalidImage when either dimension is below 8.
void validate_canvas(const CanvasSpec& canvas);

// One subword occurrence inside a manuscript.
struct SubwordAnnotation {
  std::string manuscript_id;
  std::size_t page = 0;
  std::size_t line = 0;
  std::size_t position = 0;
  std::string form_id;
  std::string image_path;  // empty for in-memory tokens
  std::shared_ptr<const SubwordImage> image;
};

// Stable 64-bit identity of an occurrence (manuscript, page, line, position).
std::uint64_t occurrence_key(const SubwordAnnotation& token);

struct TextLine {
  std::vector<SubwordAnnotation> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

// Tokens sorted by position with positions contiguous from 0.
bool is_well_formed(const TextLine& line);

// Pages of lines; lines are addressed in reading order across pages.
struct Document {
  std::string manuscript_id;
  std::vector<TextLine> lines;
};

// Maps 8-bit intensities to [0,1]. `raw` is row-major height x width.
SubwordImage normalize_image(std::span<const std::uint8_t> raw, std::size_t height,
                             std::size_t width);

// Scales uniformly to the target height (width follows the aspect ratio,
// rounded, at least 1) and then resamples the width to the target width.
// Both steps use bilinear interpolation with half-pixel centers.
SubwordImage rescale_to_canvas(const SubwordImage& img, const CanvasSpec& canvas);

// Bilinear resample to an arbitrary size.
SubwordImage resize_bilinear(const SubwordImage& img, std::size_t height, std::size_t width);

}  // namespace scriptalign

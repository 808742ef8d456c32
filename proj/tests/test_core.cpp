#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "scriptalign/core.hpp"
#include "scriptalign/error.hpp"

using namespace scriptalign;

namespace {

cv::Mat to_mat(const SubwordImage& img) {
  cv::Mat m(static_cast<int>(img.height()), static_cast<int>(img.width()), CV_64F);
  for (std::size_t r = 0; r < img.height(); ++r) {
    for (std::size_t c = 0; c < img.width(); ++c) m.at<double>(static_cast<int>(r), static_cast<int>(c)) = img.at(r, c);
  }
  return m;
}

cv::Mat cv_resize(const cv::Mat& m, std::size_t h, std::size_t w) {
  cv::Mat out;
  cv::resize(m, out, cv::Size(static_cast<int>(w), static_cast<int>(h)), 0, 0, cv::INTER_LINEAR);
  return out;
}

// OpenCV keeps interpolation coefficients in float even for CV_64F input.
constexpr double kCvTolerance = 2e-5;

double max_abs_diff(const SubwordImage& img, const cv::Mat& ref) {
  REQUIRE(static_cast<int>(img.height()) == ref.rows);
  REQUIRE(static_cast<int>(img.width()) == ref.cols);
  double worst = 0.0;
  for (std::size_t r = 0; r < img.height(); ++r) {
    for (std::size_t c = 0; c < img.width(); ++c) {
      worst = std::max(worst, std::abs(img.at(r, c) - ref.at<double>(static_cast<int>(r), static_cast<int>(c))));
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("normalize_image maps bytes to unit range") {
    const std::vector<std::uint8_t> zeros(9, 0);
    const SubwordImage z = normalize_image(zeros, 3, 3);
    CHECK(z.height() == 3);
    CHECK(z.width() == 3);
    for (double v : z.pixels()) CHECK(v == 0.0);

    const std::vector<std::uint8_t> full(6, 255);
    const SubwordImage f = normalize_image(full, 2, 3);
    for (double v : f.pixels()) CHECK(v == 1.0);

    const std::vector<std::uint8_t> mid{128};
    CHECK(normalize_image(mid, 1, 1).at(0, 0) == doctest::Approx(0.50196).epsilon(1e-5));

    CHECK_THROWS_AS(normalize_image({}, 0, 0), InvalidImage);
  }

  TEST_CASE("SubwordImage rejects bad intensities and sizes") {
    CHECK_THROWS_AS(SubwordImage(0, 3), InvalidImage);
    CHECK_THROWS_AS(SubwordImage(1, 2, std::vector<double>{0.5, 1.5}), InvalidImage);
    CHECK_THROWS_AS(SubwordImage(1, 2, std::vector<double>{0.5}), InvalidImage);
  }

  TEST_CASE("validate_canvas enforces the 8 pixel minimum") {
    CHECK_NOTHROW(validate_canvas({8, 8}));
    CHECK_THROWS_AS(validate_canvas({7, 69}), InvalidImage);
    CHECK_THROWS_AS(validate_canvas({83, 4}), InvalidImage);
  }

  TEST_CASE("rescale_to_canvas: halving then width stretch") {
    std::mt19937_64 rng(1);
    const SubwordImage img = testing::random_image(166, 120, rng);
    const SubwordImage out = rescale_to_canvas(img, {83, 69});
    CHECK(out.height() == 83);
    CHECK(out.width() == 69);
    CHECK(out == resize_bilinear(resize_bilinear(img, 83, 60), 83, 69));
  }

  TEST_CASE("rescale_to_canvas is the identity at canvas size") {
    std::mt19937_64 rng(2);
    const SubwordImage img = testing::random_image(83, 69, rng);
    CHECK(rescale_to_canvas(img, {83, 69}) == img);
  }

  TEST_CASE("rescale_to_canvas: 41x100 goes through an 83x202 intermediate") {
    std::mt19937_64 rng(3);
    const SubwordImage img = testing::random_image(41, 100, rng);
    CHECK(std::lround(100.0 * 83.0 / 41.0) == 202);
    const SubwordImage out = rescale_to_canvas(img, {83, 69});
    CHECK(out == resize_bilinear(resize_bilinear(img, 83, 202), 83, 69));

    // Independent reference: OpenCV bilinear resize of the same two steps.
    const cv::Mat ref = cv_resize(cv_resize(to_mat(img), 83, 202), 83, 69);
    CHECK(max_abs_diff(out, ref) < kCvTolerance);
  }

  TEST_CASE("resize_bilinear agrees with OpenCV on upscales") {
    std::mt19937_64 rng(4);
    for (const auto& [h, w, th, tw] : std::vector<std::array<std::size_t, 4>>{
             {5, 7, 10, 14}, {10, 10, 83, 69}, {41, 100, 83, 202}, {3, 2, 9, 7}, {1, 1, 4, 4}}) {
      const SubwordImage img = testing::random_image(h, w, rng);
      CHECK(max_abs_diff(resize_bilinear(img, th, tw), cv_resize(to_mat(img), th, tw)) < kCvTolerance);
    }
  }

  TEST_CASE("resize_bilinear agrees with OpenCV on integer-factor downscales") {
    // OpenCV's INTER_LINEAR is a plain two-tap filter at these checkpoints.
    std::mt19937_64 rng(5);
    for (const auto& [h, w, th, tw] : std::vector<std::array<std::size_t, 4>>{
             {166, 120, 83, 60}, {40, 40, 20, 10}, {83, 138, 83, 69}}) {
      const SubwordImage img = testing::random_image(h, w, rng);
      CHECK(max_abs_diff(resize_bilinear(img, th, tw), cv_resize(to_mat(img), th, tw)) < kCvTolerance);
    }
  }

  TEST_CASE("rescale_to_canvas: dimensions and range over random inputs") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<std::size_t> dim(1, 200);
    for (int trial = 0; trial < 200; ++trial) {
      const SubwordImage img = testing::random_image(dim(rng), dim(rng), rng);
      const SubwordImage out = rescale_to_canvas(img, {83, 69});
      REQUIRE(out.height() == 83);
      REQUIRE(out.width() == 69);
      for (double v : out.pixels()) REQUIRE((v >= 0.0 && v <= 1.0));
    }
    // Extreme aspect ratio: intermediate width clamps to 1.
    const SubwordImage tall = testing::random_image(500, 1, rng);
    CHECK(rescale_to_canvas(tall, {8, 8}).width() == 8);
  }

  TEST_CASE("text line well-formedness") {
    TextLine line = testing::line_of("a b c");
    CHECK(is_well_formed(line));
    line.tokens[1].position = 5;
    CHECK_FALSE(is_well_formed(line));
  }

  TEST_CASE("occurrence keys distinguish positions") {
    const TextLine line = testing::line_of("a a");
    CHECK(occurrence_key(line.tokens[0]) != occurrence_key(line.tokens[1]));
    CHECK(occurrence_key(line.tokens[0]) == occurrence_key(line.tokens[0]));
  }
}

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "scriptalign/core.hpp"

namespace testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("scriptalign_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline scriptalign::SubwordImage random_image(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> px(h * w);
  for (double& v : px) v = u(rng);
  return scriptalign::SubwordImage(h, w, std::move(px));
}

// Token-only line; forms given as a space-separated string.
inline scriptalign::TextLine line_of(const std::string& forms, const std::string& manuscript = "x",
                                     std::size_t line = 0) {
  scriptalign::TextLine out;
  std::size_t pos = 0;
  std::size_t start = 0;
  while (start < forms.size()) {
    std::size_t end = forms.find(' ', start);
    if (end == std::string::npos) end = forms.size();
    if (end > start) {
      scriptalign::SubwordAnnotation tok;
      tok.manuscript_id = manuscript;
      tok.line = line;
      tok.position = pos++;
      tok.form_id = forms.substr(start, end - start);
      out.tokens.push_back(std::move(tok));
    }
    start = end + 1;
  }
  return out;
}

}  // namespace testing

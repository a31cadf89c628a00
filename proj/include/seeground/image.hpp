#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "seeground/scene_model.hpp"

namespace seeground {

/// Row-major 8-bit RGB buffer.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, Rgb fill = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool in_bounds(int u, int v) const noexcept { return u >= 0 && v >= 0 && u < width_ && v < height_; }

  Rgb& at(int u, int v) { return pixels_[static_cast<std::size_t>(v) * width_ + u]; }
  const Rgb& at(int u, int v) const { return pixels_[static_cast<std::size_t>(v) * width_ + u]; }

  std::vector<Rgb>& pixels() noexcept { return pixels_; }
  const std::vector<Rgb>& pixels() const noexcept { return pixels_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Rgb> pixels_;
};

/// 8-bit RGB PNG, no alpha.
std::string encode_png(const RgbImage& image);
RgbImage decode_png(const std::string& bytes);
void save_png(const RgbImage& image, const std::filesystem::path& path);
RgbImage load_png(const std::filesystem::path& path);

}  // namespace seeground

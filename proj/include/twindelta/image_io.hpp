#pragma once

// Frame file formats (8-bit PGM P5 and PNG), RGB images, and frame sources
// for directories of numbered frames or raw concatenated 8-bit streams.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "twindelta/scene.hpp"

namespace twindelta {

/// Interleaved RGB image, channels in [0,1].
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;  // 3 * width * height

  static RgbImage filled(int width, int height, double r, double g, double b);
  bool empty() const noexcept { return width <= 0 || height <= 0 || rgb.empty(); }
};

/// 8-bit grayscale raster, row-major.
struct Gray8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;
};

Gray8 quantize(const GrayFrame& frame);
GrayFrame dequantize(const Gray8& image, FrameIndex index = 0);
Gray8 mask_image(const Mask& mask);

std::vector<std::uint8_t> encode_pgm(const Gray8& image);
Gray8 decode_pgm(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const Gray8& image);
/// Gray PNGs only; use decode_png_rgb for colour input.
Gray8 decode_png(std::span<const std::uint8_t> bytes);
bool png_is_color(std::span<const std::uint8_t> bytes);
RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Loads a .pgm or .png frame as full-resolution gray (colour PNG goes through luma).
GrayFrame load_frame(const std::filesystem::path& path, FrameIndex index);
void save_frame(const std::filesystem::path& path, const GrayFrame& frame);

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<GrayFrame> next() = 0;
};

/// Files named frame_%06d.pgm / frame_%06d.png, visited in index order.
class FrameDirectorySource final : public FrameSource {
 public:
  explicit FrameDirectorySource(const std::filesystem::path& dir,
                                std::string prefix = "frame_");
  std::optional<GrayFrame> next() override;
  std::size_t size() const noexcept { return files_.size(); }

 private:
  std::vector<std::pair<FrameIndex, std::filesystem::path>> files_;
  std::size_t pos_ = 0;
};

/// Concatenated width*height 8-bit frames.
class RawStreamSource final : public FrameSource {
 public:
  RawStreamSource(const std::filesystem::path& path, int width, int height);
  std::optional<GrayFrame> next() override;

 private:
  std::ifstream in_;
  int width_;
  int height_;
  FrameIndex next_index_ = 0;
};

class VectorSource final : public FrameSource {
 public:
  explicit VectorSource(std::span<const GrayFrame> frames) : frames_(frames) {}
  std::optional<GrayFrame> next() override {
    if (pos_ >= frames_.size()) return std::nullopt;
    return frames_[pos_++];
  }

 private:
  std::span<const GrayFrame> frames_;
  std::size_t pos_ = 0;
};

std::string frame_file_name(FrameIndex index, const std::string& ext,
                            const std::string& prefix = "frame_");

}  // namespace twindelta

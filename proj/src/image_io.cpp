#include "twindelta/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>

#include <png.h>

#include "twindelta/error.hpp"
#include "twindelta/motion.hpp"

namespace twindelta {

namespace fs = std::filesystem;

RgbImage RgbImage::filled(int width, int height, double r, double g, double b) {
  RgbImage img;
  img.width = width;
  img.height = height;
  img.rgb.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
    img.rgb[i] = r;
    img.rgb[i + 1] = g;
    img.rgb[i + 2] = b;
  }
  return img;
}

Gray8 quantize(const GrayFrame& frame) {
  Gray8 out{frame.width(), frame.height(), {}};
  out.data.reserve(frame.size());
  for (double v : frame.pixels()) {
    out.data.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return out;
}

GrayFrame dequantize(const Gray8& image, FrameIndex index) {
  std::vector<double> px;
  px.reserve(image.data.size());
  for (auto b : image.data) px.push_back(static_cast<double>(b) / 255.0);
  return GrayFrame(image.width, image.height, std::move(px), index);
}

Gray8 mask_image(const Mask& mask) {
  Gray8 out{mask.width, mask.height, {}};
  out.data.reserve(mask.bits.size());
  for (auto b : mask.bits) out.data.push_back(b ? 255 : 0);
  return out;
}

std::vector<std::uint8_t> encode_pgm(const Gray8& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.data.begin(), image.data.end());
  return out;
}

Gray8 decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto fail = [](const std::string& msg) -> Gray8 {
    throw Error(ErrorCode::InvalidFrame, "PGM: " + msg);
  };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> int {
    skip_space();
    int value = 0;
    const char* first = reinterpret_cast<const char*>(bytes.data()) + pos;
    const char* last = reinterpret_cast<const char*>(bytes.data()) + bytes.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr == first) {
      throw Error(ErrorCode::InvalidFrame, "PGM: malformed header");
    }
    pos += static_cast<std::size_t>(ptr - first);
    return value;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') return fail("not a P5 file");
  pos = 2;
  const int w = read_int();
  const int h = read_int();
  const int maxval = read_int();
  if (w <= 0 || h <= 0) return fail("non-positive dimensions");
  if (maxval <= 0 || maxval > 255) return fail("only 8-bit PGM is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) return fail("missing header terminator");
  ++pos;
  const auto n = static_cast<std::size_t>(w) * h;
  if (bytes.size() - pos < n) return fail("truncated pixel data");
  Gray8 out{w, h, std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                            bytes.begin() + static_cast<std::ptrdiff_t>(pos + n))};
  if (maxval != 255) {
    for (auto& v : out.data) {
      v = static_cast<std::uint8_t>(std::lround(std::min<int>(v, maxval) * 255.0 / maxval));
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const Gray8& image) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.data.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoFailure, std::string("PNG encode: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.data.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoFailure, std::string("PNG encode: ") + img.message);
  }
  out.resize(size);
  return out;
}

namespace {

struct PngReader {
  png_image img;

  explicit PngReader(std::span<const std::uint8_t> bytes) {
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
      throw Error(ErrorCode::InvalidFrame, std::string("PNG: ") + img.message);
    }
  }
  ~PngReader() { png_image_free(&img); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  std::vector<std::uint8_t> finish(png_uint_32 format) {
    img.format = format;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
      throw Error(ErrorCode::InvalidFrame, std::string("PNG: ") + img.message);
    }
    return buf;
  }
};

}  // namespace

bool png_is_color(std::span<const std::uint8_t> bytes) {
  PngReader reader(bytes);
  return (reader.img.format & PNG_FORMAT_FLAG_COLOR) != 0;
}

Gray8 decode_png(std::span<const std::uint8_t> bytes) {
  PngReader reader(bytes);
  const int w = static_cast<int>(reader.img.width);
  const int h = static_cast<int>(reader.img.height);
  return Gray8{w, h, reader.finish(PNG_FORMAT_GRAY)};
}

RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes) {
  PngReader reader(bytes);
  RgbImage out;
  out.width = static_cast<int>(reader.img.width);
  out.height = static_cast<int>(reader.img.height);
  const auto buf = reader.finish(PNG_FORMAT_RGB);
  out.rgb.reserve(buf.size());
  for (auto b : buf) out.rgb.push_back(static_cast<double>(b) / 255.0);
  return out;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

GrayFrame load_frame(const fs::path& path, FrameIndex index) {
  const auto bytes = read_file(path);
  const auto ext = path.extension().string();
  if (ext == ".pgm") return dequantize(decode_pgm(bytes), index);
  if (ext == ".png") {
    if (png_is_color(bytes)) return motion::luma(decode_png_rgb(bytes), index);
    return dequantize(decode_png(bytes), index);
  }
  throw Error(ErrorCode::InvalidFrame, "unsupported frame format " + path.string());
}

void save_frame(const fs::path& path, const GrayFrame& frame) {
  const auto ext = path.extension().string();
  if (ext == ".pgm") {
    write_file(path, encode_pgm(quantize(frame)));
  } else if (ext == ".png") {
    write_file(path, encode_png(quantize(frame)));
  } else {
    throw Error(ErrorCode::InvalidFrame, "unsupported frame format " + path.string());
  }
}

std::string frame_file_name(FrameIndex index, const std::string& ext, const std::string& prefix) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(index));
  return prefix + buf + ext;
}

FrameDirectorySource::FrameDirectorySource(const fs::path& dir, std::string prefix) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::IoFailure, "frame directory not found: " + dir.string());
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    const auto ext = entry.path().extension().string();
    if (ext != ".pgm" && ext != ".png") continue;
    if (name.rfind(prefix, 0) != 0) continue;
    const std::string digits = name.substr(prefix.size(), name.size() - prefix.size() - ext.size());
    FrameIndex idx = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) continue;
    files_.emplace_back(idx, entry.path());
  }
  std::sort(files_.begin(), files_.end());
  for (std::size_t i = 1; i < files_.size(); ++i) {
    if (files_[i].first == files_[i - 1].first) {
      throw Error(ErrorCode::InvalidFrame,
                  "duplicate frame index " + std::to_string(files_[i].first));
    }
  }
}

std::optional<GrayFrame> FrameDirectorySource::next() {
  if (pos_ >= files_.size()) return std::nullopt;
  const auto& [idx, path] = files_[pos_++];
  return load_frame(path, idx);
}

RawStreamSource::RawStreamSource(const fs::path& path, int width, int height)
    : in_(path, std::ios::binary), width_(width), height_(height) {
  if (!in_) throw Error(ErrorCode::IoFailure, "cannot open raw stream " + path.string());
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::InvalidConfig, "raw stream dimensions must be positive");
  }
}

std::optional<GrayFrame> RawStreamSource::next() {
  Gray8 img{width_, height_, std::vector<std::uint8_t>(static_cast<std::size_t>(width_) * height_)};
  in_.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  const auto got = in_.gcount();
  if (got == 0) return std::nullopt;
  if (static_cast<std::size_t>(got) != img.data.size()) {
    throw Error(ErrorCode::InvalidFrame, "raw stream ends mid-frame");
  }
  return dequantize(img, next_index_++);
}

}  // namespace twindelta

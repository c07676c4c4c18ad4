#include <gtest/gtest.h>

#include "oracles.hpp"
#include "twindelta/error.hpp"
#include "twindelta/image_io.hpp"

using namespace twindelta;

namespace {

Gray8 ramp(int w, int h) {
  Gray8 g{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
  for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = static_cast<std::uint8_t>(i * 7);
  return g;
}

}  // namespace

TEST(Quantize, RoundTripOn8BitGrid) {
  const Gray8 g = ramp(5, 3);
  const Gray8 back = quantize(dequantize(g));
  EXPECT_EQ(back.data, g.data);
  EXPECT_DOUBLE_EQ(dequantize(Gray8{1, 1, {255}}).at(0, 0), 1.0);
}

TEST(Pgm, RoundTrip) {
  const Gray8 g = ramp(7, 4);
  const auto bytes = encode_pgm(g);
  const std::string head(bytes.begin(), bytes.begin() + 11);
  EXPECT_EQ(head, "P5\n7 4\n255\n");
  const Gray8 back = decode_pgm(bytes);
  EXPECT_EQ(back.width, 7);
  EXPECT_EQ(back.height, 4);
  EXPECT_EQ(back.data, g.data);
}

TEST(Pgm, CommentsInHeader) {
  std::string text = "P5\n# made by hand\n2 1\n255\n";
  text.push_back('\x10');
  text.push_back('\x20');
  const std::vector<std::uint8_t> bytes(text.begin(), text.end());
  const Gray8 g = decode_pgm(bytes);
  EXPECT_EQ(g.data, (std::vector<std::uint8_t>{0x10, 0x20}));
}

TEST(Pgm, Malformed) {
  const std::string bad = "P2\n2 2\n255\n";
  EXPECT_THROW(decode_pgm(std::vector<std::uint8_t>(bad.begin(), bad.end())), Error);
  auto bytes = encode_pgm(ramp(4, 4));
  bytes.pop_back();
  try {
    decode_pgm(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidFrame);
  }
}

TEST(Png, RoundTrip) {
  const Gray8 g = ramp(9, 6);
  const auto bytes = encode_png(g);
  EXPECT_FALSE(png_is_color(bytes));
  const Gray8 back = decode_png(bytes);
  EXPECT_EQ(back.data, g.data);
  const RgbImage rgb = decode_png_rgb(bytes);
  EXPECT_EQ(rgb.width, 9);
  EXPECT_DOUBLE_EQ(rgb.rgb[3 * 5 + 1], g.data[5] / 255.0);
}

TEST(Png, Garbage) {
  const std::vector<std::uint8_t> junk = {1, 2, 3, 4, 5};
  EXPECT_THROW(decode_png(junk), Error);
}

TEST(MaskImage, Binary) {
  Mask m(2, 1);
  m.set(1, 0);
  EXPECT_EQ(mask_image(m).data, (std::vector<std::uint8_t>{0, 255}));
}

TEST(FrameDirectory, OrderedAndTyped) {
  const auto dir = twindelta::testing::temp_dir("frames");
  for (int i : {2, 0, 1}) {
    const GrayFrame f = GrayFrame::filled(4, 3, i / 255.0, i);
    save_frame(dir / frame_file_name(i, i == 1 ? ".png" : ".pgm"), f);
  }
  write_text(dir / "notes.txt", "ignored");
  FrameDirectorySource src(dir);
  EXPECT_EQ(src.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    auto f = src.next();
    ASSERT_TRUE(f);
    EXPECT_EQ(f->index(), i);
    EXPECT_DOUBLE_EQ(f->at(0, 0), i / 255.0);
  }
  EXPECT_FALSE(src.next());
}

TEST(FrameDirectory, MissingDirectory) {
  try {
    FrameDirectorySource src(twindelta::testing::temp_dir("gone") / "nothing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoFailure);
  }
}

TEST(RawStream, ReadsFramesAndDetectsTornTail) {
  const auto dir = twindelta::testing::temp_dir("raw");
  std::vector<std::uint8_t> bytes;
  for (int f = 0; f < 3; ++f)
    for (int i = 0; i < 6; ++i) bytes.push_back(static_cast<std::uint8_t>(f * 10 + i));
  write_file(dir / "v.raw", bytes);
  RawStreamSource src(dir / "v.raw", 3, 2);
  for (int f = 0; f < 3; ++f) {
    auto frame = src.next();
    ASSERT_TRUE(frame);
    EXPECT_EQ(frame->index(), f);
    EXPECT_DOUBLE_EQ(frame->at(2, 1), (f * 10 + 5) / 255.0);
  }
  EXPECT_FALSE(src.next());

  bytes.push_back(1);
  write_file(dir / "torn.raw", bytes);
  RawStreamSource torn(dir / "torn.raw", 3, 2);
  for (int f = 0; f < 3; ++f) torn.next();
  EXPECT_THROW(torn.next(), Error);
}

TEST(FrameNames, Pattern) {
  EXPECT_EQ(frame_file_name(7, ".pgm"), "frame_000007.pgm");
  EXPECT_EQ(frame_file_name(12, ".png", "mask_"), "mask_000012.png");
}

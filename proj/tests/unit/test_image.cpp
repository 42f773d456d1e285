#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "signbench/error.hpp"
#include "signbench/image.hpp"

using namespace signbench;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "signbench-unit-image";
  fs::create_directories(dir);
  return dir;
}

RawImage gradient(int w, int h) {
  RawImage img{w, h, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(w * h * 3))};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>((y * w + x) * 3);
      img.pixels[i] = static_cast<std::uint8_t>(x * 255 / std::max(1, w - 1));
      img.pixels[i + 1] = static_cast<std::uint8_t>(y * 255 / std::max(1, h - 1));
      img.pixels[i + 2] = 77;
    }
  return img;
}

}  // namespace

TEST_CASE("png round trip preserves pixels") {
  const RawImage img = gradient(37, 21);
  const fs::path path = temp_dir() / "g.png";
  write_png(img, path);
  const RawImage back = read_png(path);
  CHECK(back.width == 37);
  CHECK(back.height == 21);
  CHECK(back.channels == 3);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("grayscale png stays single channel and is rejected by preprocess") {
  RawImage gray{4, 4, 1, std::vector<std::uint8_t>(16, 128)};
  const fs::path path = temp_dir() / "gray.png";
  write_png(gray, path);
  const RawImage back = read_png(path);
  CHECK(back.channels == 1);
  CHECK_THROWS_AS(preprocess(back, {}), DataError);
}

TEST_CASE("unreadable files raise DataError") {
  const fs::path path = temp_dir() / "junk.png";
  {
    std::ofstream os(path, std::ios::binary);
    os << "not a png at all";
  }
  CHECK_THROWS_AS(read_png(path), DataError);
  CHECK_THROWS_AS(read_png(temp_dir() / "absent.png"), DataError);
}

TEST_CASE("preprocess resizes to SxS in [0,1]") {
  const Tensor t = preprocess(gradient(200, 120), {});
  CHECK(t.shape() == Shape{3, 64, 64});
  for (double v : t.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(t.at({2, 10, 10}) == doctest::Approx(77.0 / 255.0));
  // monotone along x in the red channel
  for (std::size_t x = 1; x < 64; ++x) CHECK(t.at({0, 5, x}) >= t.at({0, 5, x - 1}));
}

TEST_CASE("preprocess of an image already at target size is exact") {
  const RawImage img = gradient(64, 64);
  const Tensor t = preprocess(img, {});
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      CHECK(t.at({0, static_cast<std::size_t>(y), static_cast<std::size_t>(x)}) == doctest::Approx(img.at(x, y, 0) / 255.0));
}

TEST_CASE("preprocess config validation") {
  PreprocessConfig c;
  c.target_size = 60;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.target_size = 224;
  CHECK_NOTHROW(c.validate());
  c.rotation_range_deg = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("to_raw rounds and clamps") {
  Tensor t({3, 1, 2}, std::vector<double>{0.0, 1.0, 0.5, -0.2, 1.3, 0.002});
  const RawImage raw = to_raw(t);
  CHECK(raw.pixels == std::vector<std::uint8_t>{0, 128, 255, 255, 0, 1});
}

TEST_CASE("rotation by zero is the identity and by 360 nearly so") {
  SplitMix64 rng(1);
  const Tensor img = oracle::random_tensor({3, 16, 16}, rng, 0.0, 1.0);
  CHECK(rotate(img, 0.0) == img);
  const Tensor full = rotate(img, 360.0);
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(full[i] == doctest::Approx(img[i]).epsilon(1e-9));
}

TEST_CASE("rotation is counter-clockwise on screen") {
  // a bright pixel at the middle of the right edge moves to the top edge
  Tensor img({3, 9, 9});
  for (std::size_t c = 0; c < 3; ++c) img.at({c, 4, 8}) = 1.0;
  const Tensor r = rotate(img, 90.0);
  CHECK(r.at({0, 0, 4}) == doctest::Approx(1.0));
  CHECK(r.at({0, 8, 4}) == doctest::Approx(0.0));
  CHECK(r.at({0, 4, 8}) == doctest::Approx(0.0));
}

TEST_CASE("rotation replicates edges and keeps the value range") {
  const Tensor img({3, 8, 8}, 0.6);
  const Tensor r = rotate(img, 33.0);
  for (double v : r.data()) CHECK(v == doctest::Approx(0.6));
}

TEST_CASE("random rotation is seeded") {
  SplitMix64 rng(2);
  const Tensor img = oracle::random_tensor({3, 16, 16}, rng, 0.0, 1.0);
  SplitMix64 a(5), b(5), c(6);
  CHECK(random_rotation(img, a) == random_rotation(img, b));
  CHECK(random_rotation(img, c) != random_rotation(img, a));
}

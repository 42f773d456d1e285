#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <fstream>

#include "oracles.hpp"
#include "signbench/error.hpp"
#include "signbench/network.hpp"

using namespace signbench;
namespace fs = std::filesystem;

namespace {

NetworkSpec tiny_spec() {
  NetworkSpec spec;
  spec.height = spec.width = 8;
  spec.conv_channels = {4, 4, 4};
  spec.dense_widths = {8, 8};
  return spec;
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "signbench-unit";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("network spec validation") {
  NetworkSpec spec;
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.flat_features() == 32 * 8 * 8);
  spec.height = 60;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = NetworkSpec{};
  spec.classes = 5;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("init is deterministic and He-uniform bounded") {
  const NetworkSpec spec;
  const NetworkParams a = init_params(spec, 5), b = init_params(spec, 5), c = init_params(spec, 6);
  CHECK(a.tensors == b.tensors);
  CHECK(a.tensors != c.tensors);
  REQUIRE(a.names.size() == 12);
  CHECK(a.names.front() == "conv1.weight");
  CHECK(a.names.back() == "output.bias");
  const Tensor& w = a.get("conv1.weight");
  const double limit = std::sqrt(6.0 / 27.0);
  for (double v : w.data()) CHECK(std::abs(v) <= limit);
  for (double v : a.get("conv1.bias").data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(a.get("nope"), ConfigError);
}

TEST_CASE("forward produces four logits per image") {
  const NetworkSpec spec;
  const NetworkParams p = init_params(spec, 1);
  SplitMix64 rng(2);
  const Tensor batch = oracle::random_tensor({3, 3, 64, 64}, rng, 0.0, 1.0);
  const Tensor logits = forward(spec, p, batch);
  CHECK(logits.shape() == Shape{3, 4});
  CHECK(logits.all_finite());
  CHECK_THROWS_AS(forward(spec, p, Tensor({1, 3, 32, 32})), ShapeError);
}

TEST_CASE("sgd step arithmetic") {
  NetworkParams p;
  p.names = {"w"};
  p.tensors = {Tensor({1}, 1.0)};
  Gradients g{{Tensor({1}, 0.5)}};
  sgd_step(p, g, 0.1);
  CHECK(p.tensors[0][0] == doctest::Approx(0.95));
  CHECK_THROWS_AS(sgd_step(p, g, 0.0), ConfigError);
  CHECK_THROWS_AS(sgd_step(p, g, -1.0), ConfigError);
}

TEST_CASE("non-finite gradients abort without touching parameters") {
  NetworkParams p;
  p.names = {"a", "b"};
  p.tensors = {Tensor({2}, 1.0), Tensor({2}, 1.0)};
  Gradients g{{Tensor({2}, 1.0), Tensor({2}, 1.0)}};
  g.tensors[1][1] = std::numeric_limits<double>::infinity();
  const auto before = p.tensors;
  CHECK_THROWS_AS(sgd_step(p, g, 0.1), NumericError);
  CHECK(p.tensors == before);
}

TEST_CASE("frozen tensors are not updated") {
  const NetworkSpec spec = tiny_spec();
  NetworkParams p = init_params(spec, 3);
  SplitMix64 rng(4);
  const Tensor x = oracle::random_tensor({2, 3, 8, 8}, rng, 0.0, 1.0);
  const auto step = loss_and_gradients(spec, p, x, std::vector<int>{0, 1});
  const auto before = p.tensors;
  sgd_step(p, step.grads, 0.1, NetworkParams::kConvTensors);
  for (std::size_t i = 0; i < NetworkParams::kConvTensors; ++i) CHECK(p.tensors[i] == before[i]);
  bool changed = false;
  for (std::size_t i = NetworkParams::kConvTensors; i < p.tensors.size(); ++i) changed |= p.tensors[i] != before[i];
  CHECK(changed);
}

TEST_CASE("network gradients agree with finite differences on sampled parameters") {
  const NetworkSpec spec = tiny_spec();
  NetworkParams p = init_params(spec, 8);
  SplitMix64 rng(9);
  const Tensor x = oracle::random_tensor({2, 3, 8, 8}, rng, 0.0, 1.0);
  const std::vector<int> labels{2, 0};
  const auto analytic = loss_and_gradients(spec, p, x, labels);
  CHECK(analytic.loss == doctest::Approx(oracle::naive_cross_entropy(forward(spec, p, x), labels)));
  const double eps = 1e-5;
  int checked = 0, agreeing = 0;
  for (std::size_t t = 0; t < p.tensors.size(); ++t) {
    for (int s = 0; s < 12; ++s) {
      const std::size_t i = rng.below(p.tensors[t].size());
      const double saved = p.tensors[t][i];
      p.tensors[t][i] = saved + eps;
      const double plus = loss_and_gradients(spec, p, x, labels).loss;
      p.tensors[t][i] = saved - eps;
      const double minus = loss_and_gradients(spec, p, x, labels).loss;
      p.tensors[t][i] = saved;
      ++checked;
      if (oracle::relative_error(analytic.grads.tensors[t][i], (plus - minus) / (2 * eps)) < 1e-5) ++agreeing;
    }
  }
  // A perturbation may cross a relu or pooling kink; allow a handful.
  CHECK(agreeing >= checked - 3);
}

TEST_CASE("two-sample memorization drives the loss below 0.01 within 500 steps") {
  const NetworkSpec spec;
  NetworkParams p = init_params(spec, 1);
  SplitMix64 rng(12);
  const Tensor x = oracle::random_tensor({2, 3, 64, 64}, rng, 0.0, 1.0);
  const std::vector<int> labels{1, 3};
  double loss = 1e9;
  int steps = 0;
  for (; steps < 500 && loss >= 0.01; ++steps) {
    auto r = loss_and_gradients(spec, p, x, labels);
    loss = r.loss;
    sgd_step(p, r.grads, 0.01);
  }
  INFO("steps: " << steps << " loss: " << loss);
  CHECK(loss < 0.01);
}

TEST_CASE("prediction picks the lowest index on ties") {
  const auto p = prediction_from_logits(std::vector<double>{1.0, 3.0, 3.0, 0.0});
  CHECK(p.label == 1);
  CHECK(p.confidence == doctest::Approx(p.probabilities[2]));
  double sum = 0.0;
  for (double q : p.probabilities) sum += q;
  CHECK(sum == doctest::Approx(1.0));
  CHECK_THROWS_AS(prediction_from_logits(std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const NetworkSpec spec;
  const NetworkParams p = init_params(spec, 21);
  const fs::path path = temp_file("ckpt.bin");
  save_checkpoint(p, path);
  const NetworkParams q = load_checkpoint(path);
  CHECK(q.names == p.names);
  CHECK(q.tensors == p.tensors);
  CHECK_NOTHROW(check_params(spec, q));
}

TEST_CASE("checkpoint layout is the documented little-endian format") {
  NetworkParams p;
  p.names = {"ab"};
  p.tensors = {Tensor({2}, std::vector<double>{1.0, -2.0})};
  const fs::path path = temp_file("small.bin");
  save_checkpoint(p, path);
  std::ifstream is(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  // "SBNN1" + u32 2 + "ab" + u32 1 + u64 2 + 2 * f64
  REQUIRE(bytes.size() == 5 + 4 + 2 + 4 + 8 + 16);
  CHECK(std::string(bytes.begin(), bytes.begin() + 5) == "SBNN1");
  CHECK(bytes[5] == 2);
  CHECK(bytes[9] == 'a');
  CHECK(bytes[11] == 1);
  CHECK(bytes[15] == 2);
  // 1.0 = 0x3FF0000000000000 little-endian
  CHECK(bytes[23 + 7] == 0x3F);
  CHECK(bytes[23 + 6] == 0xF0);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const fs::path path = temp_file("bad.bin");
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE!";
  }
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  const NetworkParams p = init_params(NetworkSpec{}, 1);
  save_checkpoint(p, path);
  fs::resize_file(path, fs::file_size(path) - 3);
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  CHECK_THROWS_AS(load_checkpoint(temp_file("missing.bin")), DataError);
  NetworkSpec other;
  other.height = other.width = 32;
  CHECK_THROWS_AS(check_params(other, p), ShapeError);
}

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "protoseg/checkpoint.hpp"
#include "protoseg/cloud.hpp"
#include "protoseg/errors.hpp"
#include "protoseg/rng.hpp"
#include "protoseg/tensor.hpp"

using namespace protoseg;

namespace {

PointCloud sample_cloud(std::uint64_t seed, std::size_t n = 17, std::size_t channels = 6,
                        bool labels = true) {
  Rng rng(seed);
  PointCloud c;
  c.channels = channels;
  c.data.resize(n * channels);
  for (double& v : c.data) v = rng.uniform(-5.0, 5.0);
  if (labels) {
    c.instance.resize(n);
    c.semantic.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      c.instance[i] = static_cast<std::int32_t>(rng.index(4)) - 1;  // includes -1
      c.semantic[i] = static_cast<std::int32_t>(rng.index(3));
    }
  }
  return c;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("cloud encode/decode round trip preserves everything but f32 precision") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PointCloud c = sample_cloud(seed, 5 + seed, 3 + seed % 4, seed % 2 == 0);
    const PointCloud back = decode_cloud(encode_cloud(c));
    REQUIRE(back.size() == c.size());
    REQUIRE(back.channels == c.channels);
    CHECK(back.instance == c.instance);
    CHECK(back.semantic == c.semantic);
    for (std::size_t i = 0; i < c.data.size(); ++i)
      CHECK(back.data[i] == doctest::Approx(c.data[i]).epsilon(1e-6));
  }
}

TEST_CASE("cloud file round trip") {
  const std::string path = temp_path("io_cloud_rt.pcl");
  const PointCloud c = sample_cloud(3);
  write_cloud(c, path);
  const PointCloud back = read_cloud(path);
  CHECK(back.size() == c.size());
  CHECK(back.instance == c.instance);
  std::filesystem::remove(path);
}

TEST_CASE("cloud decoder rejects structured corruption") {
  const PointCloud c = sample_cloud(1);
  std::vector<unsigned char> good = encode_cloud(c);

  SUBCASE("bad magic") {
    auto bad = good;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_cloud(bad), FormatError);
  }
  SUBCASE("unknown flag bits") {
    auto bad = good;
    bad[4] |= 0x40;
    CHECK_THROWS_AS(decode_cloud(bad), FormatError);
  }
  SUBCASE("truncation") {
    auto bad = good;
    bad.resize(bad.size() - 3);
    CHECK_THROWS_AS(decode_cloud(bad), FormatError);
  }
  SUBCASE("trailing bytes") {
    auto bad = good;
    bad.push_back(0);
    CHECK_THROWS_AS(decode_cloud(bad), FormatError);
  }
  SUBCASE("zero points") {
    PointCloud empty;
    empty.channels = 3;
    CHECK_THROWS_AS(encode_cloud(empty), FormatError);
  }
  SUBCASE("non-finite channel") {
    PointCloud bad_cloud = c;
    bad_cloud.data[2] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(encode_cloud(bad_cloud), FormatError);
  }
  SUBCASE("instance label out of range") {
    PointCloud bad_cloud = c;
    bad_cloud.instance[0] = static_cast<std::int32_t>(c.size());
    CHECK_THROWS_AS(encode_cloud(bad_cloud), FormatError);
    bad_cloud.instance[0] = -2;
    CHECK_THROWS_AS(encode_cloud(bad_cloud), FormatError);
  }
}

TEST_CASE("cloud decode errors carry a byte offset") {
  std::vector<unsigned char> junk{'P', 'C', 'L', '1', 0x00, 0x01};
  try {
    (void)decode_cloud(junk);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip preserves names, shapes, and exact values") {
  std::vector<NamedTensor> tensors;
  Rng rng(9);
  tensors.emplace_back("layer.w", Tensor::from({1.5, -2.25, 0.0, 1e-30, 3e7, -0.125}, {2, 3}));
  std::vector<double> big(64);
  for (double& v : big) v = rng.normal();
  tensors.emplace_back("layer.b", Tensor::from(std::move(big), {64}));

  const auto bytes = encode_checkpoint(tensors);
  const auto back = decode_checkpoint(bytes);
  REQUIRE(back.size() == tensors.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].first == tensors[i].first);
    CHECK(back[i].second.shape() == tensors[i].second.shape());
    const auto a = back[i].second.values();
    const auto b = tensors[i].second.values();
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b[j]);  // bit-exact f64
  }

  const std::string path = temp_path("io_ckpt_rt.psg");
  save_checkpoint(path, tensors);
  const auto from_file = load_checkpoint(path);
  CHECK(from_file.size() == tensors.size());
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint decoder rejects structured corruption") {
  std::vector<NamedTensor> tensors;
  tensors.emplace_back("w", Tensor::from({1.0, 2.0}, {2}));
  std::vector<unsigned char> good = encode_checkpoint(tensors);

  SUBCASE("bad magic") {
    auto bad = good;
    bad[1] = '?';
    CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  }
  SUBCASE("truncation") {
    for (std::size_t cut = 1; cut < good.size(); cut += 3) {
      std::vector<unsigned char> bad(good.begin(), good.end() - static_cast<long>(cut));
      CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
    }
  }
  SUBCASE("trailing bytes") {
    auto bad = good;
    bad.push_back(7);
    CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  }
  SUBCASE("duplicate names rejected at load") {
    std::vector<NamedTensor> dup;
    dup.emplace_back("w", Tensor::from({1.0}, {1}));
    dup.emplace_back("w", Tensor::from({2.0}, {1}));
    CHECK_THROWS_AS(decode_checkpoint(encode_checkpoint(dup)), FormatError);
  }
  SUBCASE("unprintable name rejected at load") {
    std::vector<NamedTensor> bad_name;
    bad_name.emplace_back(std::string("w\x01"), Tensor::from({1.0}, {1}));
    CHECK_THROWS_AS(decode_checkpoint(encode_checkpoint(bad_name)), FormatError);
  }
  SUBCASE("non-finite payload rejected at load") {
    std::vector<NamedTensor> nan_t;
    nan_t.emplace_back("w", Tensor::from({std::nan("")}, {1}));
    CHECK_THROWS_AS(decode_checkpoint(encode_checkpoint(nan_t)), FormatError);
  }
}

TEST_CASE("load_into copies by name and rejects missing or mis-shaped tensors") {
  std::vector<NamedTensor> params;
  params.emplace_back("a", Tensor::from({0.0, 0.0}, {2}, true));
  std::vector<NamedTensor> loaded;
  loaded.emplace_back("extra", Tensor::from({9.0}, {1}));
  loaded.emplace_back("a", Tensor::from({4.0, 5.0}, {2}));

  load_into(params, loaded);
  CHECK(params[0].second.values()[0] == 4.0);
  CHECK(params[0].second.values()[1] == 5.0);

  std::vector<NamedTensor> missing;
  missing.emplace_back("b", Tensor::from({1.0}, {1}));
  CHECK_THROWS_AS(load_into(params, missing), FormatError);

  std::vector<NamedTensor> wrong_shape;
  wrong_shape.emplace_back("a", Tensor::from({1.0}, {1}));
  CHECK_THROWS_AS(load_into(params, wrong_shape), FormatError);
}

TEST_CASE("random mutations never crash the decoders") {
  const PointCloud c = sample_cloud(5);
  const std::vector<unsigned char> cloud_bytes = encode_cloud(c);
  std::vector<NamedTensor> tensors;
  tensors.emplace_back("layer.w", Tensor::from({1.0, 2.0, 3.0, 4.0}, {2, 2}));
  const std::vector<unsigned char> ckpt_bytes = encode_checkpoint(tensors);

  Rng rng(77);
  for (int round = 0; round < 200; ++round) {
    for (const auto* src : {&cloud_bytes, &ckpt_bytes}) {
      std::vector<unsigned char> fuzzed = *src;
      if (rng.uniform() < 0.5 && !fuzzed.empty()) {
        fuzzed.resize(rng.index(fuzzed.size()));
      } else {
        const std::size_t flips = 1 + rng.index(4);
        for (std::size_t f = 0; f < flips && !fuzzed.empty(); ++f)
          fuzzed[rng.index(fuzzed.size())] ^=
              static_cast<unsigned char>(1u << rng.index(8));
      }
      try {
        if (src == &cloud_bytes)
          (void)decode_cloud(fuzzed);
        else
          (void)decode_checkpoint(fuzzed);
      } catch (const FormatError&) {
        // rejected cleanly
      }
    }
  }
}

TEST_CASE("subset keeps labels aligned") {
  const PointCloud c = sample_cloud(8, 10);
  const std::vector<std::size_t> idx{9, 0, 4};
  const PointCloud s = c.subset(idx);
  REQUIRE(s.size() == 3);
  CHECK(s.x(0) == c.x(9));
  CHECK(s.instance[1] == c.instance[0]);
  CHECK(s.semantic[2] == c.semantic[4]);
}

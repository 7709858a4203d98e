#include <gtest/gtest.h>

#include <cstdio>
#include <functional>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cbq/error.hpp"
#include "cbq/rng.hpp"
#include "cbq/tensor_io.hpp"

using namespace cbq;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> from_hex(const std::string& hex) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoul(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::IOFailure;
}

// [0, 0.5, 1, 1.5], linear, 1 bit, one group, seed 0, 3 iterations.
// Centroids 0.25f = 0x3e800000 and 1.25f = 0x3fa00000; labels 0,0,1,1 -> 0x0c.
const std::string kGoldenHex =
    "43425131"          // magic
    "0100"              // version
    "00"                // scheme linear
    "01"                // bits
    "01000000"          // groups
    "01"                // rank
    "0400000000000000"  // dim 0
    "0000000000000000"  // seed
    "03000000"          // max_iterations
    "0000803e0000a03f"  // centroids
    "0200000002000000"  // occupancy
    "0c";               // labels

GroupedQuantizedTensor golden_tensor() {
  const std::vector<float> v{0.0f, 0.5f, 1.0f, 1.5f};
  const std::vector<std::uint64_t> shape{4};
  QuantConfig cfg;
  cfg.scheme = Scheme::Linear;
  cfg.bits = 1;
  return quantize_grouped(v, shape, cfg);
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("cbq_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

TEST(Packing, GoldenBytes) {
  EXPECT_EQ(pack_indices(IndexVector{1, 0, 1, 1}, 1), (std::vector<std::uint8_t>{0x0d}));
  EXPECT_EQ(pack_indices(IndexVector{3, 2, 1, 0}, 2), (std::vector<std::uint8_t>{0x1b}));
  // 101 111 001 crosses a byte boundary: bits 0..8 = 1,0,1,1,1,1,0,0,1.
  EXPECT_EQ(pack_indices(IndexVector{5, 7, 4}, 3), (std::vector<std::uint8_t>{0x3d, 0x01}));
  EXPECT_EQ(pack_indices(IndexVector{0xab, 0x01}, 8), (std::vector<std::uint8_t>{0xab, 0x01}));
  EXPECT_TRUE(pack_indices(IndexVector{}, 4).empty());
}

TEST(Packing, Sizes) {
  EXPECT_EQ(packed_size(0, 3), 0u);
  EXPECT_EQ(packed_size(8, 1), 1u);
  EXPECT_EQ(packed_size(9, 1), 2u);
  EXPECT_EQ(packed_size(3, 3), 2u);
  EXPECT_EQ(packed_size(10, 8), 10u);
}

TEST(Packing, Errors) {
  EXPECT_EQ(code_of([] { pack_indices(IndexVector{2}, 1); }), ErrorCode::LabelOverflow);
  EXPECT_EQ(code_of([] { pack_indices(IndexVector{1}, 0); }), ErrorCode::BadConfig);
  EXPECT_EQ(code_of([] { pack_indices(IndexVector{1}, 9); }), ErrorCode::BadConfig);
  const std::vector<std::uint8_t> ff{0xff};
  EXPECT_EQ(code_of([&] { unpack_indices(ff, 4, 1); }), ErrorCode::NonzeroPadding);
  EXPECT_EQ(code_of([&] { unpack_indices(ff, 9, 1); }), ErrorCode::LengthMismatch);
  const std::vector<std::uint8_t> two{0x00, 0x00};
  EXPECT_EQ(code_of([&] { unpack_indices(two, 4, 1); }), ErrorCode::LengthMismatch);
}

TEST(Packing, RoundTripProperty) {
  Rng rng(31337);
  for (int trial = 0; trial < 1000; ++trial) {
    const unsigned bits = 1 + static_cast<unsigned>(rng.index(8));
    const std::size_t n = rng.index(300);
    IndexVector labels(n);
    for (auto& l : labels) l = static_cast<Label>(rng.index(std::size_t{1} << bits));
    const auto packed = pack_indices(labels, bits);
    ASSERT_EQ(packed.size(), packed_size(n, bits));
    ASSERT_EQ(unpack_indices(packed, n, bits), labels) << "bits " << bits << " n " << n;
  }
}

TEST(Cbq, HeaderSize) {
  EXPECT_EQ(cbq_header_size(0), 25u);
  EXPECT_EQ(cbq_header_size(2), 41u);
  const std::vector<std::uint64_t> shape{4};
  EXPECT_EQ(cbq_serialized_size(shape, 1, 1), kGoldenHex.size() / 2);
}

TEST(Cbq, GoldenEncoding) {
  EXPECT_EQ(encode_cbq(golden_tensor()), from_hex(kGoldenHex));
}

TEST(Cbq, GoldenDecoding) {
  const auto g = decode_cbq(from_hex(kGoldenHex));
  EXPECT_EQ(g.shape, (std::vector<std::uint64_t>{4}));
  EXPECT_EQ(g.config.scheme, Scheme::Linear);
  EXPECT_EQ(g.config.bits, 1u);
  EXPECT_EQ(g.config.max_iterations, 3u);
  ASSERT_EQ(g.groups.size(), 1u);
  EXPECT_EQ(g.groups[0].indices, (IndexVector{0, 0, 1, 1}));
  EXPECT_EQ(reconstruct_grouped(g).values, (std::vector<float>{0.25f, 0.25f, 1.25f, 1.25f}));
}

TEST(Cbq, MultiGroupRoundTrip) {
  Rng rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t rows = 1 + rng.index(20);
    const std::size_t cols = 1 + rng.index(20);
    std::vector<float> v(rows * cols);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    const std::vector<std::uint64_t> shape{rows, cols};
    QuantConfig cfg;
    cfg.scheme = trial % 2 ? Scheme::KMeans : Scheme::Linear;
    cfg.bits = 1 + static_cast<unsigned>(rng.index(8));
    cfg.group_count = 1 + static_cast<unsigned>(rng.index(std::min<std::size_t>(v.size(), 7)));
    cfg.seed = rng.next();
    const auto g = quantize_grouped(v, shape, cfg, "t");
    const auto bytes = encode_cbq(g);
    ASSERT_EQ(bytes.size(), cbq_serialized_size(shape, cfg.bits, cfg.group_count));
    const auto back = decode_cbq(bytes);
    EXPECT_EQ(back.shape, g.shape);
    EXPECT_EQ(back.config.seed, cfg.seed);
    EXPECT_EQ(back.spans, g.spans);
    EXPECT_EQ(reconstruct_grouped(back).values, reconstruct_grouped(g).values);
    EXPECT_EQ(encode_cbq(back), bytes);
  }
}

TEST(Cbq, RejectsDamage) {
  const auto good = from_hex(kGoldenHex);

  auto bad_magic = good;
  bad_magic[3] = '2';
  EXPECT_EQ(code_of([&] { decode_cbq(bad_magic); }), ErrorCode::BadMagic);

  auto bad_version = good;
  bad_version[4] = 2;
  EXPECT_EQ(code_of([&] { decode_cbq(bad_version); }), ErrorCode::UnsupportedVersion);

  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{20}, good.size() - 1}) {
    const std::vector<std::uint8_t> truncated(good.begin(), good.begin() + cut);
    const auto code = code_of([&] { decode_cbq(truncated); });
    EXPECT_TRUE(code == ErrorCode::LengthMismatch || code == ErrorCode::BadMagic) << cut;
  }

  auto trailing = good;
  trailing.push_back(0);
  EXPECT_EQ(code_of([&] { decode_cbq(trailing); }), ErrorCode::LengthMismatch);

  auto padding = good;
  padding.back() = 0x1c;  // a fifth label bit set in the padding
  EXPECT_EQ(code_of([&] { decode_cbq(padding); }), ErrorCode::NonzeroPadding);

  auto bad_bits = good;
  bad_bits[7] = 9;
  EXPECT_EQ(code_of([&] { decode_cbq(bad_bits); }), ErrorCode::CorruptIndex);

  auto empty_label = good;
  empty_label[41] = 0;  // occupancy of centroid 0 no longer matches the labels
  EXPECT_EQ(code_of([&] { decode_cbq(empty_label); }), ErrorCode::CorruptIndex);
}

TEST(Cbq, FileRoundTrip) {
  TempDir dir;
  const auto path = dir.path() / "t.cbq";
  write_cbq(path, golden_tensor());
  EXPECT_EQ(read_file(path), from_hex(kGoldenHex));
  EXPECT_EQ(read_cbq(path).groups[0].indices, (IndexVector{0, 0, 1, 1}));
  EXPECT_EQ(code_of([&] { read_cbq(dir.path() / "missing.cbq"); }), ErrorCode::IOFailure);
}

TEST(Bundle, RoundTrip) {
  TempDir dir;
  TensorBundle b;
  b.add({"a", {2, 3}, {1, 2, 3, 4, 5, 6}});
  b.add({"b.bias", {3}, {-1.5f, 0.0f, 1e-30f}});
  b.add({"scalar", {}, {42.0f}});
  const auto manifest = dir.path() / "m.json";
  write_bundle(manifest, b);
  EXPECT_TRUE(fs::exists(dir.path() / "m.bin"));
  EXPECT_EQ(fs::file_size(dir.path() / "m.bin"), 10u * 4u);
  const auto back = read_bundle(manifest);
  ASSERT_EQ(back.tensors.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.tensors[i].name, b.tensors[i].name);
    EXPECT_EQ(back.tensors[i].shape, b.tensors[i].shape);
    EXPECT_EQ(back.tensors[i].values, b.tensors[i].values);
  }
  ASSERT_NE(back.find("b.bias"), nullptr);
  EXPECT_EQ(back.find("nope"), nullptr);
}

TEST(Bundle, Mismatches) {
  TensorBundle b;
  b.add({"a", {2}, {1, 2}});
  EXPECT_EQ(code_of([&] { b.add({"a", {1}, {1}}); }), ErrorCode::ManifestMismatch);
  EXPECT_EQ(code_of([&] { b.add({"c", {3}, {1, 2}}); }), ErrorCode::ManifestMismatch);
}

TEST(Bundle, ManifestAgainstPayload) {
  TempDir dir;
  const auto manifest = dir.path() / "m.json";
  {
    std::ofstream(dir.path() / "m.bin", std::ios::binary).write("\0\0\0\0\0\0\0\0", 8);
  }
  auto write_manifest = [&](const std::string& text) { std::ofstream(manifest) << text; };

  write_manifest(
      R"({"format":"cbq-bundle","version":1,"payload":"m.bin","extra":true,)"
      R"("tensors":[{"name":"x","shape":[2],"dtype":"float32","offset":0,"length":8,"note":"ok"}]})");
  EXPECT_EQ(read_bundle(manifest).tensors.at(0).values, (std::vector<float>{0.0f, 0.0f}));

  write_manifest(
      R"({"format":"cbq-bundle","version":1,"payload":"m.bin",)"
      R"("tensors":[{"name":"x","shape":[3],"dtype":"float32","offset":0,"length":12}]})");
  EXPECT_EQ(code_of([&] { read_bundle(manifest); }), ErrorCode::ManifestMismatch);

  write_manifest(
      R"({"format":"cbq-bundle","version":1,"payload":"m.bin",)"
      R"("tensors":[{"name":"x","shape":[2],"dtype":"float32","offset":0,"length":12}]})");
  EXPECT_EQ(code_of([&] { read_bundle(manifest); }), ErrorCode::ManifestMismatch);

  write_manifest(
      R"({"format":"cbq-bundle","version":1,"payload":"m.bin",)"
      R"("tensors":[{"name":"x","shape":[2],"dtype":"float64","offset":0,"length":8}]})");
  EXPECT_EQ(code_of([&] { read_bundle(manifest); }), ErrorCode::ManifestMismatch);

  write_manifest("not json");
  EXPECT_EQ(code_of([&] { read_bundle(manifest); }), ErrorCode::ManifestMismatch);

  EXPECT_EQ(code_of([&] { read_bundle(dir.path() / "missing.json"); }), ErrorCode::IOFailure);
}

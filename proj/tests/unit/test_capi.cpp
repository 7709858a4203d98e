#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "cbq/cbq.h"

namespace fs = std::filesystem;

namespace {

cbq_config linear_config(uint32_t bits) {
  cbq_config c;
  cbq_config_init(&c);
  c.scheme = CBQ_SCHEME_LINEAR;
  c.bits = bits;
  return c;
}

const std::vector<float> kFour{0.0f, 0.5f, 1.0f, 1.5f};

}  // namespace

TEST(CApi, Defaults) {
  cbq_config c;
  cbq_config_init(&c);
  EXPECT_EQ(c.scheme, CBQ_SCHEME_KMEANS);
  EXPECT_EQ(c.bits, 8u);
  EXPECT_EQ(c.max_iterations, 3u);
  EXPECT_EQ(c.group_count, 1u);
  EXPECT_EQ(cbq_config_validate(&c), CBQ_OK);
  c.bits = 9;
  EXPECT_EQ(cbq_config_validate(&c), CBQ_ERR_BAD_CONFIG);
  EXPECT_NE(std::string(cbq_last_error()).find("bits"), std::string::npos);
  EXPECT_EQ(cbq_config_validate(nullptr), CBQ_ERR_INVALID_ARGUMENT);
  EXPECT_STREQ(cbq_status_name(CBQ_ERR_TOO_MANY_GROUPS), "TooManyGroups");
  EXPECT_STREQ(cbq_scheme_name(CBQ_SCHEME_LINEAR), "linear");
  cbq_scheme s;
  EXPECT_EQ(cbq_scheme_parse("kmeans", &s), CBQ_OK);
  EXPECT_EQ(s, CBQ_SCHEME_KMEANS);
  EXPECT_EQ(cbq_scheme_parse("uniform", &s), CBQ_ERR_BAD_CONFIG);
}

TEST(CApi, QuantizeAndInspect) {
  const auto cfg = linear_config(1);
  const uint64_t shape[] = {2, 2};
  cbq_tensor_t t = nullptr;
  ASSERT_EQ(cbq_quantize(kFour.data(), 4, shape, 2, "w", &cfg, &t), CBQ_OK);
  EXPECT_EQ(cbq_tensor_element_count(t), 4u);
  EXPECT_EQ(cbq_tensor_rank(t), 2u);
  EXPECT_EQ(cbq_tensor_group_count(t), 1u);
  uint64_t dims[2];
  EXPECT_EQ(cbq_tensor_shape(t, dims, 1), CBQ_ERR_INVALID_ARGUMENT);
  ASSERT_EQ(cbq_tensor_shape(t, dims, 2), CBQ_OK);
  EXPECT_EQ(dims[0], 2u);

  float centroids[2];
  uint32_t occupancy[2];
  ASSERT_EQ(cbq_tensor_group_codebook(t, 0, centroids, occupancy, 2), CBQ_OK);
  EXPECT_EQ(centroids[0], 0.25f);
  EXPECT_EQ(centroids[1], 1.25f);
  EXPECT_EQ(occupancy[0], 2u);
  EXPECT_EQ(cbq_tensor_group_codebook(t, 1, centroids, occupancy, 2), CBQ_ERR_INVALID_ARGUMENT);
  uint8_t labels[4];
  ASSERT_EQ(cbq_tensor_group_labels(t, 0, labels, 4), CBQ_OK);
  EXPECT_EQ(labels[2], 1u);

  float out[4];
  double seconds = -1.0;
  ASSERT_EQ(cbq_tensor_reconstruct(t, out, 4, &seconds), CBQ_OK);
  EXPECT_GE(seconds, 0.0);
  EXPECT_EQ(out[0], 0.25f);
  EXPECT_EQ(out[3], 1.25f);
  EXPECT_EQ(cbq_tensor_reconstruct(t, out, 3, nullptr), CBQ_ERR_LENGTH_MISMATCH);

  cbq_error_stats s;
  ASSERT_EQ(cbq_tensor_error_stats(t, kFour.data(), 4, &s), CBQ_OK);
  EXPECT_DOUBLE_EQ(s.mse, 0.0625);
  EXPECT_EQ(cbq_tensor_error_stats(t, kFour.data(), 3, &s), CBQ_ERR_LENGTH_MISMATCH);
  cbq_tensor_free(t);
  cbq_tensor_free(nullptr);
}

TEST(CApi, QuantizeErrors) {
  auto cfg = linear_config(2);
  cbq_tensor_t t = nullptr;
  const uint64_t shape4[] = {4};
  EXPECT_EQ(cbq_quantize(nullptr, 4, shape4, 1, nullptr, &cfg, &t), CBQ_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(cbq_quantize(kFour.data(), 4, shape4, 1, nullptr, &cfg, nullptr),
            CBQ_ERR_INVALID_ARGUMENT);
  const uint64_t shape0[] = {0};
  EXPECT_EQ(cbq_quantize(kFour.data(), 0, shape0, 1, nullptr, &cfg, &t), CBQ_ERR_EMPTY_INPUT);
  const uint64_t shape3[] = {3};
  EXPECT_EQ(cbq_quantize(kFour.data(), 4, shape3, 1, nullptr, &cfg, &t), CBQ_ERR_SHAPE_MISMATCH);
  cfg.group_count = 5;
  EXPECT_EQ(cbq_quantize(kFour.data(), 4, shape4, 1, nullptr, &cfg, &t),
            CBQ_ERR_TOO_MANY_GROUPS);
  cfg.group_count = 1;
  const float bad[] = {1.0f, NAN, 0.0f, 0.0f};
  EXPECT_EQ(cbq_quantize(bad, 4, shape4, 1, nullptr, &cfg, &t), CBQ_ERR_NON_FINITE_INPUT);
  EXPECT_EQ(t, nullptr);
}

TEST(CApi, EncodeDecode) {
  const auto cfg = linear_config(1);
  const uint64_t shape[] = {4};
  cbq_tensor_t t = nullptr;
  ASSERT_EQ(cbq_quantize(kFour.data(), 4, shape, 1, nullptr, &cfg, &t), CBQ_OK);
  uint64_t size = 0;
  ASSERT_EQ(cbq_tensor_encoded_size(t, &size), CBQ_OK);
  EXPECT_EQ(size, 50u);
  uint64_t expected = 0;
  ASSERT_EQ(cbq_serialized_size(4, &cfg, &expected), CBQ_OK);
  EXPECT_EQ(size, expected);
  std::vector<uint8_t> buf(size);
  uint64_t written = 0;
  EXPECT_EQ(cbq_tensor_encode(t, buf.data(), size - 1, &written), CBQ_ERR_INVALID_ARGUMENT);
  ASSERT_EQ(cbq_tensor_encode(t, buf.data(), size, &written), CBQ_OK);
  EXPECT_EQ(written, size);
  cbq_tensor_t back = nullptr;
  ASSERT_EQ(cbq_tensor_decode(buf.data(), size, &back), CBQ_OK);
  float out[4];
  ASSERT_EQ(cbq_tensor_reconstruct(back, out, 4, nullptr), CBQ_OK);
  EXPECT_EQ(out[1], 0.25f);
  cbq_tensor_free(back);

  buf[0] = 'X';
  EXPECT_EQ(cbq_tensor_decode(buf.data(), size, &back), CBQ_ERR_BAD_MAGIC);
  buf[0] = 'C';
  buf[4] = 9;
  EXPECT_EQ(cbq_tensor_decode(buf.data(), size, &back), CBQ_ERR_UNSUPPORTED_VERSION);
  buf[4] = 1;
  EXPECT_EQ(cbq_tensor_decode(buf.data(), size - 1, &back), CBQ_ERR_LENGTH_MISMATCH);

  const auto path = fs::temp_directory_path() / "cbq_capi_test.cbq";
  ASSERT_EQ(cbq_tensor_save(t, path.c_str()), CBQ_OK);
  ASSERT_EQ(cbq_tensor_load(path.c_str(), &back), CBQ_OK);
  cbq_tensor_free(back);
  fs::remove(path);
  EXPECT_EQ(cbq_tensor_load(path.c_str(), &back), CBQ_ERR_IO_FAILURE);
  cbq_tensor_free(t);
}

TEST(CApi, PackingAndRatio) {
  const uint8_t labels[] = {1, 0, 1, 1};
  uint8_t byte = 0;
  EXPECT_EQ(cbq_packed_size(4, 1), 1u);
  ASSERT_EQ(cbq_pack_indices(labels, 4, 1, &byte, 1), CBQ_OK);
  EXPECT_EQ(byte, 0x0d);
  uint8_t back[4];
  ASSERT_EQ(cbq_unpack_indices(&byte, 1, 4, 1, back), CBQ_OK);
  EXPECT_EQ(back[3], 1u);
  const uint8_t ff = 0xff;
  EXPECT_EQ(cbq_unpack_indices(&ff, 1, 4, 1, back), CBQ_ERR_NONZERO_PADDING);
  const uint8_t big[] = {2};
  EXPECT_EQ(cbq_pack_indices(big, 1, 1, &byte, 1), CBQ_ERR_LABEL_OVERFLOW);

  cbq_config cfg;
  cbq_config_init(&cfg);
  double ratio = 0.0;
  ASSERT_EQ(cbq_compression_ratio(1'000'000, &cfg, &ratio), CBQ_OK);
  EXPECT_GE(ratio, 3.99);
  EXPECT_LE(ratio, 4.0);
}

TEST(CApi, Bundles) {
  cbq_bundle_t b = nullptr;
  ASSERT_EQ(cbq_bundle_create(&b), CBQ_OK);
  const uint64_t shape[] = {4};
  ASSERT_EQ(cbq_bundle_add(b, "x", kFour.data(), 4, shape, 1), CBQ_OK);
  EXPECT_EQ(cbq_bundle_add(b, "x", kFour.data(), 4, shape, 1), CBQ_ERR_MANIFEST_MISMATCH);
  const uint64_t gshape[] = {3, 5};
  ASSERT_EQ(cbq_bundle_add_gaussian(b, "g", gshape, 2, 7), CBQ_OK);
  EXPECT_EQ(cbq_bundle_count(b), 2u);
  EXPECT_STREQ(cbq_bundle_name(b, 1), "g");
  EXPECT_EQ(cbq_bundle_name(b, 2), nullptr);

  const auto dir = fs::temp_directory_path() / "cbq_capi_bundle";
  fs::create_directories(dir);
  const auto manifest = dir / "b.json";
  ASSERT_EQ(cbq_bundle_save(b, manifest.c_str()), CBQ_OK);
  cbq_bundle_t loaded = nullptr;
  ASSERT_EQ(cbq_bundle_load(manifest.c_str(), &loaded), CBQ_OK);
  size_t index = 99;
  ASSERT_EQ(cbq_bundle_find(loaded, "g", &index), CBQ_OK);
  EXPECT_EQ(index, 1u);
  EXPECT_NE(cbq_bundle_find(loaded, "nope", &index), CBQ_OK);
  const float* data = nullptr;
  uint64_t n = 0;
  ASSERT_EQ(cbq_bundle_tensor(loaded, 1, &data, &n), CBQ_OK);
  EXPECT_EQ(n, 15u);
  const float* original = nullptr;
  ASSERT_EQ(cbq_bundle_tensor(b, 1, &original, &n), CBQ_OK);
  EXPECT_EQ(std::vector<float>(data, data + n), std::vector<float>(original, original + n));
  uint64_t dims[2];
  size_t rank = 0;
  ASSERT_EQ(cbq_bundle_shape(loaded, 1, dims, 2, &rank), CBQ_OK);
  EXPECT_EQ(rank, 2u);
  EXPECT_EQ(dims[1], 5u);
  cbq_bundle_free(loaded);
  cbq_bundle_free(b);
  cbq_bundle_free(nullptr);
  fs::remove_all(dir);
  EXPECT_EQ(cbq_bundle_load((dir / "b.json").c_str(), &loaded), CBQ_ERR_IO_FAILURE);
}

TEST(CApi, Experiment) {
  cbq_train_config tc;
  cbq_train_config_init(&tc);
  EXPECT_EQ(tc.epochs, 200u);
  EXPECT_DOUBLE_EQ(tc.quantized_lr_multiplier, 10.0);
  tc.samples = 32;
  tc.input_dim = 4;
  tc.hidden_dim = 8;
  tc.epochs = 3;
  tc.pretrain_epochs = 5;
  cbq_config qc;
  cbq_config_init(&qc);
  qc.bits = 2;
  cbq_experiment_t e = nullptr;
  ASSERT_EQ(cbq_experiment_run(&tc, &qc, 1, &e), CBQ_OK);
  EXPECT_EQ(cbq_experiment_record_count(e), 8u);
  cbq_curve_record r;
  ASSERT_EQ(cbq_experiment_record(e, 4, &r), CBQ_OK);
  EXPECT_EQ(r.scheme, CBQ_SCHEME_KMEANS);
  EXPECT_EQ(r.epoch, 0u);
  char line[128];
  ASSERT_EQ(cbq_experiment_format_record(e, 0, line, sizeof line), CBQ_OK);
  EXPECT_EQ(std::string(line).rfind("0,linear,2,1,", 0), 0u);
  EXPECT_EQ(cbq_experiment_format_record(e, 0, line, 4), CBQ_ERR_INVALID_ARGUMENT);
  cbq_arm_summary s;
  ASSERT_EQ(cbq_experiment_summary(e, CBQ_SCHEME_LINEAR, &s), CBQ_OK);
  EXPECT_GT(s.quantized_loss, 0.0);
  EXPECT_EQ(cbq_experiment_record(e, 8, &r), CBQ_ERR_INVALID_ARGUMENT);
  cbq_experiment_free(e);

  tc.base_learning_rate = 0.0;
  EXPECT_EQ(cbq_experiment_run(&tc, &qc, 1, &e), CBQ_ERR_BAD_CONFIG);
}

/*
 * cbquant C API.
 *
 * Every function returns a cbq_status (or a plain value for getters that
 * cannot fail). On failure a human-readable message is available from
 * cbq_last_error(), which is thread-local and valid until the next failing
 * call on the same thread. Handles are opaque, owned by the caller, and
 * released with the matching *_free function; passing NULL to *_free is a
 * no-op. Handles are immutable once returned (bundles excepted), so they can
 * be shared across threads for reading.
 */
#ifndef CBQ_CBQ_H_
#define CBQ_CBQ_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(CBQ_BUILDING_LIBRARY)
#define CBQ_API __declspec(dllexport)
#else
#define CBQ_API __declspec(dllimport)
#endif
#else
#define CBQ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cbq_status {
  CBQ_OK = 0,
  CBQ_ERR_EMPTY_INPUT = 1,
  CBQ_ERR_NON_FINITE_INPUT = 2,
  CBQ_ERR_BAD_CONFIG = 3,
  CBQ_ERR_CORRUPT_INDEX = 4,
  CBQ_ERR_LENGTH_MISMATCH = 5,
  CBQ_ERR_TOO_MANY_GROUPS = 6,
  CBQ_ERR_BAD_K = 7,
  CBQ_ERR_LABEL_OVERFLOW = 8,
  CBQ_ERR_NONZERO_PADDING = 9,
  CBQ_ERR_BAD_MAGIC = 10,
  CBQ_ERR_UNSUPPORTED_VERSION = 11,
  CBQ_ERR_MANIFEST_MISMATCH = 12,
  CBQ_ERR_IO_FAILURE = 13,
  CBQ_ERR_SHAPE_MISMATCH = 14,
  CBQ_ERR_INVALID_ARGUMENT = 15, /* NULL pointer, undersized buffer, bad index */
  CBQ_ERR_INTERNAL = 16
} cbq_status;

typedef enum cbq_scheme { CBQ_SCHEME_LINEAR = 0, CBQ_SCHEME_KMEANS = 1 } cbq_scheme;

typedef struct cbq_config {
  cbq_scheme scheme;
  uint32_t bits;           /* 1..8 */
  uint32_t max_iterations; /* Lloyd iteration cap */
  uint64_t seed;
  double convergence_epsilon;
  uint32_t group_count;
  uint32_t threads; /* worker threads for group-parallel work, 0 = hardware */
} cbq_config;

typedef struct cbq_error_stats {
  double sse;
  double mse;
  double max_abs_error;
  uint64_t n;
} cbq_error_stats;

typedef struct cbq_tensor* cbq_tensor_t;         /* grouped quantized tensor */
typedef struct cbq_bundle* cbq_bundle_t;         /* named float32 tensors */
typedef struct cbq_experiment* cbq_experiment_t; /* toy fine-tuning results */

CBQ_API const char* cbq_version(void);
CBQ_API const char* cbq_status_name(cbq_status status);
CBQ_API const char* cbq_last_error(void);

/* Defaults: kmeans, 8 bits, 3 iterations, seed 0, epsilon 0, 1 group, 1 thread. */
CBQ_API void cbq_config_init(cbq_config* cfg);
CBQ_API cbq_status cbq_config_validate(const cbq_config* cfg);
CBQ_API const char* cbq_scheme_name(cbq_scheme scheme);
CBQ_API cbq_status cbq_scheme_parse(const char* text, cbq_scheme* out);

/* Exact CBQ size of a flat tensor of n elements, and 32n bits over it. */
CBQ_API cbq_status cbq_serialized_size(uint64_t n, const cbq_config* cfg, uint64_t* out_bytes);
CBQ_API cbq_status cbq_compression_ratio(uint64_t n, const cbq_config* cfg, double* out_ratio);

/* ---- quantized tensors ---- */

/* `name` selects the per-group RNG streams; NULL is the same as "". */
CBQ_API cbq_status cbq_quantize(const float* data, uint64_t n, const uint64_t* shape,
                                size_t rank, const char* name, const cbq_config* cfg,
                                cbq_tensor_t* out);
CBQ_API void cbq_tensor_free(cbq_tensor_t tensor);

CBQ_API uint64_t cbq_tensor_element_count(cbq_tensor_t tensor);
CBQ_API size_t cbq_tensor_rank(cbq_tensor_t tensor);
CBQ_API cbq_status cbq_tensor_shape(cbq_tensor_t tensor, uint64_t* dims, size_t capacity);
/* Scheme, bits, iterations, seed and group count as recorded; threads = 0. */
CBQ_API cbq_status cbq_tensor_config(cbq_tensor_t tensor, cbq_config* out);
CBQ_API uint32_t cbq_tensor_group_count(cbq_tensor_t tensor);

/* Codebook and labels of one group. Buffers must hold 2^bits centroids /
 * occupancy entries and the group's length in labels respectively. */
CBQ_API cbq_status cbq_tensor_group(cbq_tensor_t tensor, uint32_t group, uint64_t* offset,
                                    uint64_t* length);
CBQ_API cbq_status cbq_tensor_group_codebook(cbq_tensor_t tensor, uint32_t group,
                                             float* centroids, uint32_t* occupancy,
                                             size_t capacity);
CBQ_API cbq_status cbq_tensor_group_labels(cbq_tensor_t tensor, uint32_t group,
                                           uint8_t* labels, uint64_t capacity);

/* Writes n = element count floats; `seconds` (optional) receives the
 * wall-clock time of the reconstruction loop. */
CBQ_API cbq_status cbq_tensor_reconstruct(cbq_tensor_t tensor, float* out, uint64_t n,
                                          double* seconds);
CBQ_API cbq_status cbq_tensor_error_stats(cbq_tensor_t tensor, const float* reference,
                                          uint64_t n, cbq_error_stats* out);

CBQ_API cbq_status cbq_tensor_encoded_size(cbq_tensor_t tensor, uint64_t* out_bytes);
CBQ_API cbq_status cbq_tensor_encode(cbq_tensor_t tensor, uint8_t* buffer, uint64_t capacity,
                                     uint64_t* written);
CBQ_API cbq_status cbq_tensor_decode(const uint8_t* bytes, uint64_t size, cbq_tensor_t* out);
CBQ_API cbq_status cbq_tensor_save(cbq_tensor_t tensor, const char* path);
CBQ_API cbq_status cbq_tensor_load(const char* path, cbq_tensor_t* out);

/* Error statistics between two equally sized float arrays. */
CBQ_API cbq_status cbq_compare(const float* reference, const float* candidate, uint64_t n,
                               cbq_error_stats* out);

/* ---- bit packing ---- */

CBQ_API uint64_t cbq_packed_size(uint64_t n, uint32_t bits);
CBQ_API cbq_status cbq_pack_indices(const uint8_t* labels, uint64_t n, uint32_t bits,
                                    uint8_t* out, uint64_t capacity);
CBQ_API cbq_status cbq_unpack_indices(const uint8_t* bytes, uint64_t size, uint64_t n,
                                      uint32_t bits, uint8_t* labels);

/* ---- tensor bundles ---- */

CBQ_API cbq_status cbq_bundle_create(cbq_bundle_t* out);
CBQ_API cbq_status cbq_bundle_load(const char* manifest_path, cbq_bundle_t* out);
/* Writes the manifest and a payload with the same stem and a .bin extension. */
CBQ_API cbq_status cbq_bundle_save(cbq_bundle_t bundle, const char* manifest_path);
CBQ_API void cbq_bundle_free(cbq_bundle_t bundle);

CBQ_API size_t cbq_bundle_count(cbq_bundle_t bundle);
/* Pointers stay valid until the bundle is modified or freed. */
CBQ_API const char* cbq_bundle_name(cbq_bundle_t bundle, size_t index);
CBQ_API cbq_status cbq_bundle_find(cbq_bundle_t bundle, const char* name, size_t* index);
CBQ_API cbq_status cbq_bundle_tensor(cbq_bundle_t bundle, size_t index, const float** data,
                                     uint64_t* n);
CBQ_API cbq_status cbq_bundle_shape(cbq_bundle_t bundle, size_t index, uint64_t* dims,
                                    size_t capacity, size_t* rank);
CBQ_API cbq_status cbq_bundle_add(cbq_bundle_t bundle, const char* name, const float* data,
                                  uint64_t n, const uint64_t* shape, size_t rank);
/* Adds a tensor of i.i.d. standard normal samples drawn from `seed`. */
CBQ_API cbq_status cbq_bundle_add_gaussian(cbq_bundle_t bundle, const char* name,
                                           const uint64_t* shape, size_t rank, uint64_t seed);

/* ---- toy quantization-aware fine-tuning ---- */

typedef struct cbq_train_config {
  double base_learning_rate;
  double quantized_lr_multiplier;
  uint32_t epochs;
  uint32_t pretrain_epochs;
  uint32_t batch_size;
  uint64_t data_seed;
  uint32_t samples;
  uint32_t input_dim;
  uint32_t hidden_dim;
  uint32_t output_dim;
  double noise;
  int quantize_output_layer;
} cbq_train_config;

typedef struct cbq_curve_record {
  uint64_t epoch;
  cbq_scheme scheme;
  uint32_t bits;
  uint64_t seed;
  double loss;
} cbq_curve_record;

typedef struct cbq_arm_summary {
  double full_precision_loss;
  double quantized_loss;
  double final_loss;
} cbq_arm_summary;

CBQ_API void cbq_train_config_init(cbq_train_config* cfg);
/* Runs both schemes (linear, then kmeans) from one pretrained model. */
CBQ_API cbq_status cbq_experiment_run(const cbq_train_config* train, const cbq_config* quant,
                                      uint64_t task_seed, cbq_experiment_t* out);
CBQ_API void cbq_experiment_free(cbq_experiment_t experiment);
CBQ_API size_t cbq_experiment_record_count(cbq_experiment_t experiment);
CBQ_API cbq_status cbq_experiment_record(cbq_experiment_t experiment, size_t index,
                                         cbq_curve_record* out);
/* "epoch,scheme,bits,seed,loss"; the loss is printed to 9 significant digits. */
CBQ_API cbq_status cbq_experiment_format_record(cbq_experiment_t experiment, size_t index,
                                                char* buffer, size_t capacity);
CBQ_API cbq_status cbq_experiment_summary(cbq_experiment_t experiment, cbq_scheme scheme,
                                          cbq_arm_summary* out);

#ifdef __cplusplus
}
#endif

#endif /* CBQ_CBQ_H_ */

#include "cbq/cbq.h"

#include <algorithm>
#include <cstring>
#include <exception>
#include <memory>
#include <string>
#include <vector>

#include "cbq/error.hpp"
#include "cbq/grouping.hpp"
#include "cbq/quant.hpp"
#include "cbq/rng.hpp"
#include "cbq/tensor_io.hpp"
#include "cbq/train.hpp"

struct cbq_tensor {
  cbq::GroupedQuantizedTensor value;
};

struct cbq_bundle {
  cbq::TensorBundle value;
};

struct cbq_experiment {
  cbq::train::ExperimentResult value;
  std::vector<cbq::train::CurveRecord> records;
};

namespace {

thread_local std::string last_error;

struct InvalidArgument : std::exception {
  explicit InvalidArgument(std::string m) : message(std::move(m)) {}
  const char* what() const noexcept override { return message.c_str(); }
  std::string message;
};

cbq_status to_status(cbq::ErrorCode code) {
  using cbq::ErrorCode;
  switch (code) {
    case ErrorCode::EmptyInput: return CBQ_ERR_EMPTY_INPUT;
    case ErrorCode::NonFiniteInput: return CBQ_ERR_NON_FINITE_INPUT;
    case ErrorCode::BadConfig: return CBQ_ERR_BAD_CONFIG;
    case ErrorCode::CorruptIndex: return CBQ_ERR_CORRUPT_INDEX;
    case ErrorCode::LengthMismatch: return CBQ_ERR_LENGTH_MISMATCH;
    case ErrorCode::TooManyGroups: return CBQ_ERR_TOO_MANY_GROUPS;
    case ErrorCode::BadK: return CBQ_ERR_BAD_K;
    case ErrorCode::LabelOverflow: return CBQ_ERR_LABEL_OVERFLOW;
    case ErrorCode::NonzeroPadding: return CBQ_ERR_NONZERO_PADDING;
    case ErrorCode::BadMagic: return CBQ_ERR_BAD_MAGIC;
    case ErrorCode::UnsupportedVersion: return CBQ_ERR_UNSUPPORTED_VERSION;
    case ErrorCode::ManifestMismatch: return CBQ_ERR_MANIFEST_MISMATCH;
    case ErrorCode::IOFailure: return CBQ_ERR_IO_FAILURE;
    case ErrorCode::ShapeMismatch: return CBQ_ERR_SHAPE_MISMATCH;
  }
  return CBQ_ERR_INTERNAL;
}

template <typename F>
cbq_status guarded(F&& body) noexcept {
  try {
    body();
    return CBQ_OK;
  } catch (const cbq::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const InvalidArgument& e) {
    last_error = e.what();
    return CBQ_ERR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    last_error = e.what();
    return CBQ_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown exception";
    return CBQ_ERR_INTERNAL;
  }
}

template <typename T>
void require(const T* p, const char* what) {
  if (p == nullptr) throw InvalidArgument(std::string(what) + " must not be NULL");
}

cbq::Scheme to_scheme(cbq_scheme s) {
  switch (s) {
    case CBQ_SCHEME_LINEAR: return cbq::Scheme::Linear;
    case CBQ_SCHEME_KMEANS: return cbq::Scheme::KMeans;
  }
  throw cbq::Error(cbq::ErrorCode::BadConfig, "unknown scheme id " + std::to_string(s));
}

cbq::QuantConfig to_config(const cbq_config* cfg) {
  require(cfg, "config");
  cbq::QuantConfig out;
  out.scheme = to_scheme(cfg->scheme);
  out.bits = cfg->bits;
  out.max_iterations = cfg->max_iterations;
  out.seed = cfg->seed;
  out.convergence_epsilon = cfg->convergence_epsilon;
  out.group_count = cfg->group_count;
  out.validate();
  return out;
}

cbq::train::TrainConfig to_train_config(const cbq_train_config* cfg) {
  require(cfg, "train config");
  cbq::train::TrainConfig out;
  out.base_learning_rate = cfg->base_learning_rate;
  out.quantized_lr_multiplier = cfg->quantized_lr_multiplier;
  out.epochs = cfg->epochs;
  out.pretrain_epochs = cfg->pretrain_epochs;
  out.batch_size = cfg->batch_size;
  out.data_seed = cfg->data_seed;
  out.samples = cfg->samples;
  out.input_dim = cfg->input_dim;
  out.hidden_dim = cfg->hidden_dim;
  out.output_dim = cfg->output_dim;
  out.noise = cfg->noise;
  out.quantize_output_layer = cfg->quantize_output_layer != 0;
  out.validate();
  return out;
}

const cbq::QuantizedVector& group_at(cbq_tensor_t t, uint32_t group) {
  require(t, "tensor");
  if (group >= t->value.groups.size()) {
    throw InvalidArgument("group index " + std::to_string(group) + " out of range");
  }
  return t->value.groups[group];
}

const cbq::TensorEntry& entry_at(cbq_bundle_t b, size_t index) {
  require(b, "bundle");
  if (index >= b->value.tensors.size()) {
    throw InvalidArgument("tensor index " + std::to_string(index) + " out of range");
  }
  return b->value.tensors[index];
}

}  // namespace

extern "C" {

const char* cbq_version(void) { return "1.0.0"; }

const char* cbq_status_name(cbq_status status) {
  switch (status) {
    case CBQ_OK: return "OK";
    case CBQ_ERR_EMPTY_INPUT: return "EmptyInput";
    case CBQ_ERR_NON_FINITE_INPUT: return "NonFiniteInput";
    case CBQ_ERR_BAD_CONFIG: return "BadConfig";
    case CBQ_ERR_CORRUPT_INDEX: return "CorruptIndex";
    case CBQ_ERR_LENGTH_MISMATCH: return "LengthMismatch";
    case CBQ_ERR_TOO_MANY_GROUPS: return "TooManyGroups";
    case CBQ_ERR_BAD_K: return "BadK";
    case CBQ_ERR_LABEL_OVERFLOW: return "LabelOverflow";
    case CBQ_ERR_NONZERO_PADDING: return "NonzeroPadding";
    case CBQ_ERR_BAD_MAGIC: return "BadMagic";
    case CBQ_ERR_UNSUPPORTED_VERSION: return "UnsupportedVersion";
    case CBQ_ERR_MANIFEST_MISMATCH: return "ManifestMismatch";
    case CBQ_ERR_IO_FAILURE: return "IOFailure";
    case CBQ_ERR_SHAPE_MISMATCH: return "ShapeMismatch";
    case CBQ_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case CBQ_ERR_INTERNAL: return "Internal";
  }
  return "Unknown";
}

const char* cbq_last_error(void) { return last_error.c_str(); }

void cbq_config_init(cbq_config* cfg) {
  if (cfg == nullptr) return;
  const cbq::QuantConfig d;
  cfg->scheme = CBQ_SCHEME_KMEANS;
  cfg->bits = d.bits;
  cfg->max_iterations = d.max_iterations;
  cfg->seed = d.seed;
  cfg->convergence_epsilon = d.convergence_epsilon;
  cfg->group_count = d.group_count;
  cfg->threads = 1;
}

cbq_status cbq_config_validate(const cbq_config* cfg) {
  return guarded([&] { to_config(cfg); });
}

const char* cbq_scheme_name(cbq_scheme scheme) {
  switch (scheme) {
    case CBQ_SCHEME_LINEAR: return "linear";
    case CBQ_SCHEME_KMEANS: return "kmeans";
  }
  return "unknown";
}

cbq_status cbq_scheme_parse(const char* text, cbq_scheme* out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    const std::string s(text);
    if (s == "linear") {
      *out = CBQ_SCHEME_LINEAR;
    } else if (s == "kmeans") {
      *out = CBQ_SCHEME_KMEANS;
    } else {
      throw cbq::Error(cbq::ErrorCode::BadConfig, "unknown scheme '" + s + "'");
    }
  });
}

cbq_status cbq_serialized_size(uint64_t n, const cbq_config* cfg, uint64_t* out_bytes) {
  return guarded([&] {
    require(out_bytes, "out_bytes");
    const auto c = to_config(cfg);
    const uint64_t shape[] = {n};
    *out_bytes = cbq::cbq_serialized_size(shape, c.bits, c.group_count);
  });
}

cbq_status cbq_compression_ratio(uint64_t n, const cbq_config* cfg, double* out_ratio) {
  return guarded([&] {
    require(out_ratio, "out_ratio");
    *out_ratio = cbq::compression_ratio(n, to_config(cfg));
  });
}

cbq_status cbq_quantize(const float* data, uint64_t n, const uint64_t* shape, size_t rank,
                        const char* name, const cbq_config* cfg, cbq_tensor_t* out) {
  return guarded([&] {
    require(out, "out");
    if (n > 0) require(data, "data");
    if (rank > 0) require(shape, "shape");
    const auto c = to_config(cfg);
    auto t = std::make_unique<cbq_tensor>();
    t->value = cbq::quantize_grouped(std::span(data, n), std::span(shape, rank), c,
                                     name != nullptr ? name : "", cfg->threads);
    *out = t.release();
  });
}

void cbq_tensor_free(cbq_tensor_t tensor) { delete tensor; }

uint64_t cbq_tensor_element_count(cbq_tensor_t tensor) {
  return tensor != nullptr ? cbq::element_count(tensor->value.shape) : 0;
}

size_t cbq_tensor_rank(cbq_tensor_t tensor) {
  return tensor != nullptr ? tensor->value.shape.size() : 0;
}

cbq_status cbq_tensor_shape(cbq_tensor_t tensor, uint64_t* dims, size_t capacity) {
  return guarded([&] {
    require(tensor, "tensor");
    const auto& shape = tensor->value.shape;
    if (capacity < shape.size()) throw InvalidArgument("shape buffer too small");
    if (!shape.empty()) require(dims, "dims");
    std::copy(shape.begin(), shape.end(), dims);
  });
}

cbq_status cbq_tensor_config(cbq_tensor_t tensor, cbq_config* out) {
  return guarded([&] {
    require(tensor, "tensor");
    require(out, "out");
    const auto& c = tensor->value.config;
    out->scheme = c.scheme == cbq::Scheme::Linear ? CBQ_SCHEME_LINEAR : CBQ_SCHEME_KMEANS;
    out->bits = c.bits;
    out->max_iterations = c.max_iterations;
    out->seed = c.seed;
    out->convergence_epsilon = c.convergence_epsilon;
    out->group_count = c.group_count;
    out->threads = 0;
  });
}

uint32_t cbq_tensor_group_count(cbq_tensor_t tensor) {
  return tensor != nullptr ? static_cast<uint32_t>(tensor->value.groups.size()) : 0;
}

cbq_status cbq_tensor_group(cbq_tensor_t tensor, uint32_t group, uint64_t* offset,
                            uint64_t* length) {
  return guarded([&] {
    group_at(tensor, group);
    const auto& s = tensor->value.spans[group];
    if (offset != nullptr) *offset = s.offset;
    if (length != nullptr) *length = s.length;
  });
}

cbq_status cbq_tensor_group_codebook(cbq_tensor_t tensor, uint32_t group, float* centroids,
                                     uint32_t* occupancy, size_t capacity) {
  return guarded([&] {
    const auto& q = group_at(tensor, group);
    if (capacity < q.codebook.size()) throw InvalidArgument("codebook buffer too small");
    if (centroids != nullptr) {
      std::copy(q.codebook.centroids.begin(), q.codebook.centroids.end(), centroids);
    }
    if (occupancy != nullptr) {
      std::copy(q.codebook.occupancy.begin(), q.codebook.occupancy.end(), occupancy);
    }
  });
}

cbq_status cbq_tensor_group_labels(cbq_tensor_t tensor, uint32_t group, uint8_t* labels,
                                   uint64_t capacity) {
  return guarded([&] {
    const auto& q = group_at(tensor, group);
    if (capacity < q.indices.size()) throw InvalidArgument("label buffer too small");
    require(labels, "labels");
    std::copy(q.indices.begin(), q.indices.end(), labels);
  });
}

cbq_status cbq_tensor_reconstruct(cbq_tensor_t tensor, float* out, uint64_t n, double* seconds) {
  return guarded([&] {
    require(tensor, "tensor");
    require(out, "out");
    const double t = cbq::reconstruct_grouped_into(tensor->value, std::span(out, n));
    if (seconds != nullptr) *seconds = t;
  });
}

cbq_status cbq_tensor_error_stats(cbq_tensor_t tensor, const float* reference, uint64_t n,
                                  cbq_error_stats* out) {
  return guarded([&] {
    require(tensor, "tensor");
    require(out, "out");
    if (n > 0) require(reference, "reference");
    const auto r = cbq::reconstruct_grouped(tensor->value);
    const auto s = cbq::error_stats(std::span(reference, n), r.values);
    *out = {s.sse, s.mse, s.max_abs_error, s.n};
  });
}

cbq_status cbq_compare(const float* reference, const float* candidate, uint64_t n,
                       cbq_error_stats* out) {
  return guarded([&] {
    require(out, "out");
    if (n > 0) {
      require(reference, "reference");
      require(candidate, "candidate");
    }
    const auto s = cbq::error_stats(std::span(reference, n), std::span(candidate, n));
    *out = {s.sse, s.mse, s.max_abs_error, s.n};
  });
}

cbq_status cbq_tensor_encoded_size(cbq_tensor_t tensor, uint64_t* out_bytes) {
  return guarded([&] {
    require(tensor, "tensor");
    require(out_bytes, "out_bytes");
    const auto& t = tensor->value;
    *out_bytes = cbq::cbq_serialized_size(t.shape, t.config.bits, t.config.group_count);
  });
}

cbq_status cbq_tensor_encode(cbq_tensor_t tensor, uint8_t* buffer, uint64_t capacity,
                             uint64_t* written) {
  return guarded([&] {
    require(tensor, "tensor");
    const auto bytes = cbq::encode_cbq(tensor->value);
    if (capacity < bytes.size()) throw InvalidArgument("encode buffer too small");
    if (!bytes.empty()) require(buffer, "buffer");
    std::memcpy(buffer, bytes.data(), bytes.size());
    if (written != nullptr) *written = bytes.size();
  });
}

cbq_status cbq_tensor_decode(const uint8_t* bytes, uint64_t size, cbq_tensor_t* out) {
  return guarded([&] {
    require(out, "out");
    if (size > 0) require(bytes, "bytes");
    auto t = std::make_unique<cbq_tensor>();
    t->value = cbq::decode_cbq(std::span(bytes, size));
    *out = t.release();
  });
}

cbq_status cbq_tensor_save(cbq_tensor_t tensor, const char* path) {
  return guarded([&] {
    require(tensor, "tensor");
    require(path, "path");
    cbq::write_cbq(path, tensor->value);
  });
}

cbq_status cbq_tensor_load(const char* path, cbq_tensor_t* out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto t = std::make_unique<cbq_tensor>();
    t->value = cbq::read_cbq(path);
    *out = t.release();
  });
}

uint64_t cbq_packed_size(uint64_t n, uint32_t bits) { return cbq::packed_size(n, bits); }

cbq_status cbq_pack_indices(const uint8_t* labels, uint64_t n, uint32_t bits, uint8_t* out,
                            uint64_t capacity) {
  return guarded([&] {
    if (n > 0) require(labels, "labels");
    const auto bytes = cbq::pack_indices(std::span(labels, n), bits);
    if (capacity < bytes.size()) throw InvalidArgument("pack buffer too small");
    if (!bytes.empty()) require(out, "out");
    std::memcpy(out, bytes.data(), bytes.size());
  });
}

cbq_status cbq_unpack_indices(const uint8_t* bytes, uint64_t size, uint64_t n, uint32_t bits,
                              uint8_t* labels) {
  return guarded([&] {
    if (size > 0) require(bytes, "bytes");
    const auto out = cbq::unpack_indices(std::span(bytes, size), n, bits);
    if (!out.empty()) require(labels, "labels");
    std::copy(out.begin(), out.end(), labels);
  });
}

cbq_status cbq_bundle_create(cbq_bundle_t* out) {
  return guarded([&] {
    require(out, "out");
    *out = new cbq_bundle();
  });
}

cbq_status cbq_bundle_load(const char* manifest_path, cbq_bundle_t* out) {
  return guarded([&] {
    require(manifest_path, "manifest_path");
    require(out, "out");
    auto b = std::make_unique<cbq_bundle>();
    b->value = cbq::read_bundle(manifest_path);
    *out = b.release();
  });
}

cbq_status cbq_bundle_save(cbq_bundle_t bundle, const char* manifest_path) {
  return guarded([&] {
    require(bundle, "bundle");
    require(manifest_path, "manifest_path");
    cbq::write_bundle(manifest_path, bundle->value);
  });
}

void cbq_bundle_free(cbq_bundle_t bundle) { delete bundle; }

size_t cbq_bundle_count(cbq_bundle_t bundle) {
  return bundle != nullptr ? bundle->value.tensors.size() : 0;
}

const char* cbq_bundle_name(cbq_bundle_t bundle, size_t index) {
  if (bundle == nullptr || index >= bundle->value.tensors.size()) return nullptr;
  return bundle->value.tensors[index].name.c_str();
}

cbq_status cbq_bundle_find(cbq_bundle_t bundle, const char* name, size_t* index) {
  return guarded([&] {
    require(bundle, "bundle");
    require(name, "name");
    require(index, "index");
    const auto& ts = bundle->value.tensors;
    for (size_t i = 0; i < ts.size(); ++i) {
      if (ts[i].name == name) {
        *index = i;
        return;
      }
    }
    throw cbq::Error(cbq::ErrorCode::ManifestMismatch, std::string("no tensor named '") + name + "'");
  });
}

cbq_status cbq_bundle_tensor(cbq_bundle_t bundle, size_t index, const float** data, uint64_t* n) {
  return guarded([&] {
    const auto& e = entry_at(bundle, index);
    require(data, "data");
    require(n, "n");
    *data = e.values.data();
    *n = e.values.size();
  });
}

cbq_status cbq_bundle_shape(cbq_bundle_t bundle, size_t index, uint64_t* dims, size_t capacity,
                            size_t* rank) {
  return guarded([&] {
    const auto& e = entry_at(bundle, index);
    if (rank != nullptr) *rank = e.shape.size();
    if (dims == nullptr) return;
    if (capacity < e.shape.size()) throw InvalidArgument("shape buffer too small");
    std::copy(e.shape.begin(), e.shape.end(), dims);
  });
}

cbq_status cbq_bundle_add(cbq_bundle_t bundle, const char* name, const float* data, uint64_t n,
                          const uint64_t* shape, size_t rank) {
  return guarded([&] {
    require(bundle, "bundle");
    require(name, "name");
    if (n > 0) require(data, "data");
    if (rank > 0) require(shape, "shape");
    cbq::TensorEntry e;
    e.name = name;
    e.shape.assign(shape, shape + rank);
    e.values.assign(data, data + n);
    bundle->value.add(std::move(e));
  });
}

cbq_status cbq_bundle_add_gaussian(cbq_bundle_t bundle, const char* name, const uint64_t* shape,
                                   size_t rank, uint64_t seed) {
  return guarded([&] {
    require(bundle, "bundle");
    require(name, "name");
    if (rank > 0) require(shape, "shape");
    cbq::TensorEntry e;
    e.name = name;
    e.shape.assign(shape, shape + rank);
    e.values.resize(cbq::element_count(e.shape));
    cbq::Rng rng(cbq::derive_stream_seed(seed, e.name, 0));
    for (auto& v : e.values) v = static_cast<float>(rng.normal());
    bundle->value.add(std::move(e));
  });
}

void cbq_train_config_init(cbq_train_config* cfg) {
  if (cfg == nullptr) return;
  const cbq::train::TrainConfig d;
  cfg->base_learning_rate = d.base_learning_rate;
  cfg->quantized_lr_multiplier = d.quantized_lr_multiplier;
  cfg->epochs = static_cast<uint32_t>(d.epochs);
  cfg->pretrain_epochs = static_cast<uint32_t>(d.pretrain_epochs);
  cfg->batch_size = static_cast<uint32_t>(d.batch_size);
  cfg->data_seed = d.data_seed;
  cfg->samples = static_cast<uint32_t>(d.samples);
  cfg->input_dim = static_cast<uint32_t>(d.input_dim);
  cfg->hidden_dim = static_cast<uint32_t>(d.hidden_dim);
  cfg->output_dim = static_cast<uint32_t>(d.output_dim);
  cfg->noise = d.noise;
  cfg->quantize_output_layer = d.quantize_output_layer ? 1 : 0;
}

cbq_status cbq_experiment_run(const cbq_train_config* train, const cbq_config* quant,
                              uint64_t task_seed, cbq_experiment_t* out) {
  return guarded([&] {
    require(out, "out");
    auto e = std::make_unique<cbq_experiment>();
    e->value = cbq::train::run_experiment(to_train_config(train), to_config(quant), task_seed);
    for (const auto& arm : e->value.arms) {
      e->records.insert(e->records.end(), arm.curve.begin(), arm.curve.end());
    }
    *out = e.release();
  });
}

void cbq_experiment_free(cbq_experiment_t experiment) { delete experiment; }

size_t cbq_experiment_record_count(cbq_experiment_t experiment) {
  return experiment != nullptr ? experiment->records.size() : 0;
}

cbq_status cbq_experiment_record(cbq_experiment_t experiment, size_t index,
                                 cbq_curve_record* out) {
  return guarded([&] {
    require(experiment, "experiment");
    require(out, "out");
    if (index >= experiment->records.size()) throw InvalidArgument("record index out of range");
    const auto& r = experiment->records[index];
    out->epoch = r.epoch;
    out->scheme = r.scheme == cbq::Scheme::Linear ? CBQ_SCHEME_LINEAR : CBQ_SCHEME_KMEANS;
    out->bits = r.bits;
    out->seed = r.seed;
    out->loss = r.loss;
  });
}

cbq_status cbq_experiment_format_record(cbq_experiment_t experiment, size_t index, char* buffer,
                                        size_t capacity) {
  return guarded([&] {
    require(experiment, "experiment");
    require(buffer, "buffer");
    if (index >= experiment->records.size()) throw InvalidArgument("record index out of range");
    const std::string line = cbq::train::format_record(experiment->records[index]);
    if (capacity < line.size() + 1) throw InvalidArgument("format buffer too small");
    std::memcpy(buffer, line.c_str(), line.size() + 1);
  });
}

cbq_status cbq_experiment_summary(cbq_experiment_t experiment, cbq_scheme scheme,
                                  cbq_arm_summary* out) {
  return guarded([&] {
    require(experiment, "experiment");
    require(out, "out");
    const auto wanted = to_scheme(scheme);
    for (const auto& arm : experiment->value.arms) {
      if (arm.scheme == wanted) {
        out->full_precision_loss = experiment->value.full_precision_loss;
        out->quantized_loss = arm.quantized_loss;
        out->final_loss = arm.final_loss;
        return;
      }
    }
    throw InvalidArgument("experiment has no arm for that scheme");
  });
}

}  // extern "C"

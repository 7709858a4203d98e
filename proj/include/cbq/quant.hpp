#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "cbq/rng.hpp"

namespace cbq {

enum class Scheme : std::uint8_t { Linear = 0, KMeans = 1 };

std::string_view scheme_name(Scheme scheme) noexcept;

inline constexpr unsigned kMaxBits = 8;

struct QuantConfig {
  Scheme scheme = Scheme::KMeans;
  unsigned bits = 8;
  unsigned max_iterations = 3;
  std::uint64_t seed = 0;
  // Lloyd also stops once (sse_prev - sse) / sse_prev < epsilon.
  double convergence_epsilon = 0.0;
  unsigned group_count = 1;

  // Throws Error{BadConfig}.
  void validate() const;
  std::size_t cluster_count() const { return std::size_t{1} << bits; }
};

// Labels never exceed 2^8 - 1, so one byte per parameter in memory.
using Label = std::uint8_t;
using IndexVector = std::vector<Label>;

struct Codebook {
  std::vector<float> centroids;
  std::vector<std::uint32_t> occupancy;

  std::size_t size() const { return centroids.size(); }
};

// One quantized span: the cluster index vector plus its centroid table.
struct QuantizedVector {
  unsigned bits = 0;
  Codebook codebook;
  IndexVector indices;
  float source_min = 0.0f;
  float source_max = 0.0f;

  std::size_t size() const { return indices.size(); }
};

struct ErrorStats {
  double sse = 0.0;
  double mse = 0.0;
  double max_abs_error = 0.0;
  std::size_t n = 0;
};

// Identifies the RNG stream of one quantization job. The default key is the
// stream used by per-tensor quantization of an unnamed tensor.
struct StreamKey {
  std::string_view tensor_name;
  std::uint64_t group_index = 0;
};

// Equal-width binning over [min, max] with bin means as centroids.
QuantizedVector linear_quantize(std::span<const float> v, const QuantConfig& cfg);

// k-means++ seeding with D(x)^2 weights. Returns exactly n_clusters values;
// when v has no more than n_clusters distinct values they are returned in
// ascending order, padded with copies of the last one.
std::vector<double> kmeanspp_init(std::span<const float> v, std::size_t n_clusters, Rng& rng);

struct LloydState {
  std::vector<double> centroids;
  IndexVector labels;  // empty until the first step assigns
  double sse = 0.0;
};

// One assignment + update pass. Ties go to the lowest centroid index and
// centroids without members keep their value. Returns true iff any label
// changed (always true on the first step).
bool lloyd_step(std::span<const float> v, LloydState& state);

QuantizedVector kmeans_quantize(std::span<const float> v, const QuantConfig& cfg,
                                StreamKey key = {});

// Dispatches on cfg.scheme.
QuantizedVector quantize(std::span<const float> v, const QuantConfig& cfg, StreamKey key = {});

std::vector<float> reconstruct(const QuantizedVector& q);
void reconstruct_into(const QuantizedVector& q, std::span<float> out);

ErrorStats error_stats(std::span<const float> v, const QuantizedVector& q);
ErrorStats error_stats(std::span<const float> v, std::span<const float> reconstruction);

// 32 * n over the exact CBQ file size (in bits) of a flat tensor of n elements.
double compression_ratio(std::uint64_t n, const QuantConfig& cfg);

// Checks the structural invariants of q (label range, occupancy, finiteness).
// Throws Error{CorruptIndex}.
void validate(const QuantizedVector& q);

}  // namespace cbq

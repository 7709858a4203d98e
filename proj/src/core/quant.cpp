#include "cbq/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cbq/error.hpp"
#include "cbq/tensor_io.hpp"

namespace cbq {

std::string_view scheme_name(Scheme scheme) noexcept {
  switch (scheme) {
    case Scheme::Linear:
      return "linear";
    case Scheme::KMeans:
      return "kmeans";
  }
  return "unknown";
}

void QuantConfig::validate() const {
  if (bits < 1 || bits > kMaxBits) {
    throw Error(ErrorCode::BadConfig, "bits must be in [1, 8], got " + std::to_string(bits));
  }
  if (group_count < 1) {
    throw Error(ErrorCode::BadConfig, "group_count must be >= 1");
  }
  if (!(convergence_epsilon >= 0.0) || !std::isfinite(convergence_epsilon)) {
    throw Error(ErrorCode::BadConfig, "convergence_epsilon must be finite and >= 0");
  }
  if (scheme != Scheme::Linear && scheme != Scheme::KMeans) {
    throw Error(ErrorCode::BadConfig, "unknown scheme");
  }
}

namespace {

void check_input(std::span<const float> v) {
  if (v.empty()) {
    throw Error(ErrorCode::EmptyInput, "cannot quantize an empty vector");
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw Error(ErrorCode::NonFiniteInput, "element " + std::to_string(i) + " is not finite");
    }
  }
}

std::vector<std::uint32_t> count_labels(const IndexVector& labels, std::size_t clusters) {
  std::vector<std::uint32_t> counts(clusters, 0);
  for (Label l : labels) ++counts[l];
  return counts;
}

Label nearest_centroid(double x, const std::vector<double>& centroids) {
  std::size_t best = 0;
  double best_d = std::abs(x - centroids[0]);
  for (std::size_t j = 1; j < centroids.size(); ++j) {
    const double d = std::abs(x - centroids[j]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return static_cast<Label>(best);
}

double labelled_sse(std::span<const float> v, const IndexVector& labels,
                    const std::vector<double>& centroids) {
  double sse = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double e = static_cast<double>(v[i]) - centroids[labels[i]];
    sse += e * e;
  }
  return sse;
}

}  // namespace

QuantizedVector linear_quantize(std::span<const float> v, const QuantConfig& cfg) {
  cfg.validate();
  if (cfg.scheme != Scheme::Linear) {
    throw Error(ErrorCode::BadConfig, "linear_quantize requires the linear scheme");
  }
  check_input(v);

  const std::size_t clusters = cfg.cluster_count();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double v_min = *lo;
  const double v_max = *hi;
  const double width = (v_max - v_min) / static_cast<double>(clusters);

  QuantizedVector q;
  q.bits = cfg.bits;
  q.source_min = *lo;
  q.source_max = *hi;
  q.indices.resize(v.size(), 0);

  if (width > 0.0) {
    const auto top = static_cast<double>(clusters - 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double bin = std::floor((static_cast<double>(v[i]) - v_min) / width);
      q.indices[i] = static_cast<Label>(std::clamp(bin, 0.0, top));
    }
  }

  std::vector<double> sums(clusters, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) sums[q.indices[i]] += v[i];
  q.codebook.occupancy = count_labels(q.indices, clusters);
  q.codebook.centroids.resize(clusters);
  for (std::size_t j = 0; j < clusters; ++j) {
    const auto count = q.codebook.occupancy[j];
    const double value = count > 0 ? sums[j] / count
                                   : v_min + (static_cast<double>(j) + 0.5) * width;
    q.codebook.centroids[j] = static_cast<float>(value);
  }
  return q;
}

std::vector<double> kmeanspp_init(std::span<const float> v, std::size_t n_clusters, Rng& rng) {
  if (v.empty()) {
    throw Error(ErrorCode::EmptyInput, "cannot seed centroids from an empty vector");
  }
  if (n_clusters < 1 || n_clusters > (std::size_t{1} << kMaxBits)) {
    throw Error(ErrorCode::BadConfig, "n_clusters must be in [1, 256]");
  }

  std::vector<float> distinct(v.begin(), v.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() <= n_clusters) {
    std::vector<double> centroids(distinct.begin(), distinct.end());
    centroids.resize(n_clusters, centroids.back());
    return centroids;
  }

  std::vector<double> centroids;
  centroids.reserve(n_clusters);
  centroids.push_back(v[rng.index(v.size())]);

  std::vector<double> d2(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double e = v[i] - centroids[0];
    d2[i] = e * e;
  }

  while (centroids.size() < n_clusters) {
    double total = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < d2.size(); ++i) {
      total += d2[i];
      if (d2[i] > 0.0) last_positive = i;
    }
    const double target = rng.uniform() * total;
    std::size_t pick = last_positive;
    double cumulative = 0.0;
    for (std::size_t i = 0; i < d2.size(); ++i) {
      cumulative += d2[i];
      if (d2[i] > 0.0 && cumulative > target) {
        pick = i;
        break;
      }
    }
    const double c = v[pick];
    centroids.push_back(c);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double e = v[i] - c;
      d2[i] = std::min(d2[i], e * e);
    }
  }
  return centroids;
}

bool lloyd_step(std::span<const float> v, LloydState& state) {
  if (state.centroids.empty()) {
    throw Error(ErrorCode::BadConfig, "lloyd_step needs at least one centroid");
  }
  if (!state.labels.empty() && state.labels.size() != v.size()) {
    throw Error(ErrorCode::LengthMismatch, "label vector does not match input length");
  }
  const std::size_t clusters = state.centroids.size();
  bool changed = state.labels.empty();
  if (changed) state.labels.assign(v.size(), 0);

  std::vector<double> sums(clusters, 0.0);
  std::vector<std::size_t> counts(clusters, 0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Label l = nearest_centroid(v[i], state.centroids);
    if (l != state.labels[i]) {
      changed = true;
      state.labels[i] = l;
    }
    sums[l] += v[i];
    ++counts[l];
  }
  for (std::size_t j = 0; j < clusters; ++j) {
    if (counts[j] > 0) state.centroids[j] = sums[j] / static_cast<double>(counts[j]);
  }
  state.sse = labelled_sse(v, state.labels, state.centroids);
  return changed;
}

QuantizedVector kmeans_quantize(std::span<const float> v, const QuantConfig& cfg, StreamKey key) {
  cfg.validate();
  if (cfg.scheme != Scheme::KMeans) {
    throw Error(ErrorCode::BadConfig, "kmeans_quantize requires the kmeans scheme");
  }
  check_input(v);

  Rng rng(derive_stream_seed(cfg.seed, key.tensor_name, key.group_index));
  LloydState state;
  state.centroids = kmeanspp_init(v, cfg.cluster_count(), rng);

  if (cfg.max_iterations == 0) {
    state.labels.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      state.labels[i] = nearest_centroid(v[i], state.centroids);
    }
  }
  double previous = std::numeric_limits<double>::infinity();
  for (unsigned it = 0; it < cfg.max_iterations; ++it) {
    const bool changed = lloyd_step(v, state);
    if (!changed) break;
    if (std::isfinite(previous)) {
      if (previous <= 0.0) break;
      if ((previous - state.sse) / previous < cfg.convergence_epsilon) break;
    }
    previous = state.sse;
  }

  QuantizedVector q;
  q.bits = cfg.bits;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  q.source_min = *lo;
  q.source_max = *hi;
  q.codebook.centroids.assign(state.centroids.begin(), state.centroids.end());
  q.codebook.occupancy = count_labels(state.labels, cfg.cluster_count());
  q.indices = std::move(state.labels);
  return q;
}

QuantizedVector quantize(std::span<const float> v, const QuantConfig& cfg, StreamKey key) {
  switch (cfg.scheme) {
    case Scheme::Linear:
      return linear_quantize(v, cfg);
    case Scheme::KMeans:
      return kmeans_quantize(v, cfg, key);
  }
  throw Error(ErrorCode::BadConfig, "unknown scheme");
}

void validate(const QuantizedVector& q) {
  if (q.bits < 1 || q.bits > kMaxBits) {
    throw Error(ErrorCode::CorruptIndex, "bit width out of range");
  }
  const std::size_t clusters = std::size_t{1} << q.bits;
  if (q.codebook.centroids.size() != clusters || q.codebook.occupancy.size() != clusters) {
    throw Error(ErrorCode::CorruptIndex, "codebook size does not match bit width");
  }
  for (float c : q.codebook.centroids) {
    if (!std::isfinite(c)) throw Error(ErrorCode::CorruptIndex, "non-finite centroid");
  }
  std::vector<std::uint32_t> counts(clusters, 0);
  for (Label l : q.indices) {
    if (l >= clusters) throw Error(ErrorCode::CorruptIndex, "label exceeds codebook size");
    ++counts[l];
  }
  if (counts != q.codebook.occupancy) {
    throw Error(ErrorCode::CorruptIndex, "occupancy does not match label counts");
  }
}

void reconstruct_into(const QuantizedVector& q, std::span<float> out) {
  if (out.size() != q.indices.size()) {
    throw Error(ErrorCode::LengthMismatch, "output span does not match quantized length");
  }
  const std::size_t clusters = q.codebook.centroids.size();
  const float* table = q.codebook.centroids.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Label l = q.indices[i];
    if (l >= clusters) {
      throw Error(ErrorCode::CorruptIndex, "label " + std::to_string(l) + " at position " +
                                               std::to_string(i) + " exceeds codebook");
    }
    out[i] = table[l];
  }
}

std::vector<float> reconstruct(const QuantizedVector& q) {
  std::vector<float> out(q.indices.size());
  reconstruct_into(q, out);
  return out;
}

ErrorStats error_stats(std::span<const float> v, std::span<const float> reconstruction) {
  if (v.size() != reconstruction.size()) {
    throw Error(ErrorCode::LengthMismatch, "reference has " + std::to_string(v.size()) +
                                               " elements, reconstruction has " +
                                               std::to_string(reconstruction.size()));
  }
  ErrorStats stats;
  stats.n = v.size();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double e = static_cast<double>(v[i]) - static_cast<double>(reconstruction[i]);
    stats.sse += e * e;
    stats.max_abs_error = std::max(stats.max_abs_error, std::abs(e));
  }
  stats.mse = stats.n > 0 ? stats.sse / static_cast<double>(stats.n) : 0.0;
  return stats;
}

ErrorStats error_stats(std::span<const float> v, const QuantizedVector& q) {
  if (v.size() != q.size()) {
    throw Error(ErrorCode::LengthMismatch, "reference has " + std::to_string(v.size()) +
                                               " elements, quantized vector has " +
                                               std::to_string(q.size()));
  }
  return error_stats(v, reconstruct(q));
}

double compression_ratio(std::uint64_t n, const QuantConfig& cfg) {
  cfg.validate();
  if (n < 1) throw Error(ErrorCode::BadConfig, "element count must be >= 1");
  const std::uint64_t shape[] = {n};
  const std::uint64_t bytes = cbq_serialized_size(shape, cfg.bits, cfg.group_count);
  return (32.0 * static_cast<double>(n)) / (8.0 * static_cast<double>(bytes));
}

}  // namespace cbq

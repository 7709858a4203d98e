#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cbq/quant.hpp"

namespace cbq {

// Globally SSE-optimal partition of the sorted input into at most K
// contiguous clusters.
struct OptimalClustering {
  std::vector<double> sorted;          // input in ascending order
  std::vector<std::size_t> boundaries; // split points into `sorted`, one fewer than clusters
  std::vector<double> centroids;       // mean of each cluster
  double sse = 0.0;
};

// O(K n^2) dynamic program. Segment cost comes from prefix sums of v and v^2
// over the sorted input; the same cost function backs partition_sse, so
// sse <= partition_sse(v, labels) holds exactly for every labelling whose
// clusters are contiguous in sorted order and number at most K.
OptimalClustering dp_optimal_quantize(std::span<const float> v, std::size_t k);

// SSE of a labelling under the oracle's segment-cost arithmetic. Each cluster
// must be a contiguous run of the sorted values (true for both quantization
// schemes); throws Error{BadK} otherwise.
double partition_sse(std::span<const float> v, std::span<const Label> labels);

}  // namespace cbq

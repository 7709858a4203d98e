#include "cbq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cbq/error.hpp"

namespace cbq {

namespace {

class SegmentCost {
 public:
  explicit SegmentCost(const std::vector<double>& sorted)
      : sum_(sorted.size() + 1, 0.0), sum_sq_(sorted.size() + 1, 0.0) {
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      sum_[i + 1] = sum_[i] + sorted[i];
      sum_sq_[i + 1] = sum_sq_[i] + sorted[i] * sorted[i];
    }
  }

  // Cost of sorted[begin, end).
  double operator()(std::size_t begin, std::size_t end) const {
    const double s = sum_[end] - sum_[begin];
    const double s2 = sum_sq_[end] - sum_sq_[begin];
    return std::max(0.0, s2 - s * s / static_cast<double>(end - begin));
  }

  double mean(std::size_t begin, std::size_t end) const {
    return (sum_[end] - sum_[begin]) / static_cast<double>(end - begin);
  }

 private:
  std::vector<double> sum_;
  std::vector<double> sum_sq_;
};

std::vector<double> sorted_copy(std::span<const float> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

OptimalClustering dp_optimal_quantize(std::span<const float> v, std::size_t k) {
  if (v.empty()) throw Error(ErrorCode::EmptyInput, "oracle needs a non-empty vector");
  if (k < 1 || k > 256) throw Error(ErrorCode::BadK, "K must be in [1, 256]");
  for (float x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteInput, "oracle input not finite");
  }

  OptimalClustering result;
  result.sorted = sorted_copy(v);
  const std::size_t n = result.sorted.size();
  const SegmentCost cost(result.sorted);

  constexpr std::size_t kInherit = std::numeric_limits<std::size_t>::max();
  // best[m][j]: minimal cost of sorted[0, j) with at most m+1 clusters.
  std::vector<std::vector<double>> best(k, std::vector<double>(n + 1, 0.0));
  std::vector<std::vector<std::size_t>> split(k, std::vector<std::size_t>(n + 1, 0));
  for (std::size_t j = 1; j <= n; ++j) best[0][j] = cost(0, j);

  for (std::size_t m = 1; m < k; ++m) {
    for (std::size_t j = 1; j <= n; ++j) {
      double value = best[m - 1][j];
      std::size_t arg = kInherit;
      for (std::size_t i = 1; i < j; ++i) {
        const double candidate = best[m - 1][i] + cost(i, j);
        if (candidate < value) {
          value = candidate;
          arg = i;
        }
      }
      best[m][j] = value;
      split[m][j] = arg;
    }
  }
  result.sse = best[k - 1][n];

  std::size_t end = n;
  for (std::size_t m = k - 1; m > 0; --m) {
    const std::size_t s = split[m][end];
    if (s == kInherit) continue;
    result.boundaries.push_back(s);
    end = s;
  }
  std::reverse(result.boundaries.begin(), result.boundaries.end());

  std::size_t begin = 0;
  for (std::size_t b : result.boundaries) {
    result.centroids.push_back(cost.mean(begin, b));
    begin = b;
  }
  result.centroids.push_back(cost.mean(begin, n));
  return result;
}

double partition_sse(std::span<const float> v, std::span<const Label> labels) {
  if (v.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "labels do not match input length");
  }
  if (v.empty()) return 0.0;

  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return v[a] != v[b] ? v[a] < v[b] : labels[a] < labels[b];
  });
  std::vector<double> sorted(v.size());
  for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = v[order[i]];
  const SegmentCost cost(sorted);

  std::vector<bool> seen(256, false);
  double total = 0.0;
  bool first = true;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= order.size(); ++i) {
    if (i < order.size() && labels[order[i]] == labels[order[begin]]) continue;
    const Label l = labels[order[begin]];
    if (seen[l]) {
      throw Error(ErrorCode::BadK, "cluster " + std::to_string(l) + " is not contiguous");
    }
    seen[l] = true;
    total = first ? cost(begin, i) : total + cost(begin, i);
    first = false;
    begin = i;
  }
  return total;
}

}  // namespace cbq

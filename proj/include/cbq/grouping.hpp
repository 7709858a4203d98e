#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "cbq/quant.hpp"

namespace cbq {

struct Span {
  std::size_t offset = 0;
  std::size_t length = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

// Balanced contiguous split: the first n % G spans get one extra element.
// Throws Error{TooManyGroups} when G > n.
std::vector<Span> split_groups(std::size_t n, std::size_t group_count);

std::uint64_t element_count(std::span<const std::uint64_t> shape);

struct GroupedQuantizedTensor {
  std::vector<std::uint64_t> shape;
  QuantConfig config;
  std::vector<Span> spans;
  std::vector<QuantizedVector> groups;

  std::size_t size() const;
};

// Quantizes each span of the flattened tensor independently. Group g draws
// from the stream derived from (cfg.seed, name, g), so the result does not
// depend on `threads` (0 = hardware concurrency).
GroupedQuantizedTensor quantize_grouped(std::span<const float> values,
                                        std::span<const std::uint64_t> shape,
                                        const QuantConfig& cfg, std::string_view name = {},
                                        unsigned threads = 1);

struct GroupedReconstruction {
  std::vector<float> values;
  std::vector<std::uint64_t> shape;
  double seconds = 0.0;
};

GroupedReconstruction reconstruct_grouped(const GroupedQuantizedTensor& g);

// Writes into a caller-owned buffer of element_count(shape) floats and
// returns the wall-clock seconds spent in the per-group lookup loop.
double reconstruct_grouped_into(const GroupedQuantizedTensor& g, std::span<float> out);

// Structural checks across groups (span coverage, per-group invariants).
void validate(const GroupedQuantizedTensor& g);

}  // namespace cbq

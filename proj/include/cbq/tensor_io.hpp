#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbq/grouping.hpp"
#include "cbq/quant.hpp"

namespace cbq {

// Fixed-width little-endian bit packing: label i occupies bits
// [i*bits, (i+1)*bits) of the stream, bit 0 being the LSB of byte 0.
std::vector<std::uint8_t> pack_indices(std::span<const Label> labels, unsigned bits);
IndexVector unpack_indices(std::span<const std::uint8_t> bytes, std::size_t n, unsigned bits);

std::size_t packed_size(std::size_t n, unsigned bits);

// CBQ1 container. All integers little-endian.
//
//   offset  size      field
//   0       4         magic "CBQ1"
//   4       2         format version (1)
//   6       1         scheme id (0 linear, 1 kmeans)
//   7       1         bits
//   8       4         group_count
//   12      1         rank
//   13      8*rank    dims
//   ...     8         seed
//   ...     4         max_iterations
//
// followed by, for each group in span order: 2^bits binary32 centroids,
// 2^bits u32 occupancy counts, then the packed labels padded with zero bits
// to a byte boundary.
inline constexpr char kCbqMagic[4] = {'C', 'B', 'Q', '1'};
inline constexpr std::uint16_t kCbqVersion = 1;

std::uint64_t cbq_header_size(std::size_t rank);
std::uint64_t cbq_serialized_size(std::span<const std::uint64_t> shape, unsigned bits,
                                  unsigned group_count);

std::vector<std::uint8_t> encode_cbq(const GroupedQuantizedTensor& g);
// The format does not carry convergence_epsilon or the source range; the
// decoded config has epsilon 0 and each group's source range is the range of
// its reconstruction.
GroupedQuantizedTensor decode_cbq(std::span<const std::uint8_t> bytes);

void write_cbq(const std::filesystem::path& path, const GroupedQuantizedTensor& g);
GroupedQuantizedTensor read_cbq(const std::filesystem::path& path);

// Tensor bundle: a JSON manifest plus one raw little-endian float32 payload.
//
//   {"format": "cbq-bundle", "version": 1, "payload": "<file next to manifest>",
//    "tensors": [{"name", "shape", "dtype": "float32", "offset", "length"}]}
//
// offset/length are in bytes. Unknown fields are ignored on read.
struct TensorEntry {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<float> values;
};

struct TensorBundle {
  std::vector<TensorEntry> tensors;

  const TensorEntry* find(std::string_view name) const;
  // Throws Error{ManifestMismatch} on duplicate names or shape/size disagreement.
  void add(TensorEntry entry);
};

void write_bundle(const std::filesystem::path& manifest_path, const TensorBundle& bundle);
TensorBundle read_bundle(const std::filesystem::path& manifest_path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace cbq

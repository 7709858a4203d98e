#include "cbq/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "cbq/error.hpp"

namespace cbq {

std::size_t packed_size(std::size_t n, unsigned bits) { return (n * bits + 7) / 8; }

std::vector<std::uint8_t> pack_indices(std::span<const Label> labels, unsigned bits) {
  if (bits < 1 || bits > kMaxBits) throw Error(ErrorCode::BadConfig, "bits must be in [1, 8]");
  const unsigned limit = 1u << bits;
  std::vector<std::uint8_t> out(packed_size(labels.size(), bits), 0);
  std::size_t bit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i, bit += bits) {
    const unsigned value = labels[i];
    if (value >= limit) {
      throw Error(ErrorCode::LabelOverflow, "label " + std::to_string(value) + " at position " +
                                                std::to_string(i) + " needs more than " +
                                                std::to_string(bits) + " bits");
    }
    // A label spans at most two bytes since bits <= 8.
    const std::size_t byte = bit / 8;
    const unsigned shift = bit % 8;
    const unsigned shifted = value << shift;
    out[byte] |= static_cast<std::uint8_t>(shifted & 0xFF);
    if (shift + bits > 8) out[byte + 1] |= static_cast<std::uint8_t>(shifted >> 8);
  }
  return out;
}

IndexVector unpack_indices(std::span<const std::uint8_t> bytes, std::size_t n, unsigned bits) {
  if (bits < 1 || bits > kMaxBits) throw Error(ErrorCode::BadConfig, "bits must be in [1, 8]");
  if (bytes.size() != packed_size(n, bits)) {
    throw Error(ErrorCode::LengthMismatch, "expected " + std::to_string(packed_size(n, bits)) +
                                               " packed bytes, got " +
                                               std::to_string(bytes.size()));
  }
  const unsigned mask = (1u << bits) - 1;
  IndexVector labels(n);
  std::size_t bit = 0;
  for (std::size_t i = 0; i < n; ++i, bit += bits) {
    const std::size_t byte = bit / 8;
    const unsigned shift = bit % 8;
    unsigned window = bytes[byte];
    if (shift + bits > 8) window |= static_cast<unsigned>(bytes[byte + 1]) << 8;
    labels[i] = static_cast<Label>((window >> shift) & mask);
  }
  const std::size_t used = n * bits;
  if (used % 8 != 0) {
    const auto pad_mask = static_cast<std::uint8_t>(0xFF << (used % 8));
    if (bytes.back() & pad_mask) {
      throw Error(ErrorCode::NonzeroPadding, "trailing pad bits are not zero");
    }
  }
  return labels;
}

std::uint64_t cbq_header_size(std::size_t rank) { return 25 + 8 * static_cast<std::uint64_t>(rank); }

std::uint64_t cbq_serialized_size(std::span<const std::uint64_t> shape, unsigned bits,
                                  unsigned group_count) {
  if (bits < 1 || bits > kMaxBits) throw Error(ErrorCode::BadConfig, "bits must be in [1, 8]");
  const std::uint64_t codebook_bytes = (std::uint64_t{1} << bits) * 8;
  std::uint64_t total = cbq_header_size(shape.size());
  for (const Span& s : split_groups(element_count(shape), group_count)) {
    total += codebook_bytes + packed_size(s.length, bits);
  }
  return total;
}

namespace {

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    auto bits = static_cast<std::make_unsigned_t<T>>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
  }
  void put_f32(float value) { put(std::bit_cast<std::uint32_t>(value)); }
  void put_bytes(std::span<const std::uint8_t> bytes) {
    out_.insert(out_.end(), bytes.begin(), bytes.end());
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    if (in_.size() - pos_ < n) {
      throw Error(ErrorCode::LengthMismatch, "file truncated at byte " + std::to_string(pos_));
    }
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  template <typename T>
  T get() {
    auto bytes = take(sizeof(T));
    std::make_unsigned_t<T> v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::make_unsigned_t<T>>(bytes[i]) << (8 * i);
    }
    return static_cast<T>(v);
  }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }

  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_cbq(const GroupedQuantizedTensor& g) {
  g.config.validate();
  validate(g);
  if (g.shape.size() > 255) throw Error(ErrorCode::ShapeMismatch, "rank exceeds 255");

  std::vector<std::uint8_t> out;
  out.reserve(cbq_serialized_size(g.shape, g.config.bits, g.config.group_count));
  Writer w(out);
  w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(kCbqMagic), 4));
  w.put(kCbqVersion);
  w.put(static_cast<std::uint8_t>(g.config.scheme));
  w.put(static_cast<std::uint8_t>(g.config.bits));
  w.put(static_cast<std::uint32_t>(g.config.group_count));
  w.put(static_cast<std::uint8_t>(g.shape.size()));
  for (auto d : g.shape) w.put(d);
  w.put(g.config.seed);
  w.put(static_cast<std::uint32_t>(g.config.max_iterations));
  for (const auto& q : g.groups) {
    for (float c : q.codebook.centroids) w.put_f32(c);
    for (auto c : q.codebook.occupancy) w.put(c);
    w.put_bytes(pack_indices(q.indices, q.bits));
  }
  return out;
}

GroupedQuantizedTensor decode_cbq(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCbqMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "not a CBQ1 file");
  }
  Reader r(bytes);
  r.take(4);
  const auto version = r.get<std::uint16_t>();
  if (version != kCbqVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "format version " + std::to_string(version));
  }

  GroupedQuantizedTensor g;
  const auto scheme = r.get<std::uint8_t>();
  if (scheme > static_cast<std::uint8_t>(Scheme::KMeans)) {
    throw Error(ErrorCode::CorruptIndex, "unknown scheme id " + std::to_string(scheme));
  }
  g.config.scheme = static_cast<Scheme>(scheme);
  g.config.bits = r.get<std::uint8_t>();
  g.config.group_count = r.get<std::uint32_t>();
  g.config.convergence_epsilon = 0.0;
  if (g.config.bits < 1 || g.config.bits > kMaxBits || g.config.group_count < 1) {
    throw Error(ErrorCode::CorruptIndex, "header carries an invalid bit width or group count");
  }
  const auto rank = r.get<std::uint8_t>();
  g.shape.resize(rank);
  for (auto& d : g.shape) d = r.get<std::uint64_t>();
  g.config.seed = r.get<std::uint64_t>();
  g.config.max_iterations = r.get<std::uint32_t>();

  const std::uint64_t n = element_count(g.shape);
  if (n == 0) throw Error(ErrorCode::CorruptIndex, "tensor has no elements");
  if (g.config.group_count > n) {
    throw Error(ErrorCode::CorruptIndex, "more groups than elements");
  }
  // Reject sizes the remaining bytes cannot possibly hold before allocating.
  const std::uint64_t codebook_bytes = (std::uint64_t{1} << g.config.bits) * 8;
  if (n / 8 * g.config.bits > r.remaining() ||
      g.config.group_count > r.remaining() / codebook_bytes) {
    throw Error(ErrorCode::LengthMismatch, "file truncated");
  }

  g.spans = split_groups(n, g.config.group_count);
  g.groups.resize(g.spans.size());
  const std::size_t clusters = g.config.cluster_count();
  for (std::size_t i = 0; i < g.spans.size(); ++i) {
    QuantizedVector& q = g.groups[i];
    q.bits = g.config.bits;
    q.codebook.centroids.resize(clusters);
    q.codebook.occupancy.resize(clusters);
    for (auto& c : q.codebook.centroids) c = r.get_f32();
    for (auto& c : q.codebook.occupancy) c = r.get<std::uint32_t>();
    q.indices = unpack_indices(r.take(packed_size(g.spans[i].length, q.bits)),
                               g.spans[i].length, q.bits);
    validate(q);
    float lo = q.codebook.centroids[q.indices[0]];
    float hi = lo;
    for (Label l : q.indices) {
      lo = std::min(lo, q.codebook.centroids[l]);
      hi = std::max(hi, q.codebook.centroids[l]);
    }
    q.source_min = lo;
    q.source_max = hi;
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(r.remaining()) + " trailing bytes after last group");
  }
  return g;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IOFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IOFailure, "read failed for " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IOFailure, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IOFailure, "write failed for " + path.string());
}

void write_cbq(const std::filesystem::path& path, const GroupedQuantizedTensor& g) {
  write_file(path, encode_cbq(g));
}

GroupedQuantizedTensor read_cbq(const std::filesystem::path& path) {
  return decode_cbq(read_file(path));
}

}  // namespace cbq

#include "cbq/grouping.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "cbq/error.hpp"

namespace cbq {

std::vector<Span> split_groups(std::size_t n, std::size_t group_count) {
  if (n < 1) throw Error(ErrorCode::EmptyInput, "cannot split an empty tensor");
  if (group_count < 1) throw Error(ErrorCode::BadConfig, "group count must be >= 1");
  if (group_count > n) {
    throw Error(ErrorCode::TooManyGroups, std::to_string(group_count) + " groups for " +
                                              std::to_string(n) + " elements");
  }
  const std::size_t base = n / group_count;
  const std::size_t extra = n % group_count;
  std::vector<Span> spans(group_count);
  std::size_t offset = 0;
  for (std::size_t g = 0; g < group_count; ++g) {
    spans[g] = {offset, base + (g < extra ? 1 : 0)};
    offset += spans[g].length;
  }
  return spans;
}

std::uint64_t element_count(std::span<const std::uint64_t> shape) {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::size_t GroupedQuantizedTensor::size() const {
  return spans.empty() ? 0 : spans.back().offset + spans.back().length;
}

GroupedQuantizedTensor quantize_grouped(std::span<const float> values,
                                        std::span<const std::uint64_t> shape,
                                        const QuantConfig& cfg, std::string_view name,
                                        unsigned threads) {
  cfg.validate();
  if (element_count(shape) != values.size()) {
    throw Error(ErrorCode::ShapeMismatch, "shape describes " +
                                              std::to_string(element_count(shape)) +
                                              " elements, got " + std::to_string(values.size()));
  }

  GroupedQuantizedTensor out;
  out.shape.assign(shape.begin(), shape.end());
  out.config = cfg;
  out.spans = split_groups(values.size(), cfg.group_count);
  out.groups.resize(out.spans.size());

  auto run = [&](std::size_t g) {
    const Span s = out.spans[g];
    out.groups[g] = quantize(values.subspan(s.offset, s.length), cfg, StreamKey{name, g});
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(threads, out.groups.size());
  if (workers <= 1) {
    for (std::size_t g = 0; g < out.groups.size(); ++g) run(g);
    return out;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t g = next++; g < out.groups.size(); g = next++) {
        try {
          run(g);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return out;
}

void validate(const GroupedQuantizedTensor& g) {
  const auto n = element_count(g.shape);
  if (g.groups.size() != g.spans.size() || g.groups.size() != g.config.group_count) {
    throw Error(ErrorCode::CorruptIndex, "group count does not match header");
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < g.groups.size(); ++i) {
    if (g.spans[i].offset != offset || g.groups[i].size() != g.spans[i].length) {
      throw Error(ErrorCode::CorruptIndex, "group " + std::to_string(i) + " span is inconsistent");
    }
    if (g.groups[i].bits != g.config.bits) {
      throw Error(ErrorCode::CorruptIndex, "group " + std::to_string(i) + " bit width differs");
    }
    validate(g.groups[i]);
    offset += g.spans[i].length;
  }
  if (offset != n) throw Error(ErrorCode::CorruptIndex, "spans do not cover the tensor");
}

double reconstruct_grouped_into(const GroupedQuantizedTensor& g, std::span<float> out) {
  if (out.size() != element_count(g.shape)) {
    throw Error(ErrorCode::LengthMismatch, "output buffer length differs from tensor");
  }
  if (g.size() != out.size()) throw Error(ErrorCode::CorruptIndex, "spans do not cover the tensor");
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < g.groups.size(); ++i) {
    reconstruct_into(g.groups[i], out.subspan(g.spans[i].offset, g.spans[i].length));
  }
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(stop - start).count();
}

GroupedReconstruction reconstruct_grouped(const GroupedQuantizedTensor& g) {
  GroupedReconstruction out;
  out.shape = g.shape;
  out.values.resize(element_count(g.shape));
  out.seconds = reconstruct_grouped_into(g, out.values);
  return out;
}

}  // namespace cbq

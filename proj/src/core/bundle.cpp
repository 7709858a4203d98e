#include <bit>
#include <set>
#include <string>

#include "cbq/error.hpp"
#include "cbq/tensor_io.hpp"
#include "json.hpp"

namespace cbq {

namespace {

using nlohmann::json;

constexpr const char* kBundleFormat = "cbq-bundle";
constexpr int kBundleVersion = 1;

}  // namespace

const TensorEntry* TensorBundle::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void TensorBundle::add(TensorEntry entry) {
  if (find(entry.name) != nullptr) {
    throw Error(ErrorCode::ManifestMismatch, "duplicate tensor name '" + entry.name + "'");
  }
  if (element_count(entry.shape) != entry.values.size()) {
    throw Error(ErrorCode::ManifestMismatch, "tensor '" + entry.name +
                                                 "' shape does not match its value count");
  }
  tensors.push_back(std::move(entry));
}

void write_bundle(const std::filesystem::path& manifest_path, const TensorBundle& bundle) {
  auto payload_path = manifest_path;
  payload_path.replace_extension(".bin");

  std::vector<std::uint8_t> payload;
  json entries = json::array();
  for (const auto& t : bundle.tensors) {
    const std::uint64_t offset = payload.size();
    for (float v : t.values) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) payload.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
    entries.push_back({{"name", t.name},
                       {"shape", t.shape},
                       {"dtype", "float32"},
                       {"offset", offset},
                       {"length", payload.size() - offset}});
  }
  json manifest = {{"format", kBundleFormat},
                   {"version", kBundleVersion},
                   {"payload", payload_path.filename().string()},
                   {"tensors", entries}};

  write_file(payload_path, payload);
  const std::string text = manifest.dump(2) + "\n";
  write_file(manifest_path,
             std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

TensorBundle read_bundle(const std::filesystem::path& manifest_path) {
  const auto text = read_file(manifest_path);
  json manifest;
  try {
    manifest = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestMismatch, manifest_path.string() + ": " + e.what());
  }

  TensorBundle bundle;
  try {
    if (manifest.value("format", std::string{}) != kBundleFormat) {
      throw Error(ErrorCode::ManifestMismatch, "not a tensor bundle manifest");
    }
    if (manifest.value("version", 0) != kBundleVersion) {
      throw Error(ErrorCode::ManifestMismatch, "unsupported bundle version");
    }
    const auto payload_path =
        manifest_path.parent_path() / manifest.at("payload").get<std::string>();
    const auto payload = read_file(payload_path);

    for (const auto& e : manifest.at("tensors")) {
      TensorEntry t;
      t.name = e.at("name").get<std::string>();
      t.shape = e.at("shape").get<std::vector<std::uint64_t>>();
      if (e.at("dtype").get<std::string>() != "float32") {
        throw Error(ErrorCode::ManifestMismatch, "tensor '" + t.name + "' has unsupported dtype");
      }
      const auto offset = e.at("offset").get<std::uint64_t>();
      const auto length = e.at("length").get<std::uint64_t>();
      const std::uint64_t n = element_count(t.shape);
      if (length != 4 * n) {
        throw Error(ErrorCode::ManifestMismatch, "tensor '" + t.name + "' length " +
                                                     std::to_string(length) +
                                                     " disagrees with its shape");
      }
      if (offset > payload.size() || payload.size() - offset < length) {
        throw Error(ErrorCode::ManifestMismatch,
                    "tensor '" + t.name + "' extends past the end of the payload");
      }
      t.values.resize(n);
      const std::uint8_t* p = payload.data() + offset;
      for (std::uint64_t i = 0; i < n; ++i, p += 4) {
        const std::uint32_t bits = std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 |
                                   std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
        t.values[i] = std::bit_cast<float>(bits);
      }
      bundle.add(std::move(t));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestMismatch, manifest_path.string() + ": " + e.what());
  }
  return bundle;
}

}  // namespace cbq

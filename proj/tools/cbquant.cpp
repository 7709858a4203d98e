// cbquant: command-line front end over the cbquant C API.
//
// Exit codes: 0 success, 2 usage, 3 data/format error, 4 internal error.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cbq/cbq.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

constexpr const char* kIndexFile = "index.json";
constexpr const char* kPassthroughFile = "passthrough.json";

struct CliError {
  int exit_code;
  std::string message;
};

void check(cbq_status status, const std::string& context) {
  if (status == CBQ_OK) return;
  int code = kExitData;
  if (status == CBQ_ERR_BAD_CONFIG || status == CBQ_ERR_TOO_MANY_GROUPS) code = kExitUsage;
  if (status == CBQ_ERR_INTERNAL || status == CBQ_ERR_INVALID_ARGUMENT) code = kExitInternal;
  throw CliError{code, context + ": " + cbq_last_error()};
}

struct TensorDeleter {
  void operator()(cbq_tensor* t) const { cbq_tensor_free(t); }
};
struct BundleDeleter {
  void operator()(cbq_bundle* b) const { cbq_bundle_free(b); }
};
struct ExperimentDeleter {
  void operator()(cbq_experiment* e) const { cbq_experiment_free(e); }
};
using Tensor = std::unique_ptr<cbq_tensor, TensorDeleter>;
using Bundle = std::unique_ptr<cbq_bundle, BundleDeleter>;
using Experiment = std::unique_ptr<cbq_experiment, ExperimentDeleter>;

Bundle load_bundle(const std::string& path) {
  cbq_bundle_t b = nullptr;
  check(cbq_bundle_load(path.c_str(), &b), "reading bundle " + path);
  return Bundle(b);
}

Bundle new_bundle() {
  cbq_bundle_t b = nullptr;
  check(cbq_bundle_create(&b), "creating bundle");
  return Bundle(b);
}

struct TensorView {
  std::string name;
  const float* data = nullptr;
  uint64_t n = 0;
  std::vector<uint64_t> shape;
};

TensorView view(cbq_bundle_t b, size_t i) {
  TensorView v;
  v.name = cbq_bundle_name(b, i);
  check(cbq_bundle_tensor(b, i, &v.data, &v.n), v.name);
  size_t rank = 0;
  check(cbq_bundle_shape(b, i, nullptr, 0, &rank), v.name);
  v.shape.resize(rank);
  check(cbq_bundle_shape(b, i, v.shape.data(), rank, &rank), v.name);
  return v;
}

// Bundle tensors in name order.
std::vector<TensorView> sorted_views(cbq_bundle_t b) {
  std::vector<TensorView> out;
  for (size_t i = 0; i < cbq_bundle_count(b); ++i) out.push_back(view(b, i));
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.name < y.name; });
  return out;
}

unsigned thread_cap() {
  if (const char* env = std::getenv("CBQUANT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw CliError{kExitUsage, std::string("CBQUANT_THREADS must be a positive integer, got '") +
                                     env + "'"};
    }
    return static_cast<unsigned>(v);
  }
  return 0;
}

std::string fmt(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
  return buf;
}

// Prints a left-aligned text table or comma-separated rows.
void emit(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
          bool csv, std::ostream& out = std::cout) {
  if (csv) {
    auto line = [&](const std::vector<std::string>& cells) {
      for (size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
      out << "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return;
  }
  std::vector<size_t> width(header.size());
  for (size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      out << (i ? "  " : "") << cells[i];
      if (i + 1 < cells.size()) out << std::string(width[i] - cells[i].size(), ' ');
    }
    out << "\n";
  };
  line(header);
  std::vector<std::string> rule;
  for (size_t w : width) rule.emplace_back(w, '-');
  line(rule);
  for (const auto& r : rows) line(r);
}

struct QuantFlags {
  std::string scheme = "kmeans";
  uint32_t bits = 8;
  uint32_t groups = 1;
  uint32_t iters = 3;
  uint64_t seed = 0;
  double epsilon = 0.0;
  std::vector<std::string> exclude;
  std::string format = "table";

  void attach(CLI::App* cmd, bool with_scheme_and_bits = true) {
    if (with_scheme_and_bits) {
      cmd->add_option("--scheme", scheme, "Quantization scheme")
          ->check(CLI::IsMember({"linear", "kmeans"}))
          ->capture_default_str();
      cmd->add_option("--bits", bits, "Bits per index (1-8)")->capture_default_str();
    }
    cmd->add_option("--groups", groups, "Groups per tensor")->capture_default_str();
    cmd->add_option("--iters", iters, "k-means iteration cap")->capture_default_str();
    cmd->add_option("--seed", seed, "RNG seed")->capture_default_str();
    cmd->add_option("--epsilon", epsilon, "Relative SSE improvement threshold")
        ->capture_default_str();
    cmd->add_option("--exclude", exclude, "Regex; matching tensor names stay full precision");
    cmd->add_option("--format", format, "Report format")
        ->check(CLI::IsMember({"table", "csv"}))
        ->capture_default_str();
  }

  cbq_config config() const {
    cbq_config cfg;
    cbq_config_init(&cfg);
    check(cbq_scheme_parse(scheme.c_str(), &cfg.scheme), "--scheme");
    cfg.bits = bits;
    cfg.group_count = groups;
    cfg.max_iterations = iters;
    cfg.seed = seed;
    cfg.convergence_epsilon = epsilon;
    cfg.threads = thread_cap();
    if (cbq_config_validate(&cfg) != CBQ_OK) {
      throw CliError{kExitUsage, cbq_last_error()};
    }
    return cfg;
  }

  std::vector<std::regex> patterns() const {
    std::vector<std::regex> out;
    for (const auto& p : exclude) {
      try {
        out.emplace_back(p);
      } catch (const std::regex_error& e) {
        throw CliError{kExitUsage, "--exclude '" + p + "': " + e.what()};
      }
    }
    return out;
  }

  bool csv() const { return format == "csv"; }
};

bool excluded(const std::string& name, const std::vector<std::regex>& patterns) {
  return std::any_of(patterns.begin(), patterns.end(),
                     [&](const std::regex& r) { return std::regex_search(name, r); });
}

std::string file_stem_for(size_t index, const std::string& name) {
  std::string safe;
  for (char c : name) safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '-') ? c : '_';
  return std::to_string(index) + "_" + safe;
}

Tensor quantize_view(const TensorView& v, const cbq_config& cfg) {
  cbq_tensor_t t = nullptr;
  check(cbq_quantize(v.data, v.n, v.shape.data(), v.shape.size(), v.name.c_str(), &cfg, &t),
        "quantizing " + v.name);
  return Tensor(t);
}

// Removes everything it tracked unless released.
class OutputGuard {
 public:
  void track(fs::path p) { paths_.push_back(std::move(p)); }
  void release() { paths_.clear(); }
  ~OutputGuard() {
    std::error_code ec;
    for (auto it = paths_.rbegin(); it != paths_.rend(); ++it) fs::remove(*it, ec);
  }

 private:
  std::vector<fs::path> paths_;
};

int cmd_quantize(const std::string& input, const std::string& output, const QuantFlags& flags) {
  const cbq_config cfg = flags.config();
  const auto patterns = flags.patterns();
  auto bundle = load_bundle(input);

  OutputGuard guard;
  const fs::path dir(output);
  std::error_code ec;
  if (!fs::exists(dir)) {
    if (!fs::create_directories(dir, ec)) {
      throw CliError{kExitData, "cannot create " + dir.string() + ": " + ec.message()};
    }
    guard.track(dir);
  }

  json index = {{"format", "cbq-quantized"}, {"version", 1}, {"tensors", json::array()}};
  auto passthrough = new_bundle();
  std::vector<std::vector<std::string>> rows;
  const auto views = sorted_views(bundle.get());
  for (size_t i = 0; i < views.size(); ++i) {
    const auto& v = views[i];
    if (excluded(v.name, patterns)) {
      check(cbq_bundle_add(passthrough.get(), v.name.c_str(), v.data, v.n, v.shape.data(),
                           v.shape.size()),
            v.name);
      index["tensors"].push_back({{"name", v.name}, {"quantized", false}});
      rows.push_back({v.name, std::to_string(v.n), "-", "excluded", "0", "0", "-", "1"});
      continue;
    }
    auto t = quantize_view(v, cfg);
    cbq_error_stats stats;
    check(cbq_tensor_error_stats(t.get(), v.data, v.n, &stats), v.name);
    uint64_t bytes = 0;
    check(cbq_tensor_encoded_size(t.get(), &bytes), v.name);

    const auto file = file_stem_for(i, v.name) + ".cbq";
    guard.track(dir / file);
    check(cbq_tensor_save(t.get(), (dir / file).string().c_str()), "writing " + file);
    index["tensors"].push_back({{"name", v.name}, {"quantized", true}, {"file", file}});

    const double ratio = 32.0 * static_cast<double>(v.n) / (8.0 * static_cast<double>(bytes));
    rows.push_back({v.name, std::to_string(v.n), std::to_string(cbq_tensor_group_count(t.get())),
                    flags.scheme, fmt(stats.mse, 9), fmt(stats.max_abs_error, 9),
                    std::to_string(bytes), fmt(ratio, 6)});
  }

  if (cbq_bundle_count(passthrough.get()) > 0) {
    const auto manifest = dir / kPassthroughFile;
    guard.track(manifest);
    guard.track(fs::path(manifest).replace_extension(".bin"));
    check(cbq_bundle_save(passthrough.get(), manifest.string().c_str()), "writing passthrough");
    index["passthrough"] = kPassthroughFile;
  }
  const auto index_path = dir / kIndexFile;
  guard.track(index_path);
  {
    std::ofstream out(index_path);
    out << index.dump(2) << "\n";
    if (!out) throw CliError{kExitData, "cannot write " + index_path.string()};
  }
  guard.release();

  emit({"tensor", "elements", "groups", "scheme", "mse", "max_abs_error", "bytes", "ratio"}, rows,
       flags.csv());
  return kExitOk;
}

int cmd_reconstruct(const std::string& input, const std::string& output) {
  const fs::path dir(input);
  std::ifstream in(dir / kIndexFile);
  if (!in) throw CliError{kExitData, "cannot open " + (dir / kIndexFile).string()};
  json index;
  try {
    index = json::parse(in);
  } catch (const json::exception& e) {
    throw CliError{kExitData, std::string("malformed index: ") + e.what()};
  }

  std::optional<Bundle> passthrough;
  if (index.contains("passthrough")) {
    passthrough = load_bundle((dir / index["passthrough"].get<std::string>()).string());
  }

  auto out = new_bundle();
  try {
    for (const auto& entry : index.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      if (!entry.at("quantized").get<bool>()) {
        if (!passthrough) throw CliError{kExitData, "index lists excluded tensors but no passthrough"};
        size_t i = 0;
        check(cbq_bundle_find(passthrough->get(), name.c_str(), &i), name);
        const auto v = view(passthrough->get(), i);
        check(cbq_bundle_add(out.get(), name.c_str(), v.data, v.n, v.shape.data(), v.shape.size()),
              name);
        continue;
      }
      const auto file = (dir / entry.at("file").get<std::string>()).string();
      cbq_tensor_t raw = nullptr;
      check(cbq_tensor_load(file.c_str(), &raw), "reading " + file);
      Tensor t(raw);
      std::vector<uint64_t> shape(cbq_tensor_rank(t.get()));
      check(cbq_tensor_shape(t.get(), shape.data(), shape.size()), name);
      std::vector<float> values(cbq_tensor_element_count(t.get()));
      check(cbq_tensor_reconstruct(t.get(), values.data(), values.size(), nullptr), name);
      check(cbq_bundle_add(out.get(), name.c_str(), values.data(), values.size(), shape.data(),
                           shape.size()),
            name);
    }
  } catch (const json::exception& e) {
    throw CliError{kExitData, std::string("malformed index: ") + e.what()};
  }
  check(cbq_bundle_save(out.get(), output.c_str()), "writing " + output);
  std::cout << "wrote " << cbq_bundle_count(out.get()) << " tensors to " << output << "\n";
  return kExitOk;
}

int cmd_stats(const std::string& reference, const std::string& candidate, bool csv) {
  auto ref = load_bundle(reference);
  auto cand = load_bundle(candidate);
  std::vector<std::vector<std::string>> rows;
  for (const auto& v : sorted_views(ref.get())) {
    size_t i = 0;
    check(cbq_bundle_find(cand.get(), v.name.c_str(), &i), "candidate bundle");
    const auto c = view(cand.get(), i);
    if (c.shape != v.shape) throw CliError{kExitData, v.name + ": shapes differ"};
    cbq_error_stats s;
    check(cbq_compare(v.data, c.data, v.n, &s), v.name);
    rows.push_back({v.name, std::to_string(s.n), fmt(s.sse, 9), fmt(s.mse, 9),
                    fmt(s.max_abs_error, 9)});
  }
  emit({"tensor", "elements", "sse", "mse", "max_abs_error"}, rows, csv);
  return kExitOk;
}

int cmd_sweep(const std::string& input, std::vector<uint32_t> bits,
              std::vector<std::string> schemes, std::vector<uint64_t> seeds,
              const QuantFlags& flags) {
  if (bits.empty()) throw CliError{kExitUsage, "--bits needs at least one value"};
  if (schemes.empty()) throw CliError{kExitUsage, "--schemes needs at least one value"};
  if (seeds.empty()) throw CliError{kExitUsage, "--seeds needs at least one value"};
  std::sort(bits.begin(), bits.end());
  bits.erase(std::unique(bits.begin(), bits.end()), bits.end());
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  std::vector<std::string> ordered;
  for (const char* s : {"linear", "kmeans"}) {
    if (std::find(schemes.begin(), schemes.end(), s) != schemes.end()) ordered.emplace_back(s);
  }

  // Validate every combination before doing any work.
  std::vector<cbq_config> configs;
  for (uint32_t b : bits) {
    for (const auto& s : ordered) {
      QuantFlags f = flags;
      f.scheme = s;
      f.bits = b;
      configs.push_back(f.config());
    }
  }
  const auto patterns = flags.patterns();
  auto bundle = load_bundle(input);
  std::vector<TensorView> views;
  for (auto& v : sorted_views(bundle.get())) {
    if (!excluded(v.name, patterns)) views.push_back(std::move(v));
  }
  if (views.empty()) throw CliError{kExitData, "no tensors to sweep"};

  std::vector<std::vector<std::string>> rows;
  std::vector<std::vector<std::string>> summary;
  size_t c = 0;
  for (uint32_t b : bits) {
    std::vector<std::string> line{std::to_string(b)};
    for (const auto& s : ordered) {
      cbq_config cfg = configs[c++];
      double mean = 0.0;
      for (uint64_t seed : seeds) {
        cfg.seed = seed;
        double sse = 0.0;
        uint64_t n = 0;
        for (const auto& v : views) {
          auto t = quantize_view(v, cfg);
          cbq_error_stats st;
          check(cbq_tensor_error_stats(t.get(), v.data, v.n, &st), v.name);
          sse += st.sse;
          n += st.n;
        }
        const double mse = sse / static_cast<double>(n);
        mean += mse / static_cast<double>(seeds.size());
        rows.push_back({s, std::to_string(b), std::to_string(seed), fmt(mse, 9)});
      }
      line.push_back(fmt(mean, 6));
    }
    summary.push_back(std::move(line));
  }

  if (flags.csv()) {
    emit({"scheme", "bits", "seed", "mse"}, rows, true);
  } else {
    std::vector<std::string> header{"bits"};
    for (const auto& s : ordered) header.push_back(s + " mse (mean of " +
                                                   std::to_string(seeds.size()) + " seeds)");
    emit(header, summary, false);
  }
  return kExitOk;
}

struct TrainFlags {
  std::vector<uint32_t> bits{1, 2, 3};
  uint64_t seed = 1;
  uint32_t iters = 3;
  uint32_t epochs = 0;
  uint32_t pretrain_epochs = 0;
  double lr = 0.0;
  double multiplier = -1.0;
  bool quantize_output = false;
  std::string format = "csv";
};

int cmd_train_toy(const TrainFlags& flags) {
  if (flags.bits.empty()) throw CliError{kExitUsage, "--bits needs at least one value"};
  cbq_train_config tc;
  cbq_train_config_init(&tc);
  if (flags.epochs > 0) tc.epochs = flags.epochs;
  if (flags.pretrain_epochs > 0) tc.pretrain_epochs = flags.pretrain_epochs;
  if (flags.lr > 0.0) tc.base_learning_rate = flags.lr;
  if (flags.multiplier >= 0.0) tc.quantized_lr_multiplier = flags.multiplier;
  tc.quantize_output_layer = flags.quantize_output ? 1 : 0;
  tc.data_seed = flags.seed;

  std::vector<cbq_config> configs;
  for (uint32_t b : flags.bits) {
    cbq_config qc;
    cbq_config_init(&qc);
    qc.bits = b;
    qc.seed = flags.seed;
    qc.max_iterations = flags.iters;
    if (cbq_config_validate(&qc) != CBQ_OK) throw CliError{kExitUsage, cbq_last_error()};
    configs.push_back(qc);
  }

  const bool csv = flags.format == "csv";
  if (csv) std::cout << "epoch,scheme,bits,seed,loss\n";
  std::vector<std::vector<std::string>> summary;
  for (const auto& qc : configs) {
    cbq_experiment_t raw = nullptr;
    check(cbq_experiment_run(&tc, &qc, flags.seed, &raw), "toy experiment");
    Experiment e(raw);
    if (csv) {
      char line[256];
      for (size_t i = 0; i < cbq_experiment_record_count(e.get()); ++i) {
        check(cbq_experiment_format_record(e.get(), i, line, sizeof(line)), "record");
        std::cout << line << "\n";
      }
      continue;
    }
    for (cbq_scheme s : {CBQ_SCHEME_LINEAR, CBQ_SCHEME_KMEANS}) {
      cbq_arm_summary a;
      check(cbq_experiment_summary(e.get(), s, &a), "summary");
      const double gap = a.quantized_loss - a.full_precision_loss;
      const double recovered = gap > 0.0 ? (a.quantized_loss - a.final_loss) / gap : 0.0;
      summary.push_back({std::to_string(qc.bits), cbq_scheme_name(s), fmt(a.full_precision_loss),
                         fmt(a.quantized_loss), fmt(a.final_loss), fmt(recovered, 3)});
    }
  }
  if (!csv) {
    emit({"bits", "scheme", "full_precision", "quantized", "fine_tuned", "recovered"}, summary,
         false);
  }
  return kExitOk;
}

int cmd_bench_groups(uint64_t rows, uint64_t cols, std::vector<uint32_t> groups,
                     uint32_t repeats, const QuantFlags& flags) {
  if (groups.empty()) throw CliError{kExitUsage, "--group-counts needs at least one value"};
  if (repeats == 0) throw CliError{kExitUsage, "--repeats must be >= 1"};
  std::vector<cbq_config> configs;
  for (uint32_t g : groups) {
    QuantFlags f = flags;
    f.groups = g;
    configs.push_back(f.config());
  }

  auto bundle = new_bundle();
  const uint64_t shape[] = {rows, cols};
  check(cbq_bundle_add_gaussian(bundle.get(), "weight", shape, 2, flags.seed), "fixture");
  const auto v = view(bundle.get(), 0);

  std::vector<Tensor> tensors;
  for (const auto& cfg : configs) tensors.push_back(quantize_view(v, cfg));

  // Repeats are interleaved across group counts so drift affects all alike.
  std::vector<float> buffer(v.n);
  std::vector<std::vector<double>> times(tensors.size());
  for (uint32_t r = 0; r < repeats; ++r) {
    for (size_t i = 0; i < tensors.size(); ++i) {
      double seconds = 0.0;
      check(cbq_tensor_reconstruct(tensors[i].get(), buffer.data(), buffer.size(), &seconds),
            "reconstruct");
      times[i].push_back(seconds);
    }
  }

  std::vector<std::vector<std::string>> out;
  for (size_t i = 0; i < tensors.size(); ++i) {
    std::sort(times[i].begin(), times[i].end());
    cbq_error_stats st;
    check(cbq_tensor_error_stats(tensors[i].get(), v.data, v.n, &st), "stats");
    out.push_back({std::to_string(configs[i].group_count), fmt(times[i].front() * 1e3, 6),
                   fmt(times[i][times[i].size() / 2] * 1e3, 6), fmt(st.mse, 9)});
  }
  emit({"groups", "min_ms", "median_ms", "mse"}, out, flags.csv());
  return kExitOk;
}

int cmd_make_fixture(const std::string& output, const std::string& name,
                     std::vector<uint64_t> shape, uint64_t seed) {
  if (shape.empty()) throw CliError{kExitUsage, "--shape needs at least one dimension"};
  auto bundle = new_bundle();
  check(cbq_bundle_add_gaussian(bundle.get(), name.c_str(), shape.data(), shape.size(), seed),
        "fixture");
  check(cbq_bundle_save(bundle.get(), output.c_str()), "writing " + output);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cbquant: codebook weight quantization (linear and k-means)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cbq_version());

  std::string input, output, reference, candidate;

  QuantFlags qflags;
  auto* quantize = app.add_subcommand("quantize", "Quantize every tensor of a bundle into CBQ files");
  quantize->add_option("-i,--input", input, "Bundle manifest")->required();
  quantize->add_option("-o,--output", output, "Output directory")->required();
  qflags.attach(quantize);

  auto* reconstruct = app.add_subcommand("reconstruct", "Rebuild a float bundle from CBQ output");
  reconstruct->add_option("-i,--input", input, "Directory written by quantize")->required();
  reconstruct->add_option("-o,--output", output, "Bundle manifest to write")->required();

  std::string stats_format = "table";
  auto* stats = app.add_subcommand("stats", "Reconstruction error between two bundles");
  stats->add_option("--reference", reference, "Original bundle manifest")->required();
  stats->add_option("--candidate", candidate, "Reconstructed bundle manifest")->required();
  stats->add_option("--format", stats_format)->check(CLI::IsMember({"table", "csv"}));

  QuantFlags sweep_flags;
  std::vector<uint32_t> sweep_bits;
  std::vector<std::string> sweep_schemes{"linear", "kmeans"};
  std::vector<uint64_t> sweep_seeds{0};
  auto* sweep = app.add_subcommand("sweep", "MSE per (scheme, bits, seed) over a bundle");
  sweep->add_option("-i,--input", input, "Bundle manifest")->required();
  sweep->add_option("--bits", sweep_bits, "Bit widths")->delimiter(',')->required();
  sweep->add_option("--schemes", sweep_schemes, "Schemes")
      ->delimiter(',')
      ->check(CLI::IsMember({"linear", "kmeans"}));
  sweep->add_option("--seeds", sweep_seeds, "Seeds")->delimiter(',');
  sweep_flags.attach(sweep, false);

  TrainFlags tflags;
  auto* train = app.add_subcommand("train-toy", "Quantization-aware fine-tuning of a toy MLP");
  train->add_option("--bits", tflags.bits, "Bit widths")->delimiter(',')->capture_default_str();
  train->add_option("--seed", tflags.seed, "Task, data and quantization seed")->capture_default_str();
  train->add_option("--iters", tflags.iters, "k-means iteration cap")->capture_default_str();
  train->add_option("--epochs", tflags.epochs, "Fine-tuning epochs (0 = default)");
  train->add_option("--pretrain-epochs", tflags.pretrain_epochs, "Pretraining epochs (0 = default)");
  train->add_option("--lr", tflags.lr, "Base learning rate (0 = default)");
  train->add_option("--multiplier", tflags.multiplier, "Learning-rate multiplier for centroids");
  train->add_flag("--quantize-output", tflags.quantize_output, "Also quantize the output layer");
  train->add_option("--format", tflags.format)->check(CLI::IsMember({"table", "csv"}))
      ->capture_default_str();

  QuantFlags bench_flags;
  bench_flags.scheme = "linear";
  bench_flags.bits = 3;
  uint64_t bench_rows = 768, bench_cols = 3072;
  uint32_t bench_repeats = 21;
  std::vector<uint32_t> bench_groups{1, 128};
  auto* bench = app.add_subcommand("bench-groups", "Reconstruction time per group count");
  bench->add_option("--rows", bench_rows)->capture_default_str();
  bench->add_option("--cols", bench_cols)->capture_default_str();
  bench->add_option("--group-counts", bench_groups, "Group counts to compare")
      ->delimiter(',')
      ->capture_default_str();
  bench->add_option("--repeats", bench_repeats)->capture_default_str();
  bench_flags.attach(bench);

  std::string fixture_name = "weight";
  std::vector<uint64_t> fixture_shape{768, 768};
  uint64_t fixture_seed = 0;
  auto* fixture = app.add_subcommand("make-fixture", "Write a bundle with one Gaussian tensor");
  fixture->add_option("-o,--output", output, "Bundle manifest to write")->required();
  fixture->add_option("--name", fixture_name)->capture_default_str();
  fixture->add_option("--shape", fixture_shape)->delimiter(',')->capture_default_str();
  fixture->add_option("--seed", fixture_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*quantize) return cmd_quantize(input, output, qflags);
    if (*reconstruct) return cmd_reconstruct(input, output);
    if (*stats) return cmd_stats(reference, candidate, stats_format == "csv");
    if (*sweep) return cmd_sweep(input, sweep_bits, sweep_schemes, sweep_seeds, sweep_flags);
    if (*train) return cmd_train_toy(tflags);
    if (*bench) return cmd_bench_groups(bench_rows, bench_cols, bench_groups, bench_repeats,
                                        bench_flags);
    if (*fixture) return cmd_make_fixture(output, fixture_name, fixture_shape, fixture_seed);
  } catch (const CliError& e) {
    std::cerr << "cbquant: " << e.message << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "cbquant: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

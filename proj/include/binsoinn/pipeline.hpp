// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include "binsoinn/binviz.hpp"
#include "binsoinn/error.hpp"
#include "binsoinn/features.hpp"
#include "binsoinn/soinn.hpp"

namespace binsoinn::pipeline {

inline const std::string kBenign = "benign";
inline const std::string kMalicious = "malicious";

class SplitError : public Error {
 public:
  using Error::Error;
};

struct Sample {
  std::filesystem::path path;
  std::string label;
  std::string file_ext;
  std::uint64_t byte_len = 0;
};

struct SkipRecord {
  std::filesystem::path path;
  std::string reason;
};

struct Corpus {
  std::vector<Sample> samples;  // sorted by path
  std::vector<SkipRecord> skipped;
};

namespace detail {

inline void walk(const std::filesystem::path& root, const std::string& label, Corpus& out) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    out.skipped.push_back({root, "not a readable directory"});
    return;
  }
  fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
  if (ec) {
    out.skipped.push_back({root, ec.message()});
    return;
  }
  for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
    const fs::path& p = it->path();
    std::error_code sec;
    if (fs::is_directory(p, sec)) continue;
    if (!fs::is_regular_file(p, sec)) {
      out.skipped.push_back({p, fs::is_symlink(p) ? "dangling symbolic link" : "not a regular file"});
      continue;
    }
    std::ifstream probe(p, std::ios::binary);
    if (!probe) {
      out.skipped.push_back({p, "cannot open for reading"});
      continue;
    }
    const auto size = fs::file_size(p, sec);
    if (sec) {
      out.skipped.push_back({p, sec.message()});
      continue;
    }
    out.samples.push_back({p, label, extension_of(p), size});
  }
  if (ec) out.skipped.push_back({root, "walk aborted: " + ec.message()});
}

}  // namespace detail

/// Labeled directories to walk; both benign and malicious are optional.
inline Corpus ingest(const std::vector<std::pair<std::filesystem::path, std::string>>& roots) {
  Corpus corpus;
  for (const auto& [dir, label] : roots) detail::walk(dir, label, corpus);
  std::sort(corpus.samples.begin(), corpus.samples.end(),
            [](const Sample& a, const Sample& b) { return a.path < b.path; });
  return corpus;
}

inline Corpus ingest(const std::filesystem::path& benign_dir, const std::filesystem::path& malicious_dir) {
  return ingest({{benign_dir, kBenign}, {malicious_dir, kMalicious}});
}

struct Row {
  std::vector<double> values;
  std::string label;
  std::string ext;
  std::string path;
};

struct Dataset {
  std::vector<Row> rows;
  std::vector<SkipRecord> failures;
};

struct FeaturizeOptions {
  std::uint32_t max_side = hilbert::kDefaultMaxSide;
  ExtractorVariant variant = ExtractorVariant::Rgb332;
  /// 0 picks the hardware concurrency.
  unsigned threads = 1;
};

/// Feature vector of a byte buffer as used by the whole pipeline.
inline std::vector<double> featurize_bytes(std::span<const std::uint8_t> bytes, std::uint32_t max_side,
                                           ExtractorVariant variant) {
  RenderOptions opts;
  opts.max_side = max_side;
  opts.min_side = 4;
  return extract(render(bytes, opts), variant).values;
}

inline std::vector<double> featurize_file(const std::filesystem::path& path, std::uint32_t max_side,
                                          ExtractorVariant variant) {
  return featurize_bytes(read_file(path), max_side, variant);
}

/// Renders and extracts every sample. Output order follows input order
/// regardless of the worker count; failed samples are reported, not fatal.
inline Dataset featurize(std::span<const Sample> samples, const FeaturizeOptions& opts = {}) {
  std::vector<std::optional<Row>> slots(samples.size());
  std::vector<std::string> errors(samples.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) {
      const Sample& s = samples[i];
      try {
        slots[i] = Row{featurize_file(s.path, opts.max_side, opts.variant), s.label, s.file_ext, s.path.string()};
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  unsigned n = opts.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opts.threads;
  n = static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(samples.size(), 1)));
  if (n <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(work);
  }
  Dataset out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (slots[i]) {
      out.rows.push_back(std::move(*slots[i]));
    } else {
      out.failures.push_back({samples[i].path, errors[i]});
    }
  }
  return out;
}

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

/// Header `f0,...,f{k-1},label,ext`, then one row per vector.
inline void write_csv(std::ostream& out, const Dataset& data) {
  if (data.rows.empty()) {
    out << "label,ext\n";
    return;
  }
  const std::size_t k = data.rows.front().values.size();
  for (std::size_t i = 0; i < k; ++i) out << 'f' << i << ',';
  out << "label,ext\n";
  for (const Row& r : data.rows) {
    if (r.values.size() != k) throw DimensionError("dataset rows have mixed lengths");
    if (r.label.find_first_of(",\n") != std::string::npos || r.ext.find_first_of(",\n") != std::string::npos) {
      throw ParseError("label or extension contains a separator: " + r.path);
    }
    for (double v : r.values) out << format_double(v) << ',';
    out << r.label << ',' << r.ext << '\n';
  }
}

inline Dataset read_csv(std::istream& in) {
  Dataset data;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty dataset file");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 2) throw ParseError("dataset header needs label and ext columns");
  const std::size_t k = columns - 2;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Row r;
    r.values.reserve(k);
    std::size_t pos = 0;
    for (std::size_t c = 0; c < columns; ++c) {
      const std::size_t end = c + 1 == columns ? line.size() : line.find(',', pos);
      if (end == std::string::npos) throw ParseError("line " + std::to_string(line_no) + ": too few columns");
      const std::string_view cell(line.data() + pos, end - pos);
      if (c < k) {
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
          throw ParseError("line " + std::to_string(line_no) + ": bad number '" + std::string(cell) + "'");
        }
        r.values.push_back(v);
      } else if (c == k) {
        r.label = cell;
      } else {
        if (cell.find(',') != std::string_view::npos) {
          throw ParseError("line " + std::to_string(line_no) + ": too many columns");
        }
        r.ext = cell;
      }
      pos = end + 1;
    }
    data.rows.push_back(std::move(r));
  }
  return data;
}

/// Mean fraction of pixels per color class, per label. Needs RGB-332 vectors.
inline std::map<std::string, std::array<double, 5>> color_stats(const Dataset& data) {
  std::map<std::string, std::array<double, 5>> sums;
  std::map<std::string, std::size_t> counts;
  for (const Row& r : data.rows) {
    if (r.values.size() != kFeatureLength) throw DimensionError("color statistics need 1024-length vectors");
    auto& acc = sums[r.label];
    for (std::size_t c = 0; c < kColorClasses.size(); ++c) {
      const std::size_t bin = quantize_color(class_to_rgb(kColorClasses[c]));
      double frac = 0.0;
      for (std::size_t s = 0; s < kStripes.size(); ++s) frac += r.values[s * kBinsPerStripe + bin];
      acc[c] += frac / static_cast<double>(kStripes.size());
    }
    ++counts[r.label];
  }
  for (auto& [label, acc] : sums) {
    for (double& v : acc) v /= static_cast<double>(counts[label]);
  }
  return sums;
}

struct SplitConfig {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

/// Stratified split: each label's indices are shuffled and the first
/// round(fraction * n) go to training. The training order is shuffled again
/// so labels interleave.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(const Dataset& data,
                                                                                   const SplitConfig& cfg) {
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0)) {
    throw SplitError("train fraction must be in (0, 1]");
  }
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < data.rows.size(); ++i) by_label[data.rows[i].label].push_back(i);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> train;
  std::vector<std::size_t> held_out;
  for (auto& [label, idx] : by_label) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(idx.size())));
    train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    held_out.insert(held_out.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::shuffle(train.begin(), train.end(), rng);
  std::sort(held_out.begin(), held_out.end());
  return {std::move(train), std::move(held_out)};
}

struct TrainResult {
  soinn::Network network;
  std::vector<std::size_t> train_indices;     // in training order
  std::vector<std::size_t> held_out_indices;  // ascending
  std::vector<std::string> warnings;
};

inline TrainResult train(const Dataset& data, const soinn::TrainParams& params, const SplitConfig& split = {},
                         soinn::InitMode init = soinn::InitMode::SeededRandom) {
  auto [train_idx, held_out] = split_indices(data, split);
  if (train_idx.size() < 2) {
    throw SplitError("training split has " + std::to_string(train_idx.size()) + " vectors, need at least 2");
  }
  std::vector<std::string> warnings;
  std::map<std::string, std::size_t> labels;
  for (std::size_t i : train_idx) ++labels[data.rows[i].label];
  if (labels.size() < 2) {
    warnings.push_back("training split contains a single label ('" + labels.begin()->first + "')");
  }
  std::vector<soinn::LabeledRef> inputs;
  inputs.reserve(train_idx.size());
  for (std::size_t i : train_idx) inputs.push_back({data.rows[i].values, data.rows[i].label});
  auto net = soinn::fit(inputs, params, init);
  return {std::move(net), std::move(train_idx), std::move(held_out), std::move(warnings)};
}

/// One model per file extension. Extensions that cannot be trained (fewer
/// than two distinct training vectors) are left out and reported in `warnings`.
inline std::map<std::string, TrainResult> train_per_extension(const Dataset& data, const soinn::TrainParams& params,
                                                              const SplitConfig& split,
                                                              std::vector<std::string>* warnings = nullptr,
                                                              soinn::InitMode init = soinn::InitMode::SeededRandom) {
  std::map<std::string, Dataset> parts;
  for (const Row& r : data.rows) parts[r.ext].rows.push_back(r);
  std::map<std::string, TrainResult> out;
  for (auto& [ext, part] : parts) {
    try {
      auto res = train(part, params, split, init);
      // Indices refer back into the full dataset.
      std::vector<std::size_t> global;
      for (std::size_t i = 0; i < data.rows.size(); ++i) {
        if (data.rows[i].ext == ext) global.push_back(i);
      }
      for (auto& i : res.train_indices) i = global[i];
      for (auto& i : res.held_out_indices) i = global[i];
      out.emplace(ext, std::move(res));
    } catch (const Error& e) {
      if (warnings) warnings->push_back("extension '" + ext + "' skipped: " + e.what());
    }
  }
  return out;
}

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  double accuracy() const noexcept {
    return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total());
  }
  double fp_rate() const noexcept {
    return fp + tn == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(fp + tn);
  }
  double fn_rate() const noexcept {
    return fn + tp == 0 ? 0.0 : static_cast<double>(fn) / static_cast<double>(fn + tp);
  }

  /// Malicious is the positive class.
  void add(const std::string& truth, const std::string& predicted) noexcept {
    const bool actual = truth == kMalicious;
    const bool flagged = predicted == kMalicious;
    if (actual && flagged) ++tp;
    else if (actual) ++fn;
    else if (flagged) ++fp;
    else ++tn;
  }

  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct EvalReport {
  Confusion overall;
  std::map<std::string, Confusion> by_ext;
  std::uint64_t lambda = 0;
  std::uint64_t age_max = 0;
  std::uint64_t seed = 0;
  std::uint64_t trials = 1;
};

/// `classify` maps a dataset row to a predicted label.
template <class Classifier>
EvalReport evaluate(const Classifier& classify, const Dataset& data, std::span<const std::size_t> indices,
                    bool group_by_ext) {
  if (indices.empty()) throw SplitError("evaluation set is empty");
  EvalReport report;
  for (std::size_t i : indices) {
    const Row& r = data.rows.at(i);
    const std::string predicted = classify(r);
    report.overall.add(r.label, predicted);
    if (group_by_ext) report.by_ext[r.ext].add(r.label, predicted);
  }
  return report;
}

inline EvalReport evaluate(const soinn::Network& net, const Dataset& data, std::span<const std::size_t> indices,
                           bool group_by_ext) {
  auto report = evaluate([&net](const Row& r) { return net.classify(r.values).label; }, data, indices,
                         group_by_ext);
  report.lambda = net.params().lambda;
  report.age_max = net.params().age_max;
  report.seed = net.params().rng_seed;
  return report;
}

inline std::vector<std::size_t> all_indices(const Dataset& data) {
  std::vector<std::size_t> idx(data.rows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

/// Train on a fresh split and init drawn from `seed`, evaluate on the held-out part.
inline EvalReport run_trial(const Dataset& data, soinn::TrainParams params, double train_fraction,
                            std::uint64_t seed) {
  params.rng_seed = seed;
  const auto res = train(data, params, {train_fraction, seed});
  return evaluate(res.network, data, res.held_out_indices, false);
}

struct SweepCell {
  std::uint64_t lambda = 0;
  std::uint64_t age_max = 0;
  std::vector<double> accuracies;  // one per trial
  double mean_accuracy = 0.0;
  double seconds = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // lambda-major
  std::uint64_t trials = 0;
  std::uint64_t master_seed = 0;

  double spread() const {
    if (cells.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
      return a.mean_accuracy < b.mean_accuracy;
    });
    return hi->mean_accuracy - lo->mean_accuracy;
  }
};

/// Trial t of every cell uses seed master_seed + t.
inline SweepResult sweep(const Dataset& data, std::span<const std::uint64_t> lambdas,
                         std::span<const std::uint64_t> ages, std::uint64_t trials,
                         const soinn::TrainParams& base, double train_fraction, std::uint64_t master_seed) {
  if (trials < 1) throw RangeError("sweep needs at least one trial");
  SweepResult out;
  out.trials = trials;
  out.master_seed = master_seed;
  for (std::uint64_t lambda : lambdas) {
    for (std::uint64_t age : ages) {
      SweepCell cell;
      cell.lambda = lambda;
      cell.age_max = age;
      soinn::TrainParams p = base;
      p.lambda = lambda;
      p.age_max = age;
      const auto start = std::chrono::steady_clock::now();
      for (std::uint64_t t = 0; t < trials; ++t) {
        cell.accuracies.push_back(run_trial(data, p, train_fraction, master_seed + t).overall.accuracy());
      }
      cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      double sum = 0.0;
      for (double a : cell.accuracies) sum += a;
      cell.mean_accuracy = sum / static_cast<double>(trials);
      out.cells.push_back(std::move(cell));
    }
  }
  return out;
}

}  // namespace binsoinn::pipeline

// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>  // nlohmann/json, vendored

#include "binsoinn/binviz.hpp"
#include "binsoinn/features.hpp"
#include "binsoinn/model_store.hpp"
#include "binsoinn/pipeline.hpp"
#include "binsoinn/png.hpp"
#include "binsoinn/soinn.hpp"

/// Command line front end. `run` never calls std::exit and writes only to the
/// given streams, so it can be driven from tests.
namespace binsoinn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitMalicious = 2;

namespace detail {

using nlohmann::json;
namespace fs = std::filesystem;

inline json confusion_json(const pipeline::Confusion& c) {
  return {{"tp", c.tp},           {"tn", c.tn},           {"fp", c.fp},
          {"fn", c.fn},           {"total", c.total()},   {"accuracy", c.accuracy()},
          {"fp_rate", c.fp_rate()}, {"fn_rate", c.fn_rate()}};
}

inline json report_json(const pipeline::EvalReport& r) {
  json by_ext = json::object();
  for (const auto& [ext, c] : r.by_ext) by_ext[ext] = confusion_json(c);
  return {{"overall", confusion_json(r.overall)},
          {"by_ext", by_ext},
          {"meta", {{"lambda", r.lambda}, {"age_max", r.age_max}, {"seed", r.seed}, {"trials", r.trials}}}};
}

inline void print_confusion_row(std::ostream& out, const std::string& name, const pipeline::Confusion& c) {
  out << std::left << std::setw(10) << name << std::right << std::setw(6) << c.total() << std::setw(6) << c.tp
      << std::setw(6) << c.tn << std::setw(6) << c.fp << std::setw(6) << c.fn << std::fixed
      << std::setprecision(4) << std::setw(10) << c.accuracy() << std::setw(10) << c.fp_rate() << std::setw(10)
      << c.fn_rate() << '\n';
  out.unsetf(std::ios::fixed);
}

inline void print_report(std::ostream& out, const pipeline::EvalReport& r) {
  out << std::left << std::setw(10) << "group" << std::right << std::setw(6) << "n" << std::setw(6) << "TP"
      << std::setw(6) << "TN" << std::setw(6) << "FP" << std::setw(6) << "FN" << std::setw(10) << "accuracy"
      << std::setw(10) << "fp_rate" << std::setw(10) << "fn_rate" << '\n';
  print_confusion_row(out, "overall", r.overall);
  for (const auto& [ext, c] : r.by_ext) print_confusion_row(out, "." + ext, c);
}

inline std::vector<std::uint64_t> parse_list(const std::string& text, const char* what) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size() || v == 0) {
      throw ParseError(std::string("bad ") + what + " value '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ParseError(std::string("empty ") + what + " list");
  return out;
}

inline std::vector<std::pair<fs::path, std::string>> labeled_roots(const std::string& benign,
                                                                   const std::string& malicious) {
  std::vector<std::pair<fs::path, std::string>> roots;
  if (!benign.empty()) roots.emplace_back(benign, pipeline::kBenign);
  if (!malicious.empty()) roots.emplace_back(malicious, pipeline::kMalicious);
  return roots;
}

inline pipeline::Dataset load_corpus(const std::vector<std::pair<fs::path, std::string>>& roots,
                                     const pipeline::FeaturizeOptions& opts, std::ostream& err) {
  const auto corpus = pipeline::ingest(roots);
  for (const auto& s : corpus.skipped) err << "warning: skipped " << s.path.string() << ": " << s.reason << '\n';
  if (corpus.samples.empty()) err << "warning: no input files found\n";
  auto data = pipeline::featurize(corpus.samples, opts);
  for (const auto& f : data.failures) err << "warning: failed " << f.path.string() << ": " << f.reason << '\n';
  return data;
}

/// A model is either one file or a directory holding `<ext>.json` per extension.
struct ModelSet {
  std::map<std::string, model_store::LoadedModel> by_ext;  // "" for a single model

  const model_store::LoadedModel& for_ext(const std::string& ext) const {
    if (auto it = by_ext.find(""); it != by_ext.end()) return it->second;
    auto it = by_ext.find(ext);
    if (it == by_ext.end()) throw StateError("no per-extension model for '." + ext + "'");
    return it->second;
  }
  const model_store::LoadedModel& any() const { return by_ext.begin()->second; }
};

inline model_store::LoadedModel load_checked(const fs::path& path, const std::string& variant) {
  auto model = model_store::load(path);
  if (model.provenance.palette_hash != palette_hash()) {
    throw ProvenanceError("model palette " + model.provenance.palette_hash + " does not match " + palette_hash());
  }
  if (!variant.empty() && model.provenance.extractor != variant) {
    throw ProvenanceError("model was trained with extractor '" + model.provenance.extractor +
                          "', session uses '" + variant + "'");
  }
  parse_extractor_variant(model.provenance.extractor);
  return model;
}

inline ModelSet load_models(const fs::path& path, const std::string& variant) {
  ModelSet set;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.path().extension() == ".json") {
        set.by_ext.emplace(entry.path().stem().string(), load_checked(entry.path(), variant));
      }
    }
    if (set.by_ext.empty()) throw IoError(path.string(), "no per-extension models in directory");
    const auto& first = set.any().provenance;
    for (const auto& [ext, m] : set.by_ext) {
      if (!(m.provenance == first)) throw ProvenanceError("per-extension models disagree on provenance");
    }
  } else {
    set.by_ext.emplace("", load_checked(path, variant));
  }
  return set;
}

struct Options {
  std::uint64_t seed = 0;
  bool json = false;
  std::string file;
  std::string output;
  std::uint32_t max_side = hilbert::kDefaultMaxSide;
  std::string variant;
  unsigned threads = 0;
  std::vector<std::string> dirs;
  std::string benign;
  std::string malicious;
  bool color_stats = false;
  std::uint64_t lambda = 290;
  std::uint64_t age_max = 170;
  double split = 0.8;
  bool per_ext = false;
  std::string isolated = "max";
  double denoise_c = 0.5;
  std::string init = "random";
  std::string model;
  bool by_ext = false;
  std::string dataset;
  std::string lambdas = "100,200,290";
  std::string ages = "50,100,170";
  std::uint64_t trials = 3;
};

inline ExtractorVariant session_variant(const Options& o) {
  return o.variant.empty() ? ExtractorVariant::Rgb332 : parse_extractor_variant(o.variant);
}

inline soinn::TrainParams train_params(const Options& o) {
  soinn::TrainParams p;
  p.lambda = o.lambda;
  p.age_max = o.age_max;
  p.rng_seed = o.seed;
  p.denoise_c = o.denoise_c;
  p.isolated_threshold = soinn::parse_isolated_threshold(o.isolated);
  p.validate();
  return p;
}

inline int cmd_render(const Options& o, std::ostream& out) {
  RenderOptions ro;
  ro.max_side = o.max_side;
  const auto img = render_file(o.file, ro);
  write_png(img, o.output);
  if (o.json) {
    out << json{{"output", o.output}, {"side", img.side}, {"source_len", img.source_len}}.dump() << '\n';
  } else {
    out << "wrote " << o.output << " (" << img.side << "x" << img.side << ", " << img.source_len << " bytes)\n";
  }
  return kExitOk;
}

inline int cmd_featurize(const Options& o, std::ostream& out, std::ostream& err) {
  auto roots = labeled_roots(o.benign, o.malicious);
  for (const auto& d : o.dirs) roots.emplace_back(d, "unknown");
  if (roots.empty()) throw ParseError("featurize needs at least one input directory");
  const auto data = load_corpus(roots, {o.max_side, session_variant(o), o.threads}, err);
  {
    std::ofstream csv(o.output, std::ios::binary | std::ios::trunc);
    if (!csv) throw IoError(o.output, "cannot open for writing");
    pipeline::write_csv(csv, data);
    if (!csv) throw IoError(o.output, "write failed");
  }
  json doc = {{"output", o.output}, {"rows", data.rows.size()}, {"failures", data.failures.size()}};
  if (o.color_stats) {
    json stats = json::object();
    for (const auto& [label, fr] : pipeline::color_stats(data)) {
      json row = json::object();
      for (std::size_t c = 0; c < kColorClasses.size(); ++c) row[to_string(kColorClasses[c])] = fr[c];
      stats[label] = row;
    }
    doc["color_stats"] = stats;
  }
  if (o.json) {
    out << doc.dump() << '\n';
    return kExitOk;
  }
  out << "wrote " << data.rows.size() << " vectors to " << o.output << '\n';
  if (o.color_stats) {
    out << "mean color frequency per label:\n";
    for (const auto& [label, row] : doc["color_stats"].items()) {
      out << "  " << label << ':';
      for (const auto& [cls, v] : row.items()) out << ' ' << cls << '=' << v.get<double>();
      out << '\n';
    }
  }
  return kExitOk;
}

inline int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const auto params = train_params(o);
  const auto variant = session_variant(o);
  const auto data = load_corpus(labeled_roots(o.benign, o.malicious), {o.max_side, variant, o.threads}, err);
  const model_store::Provenance prov{std::string(to_string(variant)), palette_hash(), o.max_side};
  const auto init = o.init == "first" ? soinn::InitMode::FirstDistinct : soinn::InitMode::SeededRandom;
  const pipeline::SplitConfig split{o.split, o.seed};

  json summary = json::object();
  std::vector<std::string> warnings;
  pipeline::EvalReport report;
  std::size_t held_out = 0;
  if (o.per_ext) {
    const auto models = pipeline::train_per_extension(data, params, split, &warnings, init);
    if (models.empty()) throw pipeline::SplitError("no extension had enough data to train");
    fs::create_directories(o.output);
    json per = json::object();
    for (const auto& [ext, res] : models) {
      model_store::save(res.network, prov, fs::path(o.output) / (ext + ".json"));
      per[ext] = {{"nodes", res.network.node_count()}, {"edges", res.network.edge_count()},
                  {"train_size", res.train_indices.size()}, {"held_out_size", res.held_out_indices.size()}};
      for (const auto& w : res.warnings) warnings.push_back("." + ext + ": " + w);
      if (!res.held_out_indices.empty()) {
        const auto r = pipeline::evaluate(res.network, data, res.held_out_indices, true);
        report.overall.tp += r.overall.tp;
        report.overall.tn += r.overall.tn;
        report.overall.fp += r.overall.fp;
        report.overall.fn += r.overall.fn;
        for (const auto& [e, c] : r.by_ext) report.by_ext[e] = c;
        held_out += res.held_out_indices.size();
      }
    }
    summary["models"] = per;
  } else {
    const auto res = pipeline::train(data, params, split, init);
    model_store::save(res.network, prov, o.output);
    warnings.insert(warnings.end(), res.warnings.begin(), res.warnings.end());
    summary["nodes"] = res.network.node_count();
    summary["edges"] = res.network.edge_count();
    summary["train_size"] = res.train_indices.size();
    summary["held_out_size"] = res.held_out_indices.size();
    if (!res.held_out_indices.empty()) report = pipeline::evaluate(res.network, data, res.held_out_indices, true);
    held_out = res.held_out_indices.size();
  }
  report.lambda = params.lambda;
  report.age_max = params.age_max;
  report.seed = params.rng_seed;
  for (const auto& w : warnings) err << "warning: " << w << '\n';

  summary["output"] = o.output;
  summary["warnings"] = warnings;
  if (held_out > 0) summary["held_out_report"] = report_json(report);
  if (o.json) {
    out << summary.dump() << '\n';
    return kExitOk;
  }
  out << "saved model to " << o.output << '\n';
  if (summary.contains("nodes")) {
    out << "nodes " << summary["nodes"] << ", edges " << summary["edges"] << ", trained on "
        << summary["train_size"] << " vectors\n";
  }
  if (held_out > 0) {
    out << "held-out evaluation (" << held_out << " vectors):\n";
    print_report(out, report);
  }
  return kExitOk;
}

inline int cmd_classify(const Options& o, std::ostream& out) {
  const auto models = load_models(o.model, o.variant);
  const std::string ext = extension_of(o.file);
  const auto& model = models.for_ext(ext);
  const auto fv = pipeline::featurize_file(o.file, model.provenance.max_side,
                                           parse_extractor_variant(model.provenance.extractor));
  const auto v = model.network.classify(fv);
  json votes = json::object();
  for (const auto& [label, n] : v.votes) votes[label] = n;
  const json doc = {{"label", v.label},
                    {"distance", v.distance},
                    {"winner_id", v.winner_id},
                    {"votes", votes},
                    {"model_provenance", model_store::provenance_to_json(model.provenance)}};
  out << doc.dump() << '\n';
  return v.label == pipeline::kMalicious ? kExitMalicious : kExitOk;
}

inline int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  const auto models = load_models(o.model, o.variant);
  const auto& prov = models.any().provenance;
  const auto data = load_corpus(labeled_roots(o.benign, o.malicious),
                                {prov.max_side, parse_extractor_variant(prov.extractor), o.threads}, err);
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    if (models.by_ext.contains("") || models.by_ext.contains(data.rows[i].ext)) {
      usable.push_back(i);
    } else {
      err << "warning: no model for " << data.rows[i].path << '\n';
    }
  }
  if (usable.empty()) throw pipeline::SplitError("nothing to evaluate");
  auto report = pipeline::evaluate(
      [&](const pipeline::Row& r) { return models.for_ext(r.ext).network.classify(r.values).label; }, data,
      usable, o.by_ext);
  const auto& params = models.any().network.params();
  report.lambda = params.lambda;
  report.age_max = params.age_max;
  report.seed = params.rng_seed;
  if (o.json) {
    out << report_json(report).dump() << '\n';
  } else {
    print_report(out, report);
  }
  return kExitOk;
}

inline int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  auto base = train_params(o);
  pipeline::Dataset data;
  if (!o.dataset.empty()) {
    std::ifstream in(o.dataset);
    if (!in) throw IoError(o.dataset, "cannot open for reading");
    data = pipeline::read_csv(in);
  } else {
    data = load_corpus(labeled_roots(o.benign, o.malicious), {o.max_side, session_variant(o), o.threads}, err);
  }
  const auto lambdas = parse_list(o.lambdas, "lambda");
  const auto ages = parse_list(o.ages, "age");
  const auto res = pipeline::sweep(data, lambdas, ages, o.trials, base, o.split, o.seed);
  if (o.json) {
    json cells = json::array();
    for (const auto& c : res.cells) {
      cells.push_back({{"lambda", c.lambda}, {"age_max", c.age_max}, {"mean_accuracy", c.mean_accuracy},
                       {"accuracies", c.accuracies}, {"seconds", c.seconds}});
    }
    out << json{{"trials", res.trials}, {"master_seed", res.master_seed}, {"spread", res.spread()}, {"cells", cells}}
               .dump()
        << '\n';
    return kExitOk;
  }
  out << "mean accuracy over " << res.trials << " trials (rows: lambda, columns: A)\n" << std::setw(8) << "";
  for (auto a : ages) out << std::setw(10) << a;
  out << '\n';
  std::size_t k = 0;
  for (auto l : lambdas) {
    out << std::setw(8) << l;
    for (std::size_t j = 0; j < ages.size(); ++j, ++k) {
      out << std::fixed << std::setprecision(4) << std::setw(10) << res.cells[k].mean_accuracy;
    }
    out.unsetf(std::ios::fixed);
    out << '\n';
  }
  out << "spread " << res.spread() << '\n';
  return kExitOk;
}

}  // namespace detail

/// Runs one invocation. Exit codes: 0 success or benign verdict, 1 error,
/// 2 malicious verdict.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  detail::Options o;
  CLI::App app{"Malware triage from Hilbert-curve byte images and a SOINN classifier", "binsoinn"};
  app.require_subcommand(1);

  const auto common = [&o](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    sub->add_flag("--json", o.json, "Machine-readable output");
  };
  const auto corpus = [&o](CLI::App* sub) {
    sub->add_option("--benign", o.benign, "Directory of benign files");
    sub->add_option("--malicious", o.malicious, "Directory of malicious files");
    sub->add_option("--threads", o.threads, "Feature extraction workers (0 = all cores)")->capture_default_str();
  };
  const auto imaging = [&o](CLI::App* sub) {
    sub->add_option("--max-side", o.max_side, "Largest image side (power of two)")->capture_default_str();
    sub->add_option("--variant", o.variant, "Histogram variant: rgb332 or byte-value");
  };
  const auto training = [&o](CLI::App* sub) {
    sub->add_option("--lambda", o.lambda, "Denoise period")->capture_default_str();
    sub->add_option("--age-max", o.age_max, "Edge age threshold A")->capture_default_str();
    sub->add_option("--split", o.split, "Training fraction")->capture_default_str();
    sub->add_option("--isolated-threshold", o.isolated, "Threshold of a node without neighbors: max or min")
        ->check(CLI::IsMember({"max", "min"}))
        ->capture_default_str();
    sub->add_option("--denoise-c", o.denoise_c, "Insignificance factor of mean win count")->capture_default_str();
  };

  auto* render = app.add_subcommand("render", "Render a file to a PNG");
  render->add_option("file", o.file, "Input file")->required();
  render->add_option("-o,--output", o.output, "PNG path")->required();
  render->add_option("--max-side", o.max_side, "Largest image side (power of two)")->capture_default_str();
  common(render);

  auto* featurize = app.add_subcommand("featurize", "Extract feature vectors to CSV");
  featurize->add_option("dirs", o.dirs, "Unlabeled input directories");
  featurize->add_option("-o,--output", o.output, "CSV path")->required();
  featurize->add_flag("--color-stats", o.color_stats, "Report mean color frequency per label");
  corpus(featurize);
  imaging(featurize);
  common(featurize);

  auto* train = app.add_subcommand("train", "Train and save a model");
  corpus(train);
  imaging(train);
  training(train);
  train->add_option("-o,--output", o.output, "Model path (directory with --per-ext)")->required();
  train->add_flag("--per-ext", o.per_ext, "Train one model per file extension");
  train->add_option("--init", o.init, "Initial nodes: random or first")
      ->check(CLI::IsMember({"random", "first"}))
      ->capture_default_str();
  common(train);

  auto* classify = app.add_subcommand("classify", "Classify one file; exit 2 when malicious");
  classify->add_option("file", o.file, "Input file")->required();
  classify->add_option("--model", o.model, "Model file or per-extension directory")->required();
  classify->add_option("--variant", o.variant, "Expected histogram variant");
  common(classify);

  auto* eval = app.add_subcommand("eval", "Evaluate a model on labeled directories");
  eval->add_option("--model", o.model, "Model file or per-extension directory")->required();
  eval->add_flag("--by-ext", o.by_ext, "Group the report by file extension");
  eval->add_option("--variant", o.variant, "Expected histogram variant");
  corpus(eval);
  common(eval);

  auto* sweep = app.add_subcommand("sweep", "Monte Carlo accuracy over a (lambda, A) grid");
  corpus(sweep);
  imaging(sweep);
  training(sweep);
  sweep->add_option("--dataset", o.dataset, "CSV from featurize instead of directories");
  sweep->add_option("--lambdas", o.lambdas, "Comma-separated lambda values")->capture_default_str();
  sweep->add_option("--ages", o.ages, "Comma-separated A values")->capture_default_str();
  sweep->add_option("--trials", o.trials, "Trials per cell")->capture_default_str();
  common(sweep);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitError;
  }

  try {
    if (*render) return detail::cmd_render(o, out);
    if (*featurize) return detail::cmd_featurize(o, out, err);
    if (*train) return detail::cmd_train(o, out, err);
    if (*classify) return detail::cmd_classify(o, out);
    if (*eval) return detail::cmd_eval(o, out, err);
    if (*sweep) return detail::cmd_sweep(o, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace binsoinn::cli

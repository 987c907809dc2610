// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>  // nlohmann/json, vendored

#include "binsoinn/binviz.hpp"
#include "binsoinn/error.hpp"
#include "binsoinn/features.hpp"
#include "binsoinn/soinn.hpp"

namespace binsoinn::model_store {

inline constexpr int kFormatVersion = 1;

/// Feature semantics a model was trained under.
struct Provenance {
  std::string extractor = std::string(to_string(ExtractorVariant::Rgb332));
  std::string palette_hash = binsoinn::palette_hash();
  std::uint32_t max_side = hilbert::kDefaultMaxSide;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct LoadedModel {
  soinn::Network network;
  Provenance provenance;
};

inline nlohmann::json provenance_to_json(const Provenance& p) {
  return {{"extractor", p.extractor}, {"palette_hash", p.palette_hash}, {"max_side", p.max_side}};
}

/// Canonical text form: sorted keys, nodes by id, edges by (a, b), shortest
/// round-trip doubles, trailing newline.
inline std::string serialize(const soinn::Network& net, const Provenance& prov) {
  using nlohmann::json;
  const auto& p = net.params();
  if (p.layer2_threshold && !std::isfinite(*p.layer2_threshold)) {
    throw RangeError("cannot persist a non-finite layer-2 threshold");
  }
  if (net.constant_threshold() && !std::isfinite(*net.constant_threshold())) {
    throw RangeError("cannot persist a non-finite constant threshold");
  }
  json params = {
      {"lambda", p.lambda},
      {"age_max", p.age_max},
      {"layer2_threshold", p.layer2_threshold ? json(*p.layer2_threshold) : json(nullptr)},
      {"rng_seed", p.rng_seed},
      {"denoise_c", p.denoise_c},
      {"isolated_threshold", std::string(soinn::to_string(p.isolated_threshold))},
  };
  json nodes = json::array();
  for (const auto& [id, n] : net.nodes()) {
    json votes = json::object();
    for (const auto& [label, count] : n.label_votes) votes[label] = count;
    nodes.push_back({{"id", id}, {"weight", n.weight}, {"win_count", n.win_count}, {"label_votes", votes}});
  }
  json edges = json::array();
  for (const auto& e : net.edges()) edges.push_back({{"a", e.a}, {"b", e.b}, {"age", e.age}});

  json doc = {
      {"format_version", kFormatVersion},
      {"dimension", net.dimension()},
      {"params", std::move(params)},
      {"constant_threshold",
       net.constant_threshold() ? json(*net.constant_threshold()) : json(nullptr)},
      {"steps_seen", net.steps_seen()},
      {"next_id", net.next_id()},
      {"nodes", std::move(nodes)},
      {"edges", std::move(edges)},
      {"provenance", provenance_to_json(prov)},
  };
  return doc.dump() + "\n";
}

inline LoadedModel deserialize(const std::string& text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed model: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version")) {
    throw ParseError("model has no format_version");
  }
  if (!doc["format_version"].is_number_integer() || doc["format_version"].get<int>() != kFormatVersion) {
    throw VersionError("unsupported model format_version " + doc["format_version"].dump() +
                       " (expected " + std::to_string(kFormatVersion) + ")");
  }
  try {
    const json& jp = doc.at("params");
    soinn::TrainParams params;
    params.lambda = jp.at("lambda").get<std::uint64_t>();
    params.age_max = jp.at("age_max").get<std::uint64_t>();
    if (!jp.at("layer2_threshold").is_null()) params.layer2_threshold = jp.at("layer2_threshold").get<double>();
    params.rng_seed = jp.at("rng_seed").get<std::uint64_t>();
    params.denoise_c = jp.at("denoise_c").get<double>();
    params.isolated_threshold = soinn::parse_isolated_threshold(jp.at("isolated_threshold").get<std::string>());

    std::optional<double> constant;
    if (!doc.at("constant_threshold").is_null()) constant = doc.at("constant_threshold").get<double>();

    std::vector<soinn::Node> nodes;
    for (const json& jn : doc.at("nodes")) {
      soinn::Node n;
      n.id = jn.at("id").get<soinn::NodeId>();
      n.weight = jn.at("weight").get<std::vector<double>>();
      n.win_count = jn.at("win_count").get<std::uint64_t>();
      for (const auto& [label, count] : jn.at("label_votes").items()) {
        n.label_votes[label] = count.get<std::uint64_t>();
      }
      nodes.push_back(std::move(n));
    }
    std::vector<soinn::Edge> edges;
    for (const json& je : doc.at("edges")) {
      edges.push_back({je.at("a").get<soinn::NodeId>(), je.at("b").get<soinn::NodeId>(),
                       je.at("age").get<std::uint64_t>()});
    }

    const json& jprov = doc.at("provenance");
    Provenance prov{jprov.at("extractor").get<std::string>(), jprov.at("palette_hash").get<std::string>(),
                    jprov.at("max_side").get<std::uint32_t>()};

    auto net = soinn::Network::restore(doc.at("dimension").get<std::size_t>(), std::move(params), constant,
                                       doc.at("steps_seen").get<std::uint64_t>(),
                                       doc.at("next_id").get<soinn::NodeId>(), std::move(nodes), edges);
    return {std::move(net), std::move(prov)};
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model: ") + e.what());
  } catch (const RangeError& e) {
    throw IntegrityError(std::string("invalid model parameters: ") + e.what());
  }
}

inline void save(const soinn::Network& net, const Provenance& prov, const std::filesystem::path& path) {
  const std::string text = serialize(net, prov);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  out.close();
  if (!out) throw IoError(path.string(), "write failed");
}

/// Loads and validates a model. When `expected` is given, a model built with
/// a different extractor or palette is rejected.
inline LoadedModel load(const std::filesystem::path& path,
                        const std::optional<Provenance>& expected = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  LoadedModel model = deserialize(buf.str());
  if (expected) {
    if (model.provenance.extractor != expected->extractor) {
      throw ProvenanceError("model was trained with extractor '" + model.provenance.extractor +
                            "', session uses '" + expected->extractor + "'");
    }
    if (model.provenance.palette_hash != expected->palette_hash) {
      throw ProvenanceError("model palette hash " + model.provenance.palette_hash +
                            " does not match " + expected->palette_hash);
    }
  }
  return model;
}

}  // namespace binsoinn::model_store

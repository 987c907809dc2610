// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "binsoinn/error.hpp"

/// Self-organizing incremental neural network (first and second layer).
///
/// Nodes carry a prototype weight, a win counter M and a tally of the class
/// labels of the inputs they absorbed. Training is online: every input either
/// becomes a new node (it lies outside the similarity threshold of the winner
/// or the second winner) or strengthens the edge between the two winners,
/// ages the winner's other edges and pulls the winner and its neighbors
/// toward the input. Every lambda steps weakly connected, rarely winning
/// nodes are pruned.
namespace binsoinn::soinn {

using NodeId = std::uint64_t;
using Label = std::string;
using VoteTally = std::map<Label, std::uint64_t>;

/// How the threshold of a node without neighbors is taken over the other nodes.
enum class IsolatedThreshold : std::uint8_t { Max, Min };

constexpr std::string_view to_string(IsolatedThreshold t) noexcept {
  return t == IsolatedThreshold::Max ? "max" : "min";
}

inline IsolatedThreshold parse_isolated_threshold(std::string_view s) {
  if (s == "max") return IsolatedThreshold::Max;
  if (s == "min") return IsolatedThreshold::Min;
  throw ParseError("unknown isolated threshold rule '" + std::string(s) + "'");
}

struct TrainParams {
  std::uint64_t lambda = 100;   // denoise period, in steps
  std::uint64_t age_max = 50;   // edges older than this are dropped
  std::optional<double> layer2_threshold;
  std::uint64_t rng_seed = 0;
  /// Nodes of degree 1-2 winning less than denoise_c * mean(M) are noise.
  double denoise_c = 0.5;
  IsolatedThreshold isolated_threshold = IsolatedThreshold::Max;

  void validate() const {
    if (lambda < 1) throw RangeError("lambda must be >= 1");
    if (age_max < 1) throw RangeError("age_max must be >= 1");
    if (!(denoise_c >= 0.0) || !std::isfinite(denoise_c)) throw RangeError("denoise_c must be finite and >= 0");
    if (layer2_threshold && !(*layer2_threshold > 0.0)) {
      throw RangeError("layer2_threshold must be > 0");
    }
  }

  friend bool operator==(const TrainParams&, const TrainParams&) = default;
};

struct Node {
  NodeId id = 0;
  std::vector<double> weight;
  std::uint64_t win_count = 1;
  VoteTally label_votes;
  std::map<NodeId, std::uint64_t> neighbors;  // neighbor id -> edge age

  /// Most voted label; ties go to the lexicographically smallest.
  std::optional<Label> majority_label() const {
    std::optional<Label> best;
    std::uint64_t best_count = 0;
    for (const auto& [label, count] : label_votes) {
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    }
    return best;
  }

  friend bool operator==(const Node&, const Node&) = default;
};

struct Edge {
  NodeId a = 0;  // a < b
  NodeId b = 0;
  std::uint64_t age = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Winners {
  NodeId first = 0;
  NodeId second = 0;
  double first_distance = 0.0;
  double second_distance = 0.0;
};

struct StepReport {
  enum class Outcome : std::uint8_t { Inserted, Connected };

  Outcome outcome = Outcome::Connected;
  Winners winners;
  double first_threshold = 0.0;
  double second_threshold = 0.0;
  std::optional<NodeId> inserted;
  std::vector<std::pair<NodeId, NodeId>> pruned_edges;
  std::vector<NodeId> denoised;  // non-empty only on denoise steps
};

struct Verdict {
  Label label;
  NodeId winner_id = 0;
  double distance = 0.0;
  VoteTally votes;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) noexcept {
  return std::sqrt(squared_distance(a, b));
}

class Network {
 public:
  /// Two nodes with the given weights and no edges.
  static Network init(std::span<const double> first, std::span<const double> second,
                      TrainParams params, std::optional<Label> first_label = std::nullopt,
                      std::optional<Label> second_label = std::nullopt) {
    params.validate();
    if (first.size() != second.size()) {
      throw DimensionError("initial weights have lengths " + std::to_string(first.size()) + " and " +
                           std::to_string(second.size()));
    }
    if (first.empty()) throw DimensionError("weights must have at least one component");
    if (std::equal(first.begin(), first.end(), second.begin())) {
      throw DegenerateInitError("initial weights are identical");
    }
    Network net;
    net.dimension_ = first.size();
    net.params_ = std::move(params);
    net.add_node(first, first_label);
    net.add_node(second, second_label);
    return net;
  }

  /// Rebuilds a network from persisted parts and validates every invariant.
  static Network restore(std::size_t dimension, TrainParams params,
                         std::optional<double> constant_threshold, std::uint64_t steps_seen,
                         NodeId next_id, std::vector<Node> nodes, const std::vector<Edge>& edges) {
    params.validate();
    Network net;
    net.dimension_ = dimension;
    net.params_ = std::move(params);
    net.constant_threshold_ = constant_threshold;
    net.steps_seen_ = steps_seen;
    net.next_id_ = next_id;
    for (auto& n : nodes) {
      n.neighbors.clear();
      const NodeId id = n.id;
      if (!net.nodes_.emplace(id, std::move(n)).second) {
        throw IntegrityError("duplicate node id " + std::to_string(id));
      }
    }
    for (const Edge& e : edges) {
      const auto a = net.nodes_.find(e.a);
      const auto b = net.nodes_.find(e.b);
      if (a == net.nodes_.end() || b == net.nodes_.end()) {
        throw IntegrityError("edge (" + std::to_string(e.a) + "," + std::to_string(e.b) +
                             ") references a missing node");
      }
      if (e.a == e.b) throw IntegrityError("self edge on node " + std::to_string(e.a));
      if (a->second.neighbors.contains(e.b)) {
        throw IntegrityError("duplicate edge (" + std::to_string(e.a) + "," + std::to_string(e.b) + ")");
      }
      a->second.neighbors[e.b] = e.age;
      b->second.neighbors[e.a] = e.age;
    }
    net.check_invariants();
    return net;
  }

  std::size_t dimension() const noexcept { return dimension_; }
  const TrainParams& params() const noexcept { return params_; }
  std::optional<double> constant_threshold() const noexcept { return constant_threshold_; }
  std::uint64_t steps_seen() const noexcept { return steps_seen_; }
  NodeId next_id() const noexcept { return next_id_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  const std::map<NodeId, Node>& nodes() const noexcept { return nodes_; }

  const Node& node(NodeId id) const {
    const auto it = nodes_.find(id);
    if (it == nodes_.end()) throw RangeError("no node with id " + std::to_string(id));
    return it->second;
  }

  /// Edges with a < b, ordered by (a, b).
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (const auto& [id, n] : nodes_) {
      for (const auto& [nb, age] : n.neighbors) {
        if (id < nb) out.push_back({id, nb, age});
      }
    }
    return out;
  }

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (const auto& [id, n] : nodes_) twice += n.neighbors.size();
    return twice / 2;
  }

  /// Switches the network to a fixed similarity threshold (second layer).
  void set_constant_threshold(double t) {
    if (std::isnan(t) || t < 0.0) throw RangeError("constant threshold must be >= 0");
    constant_threshold_ = t;
  }

  /// Nearest and second nearest node; ties go to the smaller id.
  Winners winners(std::span<const double> u) const {
    check_dimension(u);
    if (nodes_.size() < 2) throw StateError("winner search needs at least two nodes");
    const double inf = std::numeric_limits<double>::infinity();
    double best = inf;
    double second = inf;
    NodeId best_id = 0;
    NodeId second_id = 0;
    bool have_best = false;
    bool have_second = false;
    for (const auto& [id, n] : nodes_) {
      const double d = squared_distance(u, n.weight);
      if (!have_best || d < best) {
        second = best;
        second_id = best_id;
        have_second = have_best;
        best = d;
        best_id = id;
        have_best = true;
      } else if (!have_second || d < second) {
        second = d;
        second_id = id;
        have_second = true;
      }
    }
    return {best_id, second_id, std::sqrt(best), std::sqrt(second)};
  }

  /// Largest distance to a neighbor; for a node without neighbors the
  /// distance to the farthest (or, with IsolatedThreshold::Min, the nearest)
  /// other node. A second-layer network returns its constant instead.
  double similarity_threshold(NodeId i) const {
    if (constant_threshold_) return *constant_threshold_;
    const Node& ni = node(i);
    if (nodes_.size() < 2) throw StateError("similarity threshold needs at least two nodes");
    if (!ni.neighbors.empty()) {
      double t = 0.0;
      for (const auto& [j, age] : ni.neighbors) {
        t = std::max(t, squared_distance(ni.weight, nodes_.at(j).weight));
      }
      return std::sqrt(t);
    }
    const bool take_max = params_.isolated_threshold == IsolatedThreshold::Max;
    double t = take_max ? 0.0 : std::numeric_limits<double>::infinity();
    for (const auto& [j, nj] : nodes_) {
      if (j == i) continue;
      const double d = squared_distance(ni.weight, nj.weight);
      t = take_max ? std::max(t, d) : std::min(t, d);
    }
    return std::sqrt(t);
  }

  StepReport train_step(std::span<const double> u, const std::optional<Label>& label = std::nullopt) {
    check_dimension(u);
    StepReport report;
    report.winners = winners(u);
    const NodeId l1 = report.winners.first;
    const NodeId l2 = report.winners.second;
    report.first_threshold = similarity_threshold(l1);
    report.second_threshold = similarity_threshold(l2);

    if (report.winners.first_distance > report.first_threshold ||
        report.winners.second_distance > report.second_threshold) {
      report.outcome = StepReport::Outcome::Inserted;
      report.inserted = add_node(u, label);
    } else {
      report.outcome = StepReport::Outcome::Connected;
      Node& winner = nodes_.at(l1);
      for (auto& [j, age] : winner.neighbors) {
        if (j == l2) continue;
        ++age;
        ++nodes_.at(j).neighbors.at(l1);
      }
      winner.neighbors[l2] = 0;
      nodes_.at(l2).neighbors[l1] = 0;

      for (auto it = winner.neighbors.begin(); it != winner.neighbors.end();) {
        if (it->second > params_.age_max) {
          nodes_.at(it->first).neighbors.erase(l1);
          report.pruned_edges.emplace_back(std::min(l1, it->first), std::max(l1, it->first));
          it = winner.neighbors.erase(it);
        } else {
          ++it;
        }
      }

      ++winner.win_count;
      if (label) ++winner.label_votes[*label];

      const double m = static_cast<double>(winner.win_count);
      move_toward(winner.weight, u, 1.0 / m);
      for (const auto& [j, age] : winner.neighbors) {
        move_toward(nodes_.at(j).weight, u, 1.0 / (100.0 * m));
      }
    }

    ++steps_seen_;
    if (steps_seen_ % params_.lambda == 0) report.denoised = denoise();
    return report;
  }

  /// Removes isolated nodes and rarely winning nodes of degree 1 or 2.
  /// Degrees and the mean win count are taken before any removal; the last
  /// two nodes are always kept.
  std::vector<NodeId> denoise() {
    std::vector<NodeId> removed;
    if (nodes_.size() <= 2) return removed;
    double mean_wins = 0.0;
    for (const auto& [id, n] : nodes_) mean_wins += static_cast<double>(n.win_count);
    mean_wins /= static_cast<double>(nodes_.size());
    const double cutoff = params_.denoise_c * mean_wins;

    std::vector<NodeId> doomed;
    for (const auto& [id, n] : nodes_) {
      const std::size_t degree = n.neighbors.size();
      if (degree == 0 || (degree <= 2 && static_cast<double>(n.win_count) < cutoff)) {
        doomed.push_back(id);
      }
    }
    for (NodeId id : doomed) {
      if (nodes_.size() <= 2) break;
      remove_node(id);
      removed.push_back(id);
    }
    return removed;
  }

  /// Label of the nearest node (ties to the smaller id).
  Verdict classify(std::span<const double> u) const {
    check_dimension(u);
    if (nodes_.empty()) throw StateError("cannot classify with an empty network");
    const Node* best = nullptr;
    double best_d = 0.0;
    for (const auto& [id, n] : nodes_) {
      const double d = squared_distance(u, n.weight);
      if (best == nullptr || d < best_d) {
        best = &n;
        best_d = d;
      }
    }
    auto label = best->majority_label();
    if (!label) throw IntegrityError("winning node " + std::to_string(best->id) + " carries no label");
    return {std::move(*label), best->id, std::sqrt(best_d), best->label_votes};
  }

  /// Connected components, each sorted by id, ordered by smallest member.
  std::vector<std::vector<NodeId>> components() const {
    std::vector<std::vector<NodeId>> out;
    std::map<NodeId, bool> seen;
    for (const auto& [id, n] : nodes_) {
      if (seen[id]) continue;
      std::vector<NodeId> comp;
      std::queue<NodeId> frontier;
      frontier.push(id);
      seen[id] = true;
      while (!frontier.empty()) {
        const NodeId cur = frontier.front();
        frontier.pop();
        comp.push_back(cur);
        for (const auto& [nb, age] : nodes_.at(cur).neighbors) {
          if (!seen[nb]) {
            seen[nb] = true;
            frontier.push(nb);
          }
        }
      }
      std::sort(comp.begin(), comp.end());
      out.push_back(std::move(comp));
    }
    return out;
  }

  /// Throws IntegrityError on the first violated structural invariant.
  void check_invariants() const {
    if (dimension_ == 0) throw IntegrityError("network dimension is zero");
    for (const auto& [id, n] : nodes_) {
      const std::string where = "node " + std::to_string(id);
      if (n.id != id) throw IntegrityError(where + " stored under a different id");
      if (id >= next_id_) throw IntegrityError(where + " not below next_id");
      if (n.weight.size() != dimension_) throw IntegrityError(where + " has wrong weight length");
      for (double w : n.weight) {
        if (!std::isfinite(w)) throw IntegrityError(where + " has a non-finite weight");
      }
      if (n.win_count < 1) throw IntegrityError(where + " has win_count 0");
      for (const auto& [nb, age] : n.neighbors) {
        if (nb == id) throw IntegrityError(where + " has a self edge");
        const auto other = nodes_.find(nb);
        if (other == nodes_.end()) throw IntegrityError(where + " has a dangling edge to " + std::to_string(nb));
        const auto back = other->second.neighbors.find(id);
        if (back == other->second.neighbors.end() || back->second != age) {
          throw IntegrityError(where + " edge to " + std::to_string(nb) + " is not symmetric");
        }
        if (age > params_.age_max) throw IntegrityError(where + " edge older than age_max");
      }
    }
  }

  friend bool operator==(const Network&, const Network&) = default;

 private:
  Network() = default;

  void check_dimension(std::span<const double> u) const {
    if (u.size() != dimension_) {
      throw DimensionError("input has length " + std::to_string(u.size()) + ", network expects " +
                           std::to_string(dimension_));
    }
  }

  NodeId add_node(std::span<const double> weight, const std::optional<Label>& label) {
    Node n;
    n.id = next_id_++;
    n.weight.assign(weight.begin(), weight.end());
    if (label) n.label_votes[*label] = 1;
    const NodeId id = n.id;
    nodes_.emplace(id, std::move(n));
    return id;
  }

  void remove_node(NodeId id) {
    const auto it = nodes_.find(id);
    for (const auto& [nb, age] : it->second.neighbors) nodes_.at(nb).neighbors.erase(id);
    nodes_.erase(it);
  }

  static void move_toward(std::vector<double>& w, std::span<const double> u, double rate) noexcept {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += rate * (u[i] - w[i]);
  }

  std::size_t dimension_ = 0;
  TrainParams params_;
  std::optional<double> constant_threshold_;
  std::uint64_t steps_seen_ = 0;
  NodeId next_id_ = 1;
  std::map<NodeId, Node> nodes_;
};

/// A training input that references caller-owned storage.
struct LabeledRef {
  std::span<const double> values;
  std::string_view label;
};

enum class InitMode : std::uint8_t {
  SeededRandom,   // two distinct inputs drawn with params.rng_seed
  FirstDistinct,  // the first input and the next one that differs from it
};

/// Indices of the two inputs used to seed the network.
inline std::pair<std::size_t, std::size_t> pick_initial(std::span<const LabeledRef> inputs,
                                                        InitMode mode, std::uint64_t seed) {
  const auto differs = [&](std::size_t i, std::size_t j) {
    return !std::equal(inputs[i].values.begin(), inputs[i].values.end(), inputs[j].values.begin(),
                       inputs[j].values.end());
  };
  if (inputs.size() < 2) throw DegenerateInitError("need at least two inputs to initialize");
  if (mode == InitMode::FirstDistinct) {
    for (std::size_t j = 1; j < inputs.size(); ++j) {
      if (differs(0, j)) return {0, j};
    }
    throw DegenerateInitError("all inputs are identical");
  }
  std::mt19937_64 rng(seed);
  const std::size_t first = std::uniform_int_distribution<std::size_t>(0, inputs.size() - 1)(rng);
  std::vector<std::size_t> candidates;
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    if (j != first && differs(first, j)) candidates.push_back(j);
  }
  if (candidates.empty()) throw DegenerateInitError("all inputs are identical");
  const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng);
  return {first, candidates[pick]};
}

/// Initializes from two inputs, runs train_step over every input in order
/// and finishes with one denoise pass.
inline Network fit(std::span<const LabeledRef> inputs, const TrainParams& params,
                   InitMode mode = InitMode::SeededRandom) {
  const auto [i, j] = pick_initial(inputs, mode, params.rng_seed);
  Network net = Network::init(inputs[i].values, inputs[j].values, params, Label(inputs[i].label),
                              Label(inputs[j].label));
  for (const LabeledRef& in : inputs) net.train_step(in.values, Label(in.label));
  net.denoise();
  return net;
}

/// Node weights of a trained network with their majority labels, in id
/// order; nodes without votes are labeled "".
inline std::vector<std::pair<std::vector<double>, Label>> layer_outputs(const Network& net) {
  std::vector<std::pair<std::vector<double>, Label>> out;
  out.reserve(net.node_count());
  for (const auto& [id, n] : net.nodes()) out.emplace_back(n.weight, n.majority_label().value_or(""));
  return out;
}

/// Second layer: the first-layer procedure with a fixed similarity threshold.
inline Network train_layer2(std::span<const LabeledRef> inputs, double constant_threshold,
                            TrainParams params, InitMode mode = InitMode::FirstDistinct) {
  if (std::isnan(constant_threshold) || constant_threshold < 0.0) {
    throw RangeError("layer-2 threshold must be >= 0");
  }
  params.layer2_threshold = constant_threshold > 0.0 && std::isfinite(constant_threshold)
                                ? std::optional<double>(constant_threshold)
                                : std::nullopt;
  const auto [i, j] = pick_initial(inputs, mode, params.rng_seed);
  Network net = Network::init(inputs[i].values, inputs[j].values, params, Label(inputs[i].label),
                              Label(inputs[j].label));
  net.set_constant_threshold(constant_threshold);
  for (const LabeledRef& in : inputs) net.train_step(in.values, Label(in.label));
  net.denoise();
  return net;
}

}  // namespace binsoinn::soinn

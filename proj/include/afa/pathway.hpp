#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "afa/env.hpp"
#include "json.hpp"

namespace afa::metrics {

/// Aggregate of greedy rollouts. A node is the SET of acquired slots
/// (as a bitmask); an edge adds one slot to that set.
class PathwayTree {
 public:
  struct Node {
    long count = 0;     // episodes that passed through this set
    long terminal = 0;  // episodes that stopped here
  };
  struct Edge {
    int slot = -1;
    long count = 0;
  };
  using EdgeKey = std::pair<std::uint32_t, std::uint32_t>;  // (from, to)

  PathwayTree(std::vector<std::string> slot_names);

  /// Re-acquiring a slot already in the set is not a move in the tree and
  /// is skipped.
  void add(const env::EpisodeRecord& episode);

  const std::map<std::uint32_t, Node>& nodes() const { return nodes_; }
  const std::map<EdgeKey, Edge>& edges() const { return edges_; }
  const Node& node(std::uint32_t bits) const;
  long n_episodes() const { return n_episodes_; }
  const std::vector<std::string>& slot_names() const { return slot_names_; }

  /// Sets for which terminal + outgoing edge counts != node count.
  std::vector<std::uint32_t> conservation_violations() const;

  std::string set_label(std::uint32_t bits) const;
  std::string to_dot() const;
  nlohmann::json to_json() const;

 private:
  std::vector<std::string> slot_names_;
  std::map<std::uint32_t, Node> nodes_;
  std::map<EdgeKey, Edge> edges_;
  long n_episodes_ = 0;
};

PathwayTree pathway_tree(const std::vector<env::EpisodeRecord>& episodes, std::vector<std::string> slot_names);

}  // namespace afa::metrics

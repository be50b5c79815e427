#include "afa/pathway.hpp"

#include <sstream>

namespace afa::metrics {

namespace {

std::string node_id(std::uint32_t bits) { return "s" + std::to_string(bits); }

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

PathwayTree::PathwayTree(std::vector<std::string> slot_names) : slot_names_(std::move(slot_names)) {
  if (slot_names_.size() > 32) throw Error("shape", "pathway tree supports at most 32 slots");
  nodes_[0];
}

void PathwayTree::add(const env::EpisodeRecord& episode) {
  const int n = static_cast<int>(slot_names_.size());
  std::uint32_t bits = 0;
  ++n_episodes_;
  ++nodes_[bits].count;
  for (int index : episode.actions) {
    const Action a = Action::from_index(index, n);
    if (a.is_terminate()) break;
    const std::uint32_t next = bits | (std::uint32_t{1} << a.slot());
    if (next == bits) continue;
    auto& e = edges_[{bits, next}];
    e.slot = a.slot();
    ++e.count;
    ++nodes_[next].count;
    bits = next;
  }
  ++nodes_[bits].terminal;
}

const PathwayTree::Node& PathwayTree::node(std::uint32_t bits) const {
  auto it = nodes_.find(bits);
  if (it == nodes_.end()) throw Error("pathway", "no node for set " + set_label(bits));
  return it->second;
}

std::vector<std::uint32_t> PathwayTree::conservation_violations() const {
  std::map<std::uint32_t, long> out_flow;
  for (const auto& [key, e] : edges_) out_flow[key.first] += e.count;
  std::vector<std::uint32_t> bad;
  for (const auto& [bits, n] : nodes_)
    if (n.terminal + out_flow[bits] != n.count) bad.push_back(bits);
  return bad;
}

std::string PathwayTree::set_label(std::uint32_t bits) const {
  std::string out = "{";
  bool first = true;
  for (std::size_t i = 0; i < slot_names_.size(); ++i) {
    if (!(bits >> i & 1U)) continue;
    if (!first) out += ", ";
    out += slot_names_[i];
    first = false;
  }
  return out + "}";
}

std::string PathwayTree::to_dot() const {
  std::ostringstream os;
  os << "digraph pathway {\n";
  os << "  rankdir=TB;\n";
  os << "  node [shape=box, fontname=\"Helvetica\"];\n";
  for (const auto& [bits, n] : nodes_) {
    const std::string name = bits == 0 ? std::string("start") : set_label(bits);
    os << "  " << node_id(bits) << " [label=\"" << dot_escape(name) << "\\nn=" << n.count << ", stop=" << n.terminal
       << "\"";
    if (n.terminal > 0) os << ", peripheries=2";
    os << "];\n";
  }
  for (const auto& [key, e] : edges_)
    os << "  " << node_id(key.first) << " -> " << node_id(key.second) << " [label=\"+"
       << dot_escape(slot_names_[static_cast<std::size_t>(e.slot)]) << " (" << e.count << ")\"];\n";
  os << "}\n";
  return os.str();
}

nlohmann::json PathwayTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
  for (const auto& [bits, n] : nodes_) {
    std::vector<int> slots;
    for (std::size_t i = 0; i < slot_names_.size(); ++i)
      if (bits >> i & 1U) slots.push_back(static_cast<int>(i));
    nodes.push_back({{"id", node_id(bits)}, {"slots", slots}, {"label", set_label(bits)}, {"count", n.count},
                     {"terminal", n.terminal}});
  }
  for (const auto& [key, e] : edges_)
    edges.push_back({{"from", node_id(key.first)},
                     {"to", node_id(key.second)},
                     {"slot", e.slot},
                     {"view", slot_names_[static_cast<std::size_t>(e.slot)]},
                     {"count", e.count}});
  return {{"n_episodes", n_episodes_}, {"slot_names", slot_names_}, {"nodes", nodes}, {"edges", edges}};
}

PathwayTree pathway_tree(const std::vector<env::EpisodeRecord>& episodes, std::vector<std::string> slot_names) {
  PathwayTree tree(std::move(slot_names));
  for (const auto& e : episodes) tree.add(e);
  return tree;
}

}  // namespace afa::metrics

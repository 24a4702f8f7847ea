#include "cpsnet/paths.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <tuple>

namespace cpsnet::pn {

std::string to_string(TrafficClass c) {
  switch (c) {
    case TrafficClass::Legitimate: return "legitimate";
    case TrafficClass::Suspicious: return "suspicious";
    case TrafficClass::Malicious: return "malicious";
  }
  return "legitimate";
}

bool PathEntry::contains(NodeId sw) const { return std::find(hops.begin(), hops.end(), sw) != hops.end(); }

bool path_before(const PathEntry& a, const PathEntry& b) {
  if (a.latency != b.latency) return a.latency < b.latency;
  if (a.hops.size() != b.hops.size()) return a.hops.size() < b.hops.size();
  return a.hops < b.hops;
}

std::uint16_t LabelAllocator::label_for(const std::vector<NodeId>& hops) {
  auto it = labels_.find(hops);
  if (it != labels_.end()) return it->second;
  if (next_ > 0xFFFF) throw std::length_error("path label space exhausted");
  const auto label = static_cast<std::uint16_t>(next_++);
  labels_.emplace(hops, label);
  return label;
}

const std::vector<PathEntry>& PathTable::paths(NodeId ingress, NodeId egress) const {
  static const std::vector<PathEntry> kEmpty;
  auto it = entries.find({ingress, egress});
  return it == entries.end() ? kEmpty : it->second;
}

const PathEntry* PathTable::by_label(std::uint16_t label) const {
  for (const auto& [pair, list] : entries) {
    for (const auto& e : list) {
      if (e.label == label) return &e;
    }
  }
  return nullptr;
}

namespace {

struct Graph {
  // adjacency over switch ids: neighbour -> (link, latency)
  std::map<NodeId, std::vector<std::tuple<NodeId, LinkId, SimTime>>> adj;
};

Graph switch_graph(const net::Topology& topo, const std::set<LinkId>& excluded) {
  Graph g;
  for (NodeId s : topo.switches()) g.adj[s];
  for (LinkId l = 0; l < topo.links().size(); ++l) {
    if (excluded.count(l)) continue;
    const auto& lk = topo.link(l);
    if (!topo.is_switch(lk.a) || !topo.is_switch(lk.b)) continue;
    g.adj[lk.a].emplace_back(lk.b, l, lk.latency);
    g.adj[lk.b].emplace_back(lk.a, l, lk.latency);
  }
  for (auto& [n, edges] : g.adj) std::sort(edges.begin(), edges.end());
  return g;
}

using Key = std::tuple<SimTime, std::size_t, std::vector<NodeId>>;

// Best path under (latency, hops, sequence); the order is preserved by
// appending a common edge, so label-setting search is exact.
std::optional<Key> best_path(const Graph& g, NodeId from, NodeId to, const std::set<NodeId>& blocked_nodes,
                             const std::set<std::pair<NodeId, NodeId>>& blocked_edges) {
  std::set<Key> frontier;
  std::set<NodeId> settled;
  frontier.insert(Key{0, 1, {from}});
  while (!frontier.empty()) {
    Key cur = *frontier.begin();
    frontier.erase(frontier.begin());
    const NodeId at = std::get<2>(cur).back();
    if (settled.count(at)) continue;
    settled.insert(at);
    if (at == to) return cur;
    for (const auto& [nxt, link, lat] : g.adj.at(at)) {
      if (settled.count(nxt) || blocked_nodes.count(nxt) || blocked_edges.count({at, nxt})) continue;
      auto seq = std::get<2>(cur);
      if (std::find(seq.begin(), seq.end(), nxt) != seq.end()) continue;
      seq.push_back(nxt);
      frontier.insert(Key{std::get<0>(cur) + lat, seq.size(), std::move(seq)});
    }
  }
  return std::nullopt;
}

SimTime edge_latency(const Graph& g, NodeId a, NodeId b) {
  for (const auto& [nxt, link, lat] : g.adj.at(a)) {
    if (nxt == b) return lat;
  }
  throw std::logic_error("edge not in graph");
}

std::vector<Key> yen(const Graph& g, NodeId s, NodeId t, int k) {
  std::vector<Key> found;
  auto first = best_path(g, s, t, {}, {});
  if (!first) return found;
  found.push_back(*first);
  std::set<Key> candidates;
  while (static_cast<int>(found.size()) < k) {
    const auto& last = std::get<2>(found.back());
    for (std::size_t j = 0; j + 1 < last.size(); ++j) {
      const NodeId spur = last[j];
      const std::vector<NodeId> root(last.begin(), last.begin() + static_cast<std::ptrdiff_t>(j) + 1);
      std::set<std::pair<NodeId, NodeId>> blocked_edges;
      for (const auto& p : found) {
        const auto& seq = std::get<2>(p);
        if (seq.size() > j + 1 && std::equal(root.begin(), root.end(), seq.begin())) {
          blocked_edges.insert({seq[j], seq[j + 1]});
        }
      }
      std::set<NodeId> blocked_nodes(root.begin(), root.end() - 1);
      auto spur_path = best_path(g, spur, t, blocked_nodes, blocked_edges);
      if (!spur_path) continue;
      std::vector<NodeId> total = root;
      const auto& tail = std::get<2>(*spur_path);
      total.insert(total.end(), tail.begin() + 1, tail.end());
      SimTime lat = 0;
      for (std::size_t i = 0; i + 1 < total.size(); ++i) lat += edge_latency(g, total[i], total[i + 1]);
      candidates.insert(Key{lat, total.size(), std::move(total)});
    }
    // Drop candidates already accepted.
    while (!candidates.empty() &&
           std::find(found.begin(), found.end(), *candidates.begin()) != found.end()) {
      candidates.erase(candidates.begin());
    }
    if (candidates.empty()) break;
    found.push_back(*candidates.begin());
    candidates.erase(candidates.begin());
  }
  return found;
}

}  // namespace

PathTable compute_paths(const net::Topology& topo, int k, const std::set<LinkId>& excluded,
                        const PathRoles& roles, LabelAllocator* labels) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  LabelAllocator local;
  LabelAllocator& alloc = labels ? *labels : local;
  const Graph g = switch_graph(topo, excluded);
  PathTable table;
  const auto sws = topo.switches();
  for (NodeId s : sws) {
    for (NodeId t : sws) {
      auto& list = table.entries[{s, t}];
      for (auto& key : yen(g, s, t, k)) {
        PathEntry e;
        e.latency = std::get<0>(key);
        e.hops = std::move(std::get<2>(key));
        e.qos_score = e.latency == 0 ? std::numeric_limits<double>::infinity()
                                     : 1.0 / static_cast<double>(e.latency);
        e.label = alloc.label_for(e.hops);
        e.class_eligibility.insert(TrafficClass::Legitimate);
        if (roles.middlebox_switch && e.contains(*roles.middlebox_switch)) {
          e.class_eligibility.insert(TrafficClass::Suspicious);
        }
        if (roles.sinkhole_switch && e.hops.back() == *roles.sinkhole_switch) {
          e.class_eligibility.insert(TrafficClass::Malicious);
        }
        list.push_back(std::move(e));
      }
    }
  }
  return table;
}

}  // namespace cpsnet::pn

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "cpsnet/netsim.hpp"

namespace cpsnet::pn {

using net::LinkId;
using net::NodeId;

enum class TrafficClass { Legitimate, Suspicious, Malicious };

std::string to_string(TrafficClass c);

struct PathEntry {
  std::uint16_t label = 0;
  std::vector<NodeId> hops;  // switch sequence, ingress first
  SimTime latency = 0;
  double qos_score = 0.0;  // 1 / latency in microseconds; +inf for single-switch paths
  std::set<TrafficClass> class_eligibility;

  std::size_t hop_count() const { return hops.empty() ? 0 : hops.size() - 1; }
  bool contains(NodeId sw) const;
};

/// Total order used to rank paths: latency, then hop count, then the switch
/// id sequence.
bool path_before(const PathEntry& a, const PathEntry& b);

/// Keeps labels stable across recomputations: a hop sequence always maps to
/// the same label.
class LabelAllocator {
 public:
  std::uint16_t label_for(const std::vector<NodeId>& hops);

 private:
  std::map<std::vector<NodeId>, std::uint16_t> labels_;
  std::uint32_t next_ = 1;
};

struct PathTable {
  std::map<std::pair<NodeId, NodeId>, std::vector<PathEntry>> entries;

  const std::vector<PathEntry>& paths(NodeId ingress, NodeId egress) const;
  const PathEntry* by_label(std::uint16_t label) const;
};

struct PathRoles {
  std::optional<NodeId> middlebox_switch;
  std::optional<NodeId> sinkhole_switch;
};

/// Up to `k` loop-free switch paths per ordered switch pair (Yen's algorithm
/// over the switch graph, skipping links in `excluded`). Disconnected pairs
/// get an empty list.
PathTable compute_paths(const net::Topology& topo, int k, const std::set<LinkId>& excluded = {},
                        const PathRoles& roles = {}, LabelAllocator* labels = nullptr);

}  // namespace cpsnet::pn

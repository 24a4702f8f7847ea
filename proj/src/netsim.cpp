#include "cpsnet/netsim.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

namespace cpsnet::net {

std::string to_string(Proto p) {
  switch (p) {
    case Proto::Scada: return "scada";
    case Proto::ControlChannel: return "control-channel";
    case Proto::Other: return "other";
  }
  return "other";
}

// ---------------------------------------------------------------- Topology

NodeId Topology::add_node(const std::string& name, NodeKind kind) {
  if (name.empty()) throw TopologyError("node name must not be empty");
  if (by_name_.count(name)) throw TopologyError("duplicate node name '" + name + "'");
  NodeId id{static_cast<std::uint32_t>(nodes_.size())};
  nodes_.push_back(Node{name, kind, {}});
  by_name_.emplace(name, id);
  return id;
}

NodeId Topology::add_host(const std::string& name) { return add_node(name, NodeKind::Host); }
NodeId Topology::add_switch(const std::string& name) { return add_node(name, NodeKind::Switch); }

LinkId Topology::add_link(NodeId a, NodeId b, SimTime latency, std::uint64_t bandwidth_bps,
                          double loss_prob) {
  if (a.value >= nodes_.size() || b.value >= nodes_.size()) {
    throw TopologyError("link endpoint references an unknown node");
  }
  if (a == b) throw TopologyError("self-loop on node '" + name(a) + "'");
  if (link_between(a, b)) {
    throw TopologyError("parallel link between '" + name(a) + "' and '" + name(b) + "'");
  }
  if (bandwidth_bps == 0) throw TopologyError("link bandwidth must be positive");
  if (!(loss_prob >= 0.0 && loss_prob <= 1.0)) throw TopologyError("link loss must be in [0, 1]");
  const auto id = static_cast<LinkId>(links_.size());
  links_.push_back(Link{a, b, latency, bandwidth_bps, loss_prob});
  nodes_[a.value].ports.push_back(id);
  nodes_[b.value].ports.push_back(id);
  return id;
}

std::optional<NodeId> Topology::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

NodeId Topology::require(const std::string& name) const {
  auto id = find(name);
  if (!id) throw TopologyError("unknown node '" + name + "'");
  return *id;
}

std::string Topology::link_name(LinkId id) const {
  const auto& l = link(id);
  return name(l.a) + "-" + name(l.b);
}

std::optional<LinkId> Topology::link_between(NodeId a, NodeId b) const {
  for (LinkId l : node(a).ports) {
    const auto& lk = links_[l];
    if ((lk.a == a && lk.b == b) || (lk.a == b && lk.b == a)) return l;
  }
  return std::nullopt;
}

NodeId Topology::peer(LinkId l, NodeId from) const {
  const auto& lk = link(l);
  return lk.a == from ? lk.b : lk.a;
}

std::size_t Topology::port_of(NodeId n, LinkId l) const {
  const auto& ports = node(n).ports;
  auto it = std::find(ports.begin(), ports.end(), l);
  if (it == ports.end()) throw TopologyError("link is not attached to '" + name(n) + "'");
  return static_cast<std::size_t>(it - ports.begin());
}

std::size_t Topology::port_towards(NodeId sw, NodeId next) const {
  auto l = link_between(sw, next);
  if (!l) throw TopologyError("no link between '" + name(sw) + "' and '" + name(next) + "'");
  return port_of(sw, *l);
}

NodeId Topology::attachment(NodeId host) const {
  const auto& n = node(host);
  if (n.kind != NodeKind::Host || n.ports.size() != 1) {
    throw TopologyError("'" + n.name + "' is not a single-homed host");
  }
  return peer(n.ports.front(), host);
}

std::vector<NodeId> Topology::switches() const {
  std::vector<NodeId> out;
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == NodeKind::Switch) out.push_back(NodeId{i});
  }
  return out;
}

bool Topology::connected(const std::set<LinkId>& excluded) const {
  if (nodes_.empty()) return true;
  std::vector<bool> seen(nodes_.size(), false);
  std::queue<std::uint32_t> q;
  q.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!q.empty()) {
    const auto cur = q.front();
    q.pop();
    for (LinkId l : nodes_[cur].ports) {
      if (excluded.count(l)) continue;
      const auto nxt = peer(l, NodeId{cur}).value;
      if (!seen[nxt]) {
        seen[nxt] = true;
        ++count;
        q.push(nxt);
      }
    }
  }
  return count == nodes_.size();
}

void Topology::validate() const {
  if (switches().empty()) throw TopologyError("topology has no switches");
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.kind != NodeKind::Host) continue;
    if (n.ports.size() != 1) {
      throw TopologyError("host '" + n.name + "' must have exactly one link");
    }
    if (!is_switch(peer(n.ports.front(), NodeId{i}))) {
      throw TopologyError("host '" + n.name + "' must connect to a switch");
    }
  }
  if (!connected()) throw TopologyError("topology is disconnected");
}

std::string Topology::digest() const {
  std::ostringstream s;
  for (const auto& n : nodes_) s << (n.kind == NodeKind::Host ? 'h' : 's') << n.name << ';';
  for (const auto& l : links_) {
    s << name(l.a) << '-' << name(l.b) << ':' << l.latency << ':' << l.bandwidth_bps << ':' << l.loss_prob
      << ';';
  }
  std::ostringstream hex;
  hex << std::hex << fnv1a64(s.str());
  return hex.str();
}

// ---------------------------------------------------------------- Match

bool Match::matches(const Packet& p) const {
  if (src && *src != p.src) return false;
  if (dst && *dst != p.dst) return false;
  if (proto && *proto != p.proto) return false;
  if (label && (!p.label || *label != *p.label)) return false;
  return true;
}

// ---------------------------------------------------------------- Network

Network::Network(Simulator& sim, Topology topology, std::uint64_t seed, SwitchConfig cfg)
    : sim_(sim), topo_(std::move(topology)), cfg_(cfg) {
  links_.resize(topo_.links().size());
  for (LinkId l = 0; l < links_.size(); ++l) {
    links_[l].rng = std::make_unique<RngStream>(seed, "link:" + topo_.link_name(l));
  }
  for (NodeId sw : topo_.switches()) {
    SwitchState st;
    FlowRule miss;
    miss.priority = kTableMissPriority;
    miss.actions = {Action::to_controller()};
    miss.table_miss = true;
    st.rules.push_back(std::move(miss));
    switches_.emplace(sw.value, std::move(st));
  }
}

Network::SwitchState& Network::state(NodeId sw) { return switches_.at(sw.value); }

void Network::set_host_receiver(NodeId host, std::function<void(const Packet&)> receiver) {
  receivers_[host.value] = std::move(receiver);
}

void Network::add_interceptor(NodeId sw, std::shared_ptr<Interceptor> interceptor) {
  state(sw).interceptors.push_back(std::move(interceptor));
}

SimTime Network::serialization_delay(std::size_t bytes, std::uint64_t bandwidth_bps) {
  const std::uint64_t bits = 8ULL * bytes;
  return (bits * kMicrosPerSecond + bandwidth_bps - 1) / bandwidth_bps;
}

std::uint64_t Network::send(NodeId host, Packet packet) {
  packet.id = next_packet_id_++;
  packet.created_at = sim_.now();
  packet.mirror = false;
  ++counters_.injected;
  const auto& n = topo_.node(host);
  const auto id = packet.id;
  link_transmit(n.ports.front(), host, std::move(packet));
  return id;
}

void Network::link_transmit(LinkId l, NodeId from, Packet packet) {
  auto& ls = links_.at(l);
  const auto& lk = topo_.link(l);
  const int dir = lk.a == from ? 0 : 1;
  if (!ls.up) {
    ++counters_.dropped_failure;
    if (topo_.is_switch(from)) ++state(from).counters.dropped_failure;
    return;
  }
  const SimTime start = std::max(sim_.now(), ls.busy_until[dir]);
  const SimTime done = start + serialization_delay(packet.wire_bytes(), lk.bandwidth_bps);
  ls.busy_until[dir] = done;
  bool lost = lk.loss_prob >= 1.0;
  if (!lost && lk.loss_prob > 0.0) lost = ls.rng->uniform() < lk.loss_prob;
  if (lost) {
    ++counters_.lost;
    return;
  }
  const std::uint64_t seq = ++ls.sent_seq[dir];
  const std::uint64_t epoch = ls.epoch;
  const NodeId to = dir == 0 ? lk.b : lk.a;
  const std::size_t in_port = topo_.port_of(to, l);
  ++counters_.in_flight;
  sim_.schedule(done + lk.latency, "link:" + topo_.link_name(l), "deliver",
                [this, l, dir, seq, epoch, to, in_port, p = std::move(packet)]() mutable {
                  auto& st = links_[l];
                  --counters_.in_flight;
                  if (st.epoch != epoch) {
                    ++counters_.dropped_failure;
                    return;
                  }
                  if (seq <= st.delivered_seq[dir]) ++fifo_violations_;
                  st.delivered_seq[dir] = seq;
                  arrive(to, std::move(p), in_port);
                });
}

void Network::arrive(NodeId node, Packet packet, std::size_t in_port) {
  if (topo_.is_switch(node)) {
    switch_process(node, std::move(packet), in_port);
    return;
  }
  ++counters_.delivered;
  deliveries_.push_back(DeliveryRecord{sim_.now(), packet.id, packet.key(), node});
  auto it = receivers_.find(node.value);
  if (it != receivers_.end() && it->second) it->second(packet);
}

const FlowRule* Network::lookup(SwitchState& st, const Packet& p) const {
  const SimTime now = sim_.now();
  const FlowRule* best = nullptr;
  for (const auto& r : st.rules) {
    const bool live = r.table_miss || r.installed_at < now;
    const bool not_removed = !r.removed_at || now <= *r.removed_at;
    if (!live || !not_removed || !r.match.matches(p)) continue;
    if (!best || r.priority > best->priority ||
        (r.priority == best->priority && r.install_seq > best->install_seq)) {
      best = &r;
    }
  }
  return best;
}

void Network::switch_process(NodeId sw, Packet packet, std::size_t in_port) {
  auto& st = state(sw);
  ++st.counters.processed;
  for (auto& icpt : st.interceptors) {
    if (icpt->on_packet(packet, sw, sim_.now()) == InterceptResult::Drop) {
      ++st.counters.dropped_attack;
      ++counters_.dropped_attack;
      return;
    }
  }
  const FlowRule* rule = lookup(st, packet);
  // The table-miss rule is always present, so lookup never fails.
  const FlowRule chosen = *rule;
  execute(sw, st, chosen, std::move(packet), in_port);
}

void Network::execute(NodeId sw, SwitchState& st, const FlowRule& rule, Packet packet,
                      std::size_t in_port) {
  for (const auto& a : rule.actions) {
    switch (a.kind) {
      case Action::Kind::SetLabel:
        packet.label = static_cast<std::uint16_t>(a.arg);
        break;
      case Action::Kind::MirrorToProbe:
        if (hooks_.probe) {
          Packet copy = packet;
          copy.mirror = true;
          ++counters_.mirrored;
          hooks_.probe(sw, a.arg, copy);
        }
        break;
      case Action::Kind::Forward: {
        const auto& ports = topo_.node(sw).ports;
        if (a.arg >= ports.size()) {
          ++st.counters.dropped_rule;
          ++counters_.dropped_rule;
          return;
        }
        const LinkId l = ports[a.arg];
        if (!links_[l].up) {
          ++st.counters.dropped_failure;
          ++counters_.dropped_failure;
          return;
        }
        ++st.counters.forwarded;
        link_transmit(l, sw, std::move(packet));
        return;
      }
      case Action::Kind::Drop:
        ++st.counters.dropped_rule;
        ++counters_.dropped_rule;
        return;
      case Action::Kind::ToController: {
        ++st.counters.table_misses;
        if (st.buffer.size() >= cfg_.miss_buffer_capacity) {
          ++st.counters.dropped_miss;
          ++counters_.dropped_miss;
          return;
        }
        if (hooks_.packet_in) {
          Packet header = packet;
          header.payload.clear();
          hooks_.packet_in(sw, header);
        }
        const auto id = packet.id;
        const SimTime now = sim_.now();
        st.buffer.push_back(Buffered{std::move(packet), in_port, now});
        ++counters_.buffered;
        sim_.schedule(now + cfg_.miss_timeout, target(sw), "miss-timeout", [this, sw, id]() {
          auto& s = state(sw);
          auto it = std::find_if(s.buffer.begin(), s.buffer.end(),
                                 [id](const Buffered& b) { return b.packet.id == id; });
          if (it == s.buffer.end()) return;
          s.buffer.erase(it);
          --counters_.buffered;
          ++s.counters.dropped_miss;
          ++counters_.dropped_miss;
        });
        return;
      }
    }
  }
  // No terminal action: the packet goes nowhere.
  ++st.counters.dropped_rule;
  ++counters_.dropped_rule;
}

bool Network::install_rule(NodeId sw, FlowRule rule) {
  if (sw.value >= topo_.nodes().size() || !topo_.is_switch(sw)) return false;
  auto& st = state(sw);
  rule.installed_at = sim_.now();
  rule.install_seq = next_install_seq_++;
  rule.removed_at.reset();
  rule.table_miss = false;
  st.rules.push_back(std::move(rule));
  if (!st.buffer.empty() && !st.reeval_pending) {
    st.reeval_pending = true;
    sim_.schedule(sim_.now() + 1, target(sw), "reevaluate", [this, sw]() { reevaluate(sw); });
  }
  return true;
}

bool Network::remove_rule(NodeId sw, std::uint64_t rule_id) {
  if (sw.value >= topo_.nodes().size() || !topo_.is_switch(sw)) return false;
  auto& st = state(sw);
  const SimTime now = sim_.now();
  // Purge rules whose removal is already in the past.
  std::erase_if(st.rules, [now](const FlowRule& r) { return r.removed_at && *r.removed_at < now; });
  for (auto& r : st.rules) {
    if (!r.table_miss && r.id == rule_id && !r.removed_at) {
      r.removed_at = now;
      return true;
    }
  }
  ++st.counters.remove_warnings;
  return true;
}

std::vector<FlowRule> Network::active_rules(NodeId sw) const {
  std::vector<FlowRule> out;
  const auto& st = switches_.at(sw.value);
  for (const auto& r : st.rules) {
    if (!r.removed_at) out.push_back(r);
  }
  return out;
}

void Network::reevaluate(NodeId sw) {
  auto& st = state(sw);
  st.reeval_pending = false;
  std::deque<Buffered> still;
  std::deque<Buffered> pending = std::move(st.buffer);
  st.buffer.clear();
  for (auto& b : pending) {
    const FlowRule* rule = lookup(st, b.packet);
    if (rule->table_miss) {
      still.push_back(std::move(b));
      continue;
    }
    --counters_.buffered;
    const FlowRule chosen = *rule;
    execute(sw, st, chosen, std::move(b.packet), b.in_port);
  }
  // execute() may have buffered nothing new (rule was not a miss), so the
  // remaining packets keep their original order.
  for (auto& b : st.buffer) still.push_back(std::move(b));
  st.buffer = std::move(still);
}

void Network::set_link_state(LinkId l, bool up) {
  auto& ls = links_.at(l);
  if (ls.up == up) return;
  ls.up = up;
  if (!up) {
    ++ls.epoch;
    ls.busy_until[0] = ls.busy_until[1] = sim_.now();
  }
  if (hooks_.port_status) hooks_.port_status(l, up);
}

void Network::inject_link_failure(LinkId l, SimTime at) {
  sim_.schedule(at, "link:" + topo_.link_name(l), "link-down", [this, l]() { set_link_state(l, false); });
}

void Network::restore_link(LinkId l, SimTime at) {
  sim_.schedule(at, "link:" + topo_.link_name(l), "link-up", [this, l]() { set_link_state(l, true); });
}

NetCounters Network::counters() const { return counters_; }

const SwitchCounters& Network::switch_counters(NodeId sw) const { return switches_.at(sw.value).counters; }

}  // namespace cpsnet::net

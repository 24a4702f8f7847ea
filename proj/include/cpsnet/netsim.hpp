#pragma once

#include <compare>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cpsnet/rng.hpp"
#include "cpsnet/sim.hpp"

namespace cpsnet::net {

struct NodeId {
  std::uint32_t value = 0;
  auto operator<=>(const NodeId&) const = default;
};

using LinkId = std::uint32_t;

enum class NodeKind { Host, Switch };

struct Node {
  std::string name;
  NodeKind kind = NodeKind::Host;
  std::vector<LinkId> ports;  // port number = index
};

struct Link {
  NodeId a;
  NodeId b;
  SimTime latency = 0;
  std::uint64_t bandwidth_bps = 0;
  double loss_prob = 0.0;
};

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Hosts, switches and full-duplex links. At most one link per node pair.
class Topology {
 public:
  NodeId add_host(const std::string& name);
  NodeId add_switch(const std::string& name);
  LinkId add_link(NodeId a, NodeId b, SimTime latency, std::uint64_t bandwidth_bps,
                  double loss_prob = 0.0);

  std::optional<NodeId> find(const std::string& name) const;
  NodeId require(const std::string& name) const;
  const Node& node(NodeId id) const { return nodes_.at(id.value); }
  const Link& link(LinkId id) const { return links_.at(id); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  bool is_switch(NodeId id) const { return node(id).kind == NodeKind::Switch; }
  const std::string& name(NodeId id) const { return node(id).name; }
  std::string link_name(LinkId id) const;

  std::optional<LinkId> link_between(NodeId a, NodeId b) const;
  NodeId peer(LinkId link, NodeId from) const;
  /// Port number of `link` on `node`.
  std::size_t port_of(NodeId node, LinkId link) const;
  /// Port on switch `sw` that leads to neighbour `next`.
  std::size_t port_towards(NodeId sw, NodeId next) const;
  /// The switch a host hangs off.
  NodeId attachment(NodeId host) const;
  std::vector<NodeId> switches() const;

  bool connected(const std::set<LinkId>& excluded = {}) const;
  /// Throws TopologyError when hosts are not single-homed to a switch, a link
  /// is invalid, or the graph is disconnected.
  void validate() const;
  std::string digest() const;

 private:
  NodeId add_node(const std::string& name, NodeKind kind);
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::map<std::string, NodeId> by_name_;
};

enum class Proto : std::uint8_t { Scada, ControlChannel, Other };

std::string to_string(Proto p);

struct FlowKey {
  NodeId src;
  NodeId dst;
  Proto proto = Proto::Scada;
  auto operator<=>(const FlowKey&) const = default;
};

struct Packet {
  std::uint64_t id = 0;
  NodeId src;
  NodeId dst;
  Proto proto = Proto::Other;
  std::optional<std::uint16_t> label;
  std::vector<std::uint8_t> payload;
  SimTime created_at = 0;
  bool mirror = false;

  FlowKey key() const { return FlowKey{src, dst, proto}; }
  std::size_t wire_bytes() const { return payload.size(); }
};

struct Match {
  std::optional<NodeId> src;
  std::optional<NodeId> dst;
  std::optional<Proto> proto;
  std::optional<std::uint16_t> label;

  bool matches(const Packet& p) const;
  static Match flow(const FlowKey& key) { return Match{key.src, key.dst, key.proto, std::nullopt}; }
};

struct Action {
  enum class Kind { Forward, SetLabel, MirrorToProbe, Drop, ToController };
  Kind kind = Kind::Drop;
  std::uint32_t arg = 0;

  static Action forward(std::size_t port) { return {Kind::Forward, static_cast<std::uint32_t>(port)}; }
  static Action set_label(std::uint16_t v) { return {Kind::SetLabel, v}; }
  static Action mirror(std::uint32_t probe) { return {Kind::MirrorToProbe, probe}; }
  static Action drop() { return {Kind::Drop, 0}; }
  static Action to_controller() { return {Kind::ToController, 0}; }
};

inline constexpr int kTableMissPriority = std::numeric_limits<int>::min();

struct FlowRule {
  std::uint64_t id = 0;
  int priority = 0;
  Match match;
  std::vector<Action> actions;
  // Set by the switch on installation.
  SimTime installed_at = 0;
  std::uint64_t install_seq = 0;
  std::optional<SimTime> removed_at;
  bool table_miss = false;
};

struct SwitchCounters {
  std::uint64_t processed = 0;
  std::uint64_t forwarded = 0;
  std::uint64_t table_misses = 0;
  std::uint64_t dropped_rule = 0;
  std::uint64_t dropped_miss = 0;
  std::uint64_t dropped_failure = 0;
  std::uint64_t dropped_attack = 0;
  std::uint64_t remove_warnings = 0;
};

/// Network-wide packet accounting. The conservation audit requires
/// injected == delivered + lost + dropped_* + buffered + in_flight.
struct NetCounters {
  std::uint64_t injected = 0;
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;
  std::uint64_t dropped_rule = 0;
  std::uint64_t dropped_miss = 0;
  std::uint64_t dropped_failure = 0;
  std::uint64_t dropped_attack = 0;
  std::uint64_t buffered = 0;
  std::uint64_t in_flight = 0;
  std::uint64_t mirrored = 0;

  bool conserved() const {
    return injected ==
           delivered + lost + dropped_rule + dropped_miss + dropped_failure + dropped_attack + buffered + in_flight;
  }
};

struct DeliveryRecord {
  SimTime at = 0;
  std::uint64_t packet_id = 0;
  FlowKey key;
  NodeId host;
};

/// Decision of an interceptor installed at a compromised switch.
enum class InterceptResult { Pass, Drop };

class Interceptor {
 public:
  virtual ~Interceptor() = default;
  virtual InterceptResult on_packet(Packet& packet, NodeId at_switch, SimTime now) = 0;
};

/// Callbacks toward the programmable-network controller. Invoked
/// synchronously; the receiver models its own control-plane latency.
struct ControlPlaneHooks {
  std::function<void(NodeId sw, const Packet& header)> packet_in;
  std::function<void(NodeId sw, std::uint32_t probe, const Packet& copy)> probe;
  std::function<void(LinkId link, bool up)> port_status;
};

struct SwitchConfig {
  std::size_t miss_buffer_capacity = 64;
  SimTime miss_timeout = 50 * kMicrosPerMilli;
};

class Network {
 public:
  Network(Simulator& sim, Topology topology, std::uint64_t seed, SwitchConfig cfg = {});

  const Topology& topology() const { return topo_; }

  void set_host_receiver(NodeId host, std::function<void(const Packet&)> receiver);
  void set_hooks(ControlPlaneHooks hooks) { hooks_ = std::move(hooks); }
  void add_interceptor(NodeId sw, std::shared_ptr<Interceptor> interceptor);

  /// Inject a packet at a host; assigns id and creation time. Returns the id.
  std::uint64_t send(NodeId host, Packet packet);

  /// Handle a packet arriving at a switch on `in_port`.
  void switch_process(NodeId sw, Packet packet, std::size_t in_port);

  /// Returns false if `sw` is not a switch. The rule applies to packets
  /// processed strictly after the current time.
  bool install_rule(NodeId sw, FlowRule rule);
  /// Unknown ids are a no-op that bumps the switch's warning counter.
  bool remove_rule(NodeId sw, std::uint64_t rule_id);
  std::vector<FlowRule> active_rules(NodeId sw) const;

  /// Serialize `packet` onto `link` from endpoint `from`.
  void link_transmit(LinkId link, NodeId from, Packet packet);

  void inject_link_failure(LinkId link, SimTime at);
  void restore_link(LinkId link, SimTime at);
  void set_link_state(LinkId link, bool up);
  bool link_up(LinkId link) const { return links_.at(link).up; }

  NetCounters counters() const;
  const SwitchCounters& switch_counters(NodeId sw) const;
  const std::vector<DeliveryRecord>& deliveries() const { return deliveries_; }
  std::uint64_t fifo_violations() const { return fifo_violations_; }

  /// Serialization time of `bytes` on a link of the given rate, rounded up.
  static SimTime serialization_delay(std::size_t bytes, std::uint64_t bandwidth_bps);

 private:
  struct LinkState {
    bool up = true;
    std::uint64_t epoch = 0;
    SimTime busy_until[2] = {0, 0};
    std::uint64_t sent_seq[2] = {0, 0};
    std::uint64_t delivered_seq[2] = {0, 0};
    std::unique_ptr<RngStream> rng;
  };
  struct Buffered {
    Packet packet;
    std::size_t in_port;
    SimTime buffered_at;
  };
  struct SwitchState {
    std::vector<FlowRule> rules;
    std::deque<Buffered> buffer;
    SwitchCounters counters;
    std::vector<std::shared_ptr<Interceptor>> interceptors;
    bool reeval_pending = false;
  };

  const FlowRule* lookup(SwitchState& st, const Packet& p) const;
  void execute(NodeId sw, SwitchState& st, const FlowRule& rule, Packet packet, std::size_t in_port);
  void arrive(NodeId node, Packet packet, std::size_t in_port);
  void reevaluate(NodeId sw);
  SwitchState& state(NodeId sw);
  std::string target(NodeId id) const { return topo_.name(id); }

  Simulator& sim_;
  Topology topo_;
  SwitchConfig cfg_;
  ControlPlaneHooks hooks_;
  std::vector<LinkState> links_;
  std::map<std::uint32_t, SwitchState> switches_;
  std::map<std::uint32_t, std::function<void(const Packet&)>> receivers_;
  std::vector<DeliveryRecord> deliveries_;
  NetCounters counters_;
  std::uint64_t next_packet_id_ = 1;
  std::uint64_t next_install_seq_ = 1;
  std::uint64_t fifo_violations_ = 0;
};

}  // namespace cpsnet::net

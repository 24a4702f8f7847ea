#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "cpsnet/netsim.hpp"
#include "cpsnet/pnctrl.hpp"
#include "cpsnet/sysid.hpp"

namespace cpsnet::pn {

struct PnConfig {
  int k_paths = 3;
  std::uint64_t tau_s = 3;
  std::uint64_t tau_m = 10;
  double delta = 0.1;
  std::size_t sysid_window = 500;
  std::size_t sysid_min_samples = kDefaultMinSamples;
  double envelope = 5.0;
  std::set<EvidenceRule> evidence_rules = all_evidence_rules();
  std::size_t duplicate_history = 1024;
  SimTime control_latency = 1 * kMicrosPerMilli;
  SimTime propagation_bound = 10 * kMicrosPerMilli;
  SimTime fault_window = 1 * kMicrosPerSecond;
  bool deescalate_on_clear = false;
};

/// Hosts with a fixed role in the control loop.
struct PnRoles {
  NodeId plant;
  NodeId controller;
  NodeId pn;  // host the PN controller receives alerts on
  NodeId middlebox;
  NodeId sinkhole;
};

struct VerdictRecord {
  SimTime at = 0;
  Verdict verdict = Verdict::Nominal;
  FlowKey flow;
  std::uint64_t suspicion = 0;
  bool fault_evidence = false;
  std::optional<double> deviation;
  std::uint64_t alert_step = 0;
};

struct MitigationRecord {
  FlowKey flow;
  TrafficClass cls = TrafficClass::Legitimate;
  SimTime decided_at = 0;
  SimTime installed_at = 0;  // all rules live after this time
};

/// Events the PN controller reports to whoever is recording the run.
struct PnObserver {
  std::function<void(const ClassTransition&)> on_transition;
  std::function<void(const VerdictRecord&)> on_verdict;
  std::function<void(const MitigationAck&)> on_ack_sent;
  std::function<void(const MitigationRecord&)> on_mitigation;
  std::function<void(const AlertSignal&, SimTime)> on_alert;
};

class PnController {
 public:
  PnController(Simulator& sim, net::Network& network, PnConfig cfg, PnRoles roles, StateSpaceModel nominal,
               scada::RegisterCodec codec);

  /// Computes the path table, hooks into the network and installs rules for
  /// the known control-loop flows.
  void start();
  void set_observer(PnObserver obs) { observer_ = std::move(obs); }

  const std::map<FlowKey, FlowRecord>& flows() const { return flows_; }
  const PathTable& table() const { return table_; }
  FlowKey sensor_flow() const { return {roles_.plant, roles_.controller, net::Proto::Scada}; }
  FlowKey actuation_flow() const { return {roles_.controller, roles_.plant, net::Proto::Scada}; }
  const std::vector<ClassTransition>& transitions() const { return transitions_; }
  const std::vector<MitigationAck>& acks_sent() const { return acks_; }
  const std::vector<VerdictRecord>& verdicts() const { return verdicts_; }
  std::optional<SimTime> first_cleared_alert() const { return first_cleared_; }
  std::uint64_t no_path_events() const { return no_path_events_; }

  /// Behaviour estimate from the current window of observed samples.
  SysIdResult estimate_behavior() const;

 private:
  struct Installed {
    std::vector<std::pair<NodeId, std::uint64_t>> ingress;  // removed on reassignment
    std::vector<std::pair<NodeId, std::uint64_t>> blocks;
    std::vector<NodeId> hops;
  };
  struct Sample {
    std::optional<Vector> y;
    std::optional<Vector> u;
  };

  void on_packet_in(NodeId sw, const net::Packet& header);
  void on_probe(NodeId sw, const net::Packet& copy);
  void on_port_status(net::LinkId link, bool up);
  void on_alert_packet(const net::Packet& p);
  void handle_alert(const AlertSignal& alert);

  FlowRecord& record_for(const FlowKey& key);
  void apply_assignment(FlowRecord& flow, SimTime decided_at, bool report_mitigation);
  void handle_transitions(const std::vector<ClassTransition>& ts);
  void send_ack(const FlowKey& flow, MitigationAction action, bool transition);
  void recompute_table();
  bool fault_evidence() const;
  std::set<net::LinkId> path_links(const FlowKey& flow) const;
  void record_sample(const FlowKey& flow, const scada::ScadaFrame& frame);
  std::optional<FlowKey> resolve_hint(const std::string& hint) const;

  Simulator& sim_;
  net::Network& net_;
  PnConfig cfg_;
  PnRoles roles_;
  StateSpaceModel nominal_;
  scada::RegisterCodec codec_;
  SuspicionRules rules_;
  DuplicateTracker duplicates_;
  LabelAllocator labels_;
  PathTable table_;
  PathRoles path_roles_;
  std::set<net::LinkId> down_links_;
  std::map<net::LinkId, SimTime> last_down_;
  std::map<FlowKey, FlowRecord> flows_;
  std::map<FlowKey, Installed> installed_;
  std::set<FlowKey> verdict_escalated_;
  std::set<std::pair<NodeId, std::uint16_t>> transit_installed_;
  std::map<std::uint16_t, Sample> samples_;
  std::vector<std::uint16_t> sample_order_;
  std::vector<ClassTransition> transitions_;
  std::vector<MitigationAck> acks_;
  std::vector<VerdictRecord> verdicts_;
  std::optional<SimTime> first_cleared_;
  PnObserver observer_;
  std::uint64_t next_rule_id_ = 1;
  std::uint32_t next_ack_seq_ = 1;
  std::uint64_t no_path_events_ = 0;
};

}  // namespace cpsnet::pn

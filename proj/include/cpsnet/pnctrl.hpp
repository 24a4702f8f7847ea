#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "cpsnet/control.hpp"
#include "cpsnet/netsim.hpp"
#include "cpsnet/paths.hpp"
#include "cpsnet/scada.hpp"

namespace cpsnet::pn {

using net::FlowKey;

struct FlowRecord {
  FlowKey key;
  TrafficClass cls = TrafficClass::Legitimate;
  std::uint64_t suspicion = 0;
  std::uint16_t current_label = 0;
  SimTime last_seen = 0;
};

enum class EvidenceRule { MalformedFrame, UnknownPair, Envelope, DuplicateTransaction };

std::string to_string(EvidenceRule r);
std::optional<EvidenceRule> evidence_rule_from_string(const std::string& s);
const std::set<EvidenceRule>& all_evidence_rules();

/// What a probe saw in the payload: nothing (header-only report), a decoded
/// frame, or a decode failure.
using PayloadDigest = std::variant<std::monostate, scada::ScadaFrame, scada::DecodeError>;

struct ProbeReport {
  FlowKey flow;
  PayloadDigest digest;
  NodeId observed_switch;
  SimTime observed_at = 0;
};

struct SuspicionRules {
  std::set<EvidenceRule> enabled = all_evidence_rules();
  std::set<std::pair<NodeId, NodeId>> known_pairs;
  double envelope = 5.0;
  scada::RegisterCodec codec;
  std::uint64_t tau_s = 3;
  std::uint64_t tau_m = 10;
};

/// Remembers recent transaction ids per (flow, observing switch).
class DuplicateTracker {
 public:
  explicit DuplicateTracker(std::size_t history = 1024) : history_(history) {}
  /// True if `id` was already seen for this flow at this switch.
  bool check_and_record(const FlowKey& flow, NodeId sw, std::uint16_t id);

 private:
  struct Window {
    std::deque<std::uint16_t> order;
    std::multiset<std::uint16_t> ids;
  };
  std::size_t history_;
  std::map<std::pair<FlowKey, NodeId>, Window> windows_;
};

struct ClassTransition {
  FlowKey flow;
  TrafficClass from = TrafficClass::Legitimate;
  TrafficClass to = TrafficClass::Legitimate;
  SimTime at = 0;
  std::string cause;
};

struct IngestOutcome {
  std::vector<EvidenceRule> triggered;
  std::vector<ClassTransition> transitions;
};

/// Apply the evidence rules to one report, bump the flow's suspicion counter
/// and escalate its class when the thresholds are crossed.
IngestOutcome ingest_probe_report(FlowRecord& flow, const ProbeReport& report, const SuspicionRules& rules,
                                  DuplicateTracker& duplicates);

/// Step the class up one level at a time until `target` is reached.
std::vector<ClassTransition> escalate_to(FlowRecord& flow, TrafficClass target, SimTime at,
                                         const std::string& cause);

// Rule priorities used by path assignment.
inline constexpr int kTransitPriority = 100;
inline constexpr int kFlowPriority = 200;
inline constexpr int kBlockPriority = 300;
inline constexpr int kSinkholePriority = 400;

struct PathContext {
  const net::Topology* topo = nullptr;
  std::optional<NodeId> middlebox_switch;
  NodeId sinkhole_host;
  bool mirror_at_egress = true;
};

struct RuleInstall {
  enum class Role { Ingress, Transit, Egress, Block };
  NodeId sw;
  net::FlowRule rule;
  Role role = Role::Ingress;
};

struct PathAssignment {
  std::uint16_t label = 0;
  std::vector<NodeId> hops;
  NodeId final_host;
  std::vector<RuleInstall> rules;
  bool no_path = false;  // no eligible path: the flow is dropped at its ingress
};

/// Pick the path for the flow's class and build the rules implementing it.
/// Rule ids are left at zero for the caller to assign.
PathAssignment assign_path(const FlowRecord& flow, const PathTable& table, const PathContext& ctx);

enum class Verdict { Nominal, Fault, Attack, AttackSuspected };

std::string to_string(Verdict v);
/// Coarse label used for confusion matrices: nominal, fault or attack.
std::string verdict_label(Verdict v);

struct CorrelationEvidence {
  std::uint64_t control_path_suspicion = 0;
  bool fault_evidence = false;
  std::optional<double> behavior_deviation;
};

/// Decision table combining a physical alert with network-side evidence.
Verdict correlate_and_verify(const AlertSignal& alert, const CorrelationEvidence& evidence, double delta);

enum class MitigationAction { None, ReroutedQuarantine, Sinkholed, ReroutedFault };

std::string to_string(MitigationAction a);

struct MitigationAck {
  MitigationAction action = MitigationAction::None;
  FlowKey flow;
  SimTime at = 0;
  std::uint32_t seq = 0;
  bool transition = false;  // true when the ack reports a class transition
};

// Control-channel wire format between the supervisor and the PN controller.
std::vector<std::uint8_t> encode_alert(const AlertSignal& alert);
std::vector<std::uint8_t> encode_ack(const MitigationAck& ack);
using ControlMessage = std::variant<std::monostate, AlertSignal, MitigationAck>;
ControlMessage decode_control(std::span<const std::uint8_t> bytes);

std::string flow_name(const net::Topology& topo, const FlowKey& key);

}  // namespace cpsnet::pn

#include "cpsnet/pnctrl.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace cpsnet::pn {

std::string to_string(EvidenceRule r) {
  switch (r) {
    case EvidenceRule::MalformedFrame: return "malformed-frame";
    case EvidenceRule::UnknownPair: return "unknown-pair";
    case EvidenceRule::Envelope: return "envelope";
    case EvidenceRule::DuplicateTransaction: return "duplicate-transaction";
  }
  return "malformed-frame";
}

std::optional<EvidenceRule> evidence_rule_from_string(const std::string& s) {
  for (EvidenceRule r : all_evidence_rules()) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

const std::set<EvidenceRule>& all_evidence_rules() {
  static const std::set<EvidenceRule> kAll{EvidenceRule::MalformedFrame, EvidenceRule::UnknownPair,
                                           EvidenceRule::Envelope, EvidenceRule::DuplicateTransaction};
  return kAll;
}

bool DuplicateTracker::check_and_record(const FlowKey& flow, NodeId sw, std::uint16_t id) {
  auto& w = windows_[{flow, sw}];
  const bool seen = w.ids.count(id) > 0;
  w.order.push_back(id);
  w.ids.insert(id);
  while (w.order.size() > history_) {
    w.ids.erase(w.ids.find(w.order.front()));
    w.order.pop_front();
  }
  return seen;
}

namespace {

TrafficClass next_class(TrafficClass c) {
  return c == TrafficClass::Legitimate ? TrafficClass::Suspicious : TrafficClass::Malicious;
}

}  // namespace

std::vector<ClassTransition> escalate_to(FlowRecord& flow, TrafficClass target, SimTime at,
                                         const std::string& cause) {
  std::vector<ClassTransition> out;
  while (flow.cls < target) {
    const TrafficClass to = next_class(flow.cls);
    out.push_back(ClassTransition{flow.key, flow.cls, to, at, cause});
    flow.cls = to;
  }
  return out;
}

IngestOutcome ingest_probe_report(FlowRecord& flow, const ProbeReport& report, const SuspicionRules& rules,
                                  DuplicateTracker& duplicates) {
  IngestOutcome out;
  auto fire = [&](EvidenceRule r) {
    if (rules.enabled.count(r)) out.triggered.push_back(r);
  };
  if (!rules.known_pairs.count({report.flow.src, report.flow.dst})) fire(EvidenceRule::UnknownPair);
  if (std::holds_alternative<scada::DecodeError>(report.digest)) {
    fire(EvidenceRule::MalformedFrame);
  } else if (const auto* frame = std::get_if<scada::ScadaFrame>(&report.digest)) {
    const bool carries_values = frame->function == scada::Function::ReadHoldingRegistersResponse ||
                                frame->function == scada::Function::WriteMultipleRegistersRequest;
    if (carries_values && rules.codec.registers_per_value > 0 &&
        frame->register_values.size() % static_cast<std::size_t>(rules.codec.registers_per_value) == 0) {
      const auto values = scada::unpack_measurement(frame->register_values, rules.codec);
      if (std::any_of(values.begin(), values.end(), [&](double v) { return std::abs(v) > rules.envelope; })) {
        fire(EvidenceRule::Envelope);
      }
    }
    if (rules.enabled.count(EvidenceRule::DuplicateTransaction) &&
        duplicates.check_and_record(report.flow, report.observed_switch, frame->transaction_id)) {
      out.triggered.push_back(EvidenceRule::DuplicateTransaction);
    }
  }
  flow.suspicion += out.triggered.size();
  flow.last_seen = report.observed_at;
  TrafficClass target = flow.cls;
  if (flow.suspicion >= rules.tau_m) {
    target = TrafficClass::Malicious;
  } else if (flow.suspicion >= rules.tau_s) {
    target = std::max(target, TrafficClass::Suspicious);
  }
  out.transitions = escalate_to(flow, target, report.observed_at, "evidence");
  return out;
}

PathAssignment assign_path(const FlowRecord& flow, const PathTable& table, const PathContext& ctx) {
  const auto& topo = *ctx.topo;
  const NodeId ingress = topo.attachment(flow.key.src);
  const NodeId dst_switch = topo.attachment(flow.key.dst);
  const bool malicious = flow.cls == TrafficClass::Malicious;
  const NodeId final_host = malicious ? ctx.sinkhole_host : flow.key.dst;
  const NodeId egress = topo.attachment(final_host);

  PathAssignment out;
  out.final_host = final_host;
  const PathEntry* chosen = nullptr;
  for (const auto& e : table.paths(ingress, egress)) {
    if (e.class_eligibility.count(flow.cls)) {
      chosen = &e;
      break;
    }
  }
  if (!chosen) {
    out.no_path = true;
    RuleInstall block{ingress, {}, RuleInstall::Role::Block};
    block.rule.priority = kBlockPriority;
    block.rule.match = net::Match::flow(flow.key);
    block.rule.actions = {net::Action::drop()};
    out.rules.push_back(block);
    return out;
  }
  out.label = chosen->label;
  out.hops = chosen->hops;
  const int flow_priority = malicious ? kSinkholePriority : kFlowPriority;
  const auto& hops = chosen->hops;
  auto deliver_actions = [&](NodeId sw) {
    std::vector<net::Action> acts;
    if (ctx.mirror_at_egress) acts.push_back(net::Action::mirror(sw.value));
    acts.push_back(net::Action::forward(topo.port_towards(sw, final_host)));
    return acts;
  };

  if (hops.size() == 1) {
    RuleInstall r{hops[0], {}, RuleInstall::Role::Egress};
    r.rule.priority = flow_priority;
    r.rule.match = net::Match::flow(flow.key);
    r.rule.actions = deliver_actions(hops[0]);
    out.rules.push_back(r);
  } else {
    RuleInstall in{hops[0], {}, RuleInstall::Role::Ingress};
    in.rule.priority = flow_priority;
    in.rule.match = net::Match::flow(flow.key);
    in.rule.actions = {net::Action::set_label(chosen->label), net::Action::forward(topo.port_towards(hops[0], hops[1]))};
    out.rules.push_back(in);
    for (std::size_t i = 1; i + 1 < hops.size(); ++i) {
      RuleInstall t{hops[i], {}, RuleInstall::Role::Transit};
      t.rule.priority = kTransitPriority;
      t.rule.match.label = chosen->label;
      t.rule.actions = {net::Action::forward(topo.port_towards(hops[i], hops[i + 1]))};
      out.rules.push_back(t);
    }
    RuleInstall eg{hops.back(), {}, RuleInstall::Role::Egress};
    eg.rule.priority = flow_priority;
    eg.rule.match = net::Match::flow(flow.key);
    eg.rule.match.label = chosen->label;
    eg.rule.actions = deliver_actions(hops.back());
    out.rules.push_back(eg);
  }
  if (malicious) {
    // Catch packets still travelling toward the real destination on an old label.
    RuleInstall block{dst_switch, {}, RuleInstall::Role::Block};
    block.rule.priority = kBlockPriority;
    block.rule.match = net::Match::flow(flow.key);
    block.rule.actions = {net::Action::drop()};
    out.rules.push_back(block);
  }
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Nominal: return "nominal";
    case Verdict::Fault: return "fault";
    case Verdict::Attack: return "attack";
    case Verdict::AttackSuspected: return "attack-suspected";
  }
  return "nominal";
}

std::string verdict_label(Verdict v) {
  switch (v) {
    case Verdict::Nominal: return "nominal";
    case Verdict::Fault: return "fault";
    case Verdict::Attack:
    case Verdict::AttackSuspected: return "attack";
  }
  return "nominal";
}

Verdict correlate_and_verify(const AlertSignal& alert, const CorrelationEvidence& ev, double delta) {
  if (alert.kind != AlertKind::PhysicalAnomaly) return Verdict::Nominal;
  const bool behavior_off = ev.behavior_deviation && *ev.behavior_deviation > delta;
  if (ev.control_path_suspicion > 0 || behavior_off) return Verdict::Attack;
  if (ev.fault_evidence) return Verdict::Fault;
  return Verdict::AttackSuspected;
}

std::string to_string(MitigationAction a) {
  switch (a) {
    case MitigationAction::None: return "none";
    case MitigationAction::ReroutedQuarantine: return "rerouted-quarantine";
    case MitigationAction::Sinkholed: return "sinkholed";
    case MitigationAction::ReroutedFault: return "rerouted-fault";
  }
  return "none";
}

namespace {

constexpr std::uint8_t kMsgAlert = 1;
constexpr std::uint8_t kMsgAck = 2;

void put(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct Reader {
  std::span<const std::uint8_t> b;
  std::size_t pos = 0;
  bool ok = true;
  std::uint64_t get(int bytes) {
    if (pos + static_cast<std::size_t>(bytes) > b.size()) {
      ok = false;
      return 0;
    }
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v = (v << 8) | b[pos++];
    return v;
  }
};

}  // namespace

std::vector<std::uint8_t> encode_alert(const AlertSignal& alert) {
  std::vector<std::uint8_t> out;
  put(out, kMsgAlert, 1);
  put(out, alert.kind == AlertKind::PhysicalAnomaly ? 0 : 1, 1);
  put(out, std::bit_cast<std::uint64_t>(alert.statistic), 8);
  put(out, alert.step, 8);
  const auto len = std::min<std::size_t>(alert.flow_hint.size(), 0xFFFF);
  put(out, len, 2);
  out.insert(out.end(), alert.flow_hint.begin(), alert.flow_hint.begin() + static_cast<std::ptrdiff_t>(len));
  return out;
}

std::vector<std::uint8_t> encode_ack(const MitigationAck& ack) {
  std::vector<std::uint8_t> out;
  put(out, kMsgAck, 1);
  put(out, static_cast<std::uint8_t>(ack.action), 1);
  put(out, ack.transition ? 1 : 0, 1);
  put(out, ack.seq, 4);
  put(out, ack.at, 8);
  put(out, ack.flow.src.value, 4);
  put(out, ack.flow.dst.value, 4);
  put(out, static_cast<std::uint8_t>(ack.flow.proto), 1);
  return out;
}

ControlMessage decode_control(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  const auto type = r.get(1);
  if (!r.ok) return std::monostate{};
  if (type == kMsgAlert) {
    AlertSignal a;
    const auto kind = r.get(1);
    a.statistic = std::bit_cast<double>(r.get(8));
    a.step = r.get(8);
    const auto len = r.get(2);
    if (!r.ok || kind > 1 || r.pos + len != bytes.size()) return std::monostate{};
    a.kind = kind == 0 ? AlertKind::PhysicalAnomaly : AlertKind::Cleared;
    a.flow_hint.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos), bytes.end());
    return a;
  }
  if (type == kMsgAck) {
    MitigationAck a;
    const auto action = r.get(1);
    const auto transition = r.get(1);
    a.seq = static_cast<std::uint32_t>(r.get(4));
    a.at = r.get(8);
    a.flow.src.value = static_cast<std::uint32_t>(r.get(4));
    a.flow.dst.value = static_cast<std::uint32_t>(r.get(4));
    const auto proto = r.get(1);
    if (!r.ok || action > 3 || transition > 1 || proto > 2 || r.pos != bytes.size()) return std::monostate{};
    a.action = static_cast<MitigationAction>(action);
    a.transition = transition == 1;
    a.flow.proto = static_cast<net::Proto>(proto);
    return a;
  }
  return std::monostate{};
}

std::string flow_name(const net::Topology& topo, const FlowKey& key) {
  return topo.name(key.src) + "->" + topo.name(key.dst) + "/" + net::to_string(key.proto);
}

}  // namespace cpsnet::pn

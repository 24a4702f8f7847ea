#include "cpsnet/pn_controller.hpp"

#include <algorithm>

namespace cpsnet::pn {

PnController::PnController(Simulator& sim, net::Network& network, PnConfig cfg, PnRoles roles,
                           StateSpaceModel nominal, scada::RegisterCodec codec)
    : sim_(sim),
      net_(network),
      cfg_(std::move(cfg)),
      roles_(roles),
      nominal_(std::move(nominal)),
      codec_(codec),
      duplicates_(cfg_.duplicate_history) {
  rules_.enabled = cfg_.evidence_rules;
  rules_.envelope = cfg_.envelope;
  rules_.codec = codec_;
  rules_.tau_s = cfg_.tau_s;
  rules_.tau_m = cfg_.tau_m;
  rules_.known_pairs = {{roles_.plant, roles_.controller},
                        {roles_.controller, roles_.plant},
                        {roles_.controller, roles_.pn},
                        {roles_.pn, roles_.controller}};
  const auto& topo = net_.topology();
  path_roles_.middlebox_switch = topo.attachment(roles_.middlebox);
  path_roles_.sinkhole_switch = topo.attachment(roles_.sinkhole);
}

void PnController::start() {
  recompute_table();
  net_.set_hooks(net::ControlPlaneHooks{
      [this](NodeId sw, const net::Packet& h) { on_packet_in(sw, h); },
      [this](NodeId sw, std::uint32_t, const net::Packet& c) { on_probe(sw, c); },
      [this](net::LinkId l, bool up) { on_port_status(l, up); },
  });
  net_.set_host_receiver(roles_.pn, [this](const net::Packet& p) { on_alert_packet(p); });
  const FlowKey known[] = {
      sensor_flow(),
      actuation_flow(),
      {roles_.controller, roles_.pn, net::Proto::ControlChannel},
      {roles_.pn, roles_.controller, net::Proto::ControlChannel},
  };
  for (const auto& key : known) apply_assignment(record_for(key), sim_.now(), false);
}

FlowRecord& PnController::record_for(const FlowKey& key) {
  auto it = flows_.find(key);
  if (it == flows_.end()) it = flows_.emplace(key, FlowRecord{key}).first;
  return it->second;
}

void PnController::recompute_table() {
  table_ = compute_paths(net_.topology(), cfg_.k_paths, down_links_, path_roles_, &labels_);
}

void PnController::apply_assignment(FlowRecord& flow, SimTime decided_at, bool report_mitigation) {
  const auto& topo = net_.topology();
  PathContext ctx{&topo, path_roles_.middlebox_switch, roles_.sinkhole, true};
  PathAssignment a = assign_path(flow, table_, ctx);
  if (a.no_path) ++no_path_events_;
  flow.current_label = a.label;

  auto& inst = installed_[flow.key];
  const auto old_ingress = std::move(inst.ingress);
  const auto old_blocks = std::move(inst.blocks);
  inst.ingress.clear();
  inst.blocks.clear();
  inst.hops = a.hops;

  std::vector<std::pair<NodeId, net::FlowRule>> to_install;
  for (auto& r : a.rules) {
    if (r.role == RuleInstall::Role::Transit) {
      if (!transit_installed_.insert({r.sw, a.label}).second) continue;
    }
    r.rule.id = next_rule_id_++;
    if (r.role == RuleInstall::Role::Ingress || (r.role == RuleInstall::Role::Egress && a.hops.size() == 1)) {
      inst.ingress.emplace_back(r.sw, r.rule.id);
    } else if (r.role == RuleInstall::Role::Block) {
      inst.blocks.emplace_back(r.sw, r.rule.id);
    }
    to_install.emplace_back(r.sw, std::move(r.rule));
  }

  const SimTime at = sim_.now() + cfg_.control_latency;
  sim_.schedule(at, "pn", "rule-install",
                [this, to_install = std::move(to_install), old_ingress, old_blocks]() mutable {
                  for (auto& [sw, rule] : to_install) net_.install_rule(sw, std::move(rule));
                  for (const auto& [sw, id] : old_ingress) net_.remove_rule(sw, id);
                  for (const auto& [sw, id] : old_blocks) net_.remove_rule(sw, id);
                });
  if (report_mitigation && observer_.on_mitigation) {
    observer_.on_mitigation(MitigationRecord{flow.key, flow.cls, decided_at, at});
  }
}

void PnController::handle_transitions(const std::vector<ClassTransition>& ts) {
  if (ts.empty()) return;
  for (const auto& t : ts) {
    transitions_.push_back(t);
    if (observer_.on_transition) observer_.on_transition(t);
  }
  FlowRecord& flow = record_for(ts.back().flow);
  apply_assignment(flow, sim_.now(), true);
  for (const auto& t : ts) {
    MitigationAction action = MitigationAction::None;
    if (t.to == TrafficClass::Suspicious) action = MitigationAction::ReroutedQuarantine;
    if (t.to == TrafficClass::Malicious) action = MitigationAction::Sinkholed;
    send_ack(t.flow, action, true);
  }
}

void PnController::send_ack(const FlowKey& flow, MitigationAction action, bool transition) {
  MitigationAck ack{action, flow, sim_.now(), next_ack_seq_++, transition};
  acks_.push_back(ack);
  if (observer_.on_ack_sent) observer_.on_ack_sent(ack);
  net::Packet p;
  p.src = roles_.pn;
  p.dst = roles_.controller;
  p.proto = net::Proto::ControlChannel;
  p.payload = encode_ack(ack);
  net_.send(roles_.pn, std::move(p));
}

void PnController::on_packet_in(NodeId sw, const net::Packet& header) {
  const FlowKey key = header.key();
  sim_.schedule(sim_.now() + cfg_.control_latency, "pn", "packet-in", [this, sw, key]() {
    FlowRecord& flow = record_for(key);
    ProbeReport report{key, std::monostate{}, sw, sim_.now()};
    auto outcome = ingest_probe_report(flow, report, rules_, duplicates_);
    if (!outcome.transitions.empty()) {
      handle_transitions(outcome.transitions);
    } else if (!installed_.count(key)) {
      apply_assignment(flow, sim_.now(), false);
    }
  });
}

void PnController::on_probe(NodeId sw, const net::Packet& copy) {
  const FlowKey key = copy.key();
  PayloadDigest digest;
  if (copy.proto == net::Proto::Scada) {
    auto decoded = scada::decode_frame(copy.payload);
    if (auto* f = std::get_if<scada::ScadaFrame>(&decoded)) {
      digest = std::move(*f);
    } else {
      digest = std::get<scada::DecodeError>(decoded);
    }
  }
  sim_.schedule(sim_.now() + cfg_.control_latency, "pn", "probe-report",
                [this, sw, key, digest = std::move(digest)]() {
                  FlowRecord& flow = record_for(key);
                  ProbeReport report{key, digest, sw, sim_.now()};
                  auto outcome = ingest_probe_report(flow, report, rules_, duplicates_);
                  if (const auto* f = std::get_if<scada::ScadaFrame>(&digest)) {
                    if (sw == net_.topology().attachment(key.dst)) record_sample(key, *f);
                  }
                  handle_transitions(outcome.transitions);
                });
}

void PnController::on_port_status(net::LinkId link, bool up) {
  sim_.schedule(sim_.now() + cfg_.control_latency, "pn", "port-status", [this, link, up]() {
    if (up) {
      down_links_.erase(link);
    } else {
      down_links_.insert(link);
      last_down_[link] = sim_.now();
    }
    recompute_table();
  });
}

void PnController::record_sample(const FlowKey& flow, const scada::ScadaFrame& frame) {
  const bool sensor = flow == sensor_flow() && frame.function == scada::Function::ReadHoldingRegistersResponse;
  const bool actuation =
      flow == actuation_flow() && frame.function == scada::Function::WriteMultipleRegistersRequest;
  if (!sensor && !actuation) return;
  const auto per = static_cast<std::size_t>(codec_.registers_per_value);
  const auto expected = static_cast<std::size_t>(sensor ? nominal_.p() : nominal_.m()) * per;
  if (frame.register_values.size() != expected) return;
  const auto values = scada::unpack_measurement(frame.register_values, codec_);
  const Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  auto [it, fresh] = samples_.try_emplace(frame.transaction_id);
  if (fresh) sample_order_.push_back(frame.transaction_id);
  (sensor ? it->second.y : it->second.u) = v;
  const std::size_t cap = cfg_.sysid_window + 1;
  if (sample_order_.size() > 2 * cap) {
    const auto drop = sample_order_.size() - cap;
    for (std::size_t i = 0; i < drop; ++i) samples_.erase(sample_order_[i]);
    sample_order_.erase(sample_order_.begin(), sample_order_.begin() + static_cast<std::ptrdiff_t>(drop));
  }
}

namespace {
constexpr double kBehaviorConfidence = 3.0;
}  // namespace

SysIdResult PnController::estimate_behavior() const {
  std::vector<IoTransition> rows;
  const std::size_t start = sample_order_.size() > cfg_.sysid_window + 1
                                ? sample_order_.size() - cfg_.sysid_window - 1
                                : 0;
  for (std::size_t i = start; i < sample_order_.size(); ++i) {
    const auto id = sample_order_[i];
    const auto& s = samples_.at(id);
    auto next = samples_.find(static_cast<std::uint16_t>(id + 1));
    if (!s.y || !s.u || next == samples_.end() || !next->second.y) continue;
    rows.push_back(IoTransition{*s.y, *s.u, *next->second.y});
  }
  if (rows.size() > cfg_.sysid_window) rows.erase(rows.begin(), rows.end() - static_cast<std::ptrdiff_t>(cfg_.sysid_window));
  return identify_behavior(rows, cfg_.sysid_min_samples);
}

std::set<net::LinkId> PnController::path_links(const FlowKey& flow) const {
  const auto& topo = net_.topology();
  std::set<net::LinkId> out;
  for (NodeId h : {flow.src, flow.dst}) {
    if (auto l = topo.link_between(h, topo.attachment(h))) out.insert(*l);
  }
  auto it = installed_.find(flow);
  if (it != installed_.end()) {
    const auto& hops = it->second.hops;
    for (std::size_t i = 0; i + 1 < hops.size(); ++i) {
      if (auto l = topo.link_between(hops[i], hops[i + 1])) out.insert(*l);
    }
  }
  return out;
}

bool PnController::fault_evidence() const {
  const SimTime now = sim_.now();
  for (const auto& flow : {sensor_flow(), actuation_flow()}) {
    for (auto l : path_links(flow)) {
      if (down_links_.count(l)) return true;
      auto it = last_down_.find(l);
      if (it != last_down_.end() && now - it->second <= cfg_.fault_window) return true;
    }
  }
  return false;
}

std::optional<FlowKey> PnController::resolve_hint(const std::string& hint) const {
  for (const auto& [key, rec] : flows_) {
    if (flow_name(net_.topology(), key) == hint) return key;
  }
  return std::nullopt;
}

void PnController::on_alert_packet(const net::Packet& p) {
  auto msg = decode_control(p.payload);
  if (const auto* alert = std::get_if<AlertSignal>(&msg)) handle_alert(*alert);
}

void PnController::handle_alert(const AlertSignal& alert) {
  const SimTime now = sim_.now();
  if (observer_.on_alert) observer_.on_alert(alert, now);
  if (alert.kind == AlertKind::Cleared) {
    if (!first_cleared_) first_cleared_ = now;
    if (!cfg_.deescalate_on_clear) return;
    for (auto& [key, flow] : flows_) {
      if (flow.cls == TrafficClass::Legitimate || !verdict_escalated_.count(key)) continue;
      verdict_escalated_.erase(key);
      ClassTransition t{key, flow.cls, TrafficClass::Legitimate, now, "cleared"};
      flow.cls = TrafficClass::Legitimate;
      flow.suspicion = 0;
      handle_transitions({t});
    }
    return;
  }

  const FlowRecord& sensor = record_for(sensor_flow());
  const FlowRecord& actuation = record_for(actuation_flow());
  CorrelationEvidence ev;
  ev.control_path_suspicion = std::max(sensor.suspicion, actuation.suspicion);
  ev.fault_evidence = fault_evidence();
  auto sysid = estimate_behavior();
  if (const auto* est = std::get_if<BehaviorEstimate>(&sysid)) {
    // A closed loop without watermark gives a loose, biased fit; only a
    // tight estimate counts as evidence.
    if (est->max_stderr * kBehaviorConfidence <= cfg_.delta) ev.behavior_deviation = behavior_deviation(*est, nominal_);
  }
  const Verdict verdict = correlate_and_verify(alert, ev, cfg_.delta);

  FlowKey target = resolve_hint(alert.flow_hint).value_or(sensor_flow());
  if (ev.control_path_suspicion > 0) {
    target = actuation.suspicion > sensor.suspicion ? actuation_flow() : sensor_flow();
  }
  VerdictRecord rec{now, verdict, target, ev.control_path_suspicion, ev.fault_evidence, ev.behavior_deviation,
                    alert.step};
  verdicts_.push_back(rec);
  if (observer_.on_verdict) observer_.on_verdict(rec);

  switch (verdict) {
    case Verdict::Nominal:
      return;
    case Verdict::Attack:
    case Verdict::AttackSuspected: {
      // Without a network-side culprit both directions of the loop are quarantined.
      std::vector<FlowKey> targets{target};
      if (verdict == Verdict::AttackSuspected) targets = {sensor_flow(), actuation_flow()};
      const auto level = verdict == Verdict::Attack ? TrafficClass::Malicious : TrafficClass::Suspicious;
      bool any = false;
      for (const auto& key : targets) {
        auto ts = escalate_to(record_for(key), level, now, "verdict:" + to_string(verdict));
        if (ts.empty()) continue;
        verdict_escalated_.insert(key);
        handle_transitions(ts);
        any = true;
      }
      if (!any) send_ack(target, MitigationAction::None, false);
      return;
    }
    case Verdict::Fault: {
      recompute_table();
      bool rerouted = false;
      for (const auto& key : {sensor_flow(), actuation_flow()}) {
        const auto links = path_links(key);
        if (std::any_of(links.begin(), links.end(), [&](net::LinkId l) { return down_links_.count(l) > 0; })) {
          apply_assignment(record_for(key), now, true);
          rerouted = true;
        }
      }
      send_ack(target, rerouted ? MitigationAction::ReroutedFault : MitigationAction::None, false);
      return;
    }
  }
}

}  // namespace cpsnet::pn

#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "cpsnet/harness.hpp"

namespace cpsnet {

namespace {

using json = nlohmann::json;

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

Vector from_values(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_values(const Vector& v) { return {v.data(), v.data() + v.size()}; }

class Scenario {
 public:
  Scenario(const ScenarioConfig& cfg, bool trace);
  RunResult run();

 private:
  void plant_step(std::uint64_t k);
  void controller_tick(std::uint64_t k);
  void on_plant_packet(const net::Packet& p);
  void on_controller_packet(const net::Packet& p);
  void arm_adversaries();
  void emit_ground_truth();
  void finish(RunResult& out);
  std::string flow(const net::FlowKey& k) const { return pn::flow_name(net_->topology(), k); }

  const ScenarioConfig& cfg_;
  Simulator sim_;
  std::unique_ptr<net::Network> net_;
  std::unique_ptr<pn::PnController> pn_;
  net::NodeId plant_, ctrl_, pnhost_, sinkhole_;
  std::uint64_t steps_ = 0;
  SimTime period_;

  // plant side
  PlantState state_;
  Vector u_held_;
  Vector last_x_, last_u_;
  RngStream rng_process_, rng_measure_, rng_watermark_;
  std::map<std::uint16_t, SimTime> actuation_delay_;
  std::uint64_t sensor_clamped_ = 0;

  // controller side
  Matrix L_;
  GaussianSampler watermark_;
  Estimate est_;
  Vector u_prev_;
  Chi2Detector detector_;
  Supervisor supervisor_;
  struct Pending {
    Vector y;
    SimTime delay;
  };
  std::map<std::uint16_t, Pending> pending_;
  std::uint64_t actuation_clamped_ = 0;
  std::vector<std::uint32_t> acks_received_;

  std::vector<std::shared_ptr<adv::Attack>> attacks_;
  std::vector<std::pair<const adv::AttackSpec*, adv::Attack*>> attack_logs_;
  std::vector<pn::MitigationRecord> mitigations_;
  std::vector<json> records_;
};

Scenario::Scenario(const ScenarioConfig& cfg, bool trace)
    : cfg_(cfg),
      period_(cfg.controller.period),
      rng_process_(cfg.seed, "plant/process"),
      rng_measure_(cfg.seed, "plant/measurement"),
      rng_watermark_(cfg.seed, "controller/watermark"),
      detector_(cfg.controller.window, cfg.resolved_tau()),
      supervisor_(cfg.controller.hysteresis) {
  sim_.set_tracing(trace);
  net_ = std::make_unique<net::Network>(sim_, cfg.build_topology(), cfg.seed, cfg.switches);
  const auto& topo = net_->topology();
  plant_ = topo.require(cfg.roles.plant);
  ctrl_ = topo.require(cfg.roles.controller);
  pnhost_ = topo.require(cfg.roles.pn);
  sinkhole_ = topo.require(cfg.pnctrl.sinkhole);
  const auto& model = cfg.plant.model;
  pn_ = std::make_unique<pn::PnController>(
      sim_, *net_, cfg.pnctrl.config,
      pn::PnRoles{plant_, ctrl_, pnhost_, topo.require(cfg.pnctrl.middlebox), sinkhole_}, model, cfg.codec);
  supervisor_ = Supervisor(cfg.controller.hysteresis, flow(pn_->sensor_flow()));

  const auto period = cfg.controller.period;
  steps_ = cfg.duration >= cfg.controller.deadline ? (cfg.duration - cfg.controller.deadline) / period : 0;

  state_ = PlantState{cfg.plant.x0, 0};
  u_held_ = Vector::Zero(model.m());
  u_prev_ = Vector::Zero(model.m());
  L_ = lqr_gain(model.A, model.B, cfg.controller.Q, cfg.controller.R);
  watermark_ = GaussianSampler(cfg.controller.Qw);
  est_ = Estimate{cfg.controller.xhat0, cfg.controller.P0, 0};

  net_->set_host_receiver(plant_, [this](const net::Packet& p) { on_plant_packet(p); });
  net_->set_host_receiver(ctrl_, [this](const net::Packet& p) { on_controller_packet(p); });

  pn::PnObserver obs;
  obs.on_transition = [this](const pn::ClassTransition& t) {
    records_.push_back({{"type", "transition"},
                        {"t_us", t.at},
                        {"flow", flow(t.flow)},
                        {"from", pn::to_string(t.from)},
                        {"to", pn::to_string(t.to)},
                        {"cause", t.cause}});
  };
  obs.on_verdict = [this](const pn::VerdictRecord& v) {
    records_.push_back({{"type", "verdict"},
                        {"t_us", v.at},
                        {"k", v.alert_step},
                        {"verdict", pn::to_string(v.verdict)},
                        {"label", pn::verdict_label(v.verdict)},
                        {"flow", flow(v.flow)},
                        {"suspicion", v.suspicion},
                        {"fault_evidence", v.fault_evidence},
                        {"deviation", v.deviation ? finite_or_null(*v.deviation) : json(nullptr)}});
  };
  obs.on_ack_sent = [this](const pn::MitigationAck& a) {
    records_.push_back({{"type", "ack_sent"},
                        {"t_us", a.at},
                        {"seq", a.seq},
                        {"action", pn::to_string(a.action)},
                        {"flow", flow(a.flow)},
                        {"transition", a.transition}});
  };
  obs.on_mitigation = [this](const pn::MitigationRecord& m) { mitigations_.push_back(m); };
  pn_->set_observer(std::move(obs));
}

void Scenario::plant_step(std::uint64_t k) {
  const auto& model = cfg_.plant.model;
  const Vector u = u_held_;
  PlantOutput out = cpsnet::plant_step(model, state_, u, rng_process_, rng_measure_, cfg_.plant.divergence_bound);
  state_ = out.state;
  last_x_ = state_.x;
  last_u_ = u;

  scada::ScadaFrame f;
  f.transaction_id = static_cast<std::uint16_t>(k & 0xFFFF);
  f.unit_id = 1;
  f.function = scada::Function::ReadHoldingRegistersResponse;
  if (scada::pack_clamped(to_values(out.y), cfg_.codec, f.register_values)) ++sensor_clamped_;
  net::Packet p;
  p.src = plant_;
  p.dst = ctrl_;
  p.proto = net::Proto::Scada;
  p.payload = scada::encode_frame(f);
  net_->send(plant_, std::move(p));

  if (k < steps_) {
    sim_.schedule((k + 1) * period_, cfg_.roles.plant, "plant-step", [this, k] { plant_step(k + 1); });
  }
}

void Scenario::on_plant_packet(const net::Packet& p) {
  if (p.proto != net::Proto::Scada) return;
  auto decoded = scada::decode_frame(p.payload);
  const auto* f = std::get_if<scada::ScadaFrame>(&decoded);
  if (!f || f->function != scada::Function::WriteMultipleRegistersRequest) return;
  const auto per = static_cast<std::size_t>(cfg_.codec.registers_per_value);
  if (f->register_values.size() != static_cast<std::size_t>(cfg_.plant.model.m()) * per) return;
  u_held_ = from_values(scada::unpack_measurement(f->register_values, cfg_.codec));
  actuation_delay_[f->transaction_id] = sim_.now() - p.created_at;
}

void Scenario::on_controller_packet(const net::Packet& p) {
  if (p.proto == net::Proto::ControlChannel) {
    auto msg = pn::decode_control(p.payload);
    if (const auto* ack = std::get_if<pn::MitigationAck>(&msg)) {
      acks_received_.push_back(ack->seq);
      records_.push_back({{"type", "ack"},
                          {"t_us", sim_.now()},
                          {"seq", ack->seq},
                          {"action", pn::to_string(ack->action)},
                          {"flow", flow(ack->flow)},
                          {"transition", ack->transition}});
    }
    return;
  }
  if (p.proto != net::Proto::Scada) return;
  auto decoded = scada::decode_frame(p.payload);
  const auto* f = std::get_if<scada::ScadaFrame>(&decoded);
  if (!f || f->function != scada::Function::ReadHoldingRegistersResponse) return;
  const auto per = static_cast<std::size_t>(cfg_.codec.registers_per_value);
  if (f->register_values.size() != static_cast<std::size_t>(cfg_.plant.model.p()) * per) return;
  pending_[f->transaction_id] =
      Pending{from_values(scada::unpack_measurement(f->register_values, cfg_.codec)), sim_.now() - p.created_at};
}

void Scenario::controller_tick(std::uint64_t k) {
  const auto& model = cfg_.plant.model;
  const auto txn = static_cast<std::uint16_t>(k & 0xFFFF);
  auto it = pending_.find(txn);
  const bool measured = it != pending_.end();
  std::optional<double> g;
  bool alarm = true;  // a missed deadline counts as an alarm step
  json sensor_delay = nullptr;
  if (measured) {
    KalmanResult kr = kalman_step(model, est_, u_prev_, it->second.y);
    est_ = kr.estimate;
    const DetectorResult d = detector_.update(kr.residual, kr.S);
    alarm = d.warm && d.alarm;
    if (d.warm) g = d.g;
    sensor_delay = it->second.delay;
  } else {
    est_ = kalman_predict(model, est_, u_prev_);
  }
  pending_.clear();

  if (auto sig = supervisor_.tick(alarm, g.value_or(std::numeric_limits<double>::infinity()), k)) {
    records_.push_back({{"type", "alert"},
                        {"t_us", sim_.now()},
                        {"k", k},
                        {"kind", to_string(sig->kind)},
                        {"g", finite_or_null(sig->statistic)}});
    net::Packet p;
    p.src = ctrl_;
    p.dst = pnhost_;
    p.proto = net::Proto::ControlChannel;
    p.payload = pn::encode_alert(*sig);
    net_->send(ctrl_, std::move(p));
  }

  const Vector u_star = cpsnet::controller_tick(est_, L_, cfg_.controller.reference);
  const WatermarkedInput wm = watermark_input(u_star, watermark_, rng_watermark_);
  scada::ScadaFrame f;
  f.transaction_id = txn;
  f.unit_id = 1;
  f.function = scada::Function::WriteMultipleRegistersRequest;
  if (scada::pack_clamped(to_values(wm.u), cfg_.codec, f.register_values)) ++actuation_clamped_;
  u_prev_ = from_values(scada::unpack_measurement(f.register_values, cfg_.codec));
  net::Packet p;
  p.src = ctrl_;
  p.dst = plant_;
  p.proto = net::Proto::Scada;
  p.payload = scada::encode_frame(f);
  net_->send(ctrl_, std::move(p));

  json act_delay = nullptr;
  if (auto a = actuation_delay_.find(static_cast<std::uint16_t>((k - 1) & 0xFFFF)); k > 1 && a != actuation_delay_.end()) {
    act_delay = a->second;
  }
  actuation_delay_.clear();
  records_.push_back({{"type", "step"},
                      {"k", k},
                      {"t_us", k * period_},
                      {"x", to_json(last_x_)},
                      {"u", to_json(last_u_)},
                      {"u_cmd", to_json(u_prev_)},
                      {"measured", measured},
                      {"g", g ? json(*g) : json(nullptr)},
                      {"alarm", alarm},
                      {"sensor_delay_us", sensor_delay},
                      {"actuation_delay_us", act_delay}});

  if (k < steps_) {
    sim_.schedule((k + 1) * period_ + cfg_.controller.deadline, cfg_.roles.controller, "controller-tick",
                  [this, k] { controller_tick(k + 1); });
  }
}

void Scenario::arm_adversaries() {
  const auto& topo = net_->topology();
  for (const auto& spec : cfg_.attacks) {
    if (spec.is_identity()) continue;
    const net::NodeId locus = topo.require(spec.locus);
    switch (spec.kind) {
      case adv::AttackKind::Replay: {
        const SimTime from = spec.start - std::min(spec.record_duration, spec.start);
        auto a = std::make_shared<adv::ReplayInterceptor>(pn_->sensor_flow(), from, spec.start, spec.stop,
                                                          spec.preserve_transaction_ids);
        net_->add_interceptor(locus, a);
        attacks_.push_back(a);
        break;
      }
      case adv::AttackKind::Fdi: {
        auto a = std::make_shared<adv::FdiInterceptor>(pn_->sensor_flow(), spec.start, spec.stop, spec.bias,
                                                       cfg_.codec);
        net_->add_interceptor(locus, a);
        attacks_.push_back(a);
        break;
      }
      case adv::AttackKind::Mitm: {
        auto a = std::make_shared<adv::MitmInterceptor>(pn_->actuation_flow(), spec.start, spec.stop, spec.scale,
                                                        cfg_.codec);
        net_->add_interceptor(locus, a);
        attacks_.push_back(a);
        break;
      }
      case adv::AttackKind::Dos: {
        auto a = std::make_shared<adv::FloodSource>(*net_, sim_, locus, topo.require(spec.target), spec.start,
                                                    spec.stop, spec.rate_pps, spec.frame_bytes);
        a->arm();
        attacks_.push_back(a);
        break;
      }
    }
    attack_logs_.emplace_back(&spec, attacks_.back().get());
  }
}

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

void Scenario::emit_ground_truth() {
  for (const auto& spec : cfg_.attacks) {
    if (spec.is_identity()) continue;
    records_.push_back({{"type", "ground_truth"},
                        {"kind", "attack"},
                        {"attack", adv::to_string(spec.kind)},
                        {"locus", spec.locus},
                        {"start_us", spec.start},
                        {"stop_us", spec.stop},
                        {"onset_step", ceil_div(spec.start, period_)},
                        {"end_step", spec.stop / period_}});
  }
  const auto& topo = net_->topology();
  for (const auto& f : cfg_.faults) {
    const SimTime stop = f.restore.value_or(cfg_.duration);
    const auto link = *topo.link_between(topo.require(f.a), topo.require(f.b));
    records_.push_back({{"type", "ground_truth"},
                        {"kind", "fault"},
                        {"link", topo.link_name(link)},
                        {"start_us", f.at},
                        {"stop_us", stop},
                        {"onset_step", ceil_div(f.at, period_)},
                        {"end_step", stop / period_}});
  }
}

RunResult Scenario::run() {
  RunResult out;
  const auto& topo = net_->topology();
  records_.push_back({{"type", "run"},
                      {"seed", cfg_.seed},
                      {"duration_us", cfg_.duration},
                      {"period_us", period_},
                      {"steps", steps_},
                      {"tau", cfg_.resolved_tau()},
                      {"window", cfg_.controller.window},
                      {"Q", to_json(cfg_.controller.Q)},
                      {"R", to_json(cfg_.controller.R)},
                      {"topology_digest", topo.digest()},
                      {"propagation_bound_us", cfg_.pnctrl.config.propagation_bound}});
  emit_ground_truth();

  pn_->start();
  arm_adversaries();
  for (const auto& f : cfg_.faults) {
    const auto link = *topo.link_between(topo.require(f.a), topo.require(f.b));
    net_->inject_link_failure(link, f.at);
    if (f.restore) net_->restore_link(link, *f.restore);
  }
  if (steps_ >= 1) {
    sim_.schedule(period_, cfg_.roles.plant, "plant-step", [this] { plant_step(1); });
    sim_.schedule(period_ + cfg_.controller.deadline, cfg_.roles.controller, "controller-tick",
                  [this] { controller_tick(1); });
  }
  try {
    sim_.run_until(cfg_.duration);
  } catch (const DivergenceError& e) {
    out.exit_code = ExitCode::Divergence;
    out.diagnostic = e.what();
    records_.push_back({{"type", "divergence"}, {"t_us", sim_.now()}, {"k", e.step()}, {"message", e.what()}});
  }
  finish(out);
  return out;
}

void Scenario::finish(RunResult& out) {
  const auto& deliveries = net_->deliveries();
  const SimTime bound = cfg_.pnctrl.config.propagation_bound;

  for (const auto& m : mitigations_) {
    SimTime complete = m.installed_at;
    if (m.cls == pn::TrafficClass::Malicious) {
      for (const auto& d : deliveries) {
        if (d.key == m.flow && d.host == m.flow.dst && d.at >= m.decided_at) complete = std::max(complete, d.at);
      }
    }
    records_.push_back({{"type", "mitigation"},
                        {"flow", flow(m.flow)},
                        {"class", pn::to_string(m.cls)},
                        {"decided_us", m.decided_at},
                        {"installed_us", m.installed_at},
                        {"complete_us", complete}});
  }
  for (const auto& [spec, attack] : attack_logs_) {
    const auto& log = attack->log();
    records_.push_back({{"type", "attack_log"},
                        {"attack", adv::to_string(spec->kind)},
                        {"locus", spec->locus},
                        {"recorded", log.recorded},
                        {"modified", log.modified},
                        {"dropped", log.dropped},
                        {"clamped", log.clamped},
                        {"injected", log.injected}});
  }

  const net::NetCounters c = net_->counters();
  std::uint64_t sinkholed = 0;
  for (const auto& d : deliveries) {
    if (d.host == sinkhole_) ++sinkholed;
  }
  records_.push_back({{"type", "counters"},
                      {"injected", c.injected},
                      {"delivered", c.delivered},
                      {"lost", c.lost},
                      {"dropped_rule", c.dropped_rule},
                      {"dropped_miss", c.dropped_miss},
                      {"dropped_failure", c.dropped_failure},
                      {"dropped_attack", c.dropped_attack},
                      {"buffered", c.buffered},
                      {"in_flight", c.in_flight},
                      {"mirrored", c.mirrored},
                      {"sinkholed", sinkholed},
                      {"no_path_events", pn_->no_path_events()},
                      {"sensor_clamped", sensor_clamped_},
                      {"actuation_clamped", actuation_clamped_},
                      {"events", sim_.processed()}});

  // Class monotonicity.
  bool monotone = true;
  std::map<net::FlowKey, pn::TrafficClass> cls;
  const auto cleared = pn_->first_cleared_alert();
  for (const auto& t : pn_->transitions()) {
    auto cur = cls.count(t.flow) ? cls[t.flow] : pn::TrafficClass::Legitimate;
    const bool up = static_cast<int>(t.to) == static_cast<int>(t.from) + 1;
    const bool down = t.to == pn::TrafficClass::Legitimate && cleared && *cleared <= t.at;
    if (t.from != cur || !(up || down)) monotone = false;
    cls[t.flow] = t.to;
  }

  // Ack pairing: one ack per transition, received in emission order.
  std::vector<std::uint32_t> sent_transition;
  std::vector<std::uint32_t> sent_all;
  for (const auto& a : pn_->acks_sent()) {
    sent_all.push_back(a.seq);
    if (a.transition) sent_transition.push_back(a.seq);
  }
  bool paired = sent_transition.size() == pn_->transitions().size() && acks_received_.size() <= sent_all.size() &&
                std::equal(acks_received_.begin(), acks_received_.end(), sent_all.begin());

  // Mitigation completeness.
  bool complete = true;
  for (const auto& t : pn_->transitions()) {
    if (t.to != pn::TrafficClass::Malicious) continue;
    for (const auto& d : deliveries) {
      if (d.key == t.flow && d.host == t.flow.dst && d.at > t.at + bound) complete = false;
    }
  }

  const bool conserved = c.conserved();
  const bool fifo = net_->fifo_violations() == 0;
  records_.push_back({{"type", "audit"},
                      {"conservation", conserved},
                      {"fifo", fifo},
                      {"class_monotonicity", monotone},
                      {"ack_pairing", paired},
                      {"mitigation_completeness", complete}});
  if (!conserved) out.failed_audits.push_back("conservation");
  if (!fifo) out.failed_audits.push_back("fifo");
  if (!monotone) out.failed_audits.push_back("class_monotonicity");
  if (!paired) out.failed_audits.push_back("ack_pairing");
  if (!complete) out.failed_audits.push_back("mitigation_completeness");

  out.summary = summarize(records_);
  // The summary must be reproducible from the serialized record stream.
  if (summarize(parse_jsonl(to_jsonl(records_))) != out.summary) {
    out.failed_audits.push_back("summary_recomputation");
  }
  if (sim_.trace().size()) {
    std::ostringstream tr;
    sim_.write_trace(tr);
    out.trace = tr.str();
  }
  if (out.exit_code == ExitCode::Ok && !out.failed_audits.empty()) {
    out.exit_code = ExitCode::AuditFailure;
    out.diagnostic = "invariant audit failed:";
    for (const auto& a : out.failed_audits) out.diagnostic += " " + a;
  }
  out.records = std::move(records_);
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts) {
  const bool trace = opts.trace || cfg.outputs.trace;
  Scenario scenario(cfg, trace);
  RunResult result = scenario.run();
  if (opts.out_dir) {
    namespace fs = std::filesystem;
    const fs::path dir(*opts.out_dir);
    fs::create_directories(dir);
    std::ofstream(dir / "steps.jsonl", std::ios::binary) << to_jsonl(result.records);
    std::ofstream(dir / "summary.json", std::ios::binary) << result.summary.dump(2) << "\n";
    if (trace) std::ofstream(dir / "trace.log", std::ios::binary) << result.trace;
  }
  return result;
}

}  // namespace cpsnet

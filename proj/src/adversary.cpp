#include "cpsnet/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cpsnet::adv {

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::Replay: return "replay";
    case AttackKind::Fdi: return "false-data-injection";
    case AttackKind::Mitm: return "mitm-rewrite";
    case AttackKind::Dos: return "dos-flood";
  }
  return "replay";
}

bool AttackSpec::is_identity() const {
  switch (kind) {
    case AttackKind::Replay: return start >= stop;
    case AttackKind::Fdi: return std::all_of(bias.begin(), bias.end(), [](double b) { return b == 0.0; });
    case AttackKind::Mitm: return scale == 1.0;
    case AttackKind::Dos: return rate_pps <= 0.0;
  }
  return false;
}

namespace {

bool on_flow(const net::Packet& p, const FlowKey& f) { return p.key() == f; }

}  // namespace

ReplayInterceptor::ReplayInterceptor(FlowKey flow, SimTime record_from, SimTime start, SimTime stop,
                                     bool preserve_ids)
    : flow_(flow), record_from_(record_from), start_(start), stop_(stop), preserve_ids_(preserve_ids) {}

net::InterceptResult ReplayInterceptor::on_packet(net::Packet& packet, NodeId, SimTime now) {
  if (!on_flow(packet, flow_) || packet.mirror) return net::InterceptResult::Pass;
  if (now < record_from_ || now > stop_) return net::InterceptResult::Pass;
  auto decoded = scada::decode_frame(packet.payload);
  auto* frame = std::get_if<scada::ScadaFrame>(&decoded);
  if (!frame || frame->function != scada::Function::ReadHoldingRegistersResponse) {
    return net::InterceptResult::Pass;
  }
  if (now < start_) {
    recording_.push_back(*frame);
    ++log_.recorded;
    return net::InterceptResult::Pass;
  }
  if (recording_.empty()) {
    ++log_.dropped;
    return net::InterceptResult::Drop;
  }
  const auto& old = recording_[cursor_ % recording_.size()];
  ++cursor_;
  frame->register_values = old.register_values;
  if (preserve_ids_) frame->transaction_id = old.transaction_id;
  packet.payload = scada::encode_frame(*frame);
  ++log_.modified;
  return net::InterceptResult::Pass;
}

FdiInterceptor::FdiInterceptor(FlowKey flow, SimTime start, SimTime stop, std::vector<double> bias,
                               scada::RegisterCodec codec)
    : flow_(flow), start_(start), stop_(stop), bias_(std::move(bias)), codec_(codec) {}

net::InterceptResult FdiInterceptor::on_packet(net::Packet& packet, NodeId, SimTime now) {
  if (!on_flow(packet, flow_) || packet.mirror || now < start_ || now > stop_) return net::InterceptResult::Pass;
  if (std::all_of(bias_.begin(), bias_.end(), [](double b) { return b == 0.0; })) return net::InterceptResult::Pass;
  auto decoded = scada::decode_frame(packet.payload);
  auto* frame = std::get_if<scada::ScadaFrame>(&decoded);
  if (!frame || frame->function != scada::Function::ReadHoldingRegistersResponse) {
    return net::InterceptResult::Pass;
  }
  auto values = scada::unpack_measurement(frame->register_values, codec_);
  if (values.size() != bias_.size()) return net::InterceptResult::Pass;
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += bias_[i];
  if (scada::pack_clamped(values, codec_, frame->register_values)) ++log_.clamped;
  packet.payload = scada::encode_frame(*frame);
  ++log_.modified;
  return net::InterceptResult::Pass;
}

MitmInterceptor::MitmInterceptor(FlowKey flow, SimTime start, SimTime stop, double scale,
                                 scada::RegisterCodec codec)
    : flow_(flow), start_(start), stop_(stop), scale_(scale), codec_(codec) {}

net::InterceptResult MitmInterceptor::on_packet(net::Packet& packet, NodeId, SimTime now) {
  if (scale_ == 1.0 || !on_flow(packet, flow_) || packet.mirror || now < start_ || now > stop_) {
    return net::InterceptResult::Pass;
  }
  auto decoded = scada::decode_frame(packet.payload);
  auto* frame = std::get_if<scada::ScadaFrame>(&decoded);
  if (!frame || frame->function != scada::Function::WriteMultipleRegistersRequest) {
    return net::InterceptResult::Pass;
  }
  auto values = scada::unpack_measurement(frame->register_values, codec_);
  for (double& v : values) v *= scale_;
  if (scada::pack_clamped(values, codec_, frame->register_values)) ++log_.clamped;
  packet.payload = scada::encode_frame(*frame);
  ++log_.modified;
  return net::InterceptResult::Pass;
}

FloodSource::FloodSource(net::Network& network, Simulator& sim, NodeId host, NodeId target, SimTime start,
                         SimTime stop, double rate_pps, std::size_t frame_bytes)
    : net_(network),
      sim_(sim),
      host_(host),
      target_(target),
      start_(start),
      stop_(stop),
      interval_(rate_pps > 0 ? std::max<SimTime>(1, static_cast<SimTime>(std::llround(1e6 / rate_pps))) : 0),
      frame_bytes_(frame_bytes),
      next_(start) {}

void FloodSource::arm() {
  if (interval_ == 0 || start_ > stop_) return;
  sim_.schedule(start_, net_.topology().name(host_), "flood", [this] { emit(); });
}

void FloodSource::emit() {
  net::Packet p;
  p.src = host_;
  p.dst = target_;
  p.proto = net::Proto::Other;
  p.payload.assign(frame_bytes_, 0);
  net_.send(host_, std::move(p));
  ++log_.injected;
  next_ += interval_;
  if (next_ <= stop_) sim_.schedule(next_, net_.topology().name(host_), "flood", [this] { emit(); });
}

}  // namespace cpsnet::adv

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cpsnet/netsim.hpp"
#include "cpsnet/scada.hpp"

namespace cpsnet::adv {

using net::FlowKey;
using net::NodeId;

enum class AttackKind { Replay, Fdi, Mitm, Dos };

std::string to_string(AttackKind k);

struct AttackSpec {
  AttackKind kind = AttackKind::Replay;
  std::string locus;  // compromised switch, or the flooding host for DoS
  SimTime start = 0;
  SimTime stop = 0;
  // replay
  SimTime record_duration = 0;
  bool preserve_transaction_ids = false;
  // fdi
  std::vector<double> bias;
  // mitm
  double scale = 1.0;
  // dos
  std::string target;  // destination host
  double rate_pps = 0.0;
  std::size_t frame_bytes = 64;

  /// An identity attack leaves every packet untouched.
  bool is_identity() const;
};

/// Counters kept by every attack.
struct AttackLog {
  std::uint64_t recorded = 0;
  std::uint64_t modified = 0;
  std::uint64_t dropped = 0;
  std::uint64_t clamped = 0;
  std::uint64_t injected = 0;
};

class Attack {
 public:
  virtual ~Attack() = default;
  const AttackLog& log() const { return log_; }

 protected:
  AttackLog log_;
};

/// Records sensor responses before `start`, then substitutes their register
/// values cyclically while active. With an empty recording the frames are
/// dropped.
class ReplayInterceptor : public net::Interceptor, public Attack {
 public:
  ReplayInterceptor(FlowKey flow, SimTime record_from, SimTime start, SimTime stop, bool preserve_ids);
  net::InterceptResult on_packet(net::Packet& packet, NodeId at_switch, SimTime now) override;
  std::size_t recording_size() const { return recording_.size(); }

 private:
  FlowKey flow_;
  SimTime record_from_, start_, stop_;
  bool preserve_ids_;
  std::vector<scada::ScadaFrame> recording_;
  std::size_t cursor_ = 0;
};

/// Adds a constant bias to sensor values, saturating at the codec range.
class FdiInterceptor : public net::Interceptor, public Attack {
 public:
  FdiInterceptor(FlowKey flow, SimTime start, SimTime stop, std::vector<double> bias, scada::RegisterCodec codec);
  net::InterceptResult on_packet(net::Packet& packet, NodeId at_switch, SimTime now) override;

 private:
  FlowKey flow_;
  SimTime start_, stop_;
  std::vector<double> bias_;
  scada::RegisterCodec codec_;
};

/// Scales actuation commands in write requests.
class MitmInterceptor : public net::Interceptor, public Attack {
 public:
  MitmInterceptor(FlowKey flow, SimTime start, SimTime stop, double scale, scada::RegisterCodec codec);
  net::InterceptResult on_packet(net::Packet& packet, NodeId at_switch, SimTime now) override;

 private:
  FlowKey flow_;
  SimTime start_, stop_;
  double scale_;
  scada::RegisterCodec codec_;
};

/// Injects fixed-size frames from a host at a constant rate.
class FloodSource : public Attack {
 public:
  FloodSource(net::Network& network, Simulator& sim, NodeId host, NodeId target, SimTime start, SimTime stop,
              double rate_pps, std::size_t frame_bytes);
  void arm();

 private:
  void emit();
  net::Network& net_;
  Simulator& sim_;
  NodeId host_, target_;
  SimTime start_, stop_, interval_;
  std::size_t frame_bytes_;
  SimTime next_;
};

}  // namespace cpsnet::adv

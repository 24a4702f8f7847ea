#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpsnet/adversary.hpp"
#include "cpsnet/control.hpp"
#include "cpsnet/errors.hpp"
#include "cpsnet/netsim.hpp"
#include "cpsnet/pn_controller.hpp"
#include "cpsnet/scada.hpp"

namespace cpsnet {

enum class ExitCode : int { Ok = 0, ConfigError = 2, AuditFailure = 3, Divergence = 4 };

/// Load-time failure. `kind` separates schema problems from model and
/// topology problems so the diagnostics stay distinct.
class ScenarioConfigError : public ConfigError {
 public:
  enum class Kind { Io, Schema, Model, Topology };
  ScenarioConfigError(Kind kind, const std::string& what) : ConfigError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string to_string(ScenarioConfigError::Kind k);

struct LinkSpec {
  std::string a;
  std::string b;
  SimTime latency = 0;
  std::uint64_t bandwidth_bps = 0;
  double loss = 0.0;
};

struct TopologySpec {
  std::vector<std::string> switches;
  std::vector<std::string> hosts;
  std::vector<LinkSpec> links;
};

struct PlantSection {
  StateSpaceModel model;
  Vector x0;
  double divergence_bound = 1e6;
};

struct ControllerSection {
  Matrix Q, R, Qw;
  int window = 10;
  std::optional<double> tau;     // explicit threshold
  double tau_percentile = 0.95;  // used when tau is absent
  int hysteresis = 3;
  SimTime period = 10 * kMicrosPerMilli;
  SimTime deadline = 5 * kMicrosPerMilli;  // offset of the controller tick within a period
  Vector reference;
  Vector xhat0;
  Matrix P0;
};

struct RolesSection {
  std::string plant = "plant";
  std::string controller = "ctrl";
  std::string pn = "pnc";
};

struct PnSection {
  pn::PnConfig config;
  std::string middlebox;
  std::string sinkhole;
};

struct FaultSpec {
  std::string a;
  std::string b;
  SimTime at = 0;
  std::optional<SimTime> restore;
};

struct OutputSection {
  std::string dir = "out";
  bool trace = false;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  SimTime duration = 10 * kMicrosPerSecond;
  PlantSection plant;
  ControllerSection controller;
  scada::RegisterCodec codec;
  TopologySpec topology;
  RolesSection roles;
  PnSection pnctrl;
  net::SwitchConfig switches;
  std::vector<adv::AttackSpec> attacks;
  std::vector<FaultSpec> faults;
  OutputSection outputs;

  double resolved_tau() const;
  std::uint64_t steps() const { return duration / controller.period; }
  net::Topology build_topology() const;
};

/// Parse and fully validate a scenario. Throws ScenarioConfigError whose
/// message names the offending key and, where known, its line.
ScenarioConfig load_config(const std::string& path);
ScenarioConfig load_config_string(const std::string& yaml, const std::string& origin = "<string>");

struct RunOptions {
  std::optional<std::string> out_dir;  // write metrics files when set
  bool trace = false;
};

struct RunResult {
  ExitCode exit_code = ExitCode::Ok;
  std::string diagnostic;
  std::vector<nlohmann::json> records;  // per-step and event records, in emission order
  nlohmann::json summary;
  std::string trace;  // empty unless tracing
  std::vector<std::string> failed_audits;
};

RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {});

/// Summary derived from the record stream alone.
nlohmann::json summarize(const std::vector<nlohmann::json>& records);

/// Line-delimited serialization of the records.
std::string to_jsonl(const std::vector<nlohmann::json>& records);
std::vector<nlohmann::json> parse_jsonl(const std::string& text);

class CompareError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-metric deltas between two run summaries. Throws CompareError when the
/// summaries disagree on shape, topology or duration.
nlohmann::json compare_runs(const nlohmann::json& baseline, const nlohmann::json& treatment);

struct WilsonInterval {
  double estimate = 0.0;
  double low = 0.0;
  double high = 0.0;
};

WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 1.959963984540054);

struct BatchResult {
  std::vector<RunResult> runs;
  std::vector<std::uint64_t> seeds;
  nlohmann::json aggregate;
};

/// Runs seeds cfg.seed .. cfg.seed + n - 1. Instances are independent and
/// may run on `jobs` threads; results are ordered by seed.
BatchResult run_batch(const ScenarioConfig& cfg, std::size_t n, std::size_t jobs = 1,
                      const std::optional<std::string>& out_dir = std::nullopt);

}  // namespace cpsnet

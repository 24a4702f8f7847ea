#include <cmath>
#include <set>
#include <sstream>

#include "cpsnet/harness.hpp"

namespace cpsnet {

using json = nlohmann::json;

std::string to_jsonl(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::vector<json> parse_jsonl(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

namespace {

double quad(const json& v, const json& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      s += v[i].get<double>() * m[i][j].get<double>() * v[j].get<double>();
    }
  }
  return s;
}

struct Window {
  std::uint64_t onset;
  std::uint64_t end;
  SimTime start_us;
};

}  // namespace

json summarize(const std::vector<json>& records) {
  json header;
  std::vector<Window> attack_windows, all_windows;
  bool fault_truth = false;
  for (const auto& r : records) {
    const auto& type = r.at("type");
    if (type == "run") header = r;
    if (type == "ground_truth") {
      Window w{r.at("onset_step").get<std::uint64_t>(), r.at("end_step").get<std::uint64_t>(),
               r.at("start_us").get<SimTime>()};
      all_windows.push_back(w);
      if (r.at("kind") == "attack") attack_windows.push_back(w);
      if (r.at("kind") == "fault") fault_truth = true;
    }
  }
  if (header.is_null()) throw std::runtime_error("record stream has no run header");
  const auto window = header.at("window").get<std::uint64_t>();
  const auto period = header.at("period_us").get<SimTime>();
  auto in_truth = [&](std::uint64_t k) {
    for (const auto& w : all_windows) {
      if (k >= w.onset && k <= w.end + window) return true;
    }
    return false;
  };

  std::uint64_t steps = 0, scored = 0, false_alarms = 0, alarm_steps = 0, missing = 0, delay_n = 0;
  double cost = 0.0, delay_sum = 0.0;
  std::uint64_t alerts = 0, transitions = 0, verdicts = 0, acks_sent = 0, acks_received = 0;
  json first_verdict = nullptr;
  json alert_latency = nullptr, detection_latency = nullptr, time_to_mitigate = nullptr;
  std::optional<std::uint64_t> onset;
  if (!attack_windows.empty()) onset = attack_windows.front().onset;
  std::optional<SimTime> first_truth_start;
  for (const auto& w : all_windows) {
    if (!first_truth_start || w.start_us < *first_truth_start) first_truth_start = w.start_us;
  }
  json counters, audit, truth_label = fault_truth ? "fault" : "nominal";
  if (!attack_windows.empty()) truth_label = "attack";
  bool diverged = false;

  for (const auto& r : records) {
    const auto& type = r.at("type");
    if (type == "step") {
      ++steps;
      const auto k = r.at("k").get<std::uint64_t>();
      cost += quad(r.at("x"), header.at("Q")) + quad(r.at("u"), header.at("R"));
      if (r.at("alarm").get<bool>()) ++alarm_steps;
      if (!r.at("measured").get<bool>()) ++missing;
      if (!r.at("g").is_null() && !in_truth(k)) {
        ++scored;
        if (r.at("alarm").get<bool>()) ++false_alarms;
      }
      if (!r.at("sensor_delay_us").is_null()) {
        delay_sum += r.at("sensor_delay_us").get<double>();
        ++delay_n;
      }
    } else if (type == "alert") {
      ++alerts;
      if (onset && alert_latency.is_null() && r.at("kind") == "physical-anomaly") {
        const auto k = r.at("k").get<std::uint64_t>();
        if (k >= *onset) alert_latency = k - *onset;
      }
    } else if (type == "transition") {
      ++transitions;
    } else if (type == "verdict") {
      ++verdicts;
      if (first_verdict.is_null()) first_verdict = r;
      if (onset && detection_latency.is_null() && r.at("label") == "attack") {
        const auto k = r.at("t_us").get<SimTime>() / period;
        if (k >= *onset) detection_latency = k - *onset;
      }
    } else if (type == "ack_sent") {
      ++acks_sent;
    } else if (type == "ack") {
      ++acks_received;
    } else if (type == "mitigation") {
      if (first_truth_start && time_to_mitigate.is_null() && r.at("decided_us").get<SimTime>() >= *first_truth_start) {
        time_to_mitigate = r.at("complete_us").get<SimTime>() - r.at("decided_us").get<SimTime>();
      }
    } else if (type == "counters") {
      counters = r;
    } else if (type == "audit") {
      audit = r;
    } else if (type == "divergence") {
      diverged = true;
    }
  }

  json s;
  s["seed"] = header.at("seed");
  s["duration_us"] = header.at("duration_us");
  s["topology_digest"] = header.at("topology_digest");
  s["steps"] = steps;
  s["tau"] = header.at("tau");
  s["alarm_steps"] = alarm_steps;
  s["missing_measurements"] = missing;
  s["false_alarm_rate"] = scored ? static_cast<double>(false_alarms) / static_cast<double>(scored) : 0.0;
  s["scored_steps"] = scored;
  s["control_cost"] = cost;
  s["mean_sensor_delay_us"] = delay_n ? delay_sum / static_cast<double>(delay_n) : 0.0;
  s["alerts"] = alerts;
  s["transitions"] = transitions;
  s["verdicts"] = verdicts;
  s["acks_sent"] = acks_sent;
  s["acks_received"] = acks_received;
  s["alert_latency_steps"] = alert_latency;
  s["detection_latency_steps"] = detection_latency;
  s["time_to_mitigate_us"] = time_to_mitigate;
  s["verdict_confusion"] = {{"truth", truth_label},
                            {"predicted", first_verdict.is_null() ? json("nominal") : first_verdict.at("label")}};
  s["first_verdict"] = first_verdict.is_null() ? json(nullptr) : first_verdict.at("verdict");
  s["packets_delivered"] = counters.is_null() ? json(0) : counters.at("delivered");
  s["packets_sinkholed"] = counters.is_null() ? json(0) : counters.at("sinkholed");
  s["packets_injected"] = counters.is_null() ? json(0) : counters.at("injected");
  bool ok = !audit.is_null();
  json audits = json::object();
  if (!audit.is_null()) {
    for (const auto& [k, v] : audit.items()) {
      if (k == "type") continue;
      audits[k] = v;
      ok = ok && v.get<bool>();
    }
  }
  s["audits"] = audits;
  s["audit_ok"] = ok;
  s["diverged"] = diverged;
  return s;
}

namespace {

void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else {
    out[prefix] = j;
  }
}

}  // namespace

json compare_runs(const json& baseline, const json& treatment) {
  if (!baseline.is_object() || !treatment.is_object()) throw CompareError("summaries must be JSON objects");
  std::map<std::string, json> a, b;
  flatten(baseline, "", a);
  flatten(treatment, "", b);
  std::set<std::string> ka, kb;
  for (const auto& [k, v] : a) ka.insert(k);
  for (const auto& [k, v] : b) kb.insert(k);
  if (ka != kb) {
    std::string diff;
    for (const auto& k : ka) {
      if (!kb.count(k)) diff += " -" + k;
    }
    for (const auto& k : kb) {
      if (!ka.count(k)) diff += " +" + k;
    }
    throw CompareError("summary schemas differ:" + diff);
  }
  for (const char* key : {"topology_digest", "duration_us"}) {
    if (a.count(key) && a[key] != b[key]) throw CompareError(std::string("runs differ in ") + key);
  }
  json report = json::object();
  json metrics = json::object();
  for (const auto& [k, va] : a) {
    const auto& vb = b[k];
    if (k == "seed" || k == "topology_digest" || k == "duration_us") continue;
    json entry = {{"baseline", va}, {"treatment", vb}};
    const bool na = va.is_number() || va.is_boolean();
    const bool nb = vb.is_number() || vb.is_boolean();
    if (na && nb) {
      const double x = va.is_boolean() ? (va.get<bool>() ? 1.0 : 0.0) : va.get<double>();
      const double y = vb.is_boolean() ? (vb.get<bool>() ? 1.0 : 0.0) : vb.get<double>();
      const double d = y - x;
      entry["delta"] = d;
      entry["sign"] = d > 0 ? "+" : (d < 0 ? "-" : "0");
      entry["pct"] = x != 0.0 ? json(100.0 * d / std::abs(x)) : (d == 0.0 ? json(0.0) : json(nullptr));
    } else {
      entry["changed"] = va != vb;
    }
    metrics[k] = entry;
  }
  report["metrics"] = metrics;
  report["baseline_seed"] = a.count("seed") ? a["seed"] : json(nullptr);
  report["treatment_seed"] = b.count("seed") ? b["seed"] : json(nullptr);
  return report;
}

WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z) {
  if (trials == 0) return {0.0, 0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom;
  return {p, std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

}  // namespace cpsnet

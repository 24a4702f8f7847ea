#include <atomic>
#include <filesystem>
#include <map>
#include <thread>

#include "cpsnet/harness.hpp"

namespace cpsnet {

using json = nlohmann::json;

namespace {

json interval_json(std::uint64_t k, std::uint64_t n) {
  const auto w = wilson_interval(k, n);
  return {{"successes", k}, {"trials", n}, {"rate", w.estimate}, {"ci95", {w.low, w.high}}};
}

json aggregate(const std::vector<RunResult>& runs, const std::vector<std::uint64_t>& seeds) {
  std::map<std::string, std::uint64_t> exit_codes;
  std::map<std::string, std::map<std::string, std::uint64_t>> confusion;
  std::uint64_t with_truth_attack = 0, alerted_100 = 0, any_alert = 0, correct = 0, audits_ok = 0;
  double far_sum = 0.0, cost_sum = 0.0, delay_sum = 0.0;
  for (const auto& r : runs) {
    ++exit_codes[std::to_string(static_cast<int>(r.exit_code))];
    const auto& s = r.summary;
    const auto truth = s.at("verdict_confusion").at("truth").get<std::string>();
    const auto predicted = s.at("verdict_confusion").at("predicted").get<std::string>();
    ++confusion[truth][predicted];
    if (truth == predicted) ++correct;
    if (truth == "attack") {
      ++with_truth_attack;
      const auto& lat = s.at("alert_latency_steps");
      if (!lat.is_null() && lat.get<std::uint64_t>() <= 100) ++alerted_100;
    }
    if (s.at("alerts").get<std::uint64_t>() > 0) ++any_alert;
    if (s.at("audit_ok").get<bool>()) ++audits_ok;
    far_sum += s.at("false_alarm_rate").get<double>();
    cost_sum += s.at("control_cost").get<double>();
    delay_sum += s.at("mean_sensor_delay_us").get<double>();
  }
  const auto n = static_cast<std::uint64_t>(runs.size());
  const double dn = n ? static_cast<double>(n) : 1.0;
  return {{"runs", n},
          {"seeds", seeds},
          {"exit_codes", exit_codes},
          {"verdict_confusion", confusion},
          {"verdict_accuracy", interval_json(correct, n)},
          {"detection_within_100_steps", interval_json(alerted_100, with_truth_attack)},
          {"runs_with_alert", interval_json(any_alert, n)},
          {"audits_passed", interval_json(audits_ok, n)},
          {"mean_false_alarm_rate", far_sum / dn},
          {"mean_control_cost", cost_sum / dn},
          {"mean_sensor_delay_us", delay_sum / dn}};
}

}  // namespace

BatchResult run_batch(const ScenarioConfig& cfg, std::size_t n, std::size_t jobs,
                      const std::optional<std::string>& out_dir) {
  BatchResult result;
  result.runs.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.seeds.push_back(cfg.seed + i);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      ScenarioConfig c = cfg;
      c.seed = result.seeds[i];
      RunOptions opts;
      if (out_dir) opts.out_dir = (std::filesystem::path(*out_dir) / ("seed-" + std::to_string(c.seed))).string();
      result.runs[i] = run_scenario(c, opts);
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  result.aggregate = aggregate(result.runs, result.seeds);
  return result;
}

}  // namespace cpsnet

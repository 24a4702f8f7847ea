#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "cpsnet/chi2.hpp"
#include "cpsnet/harness.hpp"

namespace cpsnet {

std::string to_string(ScenarioConfigError::Kind k) {
  switch (k) {
    case ScenarioConfigError::Kind::Io: return "io";
    case ScenarioConfigError::Kind::Schema: return "schema";
    case ScenarioConfigError::Kind::Model: return "model";
    case ScenarioConfigError::Kind::Topology: return "topology";
  }
  return "schema";
}

namespace {

using Kind = ScenarioConfigError::Kind;

[[noreturn]] void fail(Kind kind, const std::string& key, const YAML::Node* node, const std::string& msg) {
  std::string where = key;
  if (node && node->Mark().line >= 0) where += " (line " + std::to_string(node->Mark().line + 1) + ")";
  throw ScenarioConfigError(kind, to_string(kind) + " error: " + where + ": " + msg);
}

template <typename T>
T scalar_as(const YAML::Node& n, const std::string& key, const char* what) {
  if (!n.IsScalar()) fail(Kind::Schema, key, &n, std::string("expected ") + what);
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(Kind::Schema, key, &n, std::string("expected ") + what + ", got '" + n.Scalar() + "'");
  }
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

/// Mapping reader that rejects keys nobody asked for.
class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.IsMap()) fail(Kind::Schema, path_.empty() ? "<root>" : path_, &node_, "expected a mapping");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  bool has(const std::string& k) {
    seen_.insert(k);
    return static_cast<bool>(node_[k]);
  }

  YAML::Node req(const std::string& k) {
    seen_.insert(k);
    YAML::Node n = node_[k];
    if (!n) {
      for (const auto& kv : node_) {
        const auto name = kv.first.as<std::string>();
        if (!seen_.count(name) && edit_distance(name, k) <= std::max<std::size_t>(2, k.size() / 2)) {
          fail(Kind::Schema, key(k), &kv.first, "required key missing; unknown key '" + name + "' looks like a misspelling");
        }
      }
      fail(Kind::Schema, key(k), &node_, "required key missing");
    }
    return n;
  }

  std::optional<YAML::Node> opt(const std::string& k) {
    seen_.insert(k);
    YAML::Node n = node_[k];
    if (!n) return std::nullopt;
    return n;
  }

  double real(const std::string& k) { return scalar_as<double>(req(k), key(k), "a number"); }
  double real(const std::string& k, double dflt) {
    auto n = opt(k);
    return n ? scalar_as<double>(*n, key(k), "a number") : dflt;
  }

  long long integer(const std::string& k) { return scalar_as<long long>(req(k), key(k), "an integer"); }
  long long integer(const std::string& k, long long dflt) {
    auto n = opt(k);
    return n ? scalar_as<long long>(*n, key(k), "an integer") : dflt;
  }

  SimTime time(const std::string& k) { return non_negative(k, req(k)); }
  SimTime time(const std::string& k, SimTime dflt) {
    auto n = opt(k);
    return n ? non_negative(k, *n) : dflt;
  }

  std::string text(const std::string& k) { return scalar_as<std::string>(req(k), key(k), "a string"); }
  std::string text(const std::string& k, const std::string& dflt) {
    auto n = opt(k);
    return n ? scalar_as<std::string>(*n, key(k), "a string") : dflt;
  }

  bool flag(const std::string& k, bool dflt) {
    auto n = opt(k);
    return n ? scalar_as<bool>(*n, key(k), "a boolean") : dflt;
  }

  void finish() const {
    for (const auto& kv : node_) {
      const auto name = kv.first.as<std::string>();
      if (!seen_.count(name)) fail(Kind::Schema, key(name), &kv.first, "unknown key");
    }
  }

 private:
  SimTime non_negative(const std::string& k, const YAML::Node& n) {
    const auto v = scalar_as<long long>(n, key(k), "an integer number of microseconds");
    if (v < 0) fail(Kind::Schema, key(k), &n, "must be non-negative");
    return static_cast<SimTime>(v);
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

Matrix read_matrix(const YAML::Node& n, const std::string& key) {
  if (n.IsScalar()) {
    Matrix m(1, 1);
    m(0, 0) = scalar_as<double>(n, key, "a number or a list of rows");
    return m;
  }
  if (!n.IsSequence() || n.size() == 0) fail(Kind::Schema, key, &n, "expected a non-empty list of rows");
  const auto rows = static_cast<Eigen::Index>(n.size());
  Eigen::Index cols = -1;
  Matrix m;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const YAML::Node row = n[static_cast<std::size_t>(i)];
    const std::string rk = key + "[" + std::to_string(i) + "]";
    if (!row.IsSequence() || row.size() == 0) fail(Kind::Schema, rk, &row, "expected a non-empty list of numbers");
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      fail(Kind::Schema, rk, &row, "ragged matrix: expected " + std::to_string(cols) + " entries");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = scalar_as<double>(row[static_cast<std::size_t>(j)], rk, "a number");
    }
  }
  return m;
}

Vector read_vector(const YAML::Node& n, const std::string& key) {
  if (n.IsScalar()) {
    Vector v(1);
    v(0) = scalar_as<double>(n, key, "a number or a list of numbers");
    return v;
  }
  if (!n.IsSequence()) fail(Kind::Schema, key, &n, "expected a list of numbers");
  Vector v(static_cast<Eigen::Index>(n.size()));
  for (std::size_t i = 0; i < n.size(); ++i) v(static_cast<Eigen::Index>(i)) = scalar_as<double>(n[i], key, "a number");
  return v;
}

std::vector<std::string> read_names(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence()) fail(Kind::Schema, key, &n, "expected a list of names");
  std::vector<std::string> out;
  for (const auto& e : n) out.push_back(scalar_as<std::string>(e, key, "a name"));
  return out;
}

void read_plant(Section s, ScenarioConfig& cfg) {
  auto& m = cfg.plant.model;
  m.A = read_matrix(s.req("A"), s.key("A"));
  m.B = read_matrix(s.req("B"), s.key("B"));
  m.C = read_matrix(s.req("C"), s.key("C"));
  m.W = read_matrix(s.req("W"), s.key("W"));
  m.V = read_matrix(s.req("V"), s.key("V"));
  if (auto n = s.opt("x0")) {
    cfg.plant.x0 = read_vector(*n, s.key("x0"));
  } else {
    cfg.plant.x0 = Vector::Zero(m.A.rows());
  }
  cfg.plant.divergence_bound = s.real("divergence_bound", 1e6);
  if (!(cfg.plant.divergence_bound > 0)) fail(Kind::Schema, s.key("divergence_bound"), nullptr, "must be positive");
  s.finish();
}

void read_controller(Section s, ScenarioConfig& cfg) {
  auto& c = cfg.controller;
  c.Q = read_matrix(s.req("Q"), s.key("Q"));
  c.R = read_matrix(s.req("R"), s.key("R"));
  c.Qw = read_matrix(s.req("Qw"), s.key("Qw"));
  c.window = static_cast<int>(s.integer("window", 10));
  if (auto n = s.opt("tau")) c.tau = scalar_as<double>(*n, s.key("tau"), "a number");
  c.tau_percentile = s.real("tau_percentile", 0.95);
  if (!(c.tau_percentile > 0.0 && c.tau_percentile < 1.0)) {
    fail(Kind::Schema, s.key("tau_percentile"), nullptr, "must lie in (0, 1)");
  }
  c.hysteresis = static_cast<int>(s.integer("hysteresis", 3));
  c.period = s.time("period_us", 10 * kMicrosPerMilli);
  c.deadline = s.time("deadline_us", c.period / 2);
  const auto n = cfg.plant.model.A.rows();
  c.reference = s.has("reference") ? read_vector(s.req("reference"), s.key("reference")) : Vector::Zero(n);
  c.xhat0 = s.has("xhat0") ? read_vector(s.req("xhat0"), s.key("xhat0")) : Vector::Zero(n);
  c.P0 = s.has("P0") ? read_matrix(s.req("P0"), s.key("P0")) : cfg.plant.model.W;
  if (c.period == 0) fail(Kind::Schema, s.key("period_us"), nullptr, "must be positive");
  if (c.deadline >= c.period) fail(Kind::Schema, s.key("deadline_us"), nullptr, "must be shorter than period_us");
  s.finish();
}

void read_codec(Section s, ScenarioConfig& cfg) {
  cfg.codec.scale = s.real("scale", cfg.codec.scale);
  cfg.codec.offset = s.real("offset", cfg.codec.offset);
  cfg.codec.registers_per_value = static_cast<int>(s.integer("registers_per_value", cfg.codec.registers_per_value));
  s.finish();
  try {
    cfg.codec.validate();
  } catch (const std::exception& e) {
    fail(Kind::Schema, "codec", nullptr, e.what());
  }
}

void read_topology(Section s, ScenarioConfig& cfg) {
  auto& t = cfg.topology;
  t.switches = read_names(s.req("switches"), s.key("switches"));
  t.hosts = read_names(s.req("hosts"), s.key("hosts"));
  const YAML::Node links = s.req("links");
  if (!links.IsSequence()) fail(Kind::Schema, s.key("links"), &links, "expected a list of links");
  for (std::size_t i = 0; i < links.size(); ++i) {
    Section l(links[i], s.key("links[" + std::to_string(i) + "]"));
    LinkSpec spec;
    spec.a = l.text("a");
    spec.b = l.text("b");
    spec.latency = l.time("latency_us");
    const YAML::Node bw = l.req("bandwidth_bps");
    const auto bw_value = scalar_as<long long>(bw, l.key("bandwidth_bps"), "an integer");
    if (bw_value <= 0) fail(Kind::Schema, l.key("bandwidth_bps"), &bw, "must be positive");
    spec.bandwidth_bps = static_cast<std::uint64_t>(bw_value);
    spec.loss = l.real("loss", 0.0);
    if (!(spec.loss >= 0.0 && spec.loss <= 1.0)) fail(Kind::Schema, l.key("loss"), nullptr, "must lie in [0, 1]");
    l.finish();
    t.links.push_back(spec);
  }
  s.finish();
}

void read_roles(Section s, ScenarioConfig& cfg) {
  cfg.roles.plant = s.text("plant", cfg.roles.plant);
  cfg.roles.controller = s.text("controller", cfg.roles.controller);
  cfg.roles.pn = s.text("pn", cfg.roles.pn);
  s.finish();
}

void read_pnctrl(Section s, ScenarioConfig& cfg) {
  auto& p = cfg.pnctrl.config;
  p.k_paths = static_cast<int>(s.integer("k", p.k_paths));
  if (p.k_paths < 1) fail(Kind::Schema, s.key("k"), nullptr, "must be at least 1");
  const auto tau_s = s.integer("tau_s", static_cast<long long>(p.tau_s));
  const auto tau_m = s.integer("tau_m", static_cast<long long>(p.tau_m));
  if (tau_s < 1 || tau_m <= tau_s) fail(Kind::Schema, s.key("tau_m"), nullptr, "need 1 <= tau_s < tau_m");
  p.tau_s = static_cast<std::uint64_t>(tau_s);
  p.tau_m = static_cast<std::uint64_t>(tau_m);
  p.delta = s.real("delta_behavior", p.delta);
  const auto min_samples = s.integer("min_samples", static_cast<long long>(p.sysid_min_samples));
  const auto window = s.integer("sysid_window", static_cast<long long>(p.sysid_window));
  if (min_samples < 1 || window < min_samples) {
    fail(Kind::Schema, s.key("sysid_window"), nullptr, "need 1 <= min_samples <= sysid_window");
  }
  p.sysid_min_samples = static_cast<std::size_t>(min_samples);
  p.sysid_window = static_cast<std::size_t>(window);
  p.envelope = s.real("envelope", p.envelope);
  if (auto n = s.opt("evidence_rules")) {
    p.evidence_rules.clear();
    for (const auto& name : read_names(*n, s.key("evidence_rules"))) {
      auto r = pn::evidence_rule_from_string(name);
      if (!r) fail(Kind::Schema, s.key("evidence_rules"), &*n, "unknown evidence rule '" + name + "'");
      p.evidence_rules.insert(*r);
    }
  }
  p.control_latency = s.time("control_latency_us", p.control_latency);
  p.propagation_bound = s.time("propagation_bound_us", p.propagation_bound);
  p.fault_window = s.time("fault_window_us", p.fault_window);
  p.deescalate_on_clear = s.flag("deescalate_on_clear", p.deescalate_on_clear);
  cfg.pnctrl.middlebox = s.text("middlebox");
  cfg.pnctrl.sinkhole = s.text("sinkhole");
  s.finish();
}

void read_switches(Section s, ScenarioConfig& cfg) {
  const auto cap = s.integer("miss_buffer", static_cast<long long>(cfg.switches.miss_buffer_capacity));
  if (cap < 0) fail(Kind::Schema, s.key("miss_buffer"), nullptr, "must be non-negative");
  cfg.switches.miss_buffer_capacity = static_cast<std::size_t>(cap);
  cfg.switches.miss_timeout = s.time("miss_timeout_us", cfg.switches.miss_timeout);
  s.finish();
}

adv::AttackSpec read_attack(Section s) {
  adv::AttackSpec a;
  const auto kind = s.text("kind");
  if (kind == "replay") {
    a.kind = adv::AttackKind::Replay;
    a.record_duration = s.time("record_us");
    a.preserve_transaction_ids = s.flag("preserve_transaction_ids", false);
  } else if (kind == "false-data-injection") {
    a.kind = adv::AttackKind::Fdi;
    a.bias.clear();
    const Vector b = read_vector(s.req("bias"), s.key("bias"));
    a.bias.assign(b.data(), b.data() + b.size());
  } else if (kind == "mitm-rewrite") {
    a.kind = adv::AttackKind::Mitm;
    a.scale = s.real("scale");
  } else if (kind == "dos-flood") {
    a.kind = adv::AttackKind::Dos;
    a.target = s.text("target");
    a.rate_pps = s.real("rate_pps");
    if (a.rate_pps < 0) fail(Kind::Schema, s.key("rate_pps"), nullptr, "must be non-negative");
    const auto bytes = s.integer("frame_bytes");
    if (bytes < 1) fail(Kind::Schema, s.key("frame_bytes"), nullptr, "must be positive");
    a.frame_bytes = static_cast<std::size_t>(bytes);
  } else {
    fail(Kind::Schema, s.key("kind"), nullptr,
         "unknown attack kind '" + kind + "' (replay, false-data-injection, mitm-rewrite, dos-flood)");
  }
  a.locus = s.text("locus");
  a.start = s.time("start_us");
  a.stop = s.time("stop_us");
  if (a.start >= a.stop && a.kind != adv::AttackKind::Replay) {
    fail(Kind::Schema, s.key("stop_us"), nullptr, "must be after start_us");
  }
  s.finish();
  return a;
}

FaultSpec read_fault(Section s) {
  FaultSpec f;
  const auto link = read_names(s.req("link"), s.key("link"));
  if (link.size() != 2) fail(Kind::Schema, s.key("link"), nullptr, "expected [endpoint, endpoint]");
  f.a = link[0];
  f.b = link[1];
  f.at = s.time("at_us");
  if (s.has("restore_us")) {
    f.restore = s.time("restore_us");
    if (*f.restore <= f.at) fail(Kind::Schema, s.key("restore_us"), nullptr, "must be after at_us");
  }
  s.finish();
  return f;
}

void validate_semantics(ScenarioConfig& cfg) {
  auto& model = cfg.plant.model;
  try {
    model.validate();
  } catch (const ConfigError& e) {
    fail(Kind::Model, "plant", nullptr, e.what());
  }
  if (cfg.plant.x0.size() != model.n()) fail(Kind::Model, "plant.x0", nullptr, "dimension must match A");
  auto& c = cfg.controller;
  ControllerConfig cc{c.Q, c.R, c.Qw, c.window, 1.0, c.hysteresis, c.period};
  try {
    cc.validate(model);
  } catch (const ConfigError& e) {
    fail(Kind::Model, "controller", nullptr, e.what());
  }
  if (c.tau && !(*c.tau > 0.0)) fail(Kind::Model, "controller.tau", nullptr, "must be positive");
  if (c.reference.size() != model.n()) fail(Kind::Model, "controller.reference", nullptr, "dimension must match A");
  if (c.xhat0.size() != model.n()) fail(Kind::Model, "controller.xhat0", nullptr, "dimension must match A");
  if (c.P0.rows() != model.n() || c.P0.cols() != model.n() || !is_psd(c.P0)) {
    fail(Kind::Model, "controller.P0", nullptr, "must be a symmetric PSD n x n matrix");
  }
  try {
    (void)lqr_gain(model.A, model.B, c.Q, c.R);
  } catch (const ConfigError& e) {
    fail(Kind::Model, "plant/controller", nullptr, std::string("unstabilizable (A, B) pair: ") + e.what());
  }

  net::Topology topo;
  try {
    topo = cfg.build_topology();
    topo.validate();
  } catch (const net::TopologyError& e) {
    fail(Kind::Topology, "topology", nullptr, e.what());
  }
  auto host = [&](const std::string& key, const std::string& name) {
    auto id = topo.find(name);
    if (!id || topo.is_switch(*id)) fail(Kind::Topology, key, nullptr, "'" + name + "' is not a host");
  };
  host("roles.plant", cfg.roles.plant);
  host("roles.controller", cfg.roles.controller);
  host("roles.pn", cfg.roles.pn);
  host("pnctrl.middlebox", cfg.pnctrl.middlebox);
  host("pnctrl.sinkhole", cfg.pnctrl.sinkhole);
  for (std::size_t i = 0; i < cfg.attacks.size(); ++i) {
    const auto& a = cfg.attacks[i];
    const auto key = "attacks[" + std::to_string(i) + "]";
    auto id = topo.find(a.locus);
    if (!id) fail(Kind::Topology, key + ".locus", nullptr, "unknown node '" + a.locus + "'");
    if (a.kind == adv::AttackKind::Dos) {
      host(key + ".locus", a.locus);
      host(key + ".target", a.target);
    } else if (!topo.is_switch(*id)) {
      fail(Kind::Topology, key + ".locus", nullptr, "'" + a.locus + "' is not a switch");
    }
    if (a.kind == adv::AttackKind::Fdi && a.bias.size() != static_cast<std::size_t>(model.p())) {
      fail(Kind::Model, key + ".bias", nullptr, "dimension must match the measurement size");
    }
    if (a.stop > cfg.duration) fail(Kind::Schema, key + ".stop_us", nullptr, "attack window exceeds duration_us");
  }
  for (std::size_t i = 0; i < cfg.faults.size(); ++i) {
    const auto& f = cfg.faults[i];
    const auto key = "faults[" + std::to_string(i) + "].link";
    auto a = topo.find(f.a);
    auto b = topo.find(f.b);
    if (!a || !b || !topo.link_between(*a, *b)) fail(Kind::Topology, key, nullptr, "no link " + f.a + "-" + f.b);
  }
}

ScenarioConfig parse(const YAML::Node& root) {
  ScenarioConfig cfg;
  Section s(root, "");
  cfg.seed = static_cast<std::uint64_t>(s.integer("seed"));
  cfg.duration = s.time("duration_us");
  read_plant(Section(s.req("plant"), "plant"), cfg);
  read_controller(Section(s.req("controller"), "controller"), cfg);
  if (auto n = s.opt("codec")) read_codec(Section(*n, "codec"), cfg);
  read_topology(Section(s.req("topology"), "topology"), cfg);
  if (auto n = s.opt("roles")) read_roles(Section(*n, "roles"), cfg);
  read_pnctrl(Section(s.req("pnctrl"), "pnctrl"), cfg);
  if (auto n = s.opt("switch")) read_switches(Section(*n, "switch"), cfg);
  if (auto n = s.opt("attacks")) {
    if (!n->IsSequence()) fail(Kind::Schema, "attacks", &*n, "expected a list");
    for (std::size_t i = 0; i < n->size(); ++i) {
      cfg.attacks.push_back(read_attack(Section((*n)[i], "attacks[" + std::to_string(i) + "]")));
    }
  }
  if (auto n = s.opt("faults")) {
    if (!n->IsSequence()) fail(Kind::Schema, "faults", &*n, "expected a list");
    for (std::size_t i = 0; i < n->size(); ++i) {
      cfg.faults.push_back(read_fault(Section((*n)[i], "faults[" + std::to_string(i) + "]")));
    }
  }
  if (auto n = s.opt("outputs")) {
    Section o(*n, "outputs");
    cfg.outputs.dir = o.text("dir", cfg.outputs.dir);
    cfg.outputs.trace = o.flag("trace", cfg.outputs.trace);
    o.finish();
  }
  s.finish();
  if (cfg.duration < cfg.controller.period) fail(Kind::Schema, "duration_us", nullptr, "shorter than one period");
  validate_semantics(cfg);
  return cfg;
}

}  // namespace

double ScenarioConfig::resolved_tau() const {
  if (controller.tau) return *controller.tau;
  return chi2_quantile(controller.tau_percentile,
                       static_cast<double>(controller.window) * static_cast<double>(plant.model.p()));
}

net::Topology ScenarioConfig::build_topology() const {
  net::Topology topo;
  for (const auto& s : topology.switches) topo.add_switch(s);
  for (const auto& h : topology.hosts) topo.add_host(h);
  for (const auto& l : topology.links) {
    auto a = topo.find(l.a);
    auto b = topo.find(l.b);
    if (!a) throw net::TopologyError("link endpoint '" + l.a + "' is not a declared node");
    if (!b) throw net::TopologyError("link endpoint '" + l.b + "' is not a declared node");
    topo.add_link(*a, *b, l.latency, l.bandwidth_bps, l.loss);
  }
  return topo;
}

ScenarioConfig load_config_string(const std::string& yaml, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::ParserException& e) {
    throw ScenarioConfigError(Kind::Schema, "schema error: " + origin + " (line " + std::to_string(e.mark.line + 1) +
                                                "): " + e.msg);
  }
  return parse(root);
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioConfigError(Kind::Io, "io error: cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_config_string(buf.str(), path);
}

}  // namespace cpsnet

#include "resalloc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <json.hpp>

namespace resalloc {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; }) == allowed.end())
      fail(path + "." + it.key(), "unknown key");
  }
}

double require_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int require_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

std::string require_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

bool require_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected a boolean");
  return j.get<bool>();
}

Eigen::VectorXd parse_vector(const json& j, const std::string& path, Eigen::Index size) {
  if (!j.is_array() || (size >= 0 && static_cast<Eigen::Index>(j.size()) != size))
    fail(path, size >= 0 ? "expected an array of " + std::to_string(size) + " numbers"
                         : "expected an array of numbers");
  Eigen::VectorXd v(j.size());
  for (size_t k = 0; k < j.size(); ++k)
    v[static_cast<Eigen::Index>(k)] = require_number(j[k], path + "[" + std::to_string(k) + "]");
  return v;
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a nonempty array of rows");
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(j.size(), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    const Eigen::VectorXd row = parse_vector(j[r], path + "[" + std::to_string(r) + "]", cols);
    m.row(static_cast<Eigen::Index>(r)) = row;
  }
  return m;
}

const std::pair<const char*, Mode> kModes[] = {
    {"nominal", Mode::Nominal},
    {"compromised", Mode::Compromised},
    {"resilient_linear", Mode::ResilientLinear},
    {"resilient_nonlinear", Mode::ResilientNonlinear}};

Mode parse_mode(const json& j, const std::string& path) {
  const std::string name = require_string(j, path);
  for (const auto& [key, mode] : kModes)
    if (name == key) return mode;
  fail(path, "unknown mode \"" + name + "\"");
}

const char* mode_to_string(Mode m) {
  for (const auto& [key, mode] : kModes)
    if (mode == m) return key;
  return "?";
}

SignalSpec parse_signal(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected a signal object");
  if (!j.contains("kind")) fail(path, "missing key \"kind\"");
  const std::string kind = require_string(j.at("kind"), path + ".kind");
  SignalSpec s;
  if (kind == "zero") {
    check_keys(j, path, {"kind"});
    s.kind = SignalSpec::Kind::Zero;
  } else if (kind == "sinusoid") {
    check_keys(j, path, {"kind", "amplitude", "omega", "phase"});
    s.kind = SignalSpec::Kind::Sinusoid;
    if (!j.contains("amplitude") || !j.contains("omega"))
      fail(path, "sinusoid needs amplitude and omega");
    s.amplitude = require_number(j.at("amplitude"), path + ".amplitude");
    s.omega = require_number(j.at("omega"), path + ".omega");
    if (j.contains("phase")) s.phase = require_number(j.at("phase"), path + ".phase");
  } else if (kind == "exosystem") {
    check_keys(j, path, {"kind", "S", "C", "x0"});
    s.kind = SignalSpec::Kind::Exosystem;
    if (!j.contains("S") || !j.contains("C") || !j.contains("x0"))
      fail(path, "exosystem needs S, C and x0");
    s.S = parse_matrix(j.at("S"), path + ".S");
    s.C = parse_matrix(j.at("C"), path + ".C");
    s.x0 = parse_vector(j.at("x0"), path + ".x0", -1);
  } else {
    fail(path + ".kind", "unknown signal kind \"" + kind + "\"");
  }
  return s;
}

std::vector<SignalSpec> parse_channel(const json& j, const std::string& path, int n) {
  if (j.is_null()) return {};
  if (j.is_object()) return {parse_signal(j, path)};
  if (j.is_array()) {
    if (static_cast<int>(j.size()) != n)
      fail(path, "expected one signal per agent (" + std::to_string(n) + ")");
    std::vector<SignalSpec> out;
    for (size_t k = 0; k < j.size(); ++k)
      out.push_back(parse_signal(j[k], path + "[" + std::to_string(k) + "]"));
    return out;
  }
  fail(path, "expected a signal object, an array of signals, or null");
}

SignalSpec sinusoid_spec(double amplitude, double omega) {
  SignalSpec s;
  s.kind = SignalSpec::Kind::Sinusoid;
  s.amplitude = amplitude;
  s.omega = omega;
  return s;
}

AttackSpec named_attacks(const std::string& name, const std::string& path) {
  AttackSpec a;
  if (name == "none") return a;
  if (name == "weak") {
    a.actuator = {sinusoid_spec(0.1, 2.0)};
    a.lambda = {sinusoid_spec(0.2, 2.0)};
    a.z = {sinusoid_spec(0.1, 2.0)};
  } else if (name == "strong_caption") {
    a.actuator = {sinusoid_spec(2.0, 2.0)};
    a.lambda = {sinusoid_spec(1.5, 2.0)};
    a.z = {sinusoid_spec(1.0, 2.0)};
  } else if (name == "strong_text") {
    a.actuator = {sinusoid_spec(1.0, 2.0)};
    a.lambda = {sinusoid_spec(1.5, 1.0)};
    a.z = {sinusoid_spec(1.0, 2.0)};
  } else {
    fail(path, "unknown attack preset \"" + name + "\"");
  }
  return a;
}

AttackSpec parse_attacks(const json& j, int n) {
  if (j.is_string()) return named_attacks(j.get<std::string>(), "attacks");
  check_keys(j, "attacks", {"actuator", "lambda", "z", "neighbors_only", "scale"});
  AttackSpec a;
  if (j.contains("actuator")) a.actuator = parse_channel(j.at("actuator"), "attacks.actuator", n);
  if (j.contains("lambda")) a.lambda = parse_channel(j.at("lambda"), "attacks.lambda", n);
  if (j.contains("z")) a.z = parse_channel(j.at("z"), "attacks.z", n);
  if (j.contains("neighbors_only"))
    a.neighbors_only = require_bool(j.at("neighbors_only"), "attacks.neighbors_only");
  if (j.contains("scale")) a.scale = require_number(j.at("scale"), "attacks.scale");
  if (!std::isfinite(a.scale)) fail("attacks.scale", "must be finite");
  return a;
}

HSpec parse_hspec(const json& j, const std::string& path, HSpec fallback) {
  check_keys(j, path, {"kind", "alpha", "delta"});
  HSpec h = fallback;
  if (j.contains("kind")) {
    const std::string kind = require_string(j.at("kind"), path + ".kind");
    if (kind == "identity")
      h.kind = HSpec::Kind::Identity;
    else if (kind == "fal")
      h.kind = HSpec::Kind::Fal;
    else
      fail(path + ".kind", "unknown correction kind \"" + kind + "\"");
  }
  if (j.contains("alpha")) h.alpha = require_number(j.at("alpha"), path + ".alpha");
  if (j.contains("delta")) h.delta = require_number(j.at("delta"), path + ".delta");
  return h;
}

json signal_to_json(const SignalSpec& s) {
  switch (s.kind) {
    case SignalSpec::Kind::Zero:
      return json{{"kind", "zero"}};
    case SignalSpec::Kind::Sinusoid:
      return json{{"kind", "sinusoid"},
                  {"amplitude", s.amplitude},
                  {"omega", s.omega},
                  {"phase", s.phase}};
    case SignalSpec::Kind::Exosystem: {
      auto mat = [](const Eigen::MatrixXd& m) {
        json rows = json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
          json row = json::array();
          for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
          rows.push_back(row);
        }
        return rows;
      };
      json x0 = json::array();
      for (Eigen::Index k = 0; k < s.x0.size(); ++k) x0.push_back(s.x0[k]);
      return json{{"kind", "exosystem"}, {"S", mat(s.S)}, {"C", mat(s.C)}, {"x0", x0}};
    }
  }
  return {};
}

json channel_to_json(const std::vector<SignalSpec>& v) {
  if (v.empty()) return nullptr;
  if (v.size() == 1) return signal_to_json(v[0]);
  json arr = json::array();
  for (const SignalSpec& s : v) arr.push_back(signal_to_json(s));
  return arr;
}

json hspec_to_json(const HSpec& h) {
  return json{{"kind", h.kind == HSpec::Kind::Fal ? "fal" : "identity"},
              {"alpha", h.alpha},
              {"delta", h.delta}};
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) arr.push_back(v[k]);
  return arr;
}

// Semantic pass: everything buildable, graph connected, observer gains sane.
void validate(const ScenarioConfig& c) {
  NetworkGraph g = [&] {
    try {
      return build_graph(c);
    } catch (const std::invalid_argument& e) {
      fail("graph", e.what());
    }
  }();
  if (!g.is_connected()) fail("graph", "not connected");
  try {
    build_problem(c);
  } catch (const std::invalid_argument& e) {
    fail("problem", e.what());
  }
  try {
    build_suite(c.attacks, c.n_agents);
  } catch (const std::invalid_argument& e) {
    fail("attacks", e.what());
  }
  if (is_resilient(c.mode)) {
    EsoConfig eso = c.eso;
    eso.variant = c.mode == Mode::ResilientLinear ? EsoConfig::Variant::Linear
                                                  : EsoConfig::Variant::Nonlinear;
    try {
      eso.validate();
    } catch (const std::invalid_argument& e) {
      fail("eso", e.what());
    }
  }
  if (!(c.sim.t_end > 0.0) || !std::isfinite(c.sim.t_end)) fail("sim.t_end", "must be positive");
  if (!(c.sim.dt > 0.0) || !std::isfinite(c.sim.dt)) fail("sim.dt", "must be positive");
  if (c.sim.record_stride < 1) fail("sim.stride", "must be >= 1");
  if (!(c.sim.divergence_threshold > 0.0)) fail("sim.divergence_threshold", "must be positive");
}

ScenarioConfig parse_config(const json& root) {
  check_keys(root, "config", {"mode", "graph", "problem", "attacks", "eso", "sim", "initial"});
  for (const char* key : {"mode", "graph", "problem"})
    if (!root.contains(key)) fail("config", std::string("missing block \"") + key + "\"");

  ScenarioConfig c;
  c.mode = parse_mode(root.at("mode"), "mode");

  const json& jg = root.at("graph");
  check_keys(jg, "graph", {"n", "edges"});
  if (!jg.contains("n")) fail("graph", "missing key \"n\"");
  c.n_agents = require_int(jg.at("n"), "graph.n");
  if (c.n_agents < 1) fail("graph.n", "must be >= 1");
  if (jg.contains("edges")) {
    const json& je = jg.at("edges");
    if (!je.is_array()) fail("graph.edges", "expected an array of [i, j, weight] triples");
    for (size_t k = 0; k < je.size(); ++k) {
      const std::string path = "graph.edges[" + std::to_string(k) + "]";
      const json& e = je[k];
      if (!e.is_array() || e.size() != 3) fail(path, "expected [i, j, weight]");
      c.edges.push_back({require_int(e[0], path + "[0]"), require_int(e[1], path + "[1]"),
                         require_number(e[2], path + "[2]")});
    }
  }

  const json& jp = root.at("problem");
  check_keys(jp, "problem", {"decision_dim", "costs", "demands", "drift"});
  if (jp.contains("decision_dim"))
    c.decision_dim = require_int(jp.at("decision_dim"), "problem.decision_dim");
  if (c.decision_dim < 1) fail("problem.decision_dim", "must be >= 1");
  if (!jp.contains("costs") || !jp.contains("demands"))
    fail("problem", "missing costs or demands");
  const json& jc = jp.at("costs");
  if (!jc.is_array() || static_cast<int>(jc.size()) != c.n_agents)
    fail("problem.costs", "expected one cost per agent (" + std::to_string(c.n_agents) + ")");
  for (size_t k = 0; k < jc.size(); ++k) {
    const std::string path = "problem.costs[" + std::to_string(k) + "]";
    check_keys(jc[k], path, {"a", "b", "c"});
    for (const char* key : {"a", "b", "c"})
      if (!jc[k].contains(key)) fail(path, std::string("missing coefficient \"") + key + "\"");
    c.costs.push_back({require_number(jc[k].at("a"), path + ".a"),
                       require_number(jc[k].at("b"), path + ".b"),
                       require_number(jc[k].at("c"), path + ".c")});
  }
  const json& jd = jp.at("demands");
  if (!jd.is_array() || static_cast<int>(jd.size()) != c.n_agents)
    fail("problem.demands", "expected one demand per agent (" + std::to_string(c.n_agents) + ")");
  for (size_t k = 0; k < jd.size(); ++k) {
    const std::string path = "problem.demands[" + std::to_string(k) + "]";
    if (jd[k].is_number())
      c.demands.push_back(Eigen::VectorXd::Constant(1, jd[k].get<double>()));
    else
      c.demands.push_back(parse_vector(jd[k], path, c.decision_dim));
    if (c.demands.back().size() != c.decision_dim)
      fail(path, "expected " + std::to_string(c.decision_dim) + " components");
  }
  if (jp.contains("drift")) {
    c.drift = require_string(jp.at("drift"), "problem.drift");
    if (c.drift != "none" && c.drift != "sin")
      fail("problem.drift", "unknown drift \"" + c.drift + "\"");
  }

  if (root.contains("attacks")) c.attacks = parse_attacks(root.at("attacks"), c.n_agents);

  if (root.contains("eso")) {
    const json& je = root.at("eso");
    check_keys(je, "eso", {"w0", "a1", "a2", "h1", "h2", "kappa_hat_clamp"});
    if (je.contains("w0")) c.eso.w0 = require_number(je.at("w0"), "eso.w0");
    if (je.contains("a1")) c.eso.a1 = require_number(je.at("a1"), "eso.a1");
    if (je.contains("a2")) c.eso.a2 = require_number(je.at("a2"), "eso.a2");
    if (je.contains("h1")) c.eso.h1 = parse_hspec(je.at("h1"), "eso.h1", c.eso.h1);
    if (je.contains("h2")) c.eso.h2 = parse_hspec(je.at("h2"), "eso.h2", c.eso.h2);
    if (je.contains("kappa_hat_clamp") && !je.at("kappa_hat_clamp").is_null())
      c.eso.kappa_hat_clamp = require_number(je.at("kappa_hat_clamp"), "eso.kappa_hat_clamp");
  }

  c.sim.dt = is_resilient(c.mode) ? 2e-4 : 1e-3;
  if (root.contains("sim")) {
    const json& js = root.at("sim");
    check_keys(js, "sim",
               {"t_end", "dt", "stride", "divergence_threshold", "tail_window", "exec"});
    if (js.contains("t_end")) c.sim.t_end = require_number(js.at("t_end"), "sim.t_end");
    if (js.contains("dt")) c.sim.dt = require_number(js.at("dt"), "sim.dt");
    if (js.contains("stride")) c.sim.record_stride = require_int(js.at("stride"), "sim.stride");
    if (js.contains("divergence_threshold"))
      c.sim.divergence_threshold =
          require_number(js.at("divergence_threshold"), "sim.divergence_threshold");
    if (js.contains("tail_window") && !js.at("tail_window").is_null())
      c.tail_window = require_number(js.at("tail_window"), "sim.tail_window");
    if (js.contains("exec")) {
      const std::string exec = require_string(js.at("exec"), "sim.exec");
      if (exec == "serial")
        c.sim.exec = Exec::Serial;
      else if (exec == "parallel")
        c.sim.exec = Exec::Parallel;
      else
        fail("sim.exec", "expected \"serial\" or \"parallel\"");
    }
  }

  const Eigen::Index nd = static_cast<Eigen::Index>(c.n_agents) * c.decision_dim;
  c.x0 = Eigen::VectorXd::Zero(nd);
  c.lam0 = Eigen::VectorXd::Zero(nd);
  c.z0 = Eigen::VectorXd::Zero(nd);
  if (root.contains("initial")) {
    const json& ji = root.at("initial");
    check_keys(ji, "initial", {"x", "lambda", "z"});
    if (ji.contains("x")) c.x0 = parse_vector(ji.at("x"), "initial.x", nd);
    if (ji.contains("lambda")) c.lam0 = parse_vector(ji.at("lambda"), "initial.lambda", nd);
    if (ji.contains("z")) c.z0 = parse_vector(ji.at("z"), "initial.z", nd);
  }

  validate(c);
  return c;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_components(const Eigen::VectorXd& v) {
  std::string s;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (k) s += ';';
    s += fmt17(v[k]);
  }
  return s;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << content;
  f.flush();
  if (!f.good()) throw IoError("failed writing " + path);
}

// Four-agent unit-weight path testbed shared by every preset.
ScenarioConfig testbed() {
  ScenarioConfig c;
  c.n_agents = 4;
  c.edges = {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}};
  c.decision_dim = 1;
  c.costs = {{0.5, 3.0, 2.0}, {1.5, 4.0, 1.0}, {3.0, 5.0, 0.5}, {1.0, 2.0, 1.5}};
  for (double d : {30.0, 40.0, 40.0, 35.0})
    c.demands.push_back(Eigen::VectorXd::Constant(1, d));
  c.drift = "sin";
  c.sim.t_end = 20.0;
  c.sim.dt = 1e-3;
  c.sim.record_stride = 10;
  c.x0 = Eigen::VectorXd(4);
  c.x0 << 40, 35, 45, 40;
  c.lam0 = Eigen::VectorXd::Zero(4);
  c.z0 = Eigen::VectorXd::Zero(4);
  return c;
}

const std::pair<const char*, const char*> kPresets[] = {
    {"nominal", "attack-free baseline on the four-agent testbed"},
    {"fig2_weak", "compromised loop, weak attacks 0.1/0.2/0.1 cos(2t)"},
    {"fig3_strong_caption", "compromised loop, strong attacks 2.0/1.5/1.0 cos(2t)"},
    {"fig3_strong_text", "compromised loop, strong attacks with lambda channel 1.5 cos(t)"},
    {"fig4_linear_eso", "linear observer, w0 = 50, strong attacks, unknown sin drift"},
    {"fig5_nonlinear_eso", "nonlinear observer (fal correction), w0 = 50, strong attacks"}};

}  // namespace

ScenarioConfig load_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(root);
}

ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read config file " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return load_config_text(buf.str());
}

std::string echo_config(const ScenarioConfig& cfg) {
  json root;
  root["mode"] = mode_to_string(cfg.mode);

  json edges = json::array();
  for (const Edge& e : cfg.edges) edges.push_back(json::array({e.i, e.j, e.weight}));
  root["graph"] = json{{"n", cfg.n_agents}, {"edges", edges}};

  json costs = json::array();
  for (const Quadratic& q : cfg.costs)
    costs.push_back(json{{"a", q.a}, {"b", q.b}, {"c", q.c}});
  json demands = json::array();
  for (const Eigen::VectorXd& d : cfg.demands) {
    if (cfg.decision_dim == 1)
      demands.push_back(d[0]);
    else
      demands.push_back(vector_to_json(d));
  }
  root["problem"] = json{{"decision_dim", cfg.decision_dim},
                         {"costs", costs},
                         {"demands", demands},
                         {"drift", cfg.drift}};

  root["attacks"] = json{{"actuator", channel_to_json(cfg.attacks.actuator)},
                         {"lambda", channel_to_json(cfg.attacks.lambda)},
                         {"z", channel_to_json(cfg.attacks.z)},
                         {"neighbors_only", cfg.attacks.neighbors_only},
                         {"scale", cfg.attacks.scale}};

  root["eso"] = json{{"w0", cfg.eso.w0},
                     {"a1", cfg.eso.a1},
                     {"a2", cfg.eso.a2},
                     {"h1", hspec_to_json(cfg.eso.h1)},
                     {"h2", hspec_to_json(cfg.eso.h2)},
                     {"kappa_hat_clamp", std::isfinite(cfg.eso.kappa_hat_clamp)
                                             ? json(cfg.eso.kappa_hat_clamp)
                                             : json(nullptr)}};

  root["sim"] = json{{"t_end", cfg.sim.t_end},
                     {"dt", cfg.sim.dt},
                     {"stride", cfg.sim.record_stride},
                     {"divergence_threshold", cfg.sim.divergence_threshold},
                     {"tail_window", cfg.tail_window > 0 ? json(cfg.tail_window) : json(nullptr)},
                     {"exec", cfg.sim.exec == Exec::Parallel ? "parallel" : "serial"}};

  root["initial"] = json{{"x", vector_to_json(cfg.x0)},
                         {"lambda", vector_to_json(cfg.lam0)},
                         {"z", vector_to_json(cfg.z0)}};

  return root.dump(2) + "\n";
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, summary] : kPresets) names.emplace_back(name);
  return names;
}

std::string preset_summary(const std::string& name) {
  for (const auto& [key, summary] : kPresets)
    if (name == key) return summary;
  throw ConfigError("unknown preset \"" + name + "\"");
}

ScenarioConfig preset(const std::string& name) {
  ScenarioConfig c = testbed();
  if (name == "nominal") {
    c.mode = Mode::Nominal;
  } else if (name == "fig2_weak") {
    c.mode = Mode::Compromised;
    c.attacks = named_attacks("weak", "attacks");
  } else if (name == "fig3_strong_caption") {
    c.mode = Mode::Compromised;
    c.attacks = named_attacks("strong_caption", "attacks");
  } else if (name == "fig3_strong_text") {
    c.mode = Mode::Compromised;
    c.attacks = named_attacks("strong_text", "attacks");
  } else if (name == "fig4_linear_eso" || name == "fig5_nonlinear_eso") {
    c.mode = name == "fig4_linear_eso" ? Mode::ResilientLinear : Mode::ResilientNonlinear;
    c.attacks = named_attacks("strong_caption", "attacks");
    c.eso.w0 = 50.0;
    c.sim.dt = 2e-4;
    c.sim.record_stride = 50;
  } else {
    throw ConfigError("unknown preset \"" + name + "\"");
  }
  return c;
}

NetworkGraph build_graph(const ScenarioConfig& cfg) {
  return NetworkGraph(cfg.n_agents, cfg.edges);
}

AllocationProblem build_problem(const ScenarioConfig& cfg) {
  std::vector<CostFunction> costs;
  for (const Quadratic& q : cfg.costs) costs.emplace_back(q);
  std::vector<DriftFn> drifts;
  if (cfg.drift == "sin") {
    drifts.assign(cfg.n_agents, [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return x.array().sin().matrix();
    });
  }
  return AllocationProblem(std::move(costs), cfg.demands, std::move(drifts), cfg.decision_dim);
}

AttackSuite build_suite(const AttackSpec& spec, int n_agents) {
  auto make_signal = [](const SignalSpec& s) {
    switch (s.kind) {
      case SignalSpec::Kind::Sinusoid:
        return AttackSignal::sinusoid(s.amplitude, s.omega, s.phase);
      case SignalSpec::Kind::Exosystem:
        return AttackSignal::exosystem(s.S, s.C, s.x0);
      case SignalSpec::Kind::Zero:
        break;
    }
    return AttackSignal::zero();
  };
  AttackSuite suite(n_agents);
  using Setter = void (AttackSuite::*)(int, AttackSignal);
  const std::pair<const std::vector<SignalSpec>*, Setter> channels[] = {
      {&spec.actuator, &AttackSuite::set_actuator},
      {&spec.lambda, &AttackSuite::set_lambda},
      {&spec.z, &AttackSuite::set_z}};
  for (const auto& [signals, setter] : channels) {
    if (signals->empty()) continue;
    if (signals->size() != 1 && static_cast<int>(signals->size()) != n_agents)
      throw ConfigError("attacks: expected one signal or one per agent");
    for (int i = 0; i < n_agents; ++i)
      (suite.*setter)(i, make_signal(signals->size() == 1 ? (*signals)[0] : (*signals)[i]));
  }
  suite.set_neighbors_only(spec.neighbors_only);
  return spec.scale == 1.0 ? suite : suite.scaled(spec.scale);
}

RunResult execute(const ScenarioConfig& cfg) {
  const NetworkGraph g = build_graph(cfg);
  const AllocationProblem p = build_problem(cfg);
  const AttackSuite suite = build_suite(cfg.attacks, cfg.n_agents);
  Eigen::VectorXd y0(cfg.x0.size() * 3);
  y0 << cfg.x0, cfg.lam0, cfg.z0;
  RunResult r;
  r.traj = run_scenario(p, g, suite, cfg.mode, cfg.eso, cfg.sim, y0);
  r.kkt = solve_kkt(p);
  r.metrics = compute_metrics(r.traj, r.kkt, cfg.tail_window);
  return r;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const int n = traj.layout.n_agents;
  const int d = traj.layout.dim;
  const Eigen::Index nd = static_cast<Eigen::Index>(n) * d;
  const bool obs = traj.layout.observer;
  os << "t,agent,x,lambda,z";
  if (obs) os << ",gamma_err,kappa_err";
  os << "\n";
  auto block = [&](const Eigen::VectorXd& y, int b, int i) {
    return join_components(y.segment(b * nd + static_cast<Eigen::Index>(i) * d, d));
  };
  for (int s = 0; s < traj.n_samples(); ++s) {
    const Eigen::VectorXd& y = traj.states[s];
    for (int i = 0; i < n; ++i) {
      os << fmt17(traj.times[s]) << ',' << i << ',' << block(y, 0, i) << ',' << block(y, 1, i)
         << ',' << block(y, 2, i);
      if (obs) {
        const Eigen::VectorXd& kt = traj.kappa_true[s];
        const Eigen::Index o = static_cast<Eigen::Index>(i) * d;
        double ge = 0.0, ke = 0.0;
        for (int b = 0; b < 3; ++b) {
          ge += (y.segment(b * nd + o, d) - y.segment((3 + b) * nd + o, d)).squaredNorm();
          ke += (kt.segment(b * nd + o, d) - y.segment((6 + b) * nd + o, d)).squaredNorm();
        }
        os << ',' << fmt17(std::sqrt(ge)) << ',' << fmt17(std::sqrt(ke));
      }
      os << "\n";
    }
  }
}

void write_metrics(std::ostream& os, const ScenarioConfig& cfg, const RunResult& result,
                   double rho2) {
  const RunMetrics& m = result.metrics;
  os << "mode=" << mode_to_string(cfg.mode) << "\n";
  os << "n_agents=" << cfg.n_agents << "\n";
  os << "decision_dim=" << cfg.decision_dim << "\n";
  os << "t_end=" << fmt17(cfg.sim.t_end) << "\n";
  os << "dt=" << fmt17(cfg.sim.dt) << "\n";
  os << "record_stride=" << cfg.sim.record_stride << "\n";
  if (is_resilient(cfg.mode)) os << "w0=" << fmt17(cfg.eso.w0) << "\n";
  os << "attack_scale=" << fmt17(cfg.attacks.scale) << "\n";
  os << "rho2=" << fmt17(rho2) << "\n";
  os << "mu_star=" << join_components(result.kkt.mu) << "\n";
  os << "x_star=" << join_components(result.kkt.x_star) << "\n";
  os << "lambda_star=" << join_components(result.kkt.lambda_star) << "\n";
  os << "samples=" << result.traj.n_samples() << "\n";
  os << "final_time=" << fmt17(result.traj.times.back()) << "\n";
  os << "tail_window=" << fmt17(m.tail_window) << "\n";
  os << "tail_allocation_error=" << fmt17(m.tail_allocation_error) << "\n";
  os << "tail_feasibility=" << fmt17(m.tail_feasibility) << "\n";
  os << "tail_multiplier_consensus=" << fmt17(m.tail_multiplier_consensus) << "\n";
  if (result.traj.layout.observer) {
    os << "tail_observer_gamma_error=" << fmt17(m.tail_observer_gamma_error) << "\n";
    os << "tail_observer_kappa_error=" << fmt17(m.tail_observer_kappa_error) << "\n";
  }
  os << "overshoot=" << fmt17(m.overshoot) << "\n";
  os << "final_allocation_error=" << fmt17(m.allocation_error.back()) << "\n";
  os << "diverged=" << (m.diverged ? 1 : 0) << "\n";
  if (m.diverged) os << "divergence_time=" << fmt17(result.traj.divergence_time) << "\n";
  for (const std::string& w : result.traj.warnings) os << "warning=" << w << "\n";
}

RunResult run_to_directory(const ScenarioConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  RunResult r = execute(cfg);
  const double rho2 = build_graph(cfg).algebraic_connectivity();

  write_file(out_dir + "/config.json", echo_config(cfg));
  std::ostringstream csv;
  write_trajectory_csv(csv, r.traj);
  write_file(out_dir + "/trajectory.csv", csv.str());
  std::ostringstream met;
  write_metrics(met, cfg, r, rho2);
  write_file(out_dir + "/metrics.txt", met.str());
  return r;
}

SweepResult sweep(const ScenarioConfig& cfg, const std::string& parameter,
                  const std::vector<double>& values, const std::string& out_dir, int jobs) {
  if (parameter != "w0" && parameter != "dt" && parameter != "attack_amplitude")
    throw ConfigError("sweep parameter must be one of w0, dt, attack_amplitude");
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  SweepResult result;
  result.parameter = parameter;
  result.rows.resize(values.size());
  std::vector<std::exception_ptr> errors(values.size());

  const int rows = static_cast<int>(values.size());
#ifdef _OPENMP
#pragma omp parallel for num_threads(jobs) schedule(dynamic) if (jobs > 1)
#endif
  for (int r = 0; r < rows; ++r) {
    try {
      ScenarioConfig row_cfg = cfg;
      if (parameter == "w0")
        row_cfg.eso.w0 = values[r];
      else if (parameter == "dt")
        row_cfg.sim.dt = values[r];
      else
        row_cfg.attacks.scale = values[r];
      const std::string dir = out_dir + "/row_" + std::to_string(r);
      RunResult run = run_to_directory(row_cfg, dir);
      result.rows[r] = SweepRow{values[r], std::move(run.metrics), dir};
    } catch (...) {
      errors[r] = std::current_exception();
    }
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  std::ostringstream summary;
  write_sweep_summary(summary, result);
  write_file(out_dir + "/summary.csv", summary.str());
  return result;
}

void write_sweep_summary(std::ostream& os, const SweepResult& result) {
  os << "row," << result.parameter
     << ",tail_allocation_error,tail_feasibility,tail_multiplier_consensus"
        ",tail_observer_gamma_error,tail_observer_kappa_error,overshoot,diverged\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (size_t r = 0; r < result.rows.size(); ++r) {
    const RunMetrics& m = result.rows[r].metrics;
    const bool obs = !m.observer_gamma_error.empty();
    os << r << ',' << fmt17(result.rows[r].value) << ',' << fmt17(m.tail_allocation_error)
       << ',' << fmt17(m.tail_feasibility) << ',' << fmt17(m.tail_multiplier_consensus) << ','
       << fmt17(obs ? m.tail_observer_gamma_error : nan) << ','
       << fmt17(obs ? m.tail_observer_kappa_error : nan) << ',' << fmt17(m.overshoot) << ','
       << (m.diverged ? 1 : 0) << "\n";
  }
}

}  // namespace resalloc

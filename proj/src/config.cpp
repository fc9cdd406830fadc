#include "ncsmpc/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace ncsmpc {
namespace {

namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw ConfigError(key + ": " + what);
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception& e) {
    fail(key, e.what());
  }
}

template <typename T>
T get_or(const YAML::Node& parent, const char* key, T fallback, const std::string& path) {
  const YAML::Node n = parent[key];
  if (!n) return fallback;
  return scalar<T>(n, path + key);
}

Vec vec(const YAML::Node& n, const std::string& key) {
  if (!n || !n.IsSequence()) fail(key, "expected a list of numbers");
  Vec v(static_cast<Eigen::Index>(n.size()));
  for (std::size_t i = 0; i < n.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = scalar<double>(n[i], key);
  }
  return v;
}

Mat mat(const YAML::Node& n, const std::string& key) {
  if (!n || !n.IsSequence() || n.size() == 0) fail(key, "expected a list of rows");
  const std::size_t rows = n.size();
  const std::size_t cols = n[0].IsSequence() ? n[0].size() : 0;
  if (cols == 0) fail(key, "expected a list of rows");
  Mat M(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!n[i].IsSequence() || n[i].size() != cols) fail(key, "ragged matrix");
    for (std::size_t j = 0; j < cols; ++j) {
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = scalar<double>(n[i][j], key);
    }
  }
  return M;
}

/// Either a list (diagonal) or a list of rows.
Mat weight(const YAML::Node& n, const std::string& key) {
  if (n && n.IsSequence() && n.size() > 0 && !n[0].IsSequence()) {
    return vec(n, key).asDiagonal();
  }
  return mat(n, key);
}

/// {lower, upper} with .inf for unbounded sides, or {H, h}.
HPolytope polytope(const YAML::Node& n, const std::string& key, int dim) {
  if (!n) fail(key, "missing");
  if (n["H"]) {
    HPolytope P(mat(n["H"], key + ".H"), vec(n["h"], key + ".h"));
    if (P.dim() != dim) fail(key, "wrong dimension");
    return P;
  }
  const Vec lo = vec(n["lower"], key + ".lower");
  const Vec hi = vec(n["upper"], key + ".upper");
  if (lo.size() != dim || hi.size() != dim) fail(key, "wrong dimension");
  std::vector<std::pair<Vec, double>> rows;
  for (int i = 0; i < dim; ++i) {
    if (!(lo(i) <= hi(i))) fail(key, "lower bound above upper bound");
    if (std::isfinite(hi(i))) {
      Vec a = Vec::Zero(dim);
      a(i) = 1.0;
      rows.emplace_back(a, hi(i));
    }
    if (std::isfinite(lo(i))) {
      Vec a = Vec::Zero(dim);
      a(i) = -1.0;
      rows.emplace_back(a, -lo(i));
    }
  }
  Mat H(static_cast<Eigen::Index>(rows.size()), dim);
  Vec h(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    H.row(static_cast<Eigen::Index>(r)) = rows[r].first.transpose();
    h(static_cast<Eigen::Index>(r)) = rows[r].second;
  }
  return HPolytope(H, h);
}

void channel_block(const YAML::Node& n, ChannelParams& p, const std::string& key) {
  if (!n) return;
  if (n["tau_bar"]) p.tau_bar = scalar<int>(n["tau_bar"], key + ".tau_bar");
  if (n["deliver_late"]) p.deliver_late = scalar<bool>(n["deliver_late"], key + ".deliver_late");
  if (n["load_transition"]) p.load_transition = mat(n["load_transition"], key + ".load_transition");
  if (n["drop_transition"]) p.drop_transition = mat(n["drop_transition"], key + ".drop_transition");
  if (const YAML::Node w = n["weibull"]) {
    if (!w.IsSequence() || w.size() != 3) fail(key + ".weibull", "expected three [shape, scale] pairs");
    for (std::size_t i = 0; i < 3; ++i) {
      const Vec pair = vec(w[i], key + ".weibull");
      if (pair.size() != 2) fail(key + ".weibull", "expected [shape, scale]");
      p.weibull[i] = WeibullParams{pair(0), pair(1)};
    }
  }
}

std::array<double, 3> triple(const YAML::Node& n, const std::string& key) {
  const Vec v = vec(n, key);
  if (v.size() != 3) fail(key, "expected three values");
  return {v(0), v(1), v(2)};
}

CstrModel cstr_from(const YAML::Node& n) {
  CstrModel m;
  m.F = get_or(n, "F", m.F, "");
  m.V = get_or(n, "V", m.V, "");
  m.T_A0 = get_or(n, "T_A0", m.T_A0, "");
  m.C_A0 = get_or(n, "C_A0", m.C_A0, "");
  if (n["dH"]) m.dH = triple(n["dH"], "dH");
  if (n["k0"]) m.k0 = triple(n["k0"], "k0");
  if (n["E"]) m.E = triple(n["E"], "E");
  m.rho = get_or(n, "rho", m.rho, "");
  m.sigma = get_or(n, "sigma", m.sigma, "");
  m.cp = get_or(n, "cp", m.cp, "");
  m.R = get_or(n, "R", m.R, "");
  return m;
}

ScenarioConfig from_node(const YAML::Node& root, const fs::path& base) {
  ScenarioConfig c;
  if (!root || !root.IsMap()) throw ConfigError("config: top level must be a mapping");

  const std::string plant = get_or<std::string>(root, "scenario", "linear", "");
  if (plant == "cart-pole") {
    c.plant_kind = PlantKind::cart_pole;
  } else if (plant == "cstr") {
    c.plant_kind = PlantKind::cstr;
  } else if (plant == "linear") {
    c.plant_kind = PlantKind::linear;
  } else {
    fail("scenario", "unknown plant '" + plant + "'");
  }
  c.name = get_or<std::string>(root, "name", plant, "");
  c.mode = parse_mode(get_or<std::string>(root, "mode", "tube", ""));
  c.seed = get_or<std::uint64_t>(root, "seed", 0, "");
  c.length = get_or<Step>(root, "length", 100, "");
  c.horizon = get_or(root, "horizon", 10, "");
  c.tau_rtt = get_or(root, "tau_rtt", 1, "");
  c.n_loss = get_or(root, "n_loss", 0, "");
  if (root["tube_length"]) c.tube_length = scalar<int>(root["tube_length"], "tube_length");

  int n = 0;
  int m = 0;
  if (c.plant_kind == PlantKind::cstr) {
    const YAML::Node s = root["cstr"];
    if (!s) fail("cstr", "missing");
    CstrConfig& cc = c.cstr;
    cc.parameter_file = get_or<std::string>(s, "parameters", "", "cstr.");
    if (!cc.parameter_file.empty()) {
      fs::path p(cc.parameter_file);
      if (p.is_relative()) p = base / p;
      cc.parameter_file = p.lexically_normal().string();
      cc.model = load_cstr_parameters(cc.parameter_file);
    }
    cc.sample_time = get_or(s, "sample_time", cc.sample_time, "cstr.");
    cc.target = vec(s["target"], "cstr.target");
    cc.radii = vec(s["ellipse_radii"], "cstr.ellipse_radii");
    cc.heat_limit = get_or(s, "heat_limit", cc.heat_limit, "cstr.");
    cc.concentration_disturbance =
        get_or(s, "concentration_disturbance", cc.concentration_disturbance, "cstr.");
    cc.substeps = get_or(s, "substeps", cc.substeps, "cstr.");
    cc.adaptive_gains = get_or(s, "adaptive_gains", cc.adaptive_gains, "cstr.");
    n = 2;
    m = 1;
    Vec lo(1), hi(1);
    lo << -cc.heat_limit;
    hi << cc.heat_limit;
    c.U = HPolytope::box(lo, hi);
    c.X = HPolytope(Mat::Zero(0, 2), Vec::Zero(0));
  } else {
    const YAML::Node p = root["plant"];
    if (!p) fail("plant", "missing");
    c.plant = LinearPlant(mat(p["A"], "plant.A"), mat(p["B"], "plant.B"),
                          get_or(p, "sample_time", 1.0, "plant."));
    n = c.plant.n();
    m = c.plant.m();
    const YAML::Node k = root["constraints"];
    if (!k) fail("constraints", "missing");
    c.X = polytope(k["state"], "constraints.state", n);
    c.U = polytope(k["input"], "constraints.input", m);
  }

  const YAML::Node w = root["weights"];
  if (!w) fail("weights", "missing");
  c.Q = weight(w["Q"], "weights.Q");
  c.R = weight(w["R"], "weights.R");
  if (c.Q.rows() != n || c.Q.cols() != n) fail("weights.Q", "wrong dimension");
  if (c.R.rows() != m || c.R.cols() != m) fail("weights.R", "wrong dimension");

  c.x0 = vec(root["initial_state"], "initial_state");
  if (c.x0.size() != n) fail("initial_state", "wrong dimension");
  c.hold_input = root["hold_input"] ? vec(root["hold_input"], "hold_input") : Vec::Zero(m);
  if (c.hold_input.size() != m) fail("hold_input", "wrong dimension");

  if (const YAML::Node d = root["disturbance"]) {
    c.disturbance.kind = get_or<std::string>(d, "kind", "zero", "disturbance.");
    c.disturbance.amplitude = get_or(d, "amplitude", 1.0, "disturbance.");
    if (c.disturbance.kind == "scalar") {
      c.disturbance.direction = vec(d["direction"], "disturbance.direction");
      if (c.disturbance.direction.size() != n) fail("disturbance.direction", "wrong dimension");
    } else if (c.disturbance.kind == "uniform") {
      c.disturbance.lower = vec(d["lower"], "disturbance.lower");
      c.disturbance.upper = vec(d["upper"], "disturbance.upper");
      if (c.disturbance.lower.size() != n || c.disturbance.upper.size() != n) {
        fail("disturbance", "wrong dimension");
      }
    } else if (c.disturbance.kind != "zero") {
      fail("disturbance.kind", "expected zero, scalar or uniform");
    }
  }

  const int tau_sc = (c.tau_rtt - 1) / 2;
  c.channel.backward = ChannelParams::defaults(tau_sc);
  c.channel.forward = ChannelParams::defaults(c.tau_rtt - 1 - tau_sc);
  if (const YAML::Node ch = root["channel"]) {
    c.channel.enforce_loss_bound =
        get_or(ch, "enforce_loss_bound", c.channel.enforce_loss_bound, "channel.");
    c.channel.perfect = get_or(ch, "perfect", false, "channel.");
    c.channel.script = parse_script(get_or<std::string>(ch, "script", "none", "channel."));
    channel_block(ch, c.channel.backward, "channel");
    channel_block(ch, c.channel.forward, "channel");
    c.channel.backward.tau_bar = tau_sc;
    c.channel.forward.tau_bar = c.tau_rtt - 1 - tau_sc;
    channel_block(ch["backward"], c.channel.backward, "channel.backward");
    channel_block(ch["forward"], c.channel.forward, "channel.forward");
  }
  return c;
}

}  // namespace

const char* to_string(PlantKind k) {
  switch (k) {
    case PlantKind::cart_pole: return "cart-pole";
    case PlantKind::cstr: return "cstr";
    case PlantKind::linear: return "linear";
  }
  return "unknown";
}

const char* to_string(ControllerMode m) { return m == ControllerMode::tube ? "tube" : "nominal"; }

ControllerMode parse_mode(const std::string& s) {
  if (s == "tube") return ControllerMode::tube;
  if (s == "nominal") return ControllerMode::nominal;
  throw ConfigError("mode: expected nominal or tube, got '" + s + "'");
}

ScriptKind parse_script(const std::string& s) {
  if (s == "none") return ScriptKind::none;
  if (s == "worst-case") return ScriptKind::worst_case;
  throw ConfigError("script: expected none or worst-case, got '" + s + "'");
}

CstrModel load_cstr_parameters(const std::string& path) {
  try {
    return cstr_from(YAML::LoadFile(path));
  } catch (const YAML::Exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

ScenarioConfig parse_config(const std::string& yaml_text, const std::string& base_dir) {
  ScenarioConfig c;
  try {
    c = from_node(YAML::Load(yaml_text), fs::path(base_dir));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  check_config(c);
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), fs::path(path).parent_path().string());
}

void check_config(const ScenarioConfig& c) {
  if (c.length < 0) fail("length", "must be nonnegative");
  if (c.horizon < 1) fail("horizon", "must be positive");
  if (c.tau_rtt < 1) fail("tau_rtt", "must be at least 1");
  if (c.n_loss < 0) fail("n_loss", "must be nonnegative");
  if (c.channel.backward.tau_bar < 0 || c.channel.forward.tau_bar < 0) {
    fail("channel", "delay bounds must be nonnegative");
  }
  if (c.channel.backward.tau_bar + 1 + c.channel.forward.tau_bar > c.tau_rtt) {
    fail("channel", "backward bound + 1 + forward bound exceeds tau_rtt");
  }
  try {
    c.channel.backward.validate();
    c.channel.forward.validate();
  } catch (const std::exception& e) {
    fail("channel", e.what());
  }
  if (c.plant_kind == PlantKind::cstr) {
    if (c.cstr.target.size() != 2 || c.cstr.radii.size() != 2) {
      fail("cstr", "target and ellipse_radii need two entries");
    }
    if (!(c.cstr.sample_time > 0.0) || c.cstr.substeps < 1) {
      fail("cstr", "sample_time and substeps must be positive");
    }
  }
}

}  // namespace ncsmpc

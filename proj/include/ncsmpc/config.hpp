#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ncsmpc/cstr.hpp"
#include "ncsmpc/linear_system.hpp"
#include "ncsmpc/netsim.hpp"
#include "ncsmpc/polytope.hpp"
#include "ncsmpc/protocol.hpp"

namespace ncsmpc {

enum class PlantKind { cart_pole, cstr, linear };
enum class ControllerMode { nominal, tube };
enum class ScriptKind { none, worst_case };

const char* to_string(PlantKind k);
const char* to_string(ControllerMode m);
ControllerMode parse_mode(const std::string& s);
ScriptKind parse_script(const std::string& s);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DisturbanceConfig {
  std::string kind = "zero";  // zero | scalar | uniform
  Vec direction;              // scalar: w = amplitude * direction * d
  double amplitude = 1.0;
  Vec lower, upper;           // uniform: box
};

struct ChannelConfig {
  ChannelParams backward;
  ChannelParams forward;  // tau_bar excludes the compute step
  bool enforce_loss_bound = true;
  ScriptKind script = ScriptKind::none;
  bool perfect = false;   // every packet delivered after the minimal delay
};

struct CstrConfig {
  CstrModel model;
  std::string parameter_file;
  double sample_time = 0.025;
  Vec target;
  Vec radii;
  double heat_limit = 1e5;
  double concentration_disturbance = 0.5;
  int substeps = 10;
  bool adaptive_gains = true;
};

struct ScenarioConfig {
  std::string name = "scenario";
  PlantKind plant_kind = PlantKind::linear;
  ControllerMode mode = ControllerMode::tube;
  std::uint64_t seed = 0;
  Step length = 100;
  int horizon = 10;
  int tau_rtt = 1;
  int n_loss = 0;

  LinearPlant plant;
  Mat Q, R;
  HPolytope X, U;
  Vec x0;
  Vec hold_input;
  DisturbanceConfig disturbance;
  ChannelConfig channel;
  std::optional<int> tube_length;
  CstrConfig cstr;
  ProtocolFaults faults;  // test hook, not read from files
};

/// Parses a scenario file. Relative paths inside are resolved against the
/// file's directory. Throws ConfigError with the offending key.
ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config(const std::string& yaml_text, const std::string& base_dir = ".");

CstrModel load_cstr_parameters(const std::string& path);

/// Structural checks: signs of the bounds, channel split, reactor settings.
/// A horizon below the minimum is reported by Scenario as a warning so that
/// its failure mode can be demonstrated.
void check_config(const ScenarioConfig& cfg);

}  // namespace ncsmpc

#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace ssc::experiments {

struct Artifact {
  std::string name;
  std::string data;
};

struct ExperimentResult {
  std::vector<Artifact> artifacts;
  bool numerical_success = true;
  std::string message;
};

/// Runs the experiment named by `command` ("solve", "rates", "sweep-eps",
/// or "constants") against a parsed config document. Throws ConfigError for
/// schema/validation problems and NumericalError / PreconditionError for
/// solver-level failures; a completed run that misses its target reports
/// numerical_success = false instead of throwing.
ExperimentResult run_experiment(const std::string& command, const nlohmann::json& config,
                                bool override_tau);

}  // namespace ssc::experiments

#include "ssc/ssc.h"

#include "common.hpp"
#include "experiments/experiments.hpp"

#include <json.hpp>

#include <new>
#include <string>
#include <vector>

struct ssc_experiment {
  std::string config_json;
  std::string command = "solve";
  bool override_tau = false;
  bool command_set = false;
  std::vector<ssc::experiments::Artifact> artifacts;
  std::string message = "not run yet";
};

extern "C" {

ssc_experiment* ssc_experiment_create(const char* config_json) {
  auto* exp = new (std::nothrow) ssc_experiment;
  if (exp) exp->config_json = config_json ? config_json : "";
  return exp;
}

void ssc_experiment_destroy(ssc_experiment* exp) { delete exp; }

ssc_status ssc_experiment_set_option(ssc_experiment* exp, const char* key, const char* value) {
  if (!exp || !key || !value) return SSC_ERR_CONFIG;
  const std::string k = key, v = value;
  if (k == "experiment") {
    if (v != "solve" && v != "rates" && v != "sweep-eps" && v != "constants") {
      exp->message = "unknown experiment: " + v;
      return SSC_ERR_CONFIG;
    }
    exp->command = v;
    exp->command_set = true;
    return SSC_OK;
  }
  if (k == "override_tau") {
    exp->override_tau = (v == "1" || v == "true");
    return SSC_OK;
  }
  exp->message = "unknown option: " + k;
  return SSC_ERR_CONFIG;
}

ssc_status ssc_experiment_run(ssc_experiment* exp) {
  if (!exp) return SSC_ERR_CONFIG;
  exp->artifacts.clear();
  try {
    nlohmann::json config;
    try {
      config = nlohmann::json::parse(exp->config_json);
    } catch (const nlohmann::json::parse_error& ex) {
      exp->message = std::string("config is not valid JSON: ") + ex.what();
      return SSC_ERR_CONFIG;
    }
    if (!exp->command_set && config.is_object() && config.contains("experiment"))
      exp->command = config.at("experiment").get<std::string>();
    auto result = ssc::experiments::run_experiment(exp->command, config, exp->override_tau);
    exp->artifacts = std::move(result.artifacts);
    exp->message = std::move(result.message);
    return result.numerical_success ? SSC_OK : SSC_ERR_NUMERICAL;
  } catch (const ssc::ConfigError& ex) {
    exp->message = ex.what();
    return SSC_ERR_CONFIG;
  } catch (const ssc::NumericalError& ex) {
    exp->message = ex.what();
    return SSC_ERR_NUMERICAL;
  } catch (const ssc::PreconditionError& ex) {
    exp->message = ex.what();
    return SSC_ERR_NUMERICAL;
  } catch (const std::invalid_argument& ex) {
    exp->message = ex.what();
    return SSC_ERR_CONFIG;
  } catch (const std::exception& ex) {
    exp->message = ex.what();
    return SSC_ERR_INTERNAL;
  }
}

int ssc_experiment_artifact_count(const ssc_experiment* exp) {
  return exp ? static_cast<int>(exp->artifacts.size()) : 0;
}

const char* ssc_experiment_artifact_name(const ssc_experiment* exp, int index) {
  if (!exp || index < 0 || index >= static_cast<int>(exp->artifacts.size())) return nullptr;
  return exp->artifacts[index].name.c_str();
}

const char* ssc_experiment_artifact_data(const ssc_experiment* exp, int index) {
  if (!exp || index < 0 || index >= static_cast<int>(exp->artifacts.size())) return nullptr;
  return exp->artifacts[index].data.c_str();
}

const char* ssc_experiment_message(const ssc_experiment* exp) {
  return exp ? exp->message.c_str() : "null experiment";
}

const char* ssc_version(void) { return "0.1.0"; }

}  // extern "C"

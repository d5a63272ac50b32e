#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "numlab/errors.hpp"
#include "numlab/experiment.hpp"

namespace numlab::experiment {

namespace {

bool known_experiment(std::string_view name) {
  return std::find(std::begin(kExperimentNames), std::end(kExperimentNames), name) !=
         std::end(kExperimentNames);
}

const json& lookup(const json& params, const std::string& key) {
  auto it = params.find(key);
  if (it == params.end()) throw ConfigError("missing parameter '" + key + "'");
  return *it;
}

double as_number(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    // Flags arrive as text; accept anything strtod consumes fully.
    const std::string s = v.get<std::string>();
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size()) return d;
  }
  throw ConfigError("parameter '" + key + "' must be a number");
}

}  // namespace

std::vector<std::string> required_parameters(std::string_view experiment) {
  if (experiment == "example1") return {"delta", "x0"};
  if (experiment == "example2") return {"delta", "x0"};
  if (experiment == "example3") return {"L", "delta", "x0"};
  if (experiment == "thm1-audit") return {"seed"};
  if (experiment == "thm2") return {"n", "L", "rho_max", "seed"};
  if (experiment == "thm3") return {"n", "L", "seed"};
  if (experiment == "fig2") return {"delta", "seed"};
  if (experiment == "sweep") return {"problem", "delta_min", "delta_max", "x0_min", "x0_max"};
  return {};
}

double ExperimentConfig::number(const std::string& key) const {
  const double d = as_number(lookup(parameters, key), key);
  if (!std::isfinite(d)) throw ConfigError("parameter '" + key + "' must be finite");
  return d;
}

double ExperimentConfig::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

long long ExperimentConfig::integer(const std::string& key) const {
  const double d = number(key);
  if (d != std::floor(d) || std::abs(d) > 9.0e15)
    throw ConfigError("parameter '" + key + "' must be an integer");
  return static_cast<long long>(d);
}

long long ExperimentConfig::integer_or(const std::string& key, long long fallback) const {
  return has(key) ? integer(key) : fallback;
}

std::string ExperimentConfig::text_or(const std::string& key,
                                      const std::string& fallback) const {
  if (!has(key)) return fallback;
  const json& v = parameters.at(key);
  if (!v.is_string()) throw ConfigError("parameter '" + key + "' must be a string");
  return v.get<std::string>();
}

void ExperimentConfig::validate() const {
  if (!known_experiment(experiment))
    throw ConfigError("experiment: unknown name '" + experiment + "'");
  if (!parameters.is_object()) throw ConfigError("parameters: must be an object");
  for (const auto& key : required_parameters(experiment))
    if (!has(key)) throw ConfigError("missing parameter '" + key + "' for " + experiment);
  for (const auto& kind : emit)
    if (kind != "csv" && kind != "json" && kind != "svg")
      throw ConfigError("emit: unknown artifact kind '" + kind + "'");
  for (const char* key : {"delta", "delta_min", "delta_max"})
    if (has(key) && !(number(key) > 0.0))
      throw ConfigError(std::string("parameter '") + key + "' must be positive");
  if (has("seed") && integer("seed") < 0) throw ConfigError("parameter 'seed' must be >= 0");
  for (const char* key : {"iters", "n", "L", "count"})
    if (has(key) && integer(key) < 1)
      throw ConfigError(std::string("parameter '") + key + "' must be a positive integer");
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
}

json ExperimentConfig::to_json() const {
  json doc;
  doc["experiment"] = experiment;
  doc["parameters"] = parameters;
  doc["output_dir"] = output_dir.generic_string();
  doc["emit"] = std::vector<std::string>(emit.begin(), emit.end());
  return doc;
}

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  ExperimentConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    if (key == "experiment") {
      if (!value.is_string()) throw ConfigError("experiment: must be a string");
      cfg.experiment = value.get<std::string>();
    } else if (key == "parameters") {
      if (!value.is_object()) throw ConfigError("parameters: must be an object");
      cfg.parameters = value;
    } else if (key == "output_dir") {
      if (!value.is_string()) throw ConfigError("output_dir: must be a string");
      cfg.output_dir = value.get<std::string>();
    } else if (key == "emit") {
      if (!value.is_array()) throw ConfigError("emit: must be an array of strings");
      cfg.emit.clear();
      for (const auto& e : value) {
        if (!e.is_string()) throw ConfigError("emit: must be an array of strings");
        cfg.emit.insert(e.get<std::string>());
      }
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

}  // namespace numlab::experiment

// numlab: run the gradient-descent experiments from the command line.
//
//   numlab experiment example1 --delta 0.1 --x0 0.3
//   numlab run fig2 --delta 3e-4 --seed 1 --out out/fig2
//   numlab bounds --layers 3 --rho-max 2 --delta 0.05
//   numlab experiment thm2 --config cfg.json --seed 9

#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "numlab/errors.hpp"
#include "numlab/experiment.hpp"

namespace ex = numlab::experiment;

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string emit;
  std::vector<std::string> params;
  // Flag name -> parameter key.
  std::map<std::string, std::string> values;
};

const std::vector<std::pair<std::string, std::string>> kValueFlags = {
    {"--delta", "delta"},   {"--layers,--L", "L"}, {"--dim,--n", "n"},
    {"--seed", "seed"},     {"--iters", "iters"},  {"--x0", "x0"},
    {"--rho-max", "rho_max"}, {"--rho", "rho"},    {"--R", "R"},
    {"--dataset", "dataset"}, {"--problem", "problem"}, {"--lambda", "lambda"},
    {"--width", "width"},   {"--samples", "samples"}, {"--alpha", "alpha"},
    {"--count", "count"},   {"--init", "init"},
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file; flags override its values");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--emit", f.emit, "comma-separated subset of csv,json,svg");
  app->add_option("--param,-p", f.params, "extra parameter as key=value (repeatable)");
  for (const auto& [flag, key] : kValueFlags)
    app->add_option(flag, f.values[key], "parameter '" + key + "'");
}

ex::json parse_value(const std::string& text) {
  // Numbers stay numbers so the resolved config records them as such.
  char* end = nullptr;
  const double d = std::strtod(text.c_str(), &end);
  if (!text.empty() && end == text.c_str() + text.size()) return d;
  return text;
}

ex::ExperimentConfig resolve(const Flags& f, CLI::App* app, const std::string& experiment) {
  ex::ExperimentConfig cfg;
  if (!f.config.empty()) cfg = ex::load_config_file(f.config);
  if (!experiment.empty()) cfg.experiment = experiment;
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (!f.emit.empty()) {
    cfg.emit.clear();
    std::stringstream ss(f.emit);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) cfg.emit.insert(item);
  }
  for (const auto& [flag, key] : kValueFlags) {
    const std::string first = flag.substr(0, flag.find(','));
    if (app->get_option(first)->count() > 0) cfg.parameters[key] = parse_value(f.values.at(key));
  }
  for (const auto& kv : f.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw numlab::ConfigError("--param expects key=value, got '" + kv + "'");
    cfg.parameters[kv.substr(0, eq)] = parse_value(kv.substr(eq + 1));
  }
  return cfg;
}

int exit_code_for(const numlab::Error& e) {
  if (dynamic_cast<const numlab::IoError*>(&e) || dynamic_cast<const numlab::ParseError*>(&e))
    return static_cast<int>(ex::ExitCode::Io);
  if (dynamic_cast<const numlab::NotWhitened*>(&e) ||
      dynamic_cast<const numlab::NonFiniteValue*>(&e) ||
      dynamic_cast<const numlab::InsufficientTail*>(&e))
    return static_cast<int>(ex::ExitCode::Violation);
  return static_cast<int>(ex::ExitCode::Config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient descent as a dynamical system: experiments and bounds"};
  app.require_subcommand(1);

  Flags f;
  std::string name;
  auto* experiment = app.add_subcommand("experiment", "run a named experiment")->alias("run");
  experiment->add_option("name", name, "example1, example2, example3, thm1-audit, thm2, thm3, fig2 or sweep");
  auto* simulate = app.add_subcommand("simulate", "iterate a scalar map or train a deep linear net");
  auto* bounds = app.add_subcommand("bounds", "closed-form step-size bounds and certificates");
  auto* stability = app.add_subcommand("stability", "linearized stability of a balanced equilibrium");
  auto* sweep = app.add_subcommand("sweep", "classify a grid of step sizes and starting points");
  for (auto* sub : {experiment, simulate, bounds, stability, sweep}) add_common(sub, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ex::ExitCode::Config);
  }

  try {
    ex::RunResult res;
    if (experiment->parsed()) {
      res = ex::run(resolve(f, experiment, name));
    } else if (sweep->parsed()) {
      res = ex::run(resolve(f, sweep, "sweep"));
    } else {
      CLI::App* sub = simulate->parsed() ? simulate : bounds->parsed() ? bounds : stability;
      ex::ExperimentConfig cfg = resolve(f, sub, "");
      if (cfg.experiment.empty()) cfg.experiment = sub->get_name();
      res = sub == simulate ? ex::simulate(cfg) : sub == bounds ? ex::bounds(cfg) : ex::stability(cfg);
    }
    for (const auto& path : res.artifacts) std::cout << path.string() << '\n';
    for (const auto& v : res.violations) std::cerr << "violation: " << v << '\n';
    return static_cast<int>(res.code);
  } catch (const numlab::Error& e) {
    std::cerr << "numlab: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "numlab: internal error: " << e.what() << '\n';
    return 1;
  }
}

#pragma once

// Experiment orchestration behind the numlab command-line tool: config
// resolution, whitened dataset loading, SVG line plots and the per-experiment
// runners that write CSV / JSON / SVG artifacts.

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace numlab::experiment {

using json = nlohmann::ordered_json;

enum class ExitCode : int {
  Ok = 0,
  Config = 2,
  Violation = 3,
  Io = 4,
};

inline constexpr std::string_view kExperimentNames[] = {
    "example1", "example2", "example3", "thm1-audit",
    "thm2",     "thm3",     "fig2",     "sweep",
};

struct ExperimentConfig {
  std::string experiment;
  // Scalar parameters keyed by name (delta, L, n, seed, iters, x0, ...).
  json parameters = json::object();
  std::filesystem::path output_dir = "out";
  std::set<std::string> emit = {"csv", "json", "svg"};

  // Throws ConfigError naming the offending key.
  void validate() const;
  bool emits(std::string_view kind) const { return emit.count(std::string(kind)) > 0; }

  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  long long integer(const std::string& key) const;
  long long integer_or(const std::string& key, long long fallback) const;
  std::string text_or(const std::string& key, const std::string& fallback) const;
  bool has(const std::string& key) const { return parameters.contains(key); }

  json to_json() const;
};

// Accepts {"experiment": ..., "parameters": {...}, "output_dir": ..., "emit": [...]}.
// Throws ConfigError on unknown top-level keys or wrong types.
ExperimentConfig config_from_json(const json& doc);
// Throws IoError when unreadable, ConfigError when not valid JSON.
ExperimentConfig load_config_file(const std::filesystem::path& path);

// Parameters each experiment cannot run without.
std::vector<std::string> required_parameters(std::string_view experiment);

inline constexpr double kWhiteningTol = 1e-8;

struct WhitenedDataset {
  Eigen::MatrixXd inputs;   // N x n, one sample per row
  Eigen::MatrixXd outputs;  // N x m
  Eigen::MatrixXd R;        // (1/N) sum_i y_i x_i^T, m x n
  double whitening_error = 0.0;
};

// Second-moment deviation ||(1/N) X^T X - I||_F.
double whitening_error(const Eigen::MatrixXd& inputs);

// CSV with header x_0..x_{n-1},y_0..y_{m-1}. Throws IoError, ParseError,
// NotWhitened.
WhitenedDataset load_whitened_dataset(const std::filesystem::path& path);
WhitenedDataset parse_whitened_dataset(std::string_view csv);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Line plot with axes, ticks and a legend. Output depends only on the input.
// Throws EmptySeries.
std::string render_svg(const std::vector<Series>& series, const std::string& title = "",
                       const std::string& x_label = "", const std::string& y_label = "");
void emit_plot(const std::vector<Series>& series, const std::filesystem::path& path,
               const std::string& title = "", const std::string& x_label = "",
               const std::string& y_label = "");

json matrix_json(const Eigen::MatrixXd& m);

struct RunResult {
  ExitCode code = ExitCode::Ok;
  json report;
  std::vector<std::filesystem::path> artifacts;
  std::vector<std::string> violations;
};

// Runs the configured experiment and writes its artifacts under output_dir.
// report.json is always written; metadata.json carries the wall-clock
// timestamp and kernel ISA so the report itself stays reproducible.
RunResult run(const ExperimentConfig& cfg);

// Subcommands that are not named experiments. Each returns the report and
// writes report.json like run().
RunResult simulate(const ExperimentConfig& cfg);
RunResult bounds(const ExperimentConfig& cfg);
RunResult stability(const ExperimentConfig& cfg);

}  // namespace numlab::experiment

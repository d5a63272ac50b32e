#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "numlab/errors.hpp"
#include "numlab/experiment.hpp"
#include "support.hpp"

using namespace numlab;
using namespace numlab::experiment;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("numlab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dataset_csv(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index j = 0; j < X.cols(); ++j) os << (j ? "," : "") << "x_" << j;
  for (Eigen::Index j = 0; j < Y.cols(); ++j) os << ",y_" << j;
  os << '\n';
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) os << (j ? "," : "") << X(i, j);
    for (Eigen::Index j = 0; j < Y.cols(); ++j) os << ',' << Y(i, j);
    os << '\n';
  }
  return os.str();
}

ExperimentConfig example1_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.experiment = "example1";
  cfg.parameters = {{"delta", 0.1}, {"x0", 0.3}};
  cfg.output_dir = out;
  return cfg;
}

}  // namespace

TEST(Config, ParsesDocument) {
  const auto cfg = config_from_json(json::parse(R"({
    "experiment": "example3",
    "parameters": {"L": 4, "delta": "0.1", "x0": 1.0},
    "output_dir": "somewhere",
    "emit": ["json"]
  })"));
  EXPECT_EQ(cfg.experiment, "example3");
  EXPECT_EQ(cfg.integer("L"), 4);
  EXPECT_DOUBLE_EQ(cfg.number("delta"), 0.1);
  EXPECT_EQ(cfg.output_dir, fs::path("somewhere"));
  EXPECT_TRUE(cfg.emits("json"));
  EXPECT_FALSE(cfg.emits("svg"));
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_DOUBLE_EQ(cfg.number_or("missing", 2.5), 2.5);
  EXPECT_EQ(cfg.text_or("problem", "none"), "none");
}

TEST(Config, ErrorsNameTheKey) {
  try {
    config_from_json(json::parse(R"({"experiment": "example1", "colour": 1})"));
    FAIL() << "unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos);
  }
  ExperimentConfig cfg;
  cfg.experiment = "example1";
  cfg.parameters = {{"delta", 0.1}};
  try {
    cfg.validate();
    FAIL() << "missing x0 accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("x0"), std::string::npos);
  }
  cfg.parameters["x0"] = "abc";
  EXPECT_THROW(cfg.number("x0"), ConfigError);
  cfg.experiment = "example9";
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = example1_config("x");
  cfg.emit = {"pdf"};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, RequiredParameters) {
  EXPECT_EQ(required_parameters("example3"), (std::vector<std::string>{"L", "delta", "x0"}));
  EXPECT_EQ(required_parameters("fig2"), (std::vector<std::string>{"delta", "seed"}));
}

TEST(Config, FileErrors) {
  EXPECT_THROW(load_config_file("/nonexistent/cfg.json"), IoError);
  const fs::path dir = scratch_dir("cfg");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{not json";
  EXPECT_THROW(load_config_file(dir / "bad.json"), ConfigError);
  std::ofstream(dir / "good.json") << R"({"experiment": "example1", "parameters": {"delta": 0.1, "x0": 0.3}})";
  EXPECT_EQ(load_config_file(dir / "good.json").experiment, "example1");
}

TEST(Dataset, ScaledBasisIsWhitened) {
  const int N = 4;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(N, 2);
  X(0, 0) = X(1, 1) = std::sqrt(2.0);
  X(2, 0) = X(3, 1) = -std::sqrt(2.0);
  const auto ds = parse_whitened_dataset(dataset_csv(X, X));
  EXPECT_LT(ds.whitening_error, 1e-12);
  EXPECT_LT((ds.R - Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-12);
}

TEST(Dataset, EqualRowsAreRejected) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(5, 2);
  try {
    parse_whitened_dataset(dataset_csv(X, X));
    FAIL() << "collinear inputs accepted";
  } catch (const NotWhitened& e) {
    EXPECT_NE(std::string(e.what()).find("1."), std::string::npos);  // reports the deviation
  }
}

// y = R x on whitened inputs recovers R.
TEST(Dataset, RecoversLinearMap) {
  testing_support::Gen gen(1);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index n = gen.integer(1, 4), m = gen.integer(1, 3);
    const Eigen::MatrixXd Q = numlab::deep_linear::random_orthogonal(n, gen.rng());
    Eigen::MatrixXd X(2 * n, n);
    X << Q * std::sqrt(static_cast<double>(n)), -Q * std::sqrt(static_cast<double>(n));
    const Eigen::MatrixXd R = gen.matrix(m, n);
    const auto ds = parse_whitened_dataset(dataset_csv(X, X * R.transpose()));
    EXPECT_LT((ds.R - R).norm(), 1e-10);
  }
}

TEST(Dataset, ParseErrors) {
  EXPECT_THROW(parse_whitened_dataset(""), ParseError);
  EXPECT_THROW(parse_whitened_dataset("a,b\n1,2\n"), ParseError);
  EXPECT_THROW(parse_whitened_dataset("x_0,y_0\n1,2\n3\n"), ParseError);
  EXPECT_THROW(parse_whitened_dataset("x_0,y_0\n1,abc\n"), ParseError);
  try {
    parse_whitened_dataset("x_0,y_0\n1,1\n1,zz\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find('3'), std::string::npos);  // line number
  }
  EXPECT_THROW(load_whitened_dataset("/nonexistent.csv"), IoError);
}

TEST(Svg, ConstantSeriesRenders) {
  const std::string svg = render_svg({{"flat", {0, 1, 2}, {1, 1, 1}}}, "t", "x", "y");
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(svg.find("nan"), std::string::npos);
  EXPECT_EQ(svg.find("inf"), std::string::npos);
}

TEST(Svg, EmptyInputThrows) {
  EXPECT_THROW(render_svg({}), EmptySeries);
  EXPECT_THROW(render_svg({{"a", {}, {}}}), EmptySeries);
}

TEST(Svg, OnePolylinePerSeriesAndDeterministic) {
  const std::vector<Series> two = {{"a", {0, 1}, {0, 1}}, {"b", {0, 1}, {1, 0}}};
  const std::vector<Series> three = {{"a", {0, 1}, {0, 1}}, {"b", {0, 1}, {1, 0}}, {"c <&>", {0, 2}, {3, 3}}};
  auto count = [](const std::string& s) {
    std::size_t k = 0;
    for (auto p = s.find("<polyline"); p != std::string::npos; p = s.find("<polyline", p + 1)) ++k;
    return k;
  };
  EXPECT_EQ(count(render_svg(two)), 2u);
  const std::string s3 = render_svg(three);
  EXPECT_EQ(count(s3), 3u);
  EXPECT_NE(s3.find("c &lt;&amp;&gt;"), std::string::npos);
  EXPECT_EQ(render_svg(three, "T"), render_svg(three, "T"));
}

TEST(MatrixJson, RowMajor) {
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 3, 4;
  const json j = matrix_json(m);
  EXPECT_EQ(j["data"], json({1.0, 2.0, 3.0, 4.0}));
  EXPECT_EQ(j["rows"], 2);
}

TEST(Run, CuspOrbitReport) {
  const fs::path dir = scratch_dir("example1");
  const auto res = run(example1_config(dir));
  EXPECT_EQ(res.code, ExitCode::Ok);
  const json rep = json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(rep["tail"]["kind"], "PeriodicOrbit");
  EXPECT_EQ(rep["tail"]["period"], 2);
  EXPECT_NEAR(rep["tail"]["amplitude"].get<double>(), 0.0025, 1e-12);
  EXPECT_DOUBLE_EQ(rep["bounds"]["orbit_amplitude"].get<double>(), 0.0025);
  EXPECT_TRUE(fs::exists(dir / "trajectory.csv"));
  EXPECT_TRUE(fs::exists(dir / "trajectory.svg"));
  EXPECT_TRUE(fs::exists(dir / "metadata.json"));
}

TEST(Run, ReportIsByteDeterministic) {
  const fs::path dir = scratch_dir("determinism");
  run(example1_config(dir));
  const std::string first = slurp(dir / "report.json");
  const std::string first_csv = slurp(dir / "trajectory.csv");
  run(example1_config(dir));
  EXPECT_EQ(slurp(dir / "report.json"), first);
  EXPECT_EQ(slurp(dir / "trajectory.csv"), first_csv);
}

TEST(Run, EmitSubsetIsHonoured) {
  const fs::path dir = scratch_dir("emit");
  auto cfg = example1_config(dir);
  cfg.emit = {"json"};
  run(cfg);
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  EXPECT_FALSE(fs::exists(dir / "trajectory.csv"));
  EXPECT_FALSE(fs::exists(dir / "trajectory.svg"));
}

// Above 2/10 the quartic cannot settle in the sharp minimum; below 2/10 the
// run should, and the report flags nothing.
TEST(Run, QuarticStepSizes) {
  ExperimentConfig cfg;
  cfg.experiment = "example2";
  cfg.parameters = {{"delta", 0.1}, {"x0", 2.05}};
  cfg.output_dir = scratch_dir("quartic");
  const auto res = run(cfg);
  EXPECT_EQ(res.code, ExitCode::Ok);
  EXPECT_TRUE(res.violations.empty());
  EXPECT_NEAR(res.report["tail"]["limit_state"][0].get<double>(), 2.0, 1e-6);
}

TEST(Run, PowerProblemAboveThresholdDiverges) {
  ExperimentConfig cfg;
  cfg.experiment = "example3";
  cfg.parameters = {{"L", 4}, {"delta", 0.1}, {"x0", 2.5}};
  cfg.output_dir = scratch_dir("power");
  const auto res = run(cfg);
  EXPECT_EQ(res.report["predicted"], "divergent");
  EXPECT_EQ(res.report["tail"]["kind"], "Divergent");
  EXPECT_EQ(res.code, ExitCode::Ok);
}

TEST(Bounds, ClosedForms) {
  ExperimentConfig cfg;
  cfg.parameters = {{"L", 2}, {"rho", 4.0}, {"delta", 0.25}};
  cfg.output_dir = scratch_dir("bounds");
  const auto res = bounds(cfg);
  EXPECT_EQ(res.code, ExitCode::Ok);
  EXPECT_DOUBLE_EQ(res.report["bounds"]["cor1_bound"].get<double>(), 0.25);
  EXPECT_DOUBLE_EQ(res.report["bounds"]["cor2_certificate"].get<double>(), 4.0);
}

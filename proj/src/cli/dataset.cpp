#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "numlab/errors.hpp"
#include "numlab/experiment.hpp"

namespace numlab::experiment {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    out.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Expects prefix_0, prefix_1, ... in order starting at `from`.
std::size_t count_prefixed(const std::vector<std::string>& header, std::size_t from,
                           char prefix) {
  std::size_t k = 0;
  while (from + k < header.size() &&
         header[from + k] == std::string(1, prefix) + "_" + std::to_string(k))
    ++k;
  return k;
}

}  // namespace

double whitening_error(const Eigen::MatrixXd& inputs) {
  const auto N = static_cast<double>(inputs.rows());
  const Eigen::MatrixXd second = inputs.transpose() * inputs / N;
  return (second - Eigen::MatrixXd::Identity(inputs.cols(), inputs.cols())).norm();
}

WhitenedDataset parse_whitened_dataset(std::string_view csv) {
  std::stringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty dataset");
  const auto header = split(line);
  const std::size_t n = count_prefixed(header, 0, 'x');
  const std::size_t m = count_prefixed(header, n, 'y');
  if (n == 0 || m == 0 || n + m != header.size())
    throw ParseError("header must be x_0..x_{n-1},y_0..y_{m-1}, got '" + line + "'");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != n + m)
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(n + m) + " fields, got " + std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size() || errno == ERANGE || !std::isfinite(v))
        throw ParseError("line " + std::to_string(line_no) + ": bad number '" + c + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("dataset has no samples");

  WhitenedDataset data;
  const auto N = static_cast<Eigen::Index>(rows.size());
  data.inputs.resize(N, static_cast<Eigen::Index>(n));
  data.outputs.resize(N, static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < N; ++i) {
    for (std::size_t k = 0; k < n; ++k) data.inputs(i, k) = rows[i][k];
    for (std::size_t c = 0; c < m; ++c) data.outputs(i, c) = rows[i][n + c];
  }
  data.whitening_error = whitening_error(data.inputs);
  if (!(data.whitening_error <= kWhiteningTol)) {
    std::ostringstream msg;
    msg.precision(3);
    msg << "inputs are not whitened: ||(1/N) sum x x^T - I||_F = " << data.whitening_error;
    throw NotWhitened(msg.str());
  }
  data.R = data.outputs.transpose() * data.inputs / static_cast<double>(N);
  return data;
}

WhitenedDataset load_whitened_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read dataset " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_whitened_dataset(buf.str());
}

}  // namespace numlab::experiment

#include "auxcov/matrix_io.hpp"

#include "auxcov/csv.hpp"
#include "auxcov/errors.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace auxcov {

std::vector<std::string> default_names(int p) {
  std::vector<std::string> out;
  for (int i = 0; i < p; ++i) out.push_back("x" + std::to_string(i + 1));
  return out;
}

std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& names) {
  const auto header = names.empty() ? default_names(static_cast<int>(m.cols())) : names;
  if (static_cast<Eigen::Index>(header.size()) != m.cols())
    throw Error(ErrorCode::kDimensionMismatch, "matrix has " + std::to_string(m.cols()) + " columns but " +
                                                   std::to_string(header.size()) + " names");
  std::ostringstream out;
  for (size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << csv::quote_if_needed(header[c]);
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << (std::isnan(m(r, c)) ? std::string("NA") : csv::format_double(m(r, c)));
    }
    out << '\n';
  }
  return out.str();
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& names) {
  const std::string text = matrix_csv(m, names);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

NamedMatrix read_matrix_csv(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw Error(ErrorCode::kParseError, path.string() + ": empty matrix file");
  NamedMatrix out;
  out.names = rows.front().fields;
  const auto cols = static_cast<Eigen::Index>(out.names.size());
  out.values.resize(static_cast<Eigen::Index>(rows.size()) - 1, cols);
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (static_cast<Eigen::Index>(f.size()) != cols)
      throw Error(ErrorCode::kInconsistentColumns, path.string() + ":" + std::to_string(rows[r].line) + ": expected " +
                                                       std::to_string(cols) + " fields");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (f[c] == "NA") {
        out.values(r - 1, c) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const auto v = csv::parse_double(f[c]);
      if (!v) throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(rows[r].line) + ": bad number '" + f[c] + "'");
      out.values(r - 1, c) = *v;
    }
  }
  return out;
}

}  // namespace auxcov

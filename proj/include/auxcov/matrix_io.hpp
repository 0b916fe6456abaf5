#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace auxcov {

struct NamedMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> names;
};

/// Header row of names, then one row per matrix row at 17 significant digits.
/// NaN is written as NA.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& names);
std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& names);

/// Inverse of write_matrix_csv.
NamedMatrix read_matrix_csv(const std::filesystem::path& path);

/// x1..xp when `names` is empty.
std::vector<std::string> default_names(int p);

}  // namespace auxcov

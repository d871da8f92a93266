#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mesim::csv {

/// Numeric table with a named header row.
struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd data;  // rows x columns

  Eigen::Index column(const std::string& name) const;  // -1 when absent
};

/// Parses a comma-separated numeric table. The first line must equal
/// `expected_header` when given. Errors carry the 1-based line number.
Table read(std::istream& in, const std::vector<std::string>& expected_header = {});

void write(std::ostream& out, const std::vector<std::string>& header, const Eigen::MatrixXd& rows);

}  // namespace mesim::csv

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "moments.hpp"

namespace pel {

struct CsvTable {
  std::vector<std::string> header;
  Matrix data;  // rows x header.size()

  // Column by header name; throws a data error when absent.
  Eigen::Index column(const std::string& name) const;
};

// Header row, then a strictly rectangular block of finite numbers. Empty
// fields, NA and non-numeric cells are rejected with their row/column.
CsvTable parse_csv(std::istream& in, const std::string& source);
CsvTable read_csv(const std::string& path);

// Shortest round-trip representation ("%.17g" family); NA for NaN.
std::string format_double(double value);

// 0.95 -> "95", 0.975 -> "97.5".
std::string format_level(double level);

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix& data);
void write_csv_file(const std::string& path, const std::vector<std::string>& header,
                    const Matrix& data);

}  // namespace pel

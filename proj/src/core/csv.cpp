#include "csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "errors.hpp"

namespace pel {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

}  // namespace

Eigen::Index CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<Eigen::Index>(j);
  fail(ErrorKind::Data, "CSV has no column named '" + name + "'");
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
  std::string line;
  CsvTable table;
  if (!std::getline(in, line) || trim(line).empty())
    fail(ErrorKind::Data, source + ": missing header row");
  for (const auto& h : split_fields(line)) {
    const std::string name = unquote(h);
    if (name.empty()) fail(ErrorKind::Data, source + ": empty column name in header");
    table.header.push_back(name);
  }
  const std::size_t cols = table.header.size();
  std::vector<double> values;
  std::size_t row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != cols) {
      std::ostringstream msg;
      msg << source << ": line " << line_no << " has " << fields.size() << " fields, expected "
          << cols;
      fail(ErrorKind::Data, msg.str());
    }
    for (std::size_t j = 0; j < cols; ++j) {
      const std::string& f = fields[j];
      char* end = nullptr;
      errno = 0;
      const double v = f.empty() ? 0.0 : std::strtod(f.c_str(), &end);
      if (f.empty() || end != f.c_str() + f.size() || errno == ERANGE || !std::isfinite(v)) {
        std::ostringstream msg;
        msg << source << ": line " << line_no << ", column '" << table.header[j]
            << "': missing or non-numeric value '" << f << "'";
        fail(ErrorKind::Data, msg.str());
      }
      values.push_back(v);
    }
    ++row;
  }
  table.data.resize(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < row; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      table.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * cols + j];
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open input file '" + path + "'");
  return parse_csv(in, path);
}

std::string format_double(double value) {
  if (std::isnan(value)) return "NA";
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, value);
    if (std::strtod(buf, nullptr) == value) break;
  }
  return buf;
}

std::string format_level(double level) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", std::round(level * 1e8) / 1e6);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix& data) {
  require(static_cast<Eigen::Index>(header.size()) == data.cols(), ErrorKind::InvalidArgument,
          "CSV header does not match the column count");
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) out << (j ? "," : "") << format_double(data(i, j));
    out << '\n';
  }
}

void write_csv_file(const std::string& path, const std::vector<std::string>& header,
                    const Matrix& data) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
  write_csv(out, header, data);
  if (!out) fail(ErrorKind::Io, "write failed for '" + path + "'");
}

}  // namespace pel

#include "mesim/csv.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "mesim/common.hpp"

namespace mesim {

std::string format_double(double value) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf.data(), end);
}

namespace csv {
namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string where(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

}  // namespace

Eigen::Index Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<Eigen::Index>(i);
  return -1;
}

Table read(std::istream& in, const std::vector<std::string>& expected_header) {
  Table table;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError(where(1) + "empty input, expected a header row");
  ++line_no;
  table.header = split(trim(line));
  if (table.header.empty() || (table.header.size() == 1 && table.header[0].empty()))
    throw DataError(where(1) + "empty header row");
  if (!expected_header.empty() && table.header != expected_header) {
    std::string want;
    for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
    throw DataError(where(1) + "unexpected header, expected '" + want + "'");
  }

  const std::size_t ncol = table.header.size();
  std::vector<double> values;
  std::size_t nrow = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != ncol)
      throw DataError(where(line_no) + "expected " + std::to_string(ncol) + " fields, got " +
                      std::to_string(cells.size()));
    for (const auto& cell : cells) {
      double v = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (cell.empty() || ec != std::errc{} || ptr != last)
        throw DataError(where(line_no) + "not a number: '" + cell + "'");
      values.push_back(v);
    }
    ++nrow;
  }
  if (nrow == 0) throw DataError(where(line_no + 1) + "no data rows");

  table.data = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(nrow), static_cast<Eigen::Index>(ncol));
  return table;
}

void write(std::ostream& out, const std::vector<std::string>& header, const Eigen::MatrixXd& rows) {
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  std::string line;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    line.clear();
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      if (c) line += ',';
      line += format_double(rows(r, c));
    }
    line += '\n';
    out << line;
  }
}

}  // namespace csv
}  // namespace mesim
